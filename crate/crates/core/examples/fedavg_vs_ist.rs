//! Compares IST, FedAvg with 25 local steps and FedProx with one local step
//! on skewed synthetic data, then prints the threshold report.
//!
//! Usage: cargo run --release --example fedavg_vs_ist -- [alpha] [seed] [max_rounds]

use std::time::Instant;

use fedsim::data::generate_synthetic;
use fedsim::engine::{run_experiment, AlgorithmConfig, Budgets, FederatedData, SimulationConfig};
use fedsim::eval::{build_report, MetricSeries, StreakBasis};
use fedsim::AlgorithmKind;

fn main() -> fedsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let alpha: f64 = args.next().map_or(0.01, |a| a.parse().expect("alpha"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let (train, test) = generate_synthetic(20, 64, 500, 100, 3.0, seed)?;
    let data = FederatedData::partitioned(train, test, 100, alpha, 500, seed)?;

    let contenders = [
        ("ist", AlgorithmConfig::new(AlgorithmKind::Ist)),
        ("fedavg-25", AlgorithmConfig::new(AlgorithmKind::FedAvg).with_local_rounds(25)),
        ("fedprox-1", AlgorithmConfig::new(AlgorithmKind::FedProx).with_mu(0.2)),
    ];
    let mut budgets = Budgets::DESK;
    if let Some(r) = args.next() {
        budgets.max_rounds = r.parse().expect("max_rounds");
    }
    let mut runs = Vec::new();
    for (name, algo) in contenders {
        let mut cfg = SimulationConfig::new(algo);
        cfg.seed = seed;
        cfg.budgets = budgets;
        let t = Instant::now();
        let out = run_experiment(&cfg, &data)?;
        let last = out.history.last().expect("at least one round");
        println!(
            "{name:<10} rounds {:>5}  GFLOPs {:>8.1}  GB {:>6.2}  last acc {:.4}  ({:.1?})",
            last.round,
            last.cum_gflops(),
            last.cum_gb(),
            last.test_accuracy.unwrap_or(f64::NAN),
            t.elapsed()
        );
        let series = MetricSeries::from_history(&out.history);
        let w = fedsim::eval::windowed_accuracy(&series.accuracies(), 10);
        let marks: Vec<String> = [100, 300, 1000, 3000, 10000, 30000]
            .iter()
            .filter(|&&r| r <= w.len())
            .map(|&r| format!("{r}:{:.3}", w[r - 1]))
            .collect();
        println!("           {}", marks.join("  "));
        runs.push((name.to_string(), series));
    }
    let report = build_report(&runs, &budgets, StreakBasis::Windowed)?;
    print!("{}", report.to_table());
    Ok(())
}

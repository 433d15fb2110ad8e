//! FedProx at several participation rates on the same skewed clients.
//!
//! Usage: cargo run --release --example participation_sweep -- [max_rounds]

use fedsim::data::generate_synthetic;
use fedsim::engine::{run_experiment, AlgorithmConfig, Budgets, FederatedData, SimulationConfig};
use fedsim::eval::{build_report, MetricSeries, StreakBasis};
use fedsim::AlgorithmKind;

fn main() -> fedsim::Result<()> {
    let max_rounds: usize = std::env::args().nth(1).map_or(300, |a| a.parse().expect("max_rounds"));
    let (train, test) = generate_synthetic(10, 32, 200, 50, 3.0, 1)?;
    let data = FederatedData::partitioned(train, test, 50, 0.1, 200, 1)?;

    let budgets = Budgets { max_rounds, ..Budgets::DESK };
    let mut runs = Vec::new();
    for participation in [0.02, 0.06, 0.1, 0.3] {
        let mut cfg = SimulationConfig::new(AlgorithmConfig::new(AlgorithmKind::FedProx));
        cfg.participation = participation;
        cfg.budgets = budgets;
        let out = run_experiment(&cfg, &data)?;
        runs.push((format!("p={participation}"), MetricSeries::from_history(&out.history)));
    }
    let report = build_report(&runs, &budgets, StreakBasis::Windowed)?;
    print!("{}", report.to_table());
    Ok(())
}

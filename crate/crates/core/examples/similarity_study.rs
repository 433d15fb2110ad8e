//! Cosine similarity between one federated round and a centralized epoch
//! over the same clients' data, from checkpoints along a centralized run.
//!
//! Usage: cargo run --release --example similarity_study -- [epochs] [alpha] [seed]

use fedsim::cli::{similarity_study, ExperimentConfig, Preset};
use fedsim::AlgorithmKind;

fn main() -> fedsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(20, |a| a.parse().expect("epochs"));
    let alpha: f64 = args.next().map_or(0.01, |a| a.parse().expect("alpha"));
    let seed: u64 = args.next().map_or(1, |a| a.parse().expect("seed"));

    let mut cfg = ExperimentConfig::new(AlgorithmKind::FedAvg, Some(Preset::Flops));
    cfg.simulation.seed = seed;
    cfg.data.alpha = alpha;
    cfg.data.data_seed = seed;
    cfg.similarity.epochs = epochs;
    cfg.validate()?;

    let data = cfg.data.load()?;
    for (method, points) in similarity_study(&cfg, &data)? {
        let sims: Vec<String> = points.iter().map(|p| format!("{:+.3}", p.similarity)).collect();
        let mean = points.last().map_or(0.0, |p| p.running_mean);
        println!("{method:<8} mean {mean:+.4}  [{}]", sims.join(" "));
    }
    Ok(())
}

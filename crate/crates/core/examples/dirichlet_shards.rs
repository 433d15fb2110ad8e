//! Shows how the Dirichlet concentration controls label skew across sites.
//!
//! Usage: cargo run --release --example dirichlet_shards -- [n_clients]

use fedsim::data::{build_client_shards, generate_synthetic};
use fedsim::rng::RngStream;

fn main() -> fedsim::Result<()> {
    let n_clients: usize = std::env::args().nth(1).map_or(10, |a| a.parse().expect("n_clients"));
    let (train, _) = generate_synthetic(20, 8, 100, 1, 3.0, 1)?;

    for alpha in [1e6, 1.0, 0.1, 0.01] {
        let shards = build_client_shards(&train, n_clients, alpha, 500, RngStream::new(1).derive("shards"))?;
        let classes: Vec<usize> = shards.iter().map(|s| s.distinct_classes()).collect();
        let top: Vec<String> = shards
            .iter()
            .map(|s| format!("{:.2}", *s.histogram.iter().max().unwrap() as f64 / s.len() as f64))
            .collect();
        println!("alpha {alpha:<8} classes per site {classes:?}");
        println!("{:14} top-class share {}", "", top.join(" "));
    }
    Ok(())
}

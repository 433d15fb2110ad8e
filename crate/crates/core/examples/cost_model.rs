//! Per-round FLOPs and bytes for each algorithm at a few site counts.

use fedsim::cost::{bytes_per_round, flops_per_round, ArchSpec};
use fedsim::nn::MlpDims;
use fedsim::AlgorithmKind;

fn main() -> fedsim::Result<()> {
    println!("{:<9} {:>5} {:>14} {:>12}", "method", "sites", "MFLOPs/round", "MB/round");
    for sites in [10, 30] {
        for kind in AlgorithmKind::ALL {
            let hidden = if kind.is_decomposed() { 30 * sites } else { 100 };
            let arch = ArchSpec::new(MlpDims::new(64, hidden, 20)?, 32, sites)?;
            println!(
                "{:<9} {:>5} {:>14.2} {:>12.3}",
                kind.name(),
                sites,
                flops_per_round(&arch, kind, 1) / 1e6,
                bytes_per_round(&arch, kind) as f64 / 1e6
            );
        }
    }
    Ok(())
}

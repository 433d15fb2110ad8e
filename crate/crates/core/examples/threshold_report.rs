//! Builds a threshold report from hand-made accuracy curves, without
//! running any training.

use fedsim::engine::Budgets;
use fedsim::eval::{build_report, MetricPoint, MetricSeries, StreakBasis};

fn curve(rate: f64, ceiling: f64, flops_per_round: f64) -> MetricSeries {
    let points = (1..=200)
        .map(|r| MetricPoint {
            round: r,
            accuracy: ceiling * (1.0 - (-rate * r as f64).exp()),
            cum_flops: flops_per_round * r as f64,
            cum_bytes: 1e6 * r as f64,
        })
        .collect();
    MetricSeries { points }
}

fn main() -> fedsim::Result<()> {
    let runs = vec![
        ("fast-cheap".to_string(), curve(0.05, 0.80, 1e8)),
        ("slow-cheap".to_string(), curve(0.01, 0.80, 1e8)),
        ("fast-costly".to_string(), curve(0.05, 0.82, 1e9)),
        ("plateau".to_string(), curve(0.05, 0.60, 1e8)),
    ];
    let report = build_report(&runs, &Budgets::DESK, StreakBasis::Windowed)?;
    print!("{}", report.to_table());
    Ok(())
}

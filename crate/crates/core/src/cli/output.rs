use std::fmt::Write as _;
use std::path::Path;

use super::svg::{LineChart, Series};
use crate::engine::RoundRecord;
use crate::error::Result;
use crate::eval::{windowed_accuracy, MetricSeries, SimilarityPoint, ThresholdReport, WINDOW};
use crate::fsutil::atomic_write;

pub const HISTORY_HEADER: &str = "round,cum_gflops,cum_gb,test_accuracy,windowed_accuracy";
pub const SIMILARITY_HEADER: &str = "epoch,method,similarity";

/// One row per evaluated round.
pub fn history_csv(history: &[RoundRecord]) -> String {
    let series = MetricSeries::from_history(history);
    let windowed = windowed_accuracy(&series.accuracies(), WINDOW);
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for (p, w) in series.points.iter().zip(windowed) {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6}",
            p.round,
            p.cum_flops / 1e9,
            p.cum_bytes / 1e9,
            p.accuracy,
            w
        );
    }
    s
}

pub fn similarity_csv(rows: &[(String, Vec<SimilarityPoint>)]) -> String {
    let mut s = String::from(SIMILARITY_HEADER);
    s.push('\n');
    for (method, points) in rows {
        for p in points {
            let _ = writeln!(s, "{},{},{:.6}", p.epoch, method, p.similarity);
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, text.as_bytes())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Windowed accuracy against cumulative GFLOPs (`by_flops`) or GB, with the
/// report's target as a dashed line.
pub fn convergence_chart(
    runs: &[(String, MetricSeries)],
    report: &ThresholdReport,
    by_flops: bool,
) -> LineChart {
    let series = runs
        .iter()
        .map(|(name, s)| {
            let w = windowed_accuracy(&s.accuracies(), WINDOW);
            let points = s
                .points
                .iter()
                .zip(w)
                .map(|(p, a)| {
                    let x = if by_flops { p.cum_flops } else { p.cum_bytes };
                    (x / 1e9, a)
                })
                .collect();
            Series {
                name: name.clone(),
                points,
            }
        })
        .collect();
    LineChart {
        title: if by_flops {
            "Windowed accuracy vs compute".into()
        } else {
            "Windowed accuracy vs communication".into()
        },
        x_label: if by_flops { "cumulative GFLOPs".into() } else { "cumulative GB".into() },
        y_label: "windowed test accuracy".into(),
        log_x: true,
        series,
        target: Some((report.target_accuracy, "90% target".into())),
    }
}

pub fn similarity_chart(rows: &[(String, Vec<SimilarityPoint>)]) -> LineChart {
    LineChart {
        title: "Cosine similarity to the centralized direction".into(),
        x_label: "epoch".into(),
        y_label: "running mean similarity".into(),
        log_x: false,
        series: rows
            .iter()
            .map(|(m, pts)| Series {
                name: m.clone(),
                points: pts.iter().map(|p| (p.epoch as f64, p.running_mean)).collect(),
            })
            .collect(),
        target: None,
    }
}

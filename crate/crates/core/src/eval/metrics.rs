use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::engine::{Budgets, RoundRecord};
use crate::error::{Error, Result};

/// Default smoothing window, in evaluations.
pub const WINDOW: usize = 10;
/// Required length of the above-target streak.
pub const STREAK: usize = 5;
/// Target as a fraction of the best final accuracy.
pub const TARGET_FRACTION: f64 = 0.9;

/// One evaluated round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub round: usize,
    pub accuracy: f64,
    pub cum_flops: f64,
    pub cum_bytes: f64,
}

/// The evaluated rounds of one run, in order. Rounds without a test
/// accuracy are skipped, so windows and streaks count evaluations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub points: Vec<MetricPoint>,
}

impl MetricSeries {
    pub fn from_history(history: &[RoundRecord]) -> Self {
        let points = history
            .iter()
            .filter_map(|r| {
                r.test_accuracy.map(|accuracy| MetricPoint {
                    round: r.round,
                    accuracy,
                    cum_flops: r.cum_flops,
                    cum_bytes: r.cum_bytes as f64,
                })
            })
            .collect();
        Self { points }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.accuracy).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks that both cumulative columns never decrease.
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].cum_flops < w[0].cum_flops || w[1].cum_bytes < w[0].cum_bytes {
                return Err(Error::domain(format!(
                    "cumulative cost decreases at round {}",
                    w[1].round
                )));
            }
        }
        Ok(())
    }
}

/// Trailing mean over the last `w` entries; the first `w - 1` entries
/// average whatever prefix is available.
pub fn windowed_accuracy(acc: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    (0..acc.len())
        .map(|t| {
            let win = &acc[(t + 1).saturating_sub(w)..=t];
            let mean = win.iter().sum::<f64>() / win.len() as f64;
            // Keep rounding from pushing the mean outside the window's range.
            let lo = win.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = win.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            mean.clamp(lo, hi)
        })
        .collect()
}

/// Best windowed accuracy; 0 for an empty series.
pub fn final_accuracy(acc: &[f64], w: usize) -> f64 {
    windowed_accuracy(acc, w).into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Flops,
    Bytes,
}

/// Which accuracy the streak condition reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreakBasis {
    #[default]
    Windowed,
    Raw,
}

/// A cost that was reached, or the literal failure marker.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CostToTarget {
    Reached(f64),
    #[serde(deserialize_with = "fail_marker")]
    Fail,
}

fn fail_marker<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<(), D::Error> {
    let s = String::deserialize(d)?;
    if s == "FAIL" {
        Ok(())
    } else {
        Err(serde::de::Error::custom(format!("expected \"FAIL\", got {s:?}")))
    }
}

impl CostToTarget {
    pub fn value(self) -> Option<f64> {
        match self {
            CostToTarget::Reached(v) => Some(v),
            CostToTarget::Fail => None,
        }
    }

    pub fn is_fail(self) -> bool {
        self == CostToTarget::Fail
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            CostToTarget::Reached(v) => CostToTarget::Reached(v * factor),
            CostToTarget::Fail => CostToTarget::Fail,
        }
    }
}

impl Serialize for CostToTarget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CostToTarget::Reached(v) => s.serialize_f64(*v),
            CostToTarget::Fail => s.serialize_str("FAIL"),
        }
    }
}

impl fmt::Display for CostToTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostToTarget::Reached(v) => write!(f, "{v:.3}"),
            CostToTarget::Fail => f.write_str("FAIL"),
        }
    }
}

/// Index of the first evaluation that completes a run of `consecutive`
/// evaluations at or above `target`, considering only evaluations inside
/// both budgets.
pub fn streak_completion(
    series: &MetricSeries,
    target: f64,
    consecutive: usize,
    budgets: &Budgets,
    basis: StreakBasis,
) -> Option<usize> {
    let acc = match basis {
        StreakBasis::Windowed => windowed_accuracy(&series.accuracies(), WINDOW),
        StreakBasis::Raw => series.accuracies(),
    };
    let need = consecutive.max(1);
    let mut run = 0;
    for (i, (p, a)) in series.points.iter().zip(acc).enumerate() {
        if p.cum_flops > budgets.flops || p.cum_bytes > budgets.bytes {
            return None;
        }
        run = if a >= target { run + 1 } else { 0 };
        if run >= need {
            return Some(i);
        }
    }
    None
}

/// Cumulative cost of `which` at the round where the streak completes.
pub fn cost_to_target(
    series: &MetricSeries,
    target: f64,
    which: CostKind,
    consecutive: usize,
    budgets: &Budgets,
    basis: StreakBasis,
) -> CostToTarget {
    match streak_completion(series, target, consecutive, budgets, basis) {
        Some(i) => {
            let p = series.points[i];
            CostToTarget::Reached(match which {
                CostKind::Flops => p.cum_flops,
                CostKind::Bytes => p.cum_bytes,
            })
        }
        None => CostToTarget::Fail,
    }
}

/// One method's line of a threshold report. Costs are in GFLOPs and GB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub final_accuracy: f64,
    pub target_accuracy: f64,
    pub gflops_to_target: CostToTarget,
    pub gb_to_target: CostToTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub target_accuracy: f64,
    pub methods: Vec<MethodSummary>,
}

impl ThresholdReport {
    pub fn get(&self, method: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut s = format!("target accuracy: {:.4}\n", self.target_accuracy);
        s.push_str(&format!(
            "{:<16} {:>10} {:>14} {:>12}\n",
            "method", "final", "GFLOPs", "GB"
        ));
        for m in &self.methods {
            s.push_str(&format!(
                "{:<16} {:>10.4} {:>14} {:>12}\n",
                m.method,
                m.final_accuracy,
                m.gflops_to_target.to_string(),
                m.gb_to_target.to_string()
            ));
        }
        s
    }
}

/// Target is `0.9 * max final` over all runs; each method's costs are read
/// at its own streak completion.
pub fn build_report(
    runs: &[(String, MetricSeries)],
    budgets: &Budgets,
    basis: StreakBasis,
) -> Result<ThresholdReport> {
    if runs.is_empty() {
        return Err(Error::domain("report over no runs"));
    }
    let finals: Vec<f64> = runs
        .iter()
        .map(|(_, s)| final_accuracy(&s.accuracies(), WINDOW))
        .collect();
    let target = TARGET_FRACTION * finals.iter().copied().fold(0.0, f64::max);
    let methods = runs
        .iter()
        .zip(&finals)
        .map(|((name, series), &fin)| {
            let (gflops, gb) = if target > 0.0 {
                (
                    cost_to_target(series, target, CostKind::Flops, STREAK, budgets, basis).scaled(1e-9),
                    cost_to_target(series, target, CostKind::Bytes, STREAK, budgets, basis).scaled(1e-9),
                )
            } else {
                (CostToTarget::Fail, CostToTarget::Fail)
            };
            MethodSummary {
                method: name.clone(),
                final_accuracy: fin,
                target_accuracy: target,
                gflops_to_target: gflops,
                gb_to_target: gb,
            }
        })
        .collect();
    Ok(ThresholdReport {
        target_accuracy: target,
        methods,
    })
}

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{config_from_document, ExperimentConfig, CONFIG_SECTIONS};
use super::ini::IniDocument;
use crate::engine::{run_experiment, FederatedData};
use crate::error::{Error, Result};
use crate::eval::{build_report, MethodSummary, MetricSeries};

/// Values tried for each hyperparameter. Axes not listed in `[grid]` hold
/// the base config's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxes {
    pub local_rounds: Vec<usize>,
    pub mu: Vec<f32>,
    pub moon_tau: Vec<f32>,
    pub adam_tau: Vec<f32>,
    pub lr: Vec<f32>,
    pub server_lr: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axes: GridAxes,
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub local_rounds: usize,
    pub mu: f32,
    pub moon_tau: f32,
    pub adam_tau: f32,
    pub lr: f32,
    pub server_lr: f32,
}

impl SweepSpec {
    pub fn from_base(base: ExperimentConfig) -> Self {
        let a = &base.simulation.algorithm;
        let axes = GridAxes {
            local_rounds: vec![a.local_rounds],
            mu: vec![a.mu],
            moon_tau: vec![a.moon_tau],
            adam_tau: vec![a.adam_tau],
            lr: vec![a.lr],
            server_lr: vec![a.server_lr],
        };
        Self { base, axes }
    }

    pub fn cell_count(&self) -> usize {
        let a = &self.axes;
        a.local_rounds.len() * a.mu.len() * a.moon_tau.len() * a.adam_tau.len() * a.lr.len() * a.server_lr.len()
    }

    /// Grid points in row-major order over (local_rounds, mu, moon_tau,
    /// adam_tau, lr, server_lr).
    pub fn cells(&self) -> Vec<CellParams> {
        let a = &self.axes;
        let mut out = Vec::with_capacity(self.cell_count());
        for &local_rounds in &a.local_rounds {
            for &mu in &a.mu {
                for &moon_tau in &a.moon_tau {
                    for &adam_tau in &a.adam_tau {
                        for &lr in &a.lr {
                            for &server_lr in &a.server_lr {
                                out.push(CellParams {
                                    local_rounds,
                                    mu,
                                    moon_tau,
                                    adam_tau,
                                    lr,
                                    server_lr,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn cell_config(&self, index: usize, p: &CellParams) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        cfg.name = format!("{}-{index}", self.base.name);
        let a = &mut cfg.simulation.algorithm;
        a.local_rounds = p.local_rounds;
        a.mu = p.mu;
        a.moon_tau = p.moon_tau;
        a.adam_tau = p.adam_tau;
        a.lr = p.lr;
        a.server_lr = p.server_lr;
        cfg
    }
}

/// Reads a config file with an extra `[grid]` section of comma lists.
pub fn parse_sweep(path: &Path) -> Result<SweepSpec> {
    let doc = IniDocument::read(path)?;
    let mut allowed = CONFIG_SECTIONS.to_vec();
    allowed.push("grid");
    doc.check_sections(&allowed)?;
    let mut spec = SweepSpec::from_base(config_from_document(&doc)?);
    if let Some(grid) = doc.section("grid") {
        for e in &grid.entries {
            let a = &mut spec.axes;
            match e.key.as_str() {
                "local_rounds" => a.local_rounds = doc.list(e)?,
                "mu" => a.mu = doc.list(e)?,
                "moon_tau" => a.moon_tau = doc.list(e)?,
                "adam_tau" => a.adam_tau = doc.list(e)?,
                "lr" => a.lr = doc.list(e)?,
                "server_lr" => a.server_lr = doc.list(e)?,
                _ => return Err(doc.error(e.line, format!("unknown key `{}` in [grid]", e.key))),
            }
        }
    }
    for (i, p) in spec.cells().iter().enumerate() {
        spec.cell_config(i, p).validate()?;
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub params: CellParams,
    pub summary: MethodSummary,
}

/// Index of the best cell in each regime; `None` when no cell qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestCells {
    pub accuracy: Option<usize>,
    pub flops: Option<usize>,
    pub comm: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub target_accuracy: f64,
    pub cells: Vec<SweepCell>,
    pub best: BestCells,
}

fn tie_break(a: &SweepCell, b: &SweepCell) -> Ordering {
    a.params
        .local_rounds
        .cmp(&b.params.local_rounds)
        .then(a.params.mu.total_cmp(&b.params.mu))
        .then(a.index.cmp(&b.index))
}

/// Picks, per regime, the best cell: highest final accuracy, least
/// GFLOPs-to-target, least GB-to-target. Ties go to fewer local rounds,
/// then smaller mu.
pub fn select_best(cells: &[SweepCell]) -> BestCells {
    let pick = |score: &dyn Fn(&SweepCell) -> Option<f64>, higher: bool| {
        cells
            .iter()
            .filter_map(|c| score(c).map(|s| (c, s)))
            .min_by(|(a, sa), (b, sb)| {
                let primary = if higher { sb.total_cmp(sa) } else { sa.total_cmp(sb) };
                primary.then_with(|| tie_break(a, b))
            })
            .map(|(c, _)| c.index)
    };
    BestCells {
        accuracy: pick(&|c| Some(c.summary.final_accuracy), true),
        flops: pick(&|c| c.summary.gflops_to_target.value(), false),
        comm: pick(&|c| c.summary.gb_to_target.value(), false),
    }
}

/// Runs every cell (in parallel) on shared data and reports against a
/// common target.
pub fn run_sweep(spec: &SweepSpec, data: &FederatedData) -> Result<SweepResult> {
    let cells = spec.cells();
    if cells.is_empty() {
        return Err(Error::config("grid", "every axis needs at least one value"));
    }
    let runs: Vec<(String, MetricSeries)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let cfg = spec.cell_config(i, p);
            let out = run_experiment(&cfg.simulation, data)?;
            Ok((cfg.name, MetricSeries::from_history(&out.history)))
        })
        .collect::<Result<_>>()?;
    let report = build_report(&runs, &spec.base.simulation.budgets, spec.base.output.streak_basis)?;
    let cells: Vec<SweepCell> = cells
        .into_iter()
        .zip(report.methods)
        .enumerate()
        .map(|(index, (params, summary))| SweepCell {
            index,
            params,
            summary,
        })
        .collect();
    Ok(SweepResult {
        target_accuracy: report.target_accuracy,
        best: select_best(&cells),
        cells,
    })
}

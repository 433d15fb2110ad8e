use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::config::{parse_gen_params, preset_config, test_path_for, ExperimentConfig, Preset};
use super::output::{
    convergence_chart, history_csv, similarity_chart, similarity_csv, write_json, write_text,
};
use super::sweep::{run_sweep, SweepResult, SweepSpec};
use crate::data::{generate_synthetic, save_dataset};
use crate::engine::{init_stream, run_experiment, FederatedData, SimulationConfig};
use crate::error::{Error, Result};
use crate::eval::{
    build_report, centralized_checkpoints, run_similarity_study, CentralConfig, MethodSummary,
    MetricSeries, SimilarityPoint, ThresholdReport,
};
use crate::nn::{MlpDims, MlpModel};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

/// Trains one configuration and writes `<name>.history.csv` and
/// `<name>.summary.json`. The summary's target is 0.9 of the run's own
/// final accuracy.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<MethodSummary> {
    cfg.validate()?;
    ensure_dir(&cfg.output.dir)?;
    let data = cfg.data.load()?;
    let out = run_experiment(&cfg.simulation, &data)?;
    let series = MetricSeries::from_history(&out.history);
    let report = build_report(
        &[(cfg.name.clone(), series)],
        &cfg.simulation.budgets,
        cfg.output.streak_basis,
    )?;
    let summary = report.methods.into_iter().next().expect("one method");
    write_text(&cfg.output.dir.join(format!("{}.history.csv", cfg.name)), &history_csv(&out.history))?;
    write_json(&cfg.output.dir.join(format!("{}.summary.json", cfg.name)), &summary)?;
    Ok(summary)
}

/// Checks that the configurations can share one report.
pub fn check_comparable(cfgs: &[ExperimentConfig]) -> Result<()> {
    if cfgs.len() < 2 {
        return Err(Error::config("configs", "compare needs at least two configurations"));
    }
    let first = &cfgs[0];
    for c in &cfgs[1..] {
        if c.data.data_seed != first.data.data_seed {
            return Err(Error::config(
                "data_seed",
                format!(
                    "`{}` uses data seed {} but `{}` uses {}; comparisons need identical data",
                    c.name, c.data.data_seed, first.name, first.data.data_seed
                ),
            ));
        }
        if c.data != first.data {
            return Err(Error::config(
                "data",
                format!("`{}` and `{}` describe different data", c.name, first.name),
            ));
        }
        let (a, b) = (&c.simulation.budgets, &first.simulation.budgets);
        if a.flops != b.flops || a.bytes != b.bytes {
            return Err(Error::config(
                "flop_budget",
                "compared runs must share the FLOP and byte budgets",
            ));
        }
    }
    let mut names: Vec<&str> = cfgs.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::config("name", format!("`{}` appears twice", w[0])));
    }
    Ok(())
}

/// Runs every configuration on the same data and writes the shared
/// threshold report (`report.json`, `report.txt`), per-method histories
/// and two convergence plots into the first config's output directory.
pub fn cmd_compare(cfgs: &[ExperimentConfig]) -> Result<ThresholdReport> {
    for c in cfgs {
        c.validate()?;
    }
    check_comparable(cfgs)?;
    let dir = &cfgs[0].output.dir;
    ensure_dir(dir)?;
    let data = cfgs[0].data.load()?;
    let mut runs = Vec::with_capacity(cfgs.len());
    for c in cfgs {
        let out = run_experiment(&c.simulation, &data)?;
        write_text(&dir.join(format!("{}.history.csv", c.name)), &history_csv(&out.history))?;
        runs.push((c.name.clone(), MetricSeries::from_history(&out.history)));
    }
    let report = build_report(&runs, &cfgs[0].simulation.budgets, cfgs[0].output.streak_basis)?;
    write_json(&dir.join("report.json"), &report.methods)?;
    write_text(&dir.join("report.txt"), &report.to_table())?;
    write_text(&dir.join("accuracy_vs_gflops.svg"), &convergence_chart(&runs, &report, true).render())?;
    write_text(&dir.join("accuracy_vs_gb.svg"), &convergence_chart(&runs, &report, false).render())?;
    Ok(report)
}

/// Runs the grid and writes `sweep.json`.
pub fn cmd_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let dir = &spec.base.output.dir;
    ensure_dir(dir)?;
    let data = spec.base.data.load()?;
    let result = run_sweep(spec, &data)?;
    write_json(&dir.join("sweep.json"), &result)?;
    Ok(result)
}

/// Simulation settings of one method in the similarity study: the config's
/// own algorithm settings when the method matches it, otherwise the
/// method's preset (FLOP regime unless the config names one) with the
/// config's learning rate and batch size.
pub fn similarity_method_config(cfg: &ExperimentConfig, kind: crate::AlgorithmKind) -> SimulationConfig {
    let mut sim = cfg.simulation.clone();
    if kind != sim.algorithm.kind {
        let mut a = preset_config(kind, cfg.preset.unwrap_or(Preset::Flops));
        a.lr = sim.algorithm.lr;
        a.batch_size = sim.algorithm.batch_size;
        sim.algorithm = a;
    }
    sim
}

/// Runs the descent-direction study for every configured method on
/// checkpoints from one centralized run per hidden width.
pub fn similarity_study(
    cfg: &ExperimentConfig,
    data: &FederatedData,
) -> Result<Vec<(String, Vec<SimilarityPoint>)>> {
    let central = CentralConfig {
        lr: cfg.simulation.algorithm.lr,
        momentum: cfg.simulation.algorithm.momentum,
        batch_size: cfg.simulation.algorithm.batch_size,
        seed: cfg.simulation.seed,
    };
    let mut checkpoints: BTreeMap<usize, Vec<MlpModel>> = BTreeMap::new();
    let mut rows = Vec::new();
    for &kind in &cfg.similarity.methods {
        let sim = similarity_method_config(cfg, kind);
        sim.validate(data.n_clients())?;
        let hidden = sim.global_hidden(data.n_clients());
        if let std::collections::btree_map::Entry::Vacant(e) = checkpoints.entry(hidden) {
            let dims = MlpDims::new(data.train.dim(), hidden, data.train.classes)?;
            let init = MlpModel::init(dims, &mut init_stream(sim.seed).rng());
            let cps = centralized_checkpoints(init, data, cfg.similarity.epochs, &central)?;
            e.insert(cps);
        }
        let points = run_similarity_study(&checkpoints[&hidden], &sim, cfg.similarity.rounds, data, &central)?;
        rows.push((kind.name().to_string(), points));
    }
    Ok(rows)
}

/// Writes `similarity.csv` and `similarity.svg`.
pub fn cmd_similarity(cfg: &ExperimentConfig) -> Result<Vec<(String, Vec<SimilarityPoint>)>> {
    cfg.validate()?;
    ensure_dir(&cfg.output.dir)?;
    let data = cfg.data.load()?;
    let rows = similarity_study(cfg, &data)?;
    write_text(&cfg.output.dir.join("similarity.csv"), &similarity_csv(&rows))?;
    write_text(&cfg.output.dir.join("similarity.svg"), &similarity_chart(&rows).render())?;
    Ok(rows)
}

/// Generates a synthetic dataset from a parameter file; the training set
/// goes to `out` and the test set next to it. Returns the test path.
pub fn cmd_gen_data(params: &Path, out: &Path) -> Result<PathBuf> {
    let (p, seed) = parse_gen_params(params)?;
    let (train, test) = generate_synthetic(
        p.classes,
        p.dim,
        p.train_per_class,
        p.test_per_class,
        p.separation,
        seed,
    )?;
    let test_path = test_path_for(out);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    save_dataset(&train, out)?;
    save_dataset(&test, &test_path)?;
    Ok(test_path)
}

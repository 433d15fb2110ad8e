use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ini::{Entry, IniDocument};
use crate::algorithm::AlgorithmKind;
use crate::data::{generate_synthetic, load_dataset, FeatureDataset, Split};
use crate::engine::{AlgorithmConfig, FederatedData, SimulationConfig};
use crate::error::{Error, Result};
use crate::eval::StreakBasis;

/// Hyperparameter regime a preset is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Accuracy,
    Flops,
    Comm,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Accuracy, Preset::Flops, Preset::Comm];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Accuracy => "accuracy",
            Preset::Flops => "flops",
            Preset::Comm => "comm",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("expected accuracy, flops or comm, got `{s}`"))
    }
}

/// Tuned local rounds, mu and MOON temperature for `kind` under `preset`.
/// The accuracy regime reuses the FLOP-optimal choices.
pub fn preset_config(kind: AlgorithmKind, preset: Preset) -> AlgorithmConfig {
    use AlgorithmKind::*;
    let base = AlgorithmConfig::new(kind);
    let comm = preset == Preset::Comm;
    match kind {
        FedAvg => base.with_local_rounds(25),
        FedProx | Ist | IstProx => base.with_local_rounds(1).with_mu(0.2),
        Moon if comm => AlgorithmConfig {
            moon_tau: 0.1,
            ..base.with_local_rounds(5).with_mu(10.0)
        },
        Moon => AlgorithmConfig {
            moon_tau: 0.5,
            ..base.with_local_rounds(1).with_mu(1.0)
        },
        FedNova => base.with_local_rounds(5).with_mu(0.2),
        FedAdam => base.with_local_rounds(if comm { 25 } else { 5 }),
    }
}

/// Parameters of the Gaussian-cluster generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            classes: 20,
            dim: 64,
            train_per_class: 500,
            test_per_class: 100,
            separation: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticParams),
    /// Training file; the test file sits next to it (see [`test_path_for`]).
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub source: DataSource,
    pub data_seed: u64,
    pub n_clients: usize,
    pub alpha: f64,
    pub samples_per_client: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic(SyntheticParams::default()),
            data_seed: 1,
            n_clients: 100,
            alpha: 0.01,
            samples_per_client: 500,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic(p) = &self.source {
            for (key, v) in [
                ("classes", p.classes),
                ("dim", p.dim),
                ("train_per_class", p.train_per_class),
                ("test_per_class", p.test_per_class),
            ] {
                if v == 0 {
                    return Err(Error::config(key, "must be >= 1"));
                }
            }
            if !(p.separation >= 0.0 && p.separation.is_finite()) {
                return Err(Error::config("separation", "must be a finite value >= 0"));
            }
        }
        if self.n_clients == 0 {
            return Err(Error::config("n_clients", "must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be a finite value > 0"));
        }
        if self.samples_per_client == 0 {
            return Err(Error::config("samples_per_client", "must be >= 1"));
        }
        Ok(())
    }

    /// Generates or loads the data and draws the client shards.
    pub fn load(&self) -> Result<FederatedData> {
        let (train, test) = match &self.source {
            DataSource::Synthetic(p) => generate_synthetic(
                p.classes,
                p.dim,
                p.train_per_class,
                p.test_per_class,
                p.separation,
                self.data_seed,
            )?,
            DataSource::File { path } => load_pair(path)?,
        };
        FederatedData::partitioned(
            train,
            test,
            self.n_clients,
            self.alpha,
            self.samples_per_client,
            self.data_seed,
        )
    }
}

/// `x.fvds` → `x.test.fvds`; any other name gets `.test.fvds` appended.
pub fn test_path_for(train: &Path) -> PathBuf {
    let name = train
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let test = match name.strip_suffix(".fvds") {
        Some(stem) => format!("{stem}.test.fvds"),
        None => format!("{name}.test.fvds"),
    };
    train.with_file_name(test)
}

pub fn load_pair(train_path: &Path) -> Result<(FeatureDataset, FeatureDataset)> {
    Ok((
        load_dataset(train_path, Split::Train)?,
        load_dataset(&test_path_for(train_path), Split::Test)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub streak_basis: StreakBasis,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            streak_basis: StreakBasis::Windowed,
        }
    }
}

/// Settings of the descent-direction study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySettings {
    /// Number of centralized-epoch checkpoints.
    pub epochs: usize,
    /// Federated rounds run from each checkpoint.
    pub rounds: usize,
    pub methods: Vec<AlgorithmKind>,
}

impl Default for SimilaritySettings {
    fn default() -> Self {
        Self {
            epochs: 20,
            rounds: 1,
            methods: vec![
                AlgorithmKind::FedAvg,
                AlgorithmKind::FedProx,
                AlgorithmKind::Ist,
                AlgorithmKind::IstProx,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Label used for output files and report rows.
    pub name: String,
    pub preset: Option<Preset>,
    pub simulation: SimulationConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
    pub similarity: SimilaritySettings,
}

impl ExperimentConfig {
    /// Plain defaults for `kind`, or the preset's tuned values if given.
    pub fn new(kind: AlgorithmKind, preset: Option<Preset>) -> Self {
        let algorithm = match preset {
            Some(p) => preset_config(kind, p),
            None => AlgorithmConfig::new(kind),
        };
        Self {
            name: kind.name().to_string(),
            preset,
            simulation: SimulationConfig::new(algorithm),
            data: DataConfig::default(),
            output: OutputConfig::default(),
            similarity: SimilaritySettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name", "must be non-empty and free of path separators"));
        }
        self.data.validate()?;
        self.simulation.validate(self.data.n_clients)?;
        if self.similarity.epochs == 0 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.similarity.rounds == 0 {
            return Err(Error::config("rounds", "must be >= 1"));
        }
        if self.similarity.methods.is_empty() {
            return Err(Error::config("methods", "list at least one method"));
        }
        Ok(())
    }
}

pub(crate) const CONFIG_SECTIONS: [&str; 6] =
    ["experiment", "data", "algorithm", "budgets", "output", "similarity"];

fn entries<'a>(doc: &'a IniDocument, section: &str) -> &'a [Entry] {
    doc.section(section).map_or(&[], |s| s.entries.as_slice())
}

/// Reads a config file; see [`config_from_document`].
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let doc = IniDocument::read(path)?;
    doc.check_sections(&CONFIG_SECTIONS)?;
    config_from_document(&doc)
}

/// Builds and validates a config. `[experiment] algorithm` is required;
/// the optional `preset` is applied first and explicit keys override it.
pub fn config_from_document(doc: &IniDocument) -> Result<ExperimentConfig> {
    let exp = entries(doc, "experiment");
    let find = |key: &str| exp.iter().find(|e| e.key == key);
    let algo_entry = find("algorithm").ok_or_else(|| {
        let line = doc.section("experiment").map_or(1, |s| s.line);
        doc.error(line, "missing required key `algorithm` in [experiment]")
    })?;
    let kind: AlgorithmKind = algo_entry
        .value
        .parse()
        .map_err(|e: Error| doc.error(algo_entry.line, e.to_string()))?;
    let preset = find("preset").map(|e| doc.value::<Preset>(e)).transpose()?;
    let mut cfg = ExperimentConfig::new(kind, preset);

    for e in exp {
        let sim = &mut cfg.simulation;
        match e.key.as_str() {
            "algorithm" | "preset" => {}
            "name" => cfg.name = e.value.clone(),
            "seed" => sim.seed = doc.value(e)?,
            "participation" => sim.participation = doc.value(e)?,
            "eval_every" => sim.eval_every = doc.value(e)?,
            "hidden" => sim.hidden = doc.value(e)?,
            "ist_site_hidden" => sim.ist_site_hidden = doc.value(e)?,
            _ => return Err(unknown(doc, e, "experiment")),
        }
    }

    let data = entries(doc, "data");
    let source = data.iter().find(|e| e.key == "source");
    let synthetic = match source.map(|e| e.value.as_str()) {
        None | Some("synthetic") => true,
        Some("file") => false,
        Some(other) => {
            return Err(doc.error(
                source.map_or(1, |e| e.line),
                format!("invalid value `{other}` for `source`: expected synthetic or file"),
            ))
        }
    };
    let mut params = SyntheticParams::default();
    let mut path: Option<PathBuf> = None;
    for e in data {
        let d = &mut cfg.data;
        let synthetic_only = matches!(
            e.key.as_str(),
            "classes" | "dim" | "train_per_class" | "test_per_class" | "separation"
        );
        if synthetic_only && !synthetic {
            return Err(doc.error(e.line, format!("`{}` only applies to source = synthetic", e.key)));
        }
        match e.key.as_str() {
            "source" => {}
            "path" if !synthetic => path = Some(PathBuf::from(&e.value)),
            "path" => return Err(doc.error(e.line, "`path` only applies to source = file")),
            "classes" => params.classes = doc.value(e)?,
            "dim" => params.dim = doc.value(e)?,
            "train_per_class" => params.train_per_class = doc.value(e)?,
            "test_per_class" => params.test_per_class = doc.value(e)?,
            "separation" => params.separation = doc.value(e)?,
            "data_seed" => d.data_seed = doc.value(e)?,
            "n_clients" => d.n_clients = doc.value(e)?,
            "alpha" => d.alpha = doc.value(e)?,
            "samples_per_client" => d.samples_per_client = doc.value(e)?,
            _ => return Err(unknown(doc, e, "data")),
        }
    }
    cfg.data.source = if synthetic {
        DataSource::Synthetic(params)
    } else {
        let path = path.ok_or_else(|| {
            doc.error(source.map_or(1, |e| e.line), "source = file needs a `path`")
        })?;
        DataSource::File { path }
    };

    for e in entries(doc, "algorithm") {
        let a = &mut cfg.simulation.algorithm;
        match e.key.as_str() {
            "local_rounds" => a.local_rounds = doc.value(e)?,
            "batch_size" => a.batch_size = doc.value(e)?,
            "lr" => a.lr = doc.value(e)?,
            "momentum" => a.momentum = doc.value(e)?,
            "mu" => a.mu = doc.value(e)?,
            "moon_tau" => a.moon_tau = doc.value(e)?,
            "server_lr" => a.server_lr = doc.value(e)?,
            "beta1" => a.beta1 = doc.value(e)?,
            "beta2" => a.beta2 = doc.value(e)?,
            "adam_tau" => a.adam_tau = doc.value(e)?,
            "fednova_tau_eff" => {
                a.fednova_tau_eff = if e.value == "auto" {
                    None
                } else {
                    Some(doc.value(e)?)
                }
            }
            _ => return Err(unknown(doc, e, "algorithm")),
        }
    }

    for e in entries(doc, "budgets") {
        let b = &mut cfg.simulation.budgets;
        match e.key.as_str() {
            "flop_budget" => b.flops = doc.value(e)?,
            "byte_budget" => b.bytes = doc.value(e)?,
            "max_rounds" => b.max_rounds = doc.value(e)?,
            _ => return Err(unknown(doc, e, "budgets")),
        }
    }

    for e in entries(doc, "output") {
        match e.key.as_str() {
            "dir" => cfg.output.dir = PathBuf::from(&e.value),
            "streak_basis" => {
                cfg.output.streak_basis = match e.value.as_str() {
                    "windowed" => StreakBasis::Windowed,
                    "raw" => StreakBasis::Raw,
                    v => {
                        return Err(doc.error(
                            e.line,
                            format!("invalid value `{v}` for `streak_basis`: expected windowed or raw"),
                        ))
                    }
                }
            }
            _ => return Err(unknown(doc, e, "output")),
        }
    }

    for e in entries(doc, "similarity") {
        let s = &mut cfg.similarity;
        match e.key.as_str() {
            "epochs" => s.epochs = doc.value(e)?,
            "rounds" => s.rounds = doc.value(e)?,
            "methods" => {
                s.methods = doc.list::<String>(e)?.iter().map(|m| {
                    m.parse::<AlgorithmKind>().map_err(|err| doc.error(e.line, err.to_string()))
                })
                .collect::<Result<_>>()?
            }
            _ => return Err(unknown(doc, e, "similarity")),
        }
    }

    cfg.validate()?;
    Ok(cfg)
}

fn unknown(doc: &IniDocument, e: &Entry, section: &str) -> Error {
    doc.error(e.line, format!("unknown key `{}` in [{section}]", e.key))
}

/// Writes every key, so the output parses back to an identical config.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let sim = &cfg.simulation;
    let a = &sim.algorithm;
    let mut s = String::new();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "name = {}", cfg.name);
    let _ = writeln!(s, "algorithm = {}", a.kind);
    if let Some(p) = cfg.preset {
        let _ = writeln!(s, "preset = {}", p.name());
    }
    let _ = writeln!(s, "seed = {}", sim.seed);
    let _ = writeln!(s, "participation = {}", sim.participation);
    let _ = writeln!(s, "eval_every = {}", sim.eval_every);
    let _ = writeln!(s, "hidden = {}", sim.hidden);
    let _ = writeln!(s, "ist_site_hidden = {}", sim.ist_site_hidden);

    let d = &cfg.data;
    let _ = writeln!(s, "\n[data]");
    match &d.source {
        DataSource::Synthetic(p) => {
            let _ = writeln!(s, "source = synthetic");
            let _ = writeln!(s, "classes = {}", p.classes);
            let _ = writeln!(s, "dim = {}", p.dim);
            let _ = writeln!(s, "train_per_class = {}", p.train_per_class);
            let _ = writeln!(s, "test_per_class = {}", p.test_per_class);
            let _ = writeln!(s, "separation = {}", p.separation);
        }
        DataSource::File { path } => {
            let _ = writeln!(s, "source = file");
            let _ = writeln!(s, "path = {}", path.display());
        }
    }
    let _ = writeln!(s, "data_seed = {}", d.data_seed);
    let _ = writeln!(s, "n_clients = {}", d.n_clients);
    let _ = writeln!(s, "alpha = {}", d.alpha);
    let _ = writeln!(s, "samples_per_client = {}", d.samples_per_client);

    let _ = writeln!(s, "\n[algorithm]");
    let _ = writeln!(s, "local_rounds = {}", a.local_rounds);
    let _ = writeln!(s, "batch_size = {}", a.batch_size);
    let _ = writeln!(s, "lr = {}", a.lr);
    let _ = writeln!(s, "momentum = {}", a.momentum);
    let _ = writeln!(s, "mu = {}", a.mu);
    let _ = writeln!(s, "moon_tau = {}", a.moon_tau);
    let _ = writeln!(s, "server_lr = {}", a.server_lr);
    let _ = writeln!(s, "beta1 = {}", a.beta1);
    let _ = writeln!(s, "beta2 = {}", a.beta2);
    let _ = writeln!(s, "adam_tau = {}", a.adam_tau);
    match a.fednova_tau_eff {
        Some(t) => {
            let _ = writeln!(s, "fednova_tau_eff = {t}");
        }
        None => {
            let _ = writeln!(s, "fednova_tau_eff = auto");
        }
    }

    let b = &sim.budgets;
    let _ = writeln!(s, "\n[budgets]");
    let _ = writeln!(s, "flop_budget = {:e}", b.flops);
    let _ = writeln!(s, "byte_budget = {:e}", b.bytes);
    let _ = writeln!(s, "max_rounds = {}", b.max_rounds);

    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {}", cfg.output.dir.display());
    let basis = match cfg.output.streak_basis {
        StreakBasis::Windowed => "windowed",
        StreakBasis::Raw => "raw",
    };
    let _ = writeln!(s, "streak_basis = {basis}");

    let sm = &cfg.similarity;
    let methods: Vec<&str> = sm.methods.iter().map(|m| m.name()).collect();
    let _ = writeln!(s, "\n[similarity]");
    let _ = writeln!(s, "epochs = {}", sm.epochs);
    let _ = writeln!(s, "rounds = {}", sm.rounds);
    let _ = writeln!(s, "methods = {}", methods.join(", "));
    s
}

/// Reads a `gen-data` parameter file: a `[data]` section with the
/// generator keys and `data_seed`.
pub fn parse_gen_params(path: &Path) -> Result<(SyntheticParams, u64)> {
    let doc = IniDocument::read(path)?;
    doc.check_sections(&["data"])?;
    let mut p = SyntheticParams::default();
    let mut seed = 1u64;
    for e in entries(&doc, "data") {
        match e.key.as_str() {
            "classes" => p.classes = doc.value(e)?,
            "dim" => p.dim = doc.value(e)?,
            "train_per_class" => p.train_per_class = doc.value(e)?,
            "test_per_class" => p.test_per_class = doc.value(e)?,
            "separation" => p.separation = doc.value(e)?,
            "data_seed" => seed = doc.value(e)?,
            _ => return Err(unknown(&doc, e, "data")),
        }
    }
    DataConfig {
        source: DataSource::Synthetic(p),
        ..DataConfig::default()
    }
    .validate()?;
    Ok((p, seed))
}

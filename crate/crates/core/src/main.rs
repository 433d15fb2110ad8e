use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fedsim::cli::{
    cmd_compare, cmd_gen_data, cmd_run, cmd_similarity, cmd_sweep, parse_config, parse_sweep,
    ExperimentConfig,
};
use fedsim::Error;

#[derive(Parser)]
#[command(name = "fedsim", version, about = "Deterministic federated-learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration; writes a history CSV and a summary JSON.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train several configurations on the same data and report against a shared target.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a hyperparameter grid.
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cosine similarity of federated and centralized descent directions.
    Similarity {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset (test split goes next to it as *.test.fvds).
    GenData {
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("FEDSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config {
            key: "FEDSIM_THREADS".into(),
            message: format!("expected a positive integer, got `{raw}`"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config {
            key: "FEDSIM_THREADS".into(),
            message: e.to_string(),
        })
}

fn load(path: &Path, out: &Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = parse_config(path)?;
    if let Some(dir) = out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

/// Runs the command and returns the text for stdout.
fn run(cli: Cli) -> Result<String, Error> {
    configure_threads()?;
    let text = match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config, &out)?;
            if let Some(s) = seed {
                cfg.simulation.seed = s;
            }
            let summary = cmd_run(&cfg)?;
            serde_json::to_string_pretty(&summary)? + "\n"
        }
        Command::Compare { configs, out } => {
            let cfgs = configs
                .iter()
                .map(|p| load(p, &out))
                .collect::<Result<Vec<_>, _>>()?;
            cmd_compare(&cfgs)?.to_table()
        }
        Command::Sweep { spec, out } => {
            let mut spec = parse_sweep(&spec)?;
            if let Some(dir) = out {
                spec.base.output.dir = dir;
            }
            let result = cmd_sweep(&spec)?;
            format!(
                "{} cells, target {:.4}; best accuracy {:?}, flops {:?}, comm {:?}\n",
                result.cells.len(),
                result.target_accuracy,
                result.best.accuracy,
                result.best.flops,
                result.best.comm
            )
        }
        Command::Similarity { config, out } => {
            let cfg = load(&config, &out)?;
            let mut text = String::new();
            for (method, points) in cmd_similarity(&cfg)? {
                let mean = points.iter().map(|p| p.similarity).sum::<f64>() / points.len() as f64;
                text += &format!("{method:<10} mean similarity {mean:.4}\n");
            }
            text
        }
        Command::GenData { params, out } => {
            let test = cmd_gen_data(&params, &out)?;
            format!("wrote {} and {}\n", out.display(), test.display())
        }
    };
    Ok(text)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: writing output: {e}");
                    ExitCode::FAILURE
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

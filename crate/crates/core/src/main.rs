use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmc::experiment::{self, ExperimentConfig, Method, SavedModel};
use mmc::{Error, Result};

#[derive(Parser)]
#[command(name = "mmc", version, about = "Maximum margin criterion subspace learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set gamma=0.5` or `--set split.seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on the training split at the last sweep dimension and write the model.
    Fit(Common),
    /// Apply a saved model to the config's whole dataset; writes label,features CSV.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the pipeline and write the JSON report.
    Eval(Common),
    /// Run the pipeline and write the `method,seed,r,accuracy` sweep CSV.
    Sweep(Common),
    /// Fit the filter-bank network and write the model.
    NetFit(Common),
    /// Evaluate the filter-bank network and write the JSON report.
    NetEval(Common),
    /// Write the synthetic benchmark datasets and their configs into a directory.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common, force: Option<Method>) -> Result<ExperimentConfig> {
    let mut set = common.set.clone();
    if let Some(seed) = common.seed {
        set.push(format!("seed={seed}"));
    }
    if let Some(m) = force {
        set.push(format!("method=\"{}\"", m.name()));
    }
    let mut cfg = ExperimentConfig::load(&common.config, &set)?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    experiment::resolve_paths(&mut cfg, base);
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(c) => {
            let cfg = load_config(&c, None)?;
            emit(c.out.as_deref(), &experiment::fit_model(&cfg)?.to_json()?)
        }
        Command::NetFit(c) => {
            let cfg = load_config(&c, Some(Method::MmcNet))?;
            emit(c.out.as_deref(), &experiment::fit_model(&cfg)?.to_json()?)
        }
        Command::Transform { common, model } => {
            let cfg = load_config(&common, None)?;
            let text = fs::read_to_string(&model).map_err(|e| Error::Io { path: model, source: e })?;
            let model = SavedModel::from_json(&text)?;
            let data = experiment::load_data(&cfg.dataset)?;
            let features = model.features(&data)?;
            let ds = data.vectors().with_features(features)?;
            emit(common.out.as_deref(), mmc::data::csv_string(&ds).trim_end())
        }
        Command::Eval(c) => {
            let cfg = load_config(&c, None)?;
            emit(c.out.as_deref(), &experiment::run(&cfg)?.to_json()?)
        }
        Command::NetEval(c) => {
            let cfg = load_config(&c, Some(Method::MmcNet))?;
            emit(c.out.as_deref(), &experiment::run(&cfg)?.to_json()?)
        }
        Command::Sweep(c) => {
            let cfg = load_config(&c, None)?;
            let report = experiment::run(&cfg)?;
            match &c.out {
                Some(path) => experiment::emit_sweep_csv(&report, path),
                None => {
                    print!("{}", experiment::sweep_csv(&report));
                    Ok(())
                }
            }
        }
        Command::GenSynthetic { out } => {
            for path in experiment::write_benchmarks(&out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let obj = serde_json::json!({
                "error": e.name(),
                "module": e.module(),
                "message": e.to_string(),
            });
            eprintln!("{obj}");
            ExitCode::FAILURE
        }
    }
}

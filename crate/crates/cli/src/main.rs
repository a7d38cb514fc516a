//! `renalscan` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or I/O error, 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use renalscan::config::PipelineConfig;
use renalscan::eval::RocSummary;
use renalscan::pipeline::{load_summaries, run_all, run_stage, RunDir, Stage};
use renalscan::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "renalscan",
    version,
    about = "Renal cancer detection from kidney segmentations"
)]
struct Cli {
    /// TOML configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory, overriding `run.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dotted override such as `shape.gnn_epochs=40`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic cohort.
    Phantom,
    /// Surface meshes and graphs for every kidney.
    Mesh,
    /// Feature vectors and ground truth for every kidney.
    Features,
    /// Train the shape models with cross-validation.
    TrainShape,
    /// Axial tile and block samples for every scan.
    Sample,
    /// Train the sample scorers and score the held-out samples.
    Score,
    /// ROC analysis of every model present in the run.
    Evaluate,
    /// Every stage selected by `run.stages`.
    RunAll,
    /// Print every configuration key, its value and where its default comes from.
    ConfigDump,
    /// Write a configuration file with every key.
    InitConfig {
        /// Destination file.
        path: PathBuf,
        /// Coarser surface lattice for quick runs.
        #[arg(long)]
        desk: bool,
    },
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {spec:?}")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in path {
        table = table
            .get_mut(*p)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| Error::Config(format!("unknown configuration key {key:?}")))?;
    }
    match table.get(*last) {
        Some(toml::Value::Table(_)) | None => {
            Err(Error::Config(format!("unknown configuration key {key:?}")))
        }
        Some(_) => {
            table.insert(last.to_string(), parse_value(raw.trim()));
            Ok(())
        }
    }
}

fn load_config(cli: &Cli, base: PipelineConfig) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => base,
    };
    if !cli.set.is_empty() {
        let mut table: toml::Table =
            toml::from_str(&cfg.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        for spec in &cli.set {
            apply_override(&mut table, spec)?;
        }
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        cfg = PipelineConfig::from_toml(&text)?;
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summaries(summaries: &[RocSummary]) {
    println!(
        "{:<10} {:<11} {:>6} {:>4} {:>4} {:>7} {:>7}",
        "model", "stratum", "auc", "pos", "neg", "sens", "spec"
    );
    for s in summaries {
        println!(
            "{:<10} {:<11} {:>6.3} {:>4} {:>4} {:>7.3} {:>7.3}",
            s.model, s.stratum, s.auc, s.positives, s.negatives, s.sensitivity, s.specificity
        );
    }
}

fn run(cli: &Cli) -> Result<()> {
    let stage = match &cli.command {
        Command::Phantom => Stage::Phantom,
        Command::Mesh => Stage::Mesh,
        Command::Features => Stage::Features,
        Command::TrainShape => Stage::TrainShape,
        Command::Sample => Stage::Sample,
        Command::Score => Stage::Score,
        Command::Evaluate => Stage::Evaluate,
        Command::RunAll => {
            print_summaries(&run_all(&load_config(cli, PipelineConfig::default())?)?);
            return Ok(());
        }
        Command::ConfigDump => {
            for (key, value, origin) in load_config(cli, PipelineConfig::default())?.dump()? {
                println!("{key} = {value}  # {}", origin.as_str());
            }
            return Ok(());
        }
        Command::InitConfig { path, desk } => {
            let base = if *desk {
                PipelineConfig::desk_scale()
            } else {
                PipelineConfig::default()
            };
            let cfg = load_config(cli, base)?;
            return std::fs::write(path, cfg.to_toml()?).map_err(|e| Error::io(path, e));
        }
    };
    let cfg = load_config(cli, PipelineConfig::default())?;
    run_stage(&cfg, stage)?;
    if stage == Stage::Evaluate {
        print_summaries(&load_summaries(&RunDir::new(&cfg.run.out_dir))?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `ata`: experiment runner for the ansatz-tree heat-equation emulator.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "ata", version, about = "Ansatz-tree heat-equation experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Compute exact reference solutions.
    #[arg(long, global = true, value_enum, default_value_t = Oracle::On)]
    oracle: Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Verb {
    /// Exact and approximated operator spectra.
    Spectrum,
    /// One linear solve with its loss history.
    Step,
    /// Time evolution, optionally with a dropout sweep.
    Evolve,
    /// Stationary-cluster sweep and Haar-random study.
    Cluster,
    /// ATA vs HHL cost table.
    Resources,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Spectrum => "spectrum",
            Verb::Step => "step",
            Verb::Evolve => "evolve",
            Verb::Cluster => "cluster",
            Verb::Resources => "resources",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Oracle {
    On,
    Off,
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("in {}", p.display()))
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let oracle = cli.oracle == Oracle::On;
    let out = match cli.verb {
        Verb::Spectrum => commands::spectrum(&cfg)?,
        Verb::Step => commands::step(&cfg, oracle)?,
        Verb::Evolve => commands::evolve(&cfg, oracle)?,
        Verb::Cluster => commands::cluster(&cfg)?,
        Verb::Resources => commands::resources(&cfg)?,
    };
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut written = Vec::new();
    for (name, body) in &out.files {
        let path = cli.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": cli.verb.name(),
        "schema": config::SCHEMA_VERSION,
        "library": "ata-core",
        "library_version": ata_core::VERSION,
        "rng": ata_core::sources::RNG_NAME,
        "seed": cfg.seed,
        "oracle": oracle,
        "created_unix": created,
        "outputs": out.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "config": cfg,
        "summary": out.summary,
    });
    let path = cli.out.join(format!("{}.meta.json", cli.verb.name()));
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

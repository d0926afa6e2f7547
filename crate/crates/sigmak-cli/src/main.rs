//! Command-line runner for the sigmak experiments.
//!
//! Each subcommand reads an optional JSON config, writes
//! `<out>/<subcommand>.csv` and `<out>/<subcommand>.report.json`, and exits
//! with 0 when every criterion passes, 1 when a criterion fails, 2 on a config
//! error and 3 on a numerical failure.

mod config;
mod experiments;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use rayon::prelude::*;
use serde_json::json;

use config::{ConfigError, RawConfig};
use report::{write_artifacts, Artifacts, Cell, Criterion, Table};

#[derive(Debug, Parser)]
#[command(
    name = "sigmak",
    version,
    about = "Numerical experiments for sigma_k-Yamabe gluing"
)]
struct Cli {
    #[command(subcommand)]
    command: Subcommand,
    /// JSON run configuration; omitted fields take per-subcommand defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config; default ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized checks.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Suppress the per-run summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Subcommand {
    /// σ_j of the cylinder Schouten tensor against the closed form.
    SigmaTable,
    /// σ_k-flatness of random Schwarzschild profiles.
    SchwarzschildVerify,
    /// Tabulate the approximate solution u_ε.
    NeckBuild,
    /// Cone margins of u_ε over the ε sweep.
    ConeCheck,
    /// Weighted proper error over the ε sweep and its fitted exponent.
    ErrorScaling,
    /// Dirichlet-to-Neumann values over the ε sweep.
    DtnConverge,
    /// Matched versus monolithic mode solves on random sources.
    MatchDemo,
    /// Newton solve of the glued problem at ε.
    Solve,
    /// Product-model values and non-degeneracy scans.
    ModelsVerify,
    /// Every experiment above, run concurrently.
    All,
}

impl Subcommand {
    const EXPERIMENTS: [Subcommand; 9] = [
        Subcommand::SigmaTable,
        Subcommand::SchwarzschildVerify,
        Subcommand::NeckBuild,
        Subcommand::ConeCheck,
        Subcommand::ErrorScaling,
        Subcommand::DtnConverge,
        Subcommand::MatchDemo,
        Subcommand::Solve,
        Subcommand::ModelsVerify,
    ];

    fn name(self) -> &'static str {
        match self {
            Subcommand::SigmaTable => "sigma-table",
            Subcommand::SchwarzschildVerify => "schwarzschild-verify",
            Subcommand::NeckBuild => "neck-build",
            Subcommand::ConeCheck => "cone-check",
            Subcommand::ErrorScaling => "error-scaling",
            Subcommand::DtnConverge => "dtn-converge",
            Subcommand::MatchDemo => "match-demo",
            Subcommand::Solve => "solve",
            Subcommand::ModelsVerify => "models-verify",
            Subcommand::All => "all",
        }
    }
}

const EXIT_CRITERIA: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(art: &Artifacts) -> u8 {
    if art.failure.is_some() {
        EXIT_NUMERICAL
    } else if art.pass() {
        0
    } else {
        EXIT_CRITERIA
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RawConfig> {
    match path {
        None => Ok(RawConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                ConfigError::new("--config", format!("cannot read {}: {e}", p.display()))
            })?;
            Ok(RawConfig::from_json(&text)?)
        }
    }
}

fn summary(name: &str, art: &Artifacts, path: &std::path::Path) -> String {
    let status = match exit_code(art) {
        0 => "PASS".to_string(),
        EXIT_CRITERIA => {
            let failed: Vec<&str> = art
                .criteria
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.as_str())
                .collect();
            format!("FAIL ({})", failed.join(", "))
        }
        _ => format!(
            "ERROR ({})",
            art.failure
                .as_ref()
                .map(|f| f.message.as_str())
                .unwrap_or("")
        ),
    };
    format!("{name}: {status} -> {}", path.display())
}

fn run(cli: &Cli) -> Result<u8> {
    let raw = load_config(cli.config.as_ref())?;
    let subs: Vec<Subcommand> = if cli.command == Subcommand::All {
        Subcommand::EXPERIMENTS.to_vec()
    } else {
        vec![cli.command]
    };
    // Resolve every configuration before running anything.
    let configs = subs
        .iter()
        .map(|&s| raw.resolve(s, cli.out.clone(), cli.seed))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let results: Vec<Artifacts> = subs
        .par_iter()
        .zip(&configs)
        .map(|(&s, c)| experiments::run(s, c))
        .collect();
    let mut worst = 0;
    let mut all_table = Table::new(&["subcommand", "pass", "exit_code"]);
    let mut all_criteria = Vec::new();
    for ((sub, cfg), art) in subs.iter().zip(&configs).zip(&results) {
        let (path, _) = write_artifacts(&cfg.output_dir, sub.name(), cfg, art)?;
        if !cli.quiet {
            println!("{}", summary(sub.name(), art, &path));
        }
        let code = exit_code(art);
        worst = worst.max(code);
        all_table.push(vec![
            sub.name().into(),
            art.pass().into(),
            Cell::Int(code as i64),
        ]);
        all_criteria.push(Criterion::holds(sub.name(), art.pass()));
    }
    if cli.command == Subcommand::All {
        let cfg = raw.resolve(Subcommand::All, cli.out.clone(), cli.seed)?;
        let art = Artifacts::new(all_table, all_criteria, json!({ "exit_code": worst }));
        let (path, _) = write_artifacts(&cfg.output_dir, "all", &cfg, &art)?;
        if !cli.quiet {
            println!("all: exit {worst} -> {}", path.display());
        }
    }
    Ok(worst)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).context("sigmak run failed") {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}

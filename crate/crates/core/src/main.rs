use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use warfarin_bandit::data_model::{load_dataset, SchemaConfig, SyntheticSpec};
use warfarin_bandit::harness::{
    aggregate_rows, emit_report, flatten, read_raw_csv, run_suite, Experiment, ExperimentConfig, HarnessError,
};

#[derive(Parser)]
#[command(name = "warfarin-bandit", version, about = "Offline bandit learning and evaluation for warfarin dosing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a dataset and print parse diagnostics as JSON.
    Prepare {
        #[arg(long)]
        data: PathBuf,
        /// Column mapping (TOML); defaults to the IWPC names.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Also write the diagnostics here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment suite and write tables, boxplot stats and raw rows.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `N` for seeds 1..=N, or a comma-separated list such as `3,7,11`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Synthetic cohort: a SyntheticSpec TOML file, or `N[:DIM]` for the
        /// ordinal cohort with N records (DIM defaults to 5).
        #[arg(long)]
        synthetic: Option<String>,
    },
    /// Re-aggregate a raw per-seed CSV into tables and boxplot stats.
    Report {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.contains(',') {
        return s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed `{t}`")))
            .collect();
    }
    let n: u64 = s.parse().with_context(|| format!("bad seed count `{s}`"))?;
    if n == 0 {
        bail!("seed count must be positive");
    }
    Ok((1..=n).collect())
}

fn parse_synthetic(s: &str) -> Result<SyntheticSpec> {
    let path = Path::new(s);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return toml::from_str(&text).with_context(|| format!("invalid synthetic spec {s}"));
    }
    let (n, dim) = match s.split_once(':') {
        Some((n, d)) => (n, d),
        None => (s, "5"),
    };
    let n = n.parse().with_context(|| format!("bad record count in `{s}`"))?;
    let dim = dim.parse().with_context(|| format!("bad dimension in `{s}`"))?;
    Ok(SyntheticSpec::ordinal(n, dim))
}

fn prepare(data: &Path, schema: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let schema = match schema {
        Some(p) => SchemaConfig::load(p)?,
        None => SchemaConfig::default(),
    };
    let (cohort, diagnostics) = load_dataset(data, &schema)?;
    let mut arms = [0usize; 3];
    for a in cohort.true_arms() {
        arms[a.index()] += 1;
    }
    let doc = json!({
        "diagnostics": diagnostics,
        "arm_counts": { "low": arms[0], "medium": arms[1], "high": arms[2] },
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    if let Some(out) = out {
        std::fs::write(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn run(config: Option<&Path>, seeds: Option<&str>, out: Option<&Path>, synthetic: Option<&str>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(spec) = synthetic {
        let spec = parse_synthetic(spec)?;
        let base = ExperimentConfig::synthetic(spec);
        cfg.data = base.data;
        if config.is_none() {
            cfg.demos = base.demos;
        }
    }
    if let Some(s) = seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(out) = out {
        cfg.output_dir = out.to_path_buf();
    }
    cfg.validate()?;
    let out_dir = cfg.output_dir.clone();
    let experiment = Experiment::prepare(cfg)?;
    let results = run_suite(&experiment)?;
    let rows = flatten(&results);
    let report = aggregate_rows(&rows)?;
    let mut written = emit_report(&report, &rows, &out_dir)?;
    let config_path = out_dir.join("config_resolved.toml");
    std::fs::write(&config_path, experiment.config.to_toml())?;
    written.push(config_path);
    for f in &written {
        log::info!("wrote {}", f.display());
    }
    println!(
        "{}",
        json!({ "seeds": results.len(), "files": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() })
    );
    Ok(())
}

fn report(raw: &Path, out: &Path) -> Result<()> {
    let rows = read_raw_csv(raw)?;
    let report = aggregate_rows(&rows)?;
    let written = emit_report(&report, &rows, out)?;
    println!("{}", json!({ "files": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() }));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Prepare { data, schema, out } => prepare(data, schema.as_deref(), out.as_deref()),
        Command::Run {
            config,
            seeds,
            out,
            synthetic,
        } => run(config.as_deref(), seeds.as_deref(), out.as_deref(), synthetic.as_deref()),
        Command::Report { raw, out } => report(raw, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<HarnessError>().map_or("error", HarnessError::kind);
            let summary = json!({ "status": "error", "kind": kind, "message": format!("{e:#}") });
            eprintln!("{summary}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_arguments() {
        assert_eq!(parse_seeds("3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("5,2, 9").unwrap(), vec![5, 2, 9]);
        assert_eq!(parse_seeds("7,").unwrap(), vec![7]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn synthetic_shorthand() {
        assert_eq!(parse_synthetic("200").unwrap(), SyntheticSpec::ordinal(200, 5));
        assert_eq!(parse_synthetic("200:3").unwrap(), SyntheticSpec::ordinal(200, 3));
        assert!(parse_synthetic("lots").is_err());
    }
}

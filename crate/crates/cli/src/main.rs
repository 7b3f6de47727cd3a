//! `son-sim`: runs fault-handling experiments on the simulated LTE cluster.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use son_core::config::{load_config, AgentKind, ExperimentConfig};
use son_core::experiment::run_experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentArg {
    Random,
    Fifo,
    Dqn,
    All,
}

impl AgentArg {
    fn kinds(self) -> Vec<AgentKind> {
        match self {
            AgentArg::Random => vec![AgentKind::Random],
            AgentArg::Fifo => vec![AgentKind::Fifo],
            AgentArg::Dqn => vec![AgentKind::Dqn],
            AgentArg::All => AgentKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "son-sim", version, about)]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Agent(s) to run.
    #[arg(long, value_enum)]
    agent: Option<AgentArg>,

    /// Seed count `n` (seeds 0..n-1) or a comma-separated seed list; a
    /// trailing comma marks a one-element list, e.g. `7,`.
    #[arg(long)]
    seeds: Option<String>,

    /// UEs per cell; a comma-separated list runs a grid.
    #[arg(long, value_delimiter = ',')]
    ues_per_cell: Option<Vec<usize>>,

    /// Episodes per run.
    #[arg(long)]
    episodes: Option<u32>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Print the effective configuration and exit without running.
    #[arg(long)]
    dump_effective_config: bool,
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let raw = raw.trim();
    if !raw.contains(',') {
        let n: u64 = raw
            .parse()
            .with_context(|| format!("--seeds expects a count or a list, got `{raw}`"))?;
        if n == 0 {
            bail!("--seeds count must be at least 1");
        }
        return Ok((0..n).collect());
    }
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(a) = cli.agent {
        cfg.agents = a.kinds();
    }
    if let Some(s) = &cli.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(q) = &cli.ues_per_cell {
        cfg.ues_per_cell = q.clone();
    }
    if let Some(z) = cli.episodes {
        cfg.episode.zeta = z;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli)?;
    if cli.dump_effective_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let report = run_experiment(&cfg).with_context(|| {
        format!(
            "experiment failed; output under {}",
            cfg.output_dir.display()
        )
    })?;
    println!(
        "{:<8} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "agent", "q", "peak", "average", "edge", "cell_avg", "sinr_db", "clear_tti"
    );
    for row in &report.summaries {
        let s = &row.summary;
        let t = &s.throughput;
        println!(
            "{:<8} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            row.agent,
            row.ues_per_cell,
            t.peak,
            t.average,
            t.edge,
            t.cell_average,
            s.mean_sinr_db,
            s.mean_clearance_ttis
        );
    }
    println!(
        "{} runs, {} files written to {}",
        report.runs.len(),
        report.files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Experiment orchestration over the (agent, UEs per cell, seed) grid and
//! the files each experiment leaves behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::baseline::{FifoAgent, RandomAgent};
pub use crate::config::AgentKind;
use crate::config::ExperimentConfig;
use crate::dqn::DqnAgent;
use crate::error::{Error, Result};
use crate::mdp::{run_episode, Agent, SonEnv};
use crate::metrics::{
    empirical_cdf, sinr_samples, summarize_stats, write_cdf, write_episodes, write_summary,
    write_trace, EpisodeRow, EpisodeStats, EpisodeTrace, RunSummary, SummaryRow,
};
use crate::rng::{SeedStreams, Stream};

/// Everything one (agent, q, seed) run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub agent: AgentKind,
    pub ues_per_cell: usize,
    pub seed: u64,
    pub episodes: Vec<EpisodeRow>,
    pub stats: Vec<EpisodeStats>,
    pub summary: RunSummary,
    pub traces: Option<Vec<EpisodeTrace>>,
    /// Final DQN weights in snapshot form.
    pub weights: Option<String>,
}

fn play(
    env: &mut SonEnv,
    agent: &mut dyn Agent,
    config: &ExperimentConfig,
    seed: u64,
    keep_traces: bool,
) -> Result<(Vec<EpisodeRow>, Vec<EpisodeStats>, Vec<EpisodeTrace>)> {
    let tau = config.episode.tau;
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    let mut traces = Vec::new();
    for z in 0..config.episode.zeta {
        let mut trace = EpisodeTrace::new(z, tau);
        let s = run_episode(env, agent, z, |out| trace.push(out))?;
        rows.push(EpisodeRow {
            seed,
            episode: z,
            total_reward: s.total_reward,
            ttis: s.ttis,
            cleared: s.cleared,
        });
        stats.push(EpisodeStats::from_trace(&trace));
        if keep_traces {
            traces.push(trace);
        }
    }
    Ok((rows, stats, traces))
}

/// Runs `config.episode.zeta` episodes of one agent on one seeded cluster.
pub fn run_single(
    config: &ExperimentConfig,
    agent: AgentKind,
    ues_per_cell: usize,
    seed: u64,
) -> Result<RunResult> {
    config.validate()?;
    let mut env = SonEnv::new(
        config.cluster_for(ues_per_cell),
        config.rates,
        config.rewards,
        config.episode.tau,
        config.azimuth_delta_deg,
        seed,
    )?;
    let streams = SeedStreams::new(seed);
    let keep = config.write_traces;
    let (episodes, stats, traces, weights) = match agent {
        AgentKind::Random => {
            let mut a = RandomAgent::new(streams.rng(Stream::Policy));
            let (e, s, t) = play(&mut env, &mut a, config, seed, keep)?;
            (e, s, t, None)
        }
        AgentKind::Fifo => {
            let mut a = FifoAgent::new();
            let (e, s, t) = play(&mut env, &mut a, config, seed, keep)?;
            (e, s, t, None)
        }
        AgentKind::Dqn => {
            let mut a = DqnAgent::new(
                &config.dqn_config(),
                &mut streams.rng(Stream::NetworkInit),
                streams.rng(Stream::Policy),
                streams.rng(Stream::Replay),
            )?;
            let (e, s, t) = play(&mut env, &mut a, config, seed, keep)?;
            (e, s, t, Some(a.network().to_snapshot()))
        }
    };
    Ok(RunResult {
        agent,
        ues_per_cell,
        seed,
        summary: summarize_stats(&stats)?,
        episodes,
        stats,
        traces: keep.then_some(traces),
        weights,
    })
}

/// Runs the whole grid in memory. Runs execute in parallel; results come
/// back ordered by agent, then q, then seed, as listed in the config.
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    config.validate()?;
    let cells: Vec<(AgentKind, usize, u64)> = config
        .agents
        .iter()
        .flat_map(|a| {
            config
                .ues_per_cell
                .iter()
                .flat_map(move |q| config.seeds.iter().map(move |s| (*a, *q, *s)))
        })
        .collect();
    cells
        .par_iter()
        .map(|(a, q, s)| run_single(config, *a, *q, *s))
        .collect()
}

/// Pooled summary per (agent, q), in grid order.
pub fn pooled_summaries(config: &ExperimentConfig, runs: &[RunResult]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for agent in &config.agents {
        for q in &config.ues_per_cell {
            let stats: Vec<EpisodeStats> = runs
                .iter()
                .filter(|r| r.agent == *agent && r.ues_per_cell == *q)
                .flat_map(|r| r.stats.iter().cloned())
                .collect();
            rows.push(SummaryRow {
                agent: agent.to_string(),
                ues_per_cell: *q,
                summary: summarize_stats(&stats)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<SummaryRow>,
    /// Every file written, relative to the output directory.
    pub files: Vec<PathBuf>,
}

/// Writes files under `root` and remembers them so a failure can undo them.
struct OutputTree {
    root: PathBuf,
    created_root: bool,
    dirs: Vec<PathBuf>,
    files: Vec<PathBuf>,
}

impl OutputTree {
    fn open(root: &Path) -> Result<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            created_root,
            dirs: Vec::new(),
            files: Vec::new(),
        })
    }

    /// Absolute path for `rel`, creating its parent directory.
    fn prepare(&mut self, rel: &Path) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            if !parent.exists() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                self.dirs.push(parent.to_path_buf());
            }
        }
        self.files.push(rel.to_path_buf());
        Ok(path)
    }

    fn write_text(&mut self, rel: &Path, text: &str) -> Result<()> {
        let path = self.prepare(rel)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn rollback(self) {
        for f in &self.files {
            let _ = fs::remove_file(self.root.join(f));
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
        if self.created_root {
            let _ = fs::remove_dir(&self.root);
        }
    }
}

fn grid_dir(config: &ExperimentConfig, q: usize) -> PathBuf {
    if config.ues_per_cell.len() > 1 {
        PathBuf::from(format!("q{q}"))
    } else {
        PathBuf::new()
    }
}

fn write_outputs(
    config: &ExperimentConfig,
    runs: &[RunResult],
    summaries: &[SummaryRow],
    out: &mut OutputTree,
) -> Result<()> {
    for agent in &config.agents {
        for q in &config.ues_per_cell {
            let dir = grid_dir(config, *q);
            let cell: Vec<&RunResult> = runs
                .iter()
                .filter(|r| r.agent == *agent && r.ues_per_cell == *q)
                .collect();
            let stats: Vec<EpisodeStats> =
                cell.iter().flat_map(|r| r.stats.iter().cloned()).collect();
            let samples = sinr_samples(&stats);
            if !samples.is_empty() {
                let path = out.prepare(&dir.join(format!("cdf_{agent}.csv")))?;
                write_cdf(&path, &empirical_cdf(&samples)?)?;
            }
            let rows: Vec<EpisodeRow> = cell.iter().flat_map(|r| r.episodes.clone()).collect();
            let path = out.prepare(&dir.join(format!("episodes_{agent}.csv")))?;
            write_episodes(&path, &rows)?;
            for r in &cell {
                if let Some(w) = &r.weights {
                    let rel =
                        PathBuf::from("weights").join(format!("{agent}_q{q}_seed{}.txt", r.seed));
                    out.write_text(&rel, w)?;
                }
                if let Some(t) = &r.traces {
                    let rel =
                        PathBuf::from("traces").join(format!("{agent}_q{q}_seed{}.csv", r.seed));
                    let path = out.prepare(&rel)?;
                    write_trace(&path, t)?;
                }
            }
        }
    }
    let path = out.prepare(Path::new("summary.csv"))?;
    write_summary(&path, summaries)?;
    out.write_text(Path::new("manifest.txt"), &manifest(config, runs))
}

fn manifest(config: &ExperimentConfig, runs: &[RunResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# runs: agent q seed episodes cleared_fraction");
    for r in runs {
        let _ = writeln!(
            s,
            "# run {} {} {} {} {}",
            r.agent,
            r.ues_per_cell,
            r.seed,
            r.episodes.len(),
            r.summary.cleared_fraction
        );
    }
    let _ = writeln!(s, "#");
    let _ = writeln!(s, "# effective configuration");
    s.push_str(&config.to_text());
    s
}

/// Runs the grid and writes its CSVs, DQN weights and a manifest under
/// `config.output_dir`. Files written before a failure are removed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut out = OutputTree::open(&config.output_dir)?;
    let result = run_grid(config).and_then(|runs| {
        let summaries = pooled_summaries(config, &runs)?;
        write_outputs(config, &runs, &summaries, &mut out)?;
        Ok((runs, summaries))
    });
    match result {
        Ok((runs, summaries)) => Ok(ExperimentReport {
            runs,
            summaries,
            files: out.files,
        }),
        Err(e) => {
            out.rollback();
            Err(e)
        }
    }
}

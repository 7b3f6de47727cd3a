//! Run metrics: SINR CDF, UE throughput percentiles, cell throughput,
//! alarm-clearance statistics, and their CSV forms.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::{MdpAction, MdpState, StepOutcome};

/// One logged TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: u32,
    pub tti: u32,
    /// State the action was taken in.
    pub state: MdpState,
    pub action: MdpAction,
    pub reward: f64,
    pub alarm_count: usize,
    /// Per-UE SINR in dB; `-inf` marks outage.
    pub sinr_db: Vec<f64>,
    pub ue_rate_mbps: Vec<f64>,
    pub cell_rate_mbps: Vec<f64>,
}

impl TraceRow {
    pub fn from_outcome(episode: u32, out: &StepOutcome) -> Self {
        Self {
            episode,
            tti: out.tti,
            state: out.prev_state,
            action: out.action,
            reward: out.reward,
            alarm_count: out.alarm_count,
            sinr_db: out.radio.sinr_db.clone(),
            ue_rate_mbps: out.radio.ue_rate_mbps.clone(),
            cell_rate_mbps: out.radio.cell_rate_mbps.clone(),
        }
    }

    /// Mean SINR over UEs not in outage; `None` when all are.
    pub fn mean_sinr_db(&self) -> Option<f64> {
        mean(self.sinr_db.iter().copied().filter(|s| s.is_finite()))
    }

    pub fn mean_rate_mbps(&self) -> Option<f64> {
        mean(self.ue_rate_mbps.iter().copied())
    }
}

/// Per-TTI log of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub episode: u32,
    pub tau: u32,
    pub rows: Vec<TraceRow>,
}

impl EpisodeTrace {
    pub fn new(episode: u32, tau: u32) -> Self {
        Self {
            episode,
            tau,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, out: &StepOutcome) {
        self.rows.push(TraceRow::from_outcome(self.episode, out));
    }

    /// First TTI whose alarm count is zero, or `tau` when that never happens.
    pub fn clearance_ttis(&self) -> u32 {
        self.rows
            .iter()
            .find(|r| r.alarm_count == 0)
            .map_or(self.tau, |r| r.tti)
    }

    pub fn cleared(&self) -> bool {
        self.rows.iter().any(|r| r.alarm_count == 0)
    }

    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }
}

/// Mean of an iterator, summed in sorted order so the result does not depend
/// on input order.
fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

fn sorted_checked(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::NanSample);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Nearest-rank percentile: the value at rank `ceil(p n)` of the sorted
/// sample, with rank clamped to `1..=n`.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidPercentile(p));
    }
    let v = sorted_checked(samples)?;
    Ok(v[nearest_rank(v.len(), p) - 1])
}

fn nearest_rank(n: usize, p: f64) -> usize {
    ((p * n as f64).ceil() as usize).clamp(1, n)
}

/// Empirical CDF as `(value, P[X <= value])` at each distinct sample value.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let v = sorted_checked(samples)?;
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = p,
            _ => out.push((*x, p)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputSummary {
    /// 95th percentile UE rate, Mbps.
    pub peak: f64,
    /// Mean UE rate, Mbps.
    pub average: f64,
    /// 5th percentile UE rate, Mbps.
    pub edge: f64,
    /// Mean cell rate, Mbps.
    pub cell_average: f64,
}

impl ThroughputSummary {
    pub fn from_samples(ue_rates: &[f64], cell_rates: &[f64]) -> Result<Self> {
        Ok(Self {
            peak: percentile(ue_rates, 0.95)?,
            average: mean(ue_rates.iter().copied()).ok_or(Error::EmptySamples)?,
            edge: percentile(ue_rates, 0.05)?,
            cell_average: mean(cell_rates.iter().copied()).ok_or(Error::EmptySamples)?,
        })
    }
}

/// An episode reduced to the samples the run summary needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// Time-averaged rate of every UE, Mbps.
    pub ue_rate_mbps: Vec<f64>,
    /// Time-averaged SINR of every UE over its non-outage TTIs, dB.
    pub ue_sinr_db: Vec<f64>,
    /// Time-averaged rate of every cell, Mbps.
    pub cell_rate_mbps: Vec<f64>,
    pub clearance_ttis: u32,
    pub cleared: bool,
}

impl EpisodeStats {
    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        let per_column = |pick: fn(&TraceRow) -> &Vec<f64>, finite_only: bool| -> Vec<f64> {
            let width = trace.rows.first().map_or(0, |r| pick(r).len());
            (0..width)
                .filter_map(|i| {
                    mean(
                        trace
                            .rows
                            .iter()
                            .map(|r| pick(r)[i])
                            .filter(|x| !finite_only || x.is_finite()),
                    )
                })
                .collect()
        };
        Self {
            ue_rate_mbps: per_column(|r| &r.ue_rate_mbps, false),
            ue_sinr_db: per_column(|r| &r.sinr_db, true),
            cell_rate_mbps: per_column(|r| &r.cell_rate_mbps, false),
            clearance_ttis: trace.clearance_ttis(),
            cleared: trace.cleared(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub throughput: ThroughputSummary,
    /// Mean of the per-UE time-averaged SINR, dB.
    pub mean_sinr_db: f64,
    pub mean_clearance_ttis: f64,
    pub cleared_fraction: f64,
    pub episodes: usize,
}

/// Pools per-UE time averages over every episode given and summarises them.
pub fn summarize_stats(stats: &[EpisodeStats]) -> Result<RunSummary> {
    if stats.is_empty() {
        return Err(Error::EmptySamples);
    }
    let ue: Vec<f64> = stats
        .iter()
        .flat_map(|s| s.ue_rate_mbps.iter().copied())
        .collect();
    let cells: Vec<f64> = stats
        .iter()
        .flat_map(|s| s.cell_rate_mbps.iter().copied())
        .collect();
    let sinr = stats.iter().flat_map(|s| s.ue_sinr_db.iter().copied());
    let n = stats.len() as f64;
    Ok(RunSummary {
        throughput: ThroughputSummary::from_samples(&ue, &cells)?,
        mean_sinr_db: mean(sinr).unwrap_or(f64::NEG_INFINITY),
        mean_clearance_ttis: mean(stats.iter().map(|s| s.clearance_ttis as f64))
            .expect("non-empty"),
        cleared_fraction: stats.iter().filter(|s| s.cleared).count() as f64 / n,
        episodes: stats.len(),
    })
}

pub fn summarize_run(traces: &[EpisodeTrace]) -> Result<RunSummary> {
    let stats: Vec<EpisodeStats> = traces.iter().map(EpisodeStats::from_trace).collect();
    summarize_stats(&stats)
}

/// Per-UE time-averaged SINR samples for the CDF, pooled over episodes.
pub fn sinr_samples(stats: &[EpisodeStats]) -> Vec<f64> {
    stats
        .iter()
        .flat_map(|s| s.ue_sinr_db.iter().copied())
        .collect()
}

const SIGNIFICANT_DIGITS: i32 = 10;

/// Decimal rendering with at least ten significant digits.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS - 1 - magnitude).clamp(0, 20) as usize;
    format!("{x:.decimals$}")
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: String,
    pub ues_per_cell: usize,
    pub summary: RunSummary,
}

/// One line of an episodes CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: u32,
    pub total_reward: f64,
    pub ttis: u32,
    pub cleared: bool,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// `value,probability`
pub fn write_cdf(path: &Path, cdf: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["value", "probability"])?;
    for (v, p) in cdf {
        w.write_record([format_number(*v), format_number(*p)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `agent,q,peak,average,edge,cell_average,mean_clearance_ttis`
pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "agent",
        "q",
        "peak",
        "average",
        "edge",
        "cell_average",
        "mean_clearance_ttis",
    ])?;
    for r in rows {
        let t = &r.summary.throughput;
        w.write_record([
            r.agent.clone(),
            r.ues_per_cell.to_string(),
            format_number(t.peak),
            format_number(t.average),
            format_number(t.edge),
            format_number(t.cell_average),
            format_number(r.summary.mean_clearance_ttis),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `seed,episode,total_reward,ttis,cleared`
pub fn write_episodes(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "episode", "total_reward", "ttis", "cleared"])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.episode.to_string(),
            format_number(r.total_reward),
            r.ttis.to_string(),
            r.cleared.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `episode,tti,state,action,reward,alarm_count,mean_sinr_db,mean_rate_mbps`
pub fn write_trace(path: &Path, traces: &[EpisodeTrace]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "episode",
        "tti",
        "state",
        "action",
        "reward",
        "alarm_count",
        "mean_sinr_db",
        "mean_rate_mbps",
    ])?;
    let opt = |x: Option<f64>| x.map_or_else(|| "-inf".to_string(), format_number);
    for r in traces.iter().flat_map(|t| &t.rows) {
        w.write_record([
            r.episode.to_string(),
            r.tti.to_string(),
            r.state.to_string(),
            r.action.to_string(),
            format_number(r.reward),
            r.alarm_count.to_string(),
            opt(r.mean_sinr_db()),
            opt(r.mean_rate_mbps()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

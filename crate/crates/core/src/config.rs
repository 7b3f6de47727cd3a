//! Experiment configuration: a flat `section.key = value` text format with
//! `#` comments, defaults for every absent key, and an effective-config dump
//! that parses back to the same configuration.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dqn::{DqnConfig, ExplorationSchedule};
use crate::error::{Error, Result};
use crate::fault::FaultRates;
use crate::mdp::{EpisodeConfig, RewardSchedule};
use crate::nn::AdamConfig;
use crate::radio::ClusterConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    Random,
    Fifo,
    Dqn,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Random, AgentKind::Fifo, AgentKind::Dqn];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::Fifo => "fifo",
            AgentKind::Dqn => "dqn",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(AgentKind::Random),
            "fifo" => Ok(AgentKind::Fifo),
            "dqn" => Ok(AgentKind::Dqn),
            other => Err(format!(
                "unknown agent `{other}` (expected random, fifo or dqn)"
            )),
        }
    }
}

/// DQN hyperparameters other than the discount factor, which lives with the
/// episode settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    pub hidden_width: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub exploration: ExplorationSchedule,
}

impl Default for MlConfig {
    fn default() -> Self {
        let d = DqnConfig::default();
        Self {
            hidden_width: d.hidden_width,
            adam: d.adam,
            batch_size: d.batch_size,
            replay_capacity: d.replay_capacity,
            exploration: d.exploration,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Cluster layout and radio parameters; `ues_per_cell` is overridden per
    /// grid point from [`ExperimentConfig::ues_per_cell`].
    pub cluster: ClusterConfig,
    pub rates: FaultRates,
    /// Boresight rotation per azimuth fault, degrees.
    pub azimuth_delta_deg: f64,
    pub rewards: RewardSchedule,
    pub episode: EpisodeConfig,
    pub ml: MlConfig,
    pub agents: Vec<AgentKind>,
    pub seeds: Vec<u64>,
    pub ues_per_cell: Vec<usize>,
    pub output_dir: PathBuf,
    /// Also write per-TTI trace CSVs.
    pub write_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cluster: ClusterConfig::default(),
            rates: FaultRates::default(),
            azimuth_delta_deg: 30.0,
            rewards: RewardSchedule::default(),
            episode: EpisodeConfig::default(),
            ml: MlConfig::default(),
            agents: AgentKind::ALL.to_vec(),
            seeds: (0..20).collect(),
            ues_per_cell: vec![10],
            output_dir: PathBuf::from("results"),
            write_traces: false,
        }
    }
}

impl ExperimentConfig {
    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            hidden_width: self.ml.hidden_width,
            adam: self.ml.adam,
            batch_size: self.ml.batch_size,
            replay_capacity: self.ml.replay_capacity,
            exploration: self.ml.exploration,
            gamma: self.episode.gamma,
        }
    }

    /// Cluster settings for one grid point.
    pub fn cluster_for(&self, ues_per_cell: usize) -> ClusterConfig {
        ClusterConfig {
            ues_per_cell,
            ..self.cluster
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        self.cluster.validate()?;
        self.episode.validate()?;
        self.dqn_config().validate()?;
        if self.episode.zeta == 0 {
            return fail("episode.zeta must be at least 1");
        }
        if !self.azimuth_delta_deg.is_finite() {
            return fail("faults.azimuth_delta_deg must be finite");
        }
        if self.agents.is_empty() {
            return fail("experiment.agents must name at least one agent");
        }
        if self.seeds.is_empty() {
            return fail("experiment.seeds must list at least one seed");
        }
        if self.ues_per_cell.is_empty() || self.ues_per_cell.contains(&0) {
            return fail("experiment.ues_per_cell must list positive values");
        }
        let has_dupes = |n: usize, distinct: usize| n != distinct;
        if has_dupes(
            self.agents.len(),
            self.agents.iter().collect::<HashSet<_>>().len(),
        ) || has_dupes(
            self.seeds.len(),
            self.seeds.iter().collect::<HashSet<_>>().len(),
        ) || has_dupes(
            self.ues_per_cell.len(),
            self.ues_per_cell.iter().collect::<HashSet<_>>().len(),
        ) {
            return fail("experiment lists must not repeat entries");
        }
        Ok(())
    }

    /// Every key with its effective value, in a form [`parse_config`] reads
    /// back to an identical configuration.
    pub fn to_text(&self) -> String {
        let c = &self.cluster;
        let m = &self.ml;
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut section = |title: &str, entries: Vec<(&str, String)>| {
            let _ = writeln!(s, "# {title}");
            for (k, v) in entries {
                let _ = writeln!(s, "{k} = {v}");
            }
            s.push('\n');
        };
        section(
            "radio environment",
            vec![
                (
                    "cluster.inter_site_distance_m",
                    c.inter_site_distance_m.to_string(),
                ),
                ("cluster.num_sites", c.num_sites.to_string()),
                ("cluster.sectors_per_site", c.sectors_per_site.to_string()),
                ("cluster.carrier_freq_mhz", c.carrier_freq_mhz.to_string()),
                ("cluster.bandwidth_hz", c.bandwidth_hz.to_string()),
                ("cluster.bs_tx_power_dbm", c.bs_tx_power_dbm.to_string()),
                ("cluster.bs_height_m", c.bs_height_m.to_string()),
                ("cluster.ue_height_m", c.ue_height_m.to_string()),
                (
                    "cluster.electrical_tilt_deg",
                    c.electrical_tilt_deg.to_string(),
                ),
                ("cluster.shadow_sigma_db", c.shadow_sigma_db.to_string()),
                (
                    "cluster.noise_density_dbm_hz",
                    c.noise_density_dbm_hz.to_string(),
                ),
                ("cluster.ue_speed_kmh", c.ue_speed_kmh.to_string()),
                ("cluster.sinr_cap_db", c.sinr_cap_db.to_string()),
                ("cluster.diversity_gain_db", c.diversity_gain_db.to_string()),
            ],
        );
        section(
            "fault process: p0 no event, p1..p4 raise, p5..p8 spontaneous clear",
            vec![
                (
                    "faults.p",
                    join(
                        self.rates
                            .probabilities()
                            .iter()
                            .map(f64::to_string)
                            .collect(),
                    ),
                ),
                (
                    "faults.azimuth_delta_deg",
                    self.azimuth_delta_deg.to_string(),
                ),
            ],
        );
        section(
            "rewards: r1 increase, r2 unchanged, r3 decrease, r4 all cleared",
            vec![
                ("rewards.r1", self.rewards.r1.to_string()),
                ("rewards.r2", self.rewards.r2.to_string()),
                ("rewards.r3", self.rewards.r3.to_string()),
                ("rewards.r4", self.rewards.r4.to_string()),
            ],
        );
        section(
            "episodes",
            vec![
                ("episode.tau", self.episode.tau.to_string()),
                ("episode.zeta", self.episode.zeta.to_string()),
                ("episode.gamma", self.episode.gamma.to_string()),
            ],
        );
        section(
            "deep Q-network",
            vec![
                ("ml.hidden_width", m.hidden_width.to_string()),
                ("ml.learning_rate", m.adam.learning_rate.to_string()),
                ("ml.beta1", m.adam.beta1.to_string()),
                ("ml.beta2", m.adam.beta2.to_string()),
                ("ml.adam_epsilon", m.adam.epsilon.to_string()),
                ("ml.batch_size", m.batch_size.to_string()),
                ("ml.replay_capacity", m.replay_capacity.to_string()),
                ("ml.epsilon", m.exploration.epsilon.to_string()),
                ("ml.epsilon_decay", m.exploration.decay.to_string()),
                ("ml.epsilon_min", m.exploration.epsilon_min.to_string()),
            ],
        );
        section(
            "experiment grid",
            vec![
                (
                    "experiment.agents",
                    join(self.agents.iter().map(|a| a.to_string()).collect()),
                ),
                (
                    "experiment.seeds",
                    join(self.seeds.iter().map(u64::to_string).collect()),
                ),
                (
                    "experiment.ues_per_cell",
                    join(self.ues_per_cell.iter().map(usize::to_string).collect()),
                ),
                (
                    "experiment.output_dir",
                    self.output_dir.display().to_string(),
                ),
                ("experiment.write_traces", self.write_traces.to_string()),
            ],
        );
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    }
}

fn parse_scalar<T: FromStr>(raw: &str) -> std::result::Result<T, String> {
    raw.parse::<T>()
        .map_err(|_| format!("cannot parse `{raw}` as {}", std::any::type_name::<T>()))
}

fn parse_list<T: FromStr>(raw: &str) -> std::result::Result<Vec<T>, String> {
    raw.split(',')
        .map(|part| parse_scalar(part.trim()))
        .collect()
}

/// Parses configuration text. `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::ConfigParse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        apply_key(&mut cfg, key, value).map_err(err)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_key(cfg: &mut ExperimentConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    let c = &mut cfg.cluster;
    let m = &mut cfg.ml;
    match key {
        "cluster.inter_site_distance_m" => c.inter_site_distance_m = parse_scalar(v)?,
        "cluster.num_sites" => c.num_sites = parse_scalar(v)?,
        "cluster.sectors_per_site" => c.sectors_per_site = parse_scalar(v)?,
        "cluster.carrier_freq_mhz" => c.carrier_freq_mhz = parse_scalar(v)?,
        "cluster.bandwidth_hz" => c.bandwidth_hz = parse_scalar(v)?,
        "cluster.bs_tx_power_dbm" => c.bs_tx_power_dbm = parse_scalar(v)?,
        "cluster.bs_height_m" => c.bs_height_m = parse_scalar(v)?,
        "cluster.ue_height_m" => c.ue_height_m = parse_scalar(v)?,
        "cluster.electrical_tilt_deg" => c.electrical_tilt_deg = parse_scalar(v)?,
        "cluster.shadow_sigma_db" => c.shadow_sigma_db = parse_scalar(v)?,
        "cluster.noise_density_dbm_hz" => c.noise_density_dbm_hz = parse_scalar(v)?,
        "cluster.ue_speed_kmh" => c.ue_speed_kmh = parse_scalar(v)?,
        "cluster.sinr_cap_db" => c.sinr_cap_db = parse_scalar(v)?,
        "cluster.diversity_gain_db" => c.diversity_gain_db = parse_scalar(v)?,
        "faults.p" => {
            cfg.rates = FaultRates::new(&parse_list::<f64>(v)?).map_err(|e| e.to_string())?
        }
        "faults.azimuth_delta_deg" => cfg.azimuth_delta_deg = parse_scalar(v)?,
        "rewards.r1" => cfg.rewards.r1 = parse_scalar(v)?,
        "rewards.r2" => cfg.rewards.r2 = parse_scalar(v)?,
        "rewards.r3" => cfg.rewards.r3 = parse_scalar(v)?,
        "rewards.r4" => cfg.rewards.r4 = parse_scalar(v)?,
        "episode.tau" => cfg.episode.tau = parse_scalar(v)?,
        "episode.zeta" => cfg.episode.zeta = parse_scalar(v)?,
        "episode.gamma" => cfg.episode.gamma = parse_scalar(v)?,
        "ml.hidden_width" => m.hidden_width = parse_scalar(v)?,
        "ml.learning_rate" => m.adam.learning_rate = parse_scalar(v)?,
        "ml.beta1" => m.adam.beta1 = parse_scalar(v)?,
        "ml.beta2" => m.adam.beta2 = parse_scalar(v)?,
        "ml.adam_epsilon" => m.adam.epsilon = parse_scalar(v)?,
        "ml.batch_size" => m.batch_size = parse_scalar(v)?,
        "ml.replay_capacity" => m.replay_capacity = parse_scalar(v)?,
        "ml.epsilon" => m.exploration.epsilon = parse_scalar(v)?,
        "ml.epsilon_decay" => m.exploration.decay = parse_scalar(v)?,
        "ml.epsilon_min" => m.exploration.epsilon_min = parse_scalar(v)?,
        "experiment.agents" => cfg.agents = parse_list(v)?,
        "experiment.seeds" => cfg.seeds = parse_list(v)?,
        "experiment.ues_per_cell" => cfg.ues_per_cell = parse_list(v)?,
        "experiment.output_dir" => {
            if v.is_empty() {
                return Err("experiment.output_dir must not be empty".into());
            }
            cfg.output_dir = PathBuf::from(v)
        }
        "experiment.write_traces" => cfg.write_traces = parse_scalar(v)?,
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

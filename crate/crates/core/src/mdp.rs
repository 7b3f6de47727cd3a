//! The fault-management MDP: three states, five actions, the alarm-count
//! reward and the TTI clock.

use std::fmt;

use crate::error::{Error, Result};
use crate::fault::{sample_event, AlarmType, FaultEngine, FaultKind, FaultRates, FaultRegister};
use crate::radio::{ClusterConfig, RadioEnv, RadioSnapshot, TTI_MS};
use crate::rng::{SeedStreams, SimRng, Stream};

/// Cell whose faults the agent is responsible for.
pub const SERVING_CELL: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MdpState {
    /// No actions issued yet.
    Transient,
    AlarmsIncreased,
    AlarmsDecreased,
}

impl MdpState {
    pub const COUNT: usize = 3;
    pub const ALL: [MdpState; 3] = [
        MdpState::Transient,
        MdpState::AlarmsIncreased,
        MdpState::AlarmsDecreased,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MdpAction {
    NoOp,
    NeighborUp,
    EnableDiversity,
    RecoverLosses,
    ResetAzimuth,
}

impl MdpAction {
    pub const COUNT: usize = 5;
    pub const ALL: [MdpAction; 5] = [
        MdpAction::NoOp,
        MdpAction::NeighborUp,
        MdpAction::EnableDiversity,
        MdpAction::RecoverLosses,
        MdpAction::ResetAzimuth,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The alarm this action clears.
    pub fn clears(self) -> Option<AlarmType> {
        match self {
            MdpAction::NoOp => None,
            MdpAction::NeighborUp => Some(AlarmType::NeighborDown),
            MdpAction::EnableDiversity => Some(AlarmType::DiversityFailed),
            MdpAction::RecoverLosses => Some(AlarmType::FeederFault),
            MdpAction::ResetAzimuth => Some(AlarmType::AzimuthChanged),
        }
    }

    pub fn clearing(alarm: AlarmType) -> Self {
        match alarm {
            AlarmType::NeighborDown => MdpAction::NeighborUp,
            AlarmType::DiversityFailed => MdpAction::EnableDiversity,
            AlarmType::FeederFault => MdpAction::RecoverLosses,
            AlarmType::AzimuthChanged => MdpAction::ResetAzimuth,
        }
    }
}

impl fmt::Display for MdpAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSchedule {
    /// Alarm count increased.
    pub r1: f64,
    /// Alarm count unchanged.
    pub r2: f64,
    /// Alarm count decreased.
    pub r3: f64,
    /// All alarms cleared.
    pub r4: f64,
}

impl Default for RewardSchedule {
    fn default() -> Self {
        Self {
            r1: -1.0,
            r2: 0.0,
            r3: 1.0,
            r4: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    /// TTIs per episode.
    pub tau: u32,
    /// Number of episodes.
    pub zeta: u32,
    /// Discount factor.
    pub gamma: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            tau: 20,
            zeta: 50,
            gamma: 0.95,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::InvalidConfig("tau must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Reward for moving from `prev` to `cur` active alarm types.
///
/// Reaching zero alarms dominates every other case; an increase from zero
/// is treated as an increase.
pub fn reward(prev: usize, cur: usize, schedule: &RewardSchedule) -> f64 {
    if cur == 0 {
        schedule.r4
    } else if cur < prev {
        schedule.r3
    } else if cur == prev {
        schedule.r2
    } else {
        schedule.r1
    }
}

/// Next MDP state; an unchanged alarm count keeps the current state.
pub fn transition(current: MdpState, prev: usize, cur: usize) -> MdpState {
    use std::cmp::Ordering::*;
    match cur.cmp(&prev) {
        Greater => MdpState::AlarmsIncreased,
        Less => MdpState::AlarmsDecreased,
        Equal => current,
    }
}

/// One-hot encoding over the three states.
pub fn encode_state(state: MdpState) -> [f64; MdpState::COUNT] {
    let mut v = [0.0; MdpState::COUNT];
    v[state.index()] = 1.0;
    v
}

/// Everything that happened during one TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// 1-based TTI index within the episode.
    pub tti: u32,
    pub event: FaultKind,
    pub action: MdpAction,
    pub prev_state: MdpState,
    pub next_state: MdpState,
    pub prev_alarm_count: usize,
    pub alarm_count: usize,
    pub reward: f64,
    pub terminal: bool,
    pub radio: RadioSnapshot,
}

/// The radio cluster plus fault process, exposed as an episodic environment.
///
/// Each episode restarts from the initial drop with every cell healthy, and
/// draws faults and mobility from per-episode streams, so two agents run on
/// the same seed face the same fault realisation.
#[derive(Debug, Clone)]
pub struct SonEnv {
    initial: RadioEnv,
    radio: RadioEnv,
    engine: FaultEngine,
    register: FaultRegister,
    rates: FaultRates,
    rewards: RewardSchedule,
    tau: u32,
    streams: SeedStreams,
    episode: u32,
    t: u32,
    state: MdpState,
    finished: bool,
    fault_rng: SimRng,
    target_rng: SimRng,
    mobility_rng: SimRng,
}

impl SonEnv {
    pub fn new(
        cluster: ClusterConfig,
        rates: FaultRates,
        rewards: RewardSchedule,
        tau: u32,
        azimuth_delta_deg: f64,
        seed: u64,
    ) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidConfig("tau must be at least 1".into()));
        }
        let streams = SeedStreams::new(seed);
        let radio = RadioEnv::build(
            cluster,
            &mut streams.rng(Stream::Geometry),
            &mut streams.rng(Stream::Shadowing),
        )?;
        let mut env = Self {
            initial: radio.clone(),
            radio,
            engine: FaultEngine::new(SERVING_CELL, azimuth_delta_deg),
            register: FaultRegister::new(),
            rates,
            rewards,
            tau,
            streams,
            episode: 0,
            t: 0,
            state: MdpState::Transient,
            finished: false,
            fault_rng: streams.rng(Stream::FaultKind(0)),
            target_rng: streams.rng(Stream::FaultTarget(0)),
            mobility_rng: streams.rng(Stream::Mobility(0)),
        };
        env.reset(0);
        Ok(env)
    }

    /// Starts episode `episode` from the healthy initial cluster.
    pub fn reset(&mut self, episode: u32) {
        self.radio = self.initial.clone();
        self.engine.reset();
        self.register = FaultRegister::new();
        self.episode = episode;
        self.t = 0;
        self.state = MdpState::Transient;
        self.finished = false;
        self.fault_rng = self.streams.rng(Stream::FaultKind(episode));
        self.target_rng = self.streams.rng(Stream::FaultTarget(episode));
        self.mobility_rng = self.streams.rng(Stream::Mobility(episode));
    }

    pub fn state(&self) -> MdpState {
        self.state
    }

    pub fn register(&self) -> &FaultRegister {
        &self.register
    }

    pub fn radio(&self) -> &RadioEnv {
        &self.radio
    }

    pub fn tti(&self) -> u32 {
        self.t
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn episode(&self) -> u32 {
        self.episode
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Injects an alarm outside the random process (scripted scenarios, tests).
    pub fn inject(&mut self, alarm: AlarmType) {
        self.engine.apply(
            alarm,
            &mut self.radio.cells,
            &mut self.register,
            &mut self.target_rng,
        );
        self.radio.handover();
    }

    /// Advances one TTI: fault event, agent action, reward, state, clock,
    /// mobility and radio observables.
    pub fn step(&mut self, action: MdpAction) -> Result<StepOutcome> {
        let event = sample_event(&self.rates, &self.register, &mut self.fault_rng);
        self.step_with_event(event, action)
    }

    /// Like [`SonEnv::step`] with a caller-chosen fault event.
    pub fn step_with_event(&mut self, event: FaultKind, action: MdpAction) -> Result<StepOutcome> {
        if self.finished {
            return Err(Error::EpisodeFinished { tti: self.t });
        }
        let prev_count = self.register.active_count();
        let cells = &mut self.radio.cells;
        match event {
            FaultKind::Normal => {}
            FaultKind::Raise(a) => {
                self.engine
                    .apply(a, cells, &mut self.register, &mut self.target_rng)
            }
            FaultKind::Clear(a) => {
                self.engine.clear(a, cells, &mut self.register);
            }
        }
        if let Some(alarm) = action.clears() {
            self.engine.clear(alarm, cells, &mut self.register);
        }
        let cur_count = self.register.active_count();
        let r = reward(prev_count, cur_count, &self.rewards);
        let prev_state = self.state;
        self.state = transition(prev_state, prev_count, cur_count);
        self.t += 1;
        let terminal = cur_count == 0 || self.t >= self.tau;
        self.finished = terminal;

        self.radio.step_mobility(TTI_MS, &mut self.mobility_rng);
        Ok(StepOutcome {
            tti: self.t,
            event,
            action,
            prev_state,
            next_state: self.state,
            prev_alarm_count: prev_count,
            alarm_count: cur_count,
            reward: r,
            terminal,
            radio: self.radio.snapshot(),
        })
    }
}

/// A fault-handling policy driven by [`run_episode`].
pub trait Agent {
    /// Called once before the first TTI of every episode.
    fn begin_episode(&mut self) {}

    /// Chooses the action for the coming TTI. `register` is the alarm
    /// register as it stood at the end of the previous TTI.
    fn select_action(&mut self, state: MdpState, register: &FaultRegister) -> MdpAction;

    /// Sees the outcome of the TTI it just acted in.
    fn observe(&mut self, _outcome: &StepOutcome) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub episode: u32,
    pub total_reward: f64,
    pub ttis: u32,
    /// The alarm register was empty when the episode ended.
    pub cleared: bool,
}

/// Resets `env` to `episode` and plays it to the end with `agent`.
pub fn run_episode<A: Agent + ?Sized>(
    env: &mut SonEnv,
    agent: &mut A,
    episode: u32,
    mut on_step: impl FnMut(&StepOutcome),
) -> Result<EpisodeSummary> {
    env.reset(episode);
    agent.begin_episode();
    let mut total = 0.0;
    loop {
        let action = agent.select_action(env.state(), env.register());
        let out = env.step(action)?;
        agent.observe(&out);
        total += out.reward;
        on_step(&out);
        if out.terminal {
            return Ok(EpisodeSummary {
                episode,
                total_reward: total,
                ttis: out.tti,
                cleared: out.alarm_count == 0,
            });
        }
    }
}

//! Deep Q-learning for fault handling: epsilon-greedy action selection with
//! per-episode decay, a bounded replay memory, bootstrapped targets and one
//! Adam step per TTI.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fault::FaultRegister;
use crate::mdp::{
    encode_state, run_episode, Agent, EpisodeSummary, MdpAction, MdpState, SonEnv, StepOutcome,
};
use crate::nn::{Adam, AdamConfig, Gradients, QNetwork};
use crate::rng::SimRng;

/// One replay-memory record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: MdpState,
    pub action: MdpAction,
    pub reward: f64,
    pub next_state: MdpState,
    pub next_is_terminal: bool,
}

impl Experience {
    pub fn from_outcome(out: &StepOutcome) -> Self {
        Self {
            state: out.prev_state,
            action: out.action,
            reward: out.reward,
            next_state: out.next_state,
            next_is_terminal: out.terminal,
        }
    }
}

/// Bounded FIFO store of experiences; the oldest record is evicted first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMemory {
    buffer: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            buffer: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, e: Experience) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buffer.iter()
    }

    /// Up to `batch` distinct records chosen uniformly; everything when the
    /// memory holds fewer.
    pub fn sample(&self, batch: usize, rng: &mut SimRng) -> Vec<Experience> {
        let n = self.buffer.len();
        if batch >= n {
            return self.buffer.iter().copied().collect();
        }
        index::sample(rng, n, batch)
            .into_iter()
            .map(|i| self.buffer[i])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationSchedule {
    pub epsilon: f64,
    pub decay: f64,
    pub epsilon_min: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            decay: 0.91,
            epsilon_min: 0.01,
        }
    }
}

impl ExplorationSchedule {
    /// `epsilon <- max(epsilon * decay, epsilon_min)`.
    pub fn decay(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.epsilon_min);
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice. A uniform draw below epsilon explores; with
/// `epsilon == 0` the choice is a pure function of `(state, net)`.
pub fn select_action(
    state: MdpState,
    net: &QNetwork,
    schedule: &ExplorationSchedule,
    rng: &mut SimRng,
) -> MdpAction {
    let r: f64 = rng.random();
    if r < schedule.epsilon {
        MdpAction::ALL[rng.random_range(0..MdpAction::COUNT)]
    } else {
        let q = net.forward(&encode_state(state));
        MdpAction::ALL[greedy_index(&q)]
    }
}

/// Bootstrapped regression target for one experience.
pub fn compute_target(exp: &Experience, net_prev: &QNetwork, gamma: f64) -> f64 {
    if exp.next_is_terminal {
        exp.reward
    } else {
        let q = net_prev.forward(&encode_state(exp.next_state));
        exp.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnConfig {
    pub hidden_width: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub exploration: ExplorationSchedule,
    pub gamma: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden_width: 24,
            adam: AdamConfig::default(),
            batch_size: 1,
            replay_capacity: 10_000,
            exploration: ExplorationSchedule::default(),
            gamma: 0.95,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_width == 0 {
            return fail("hidden width must be positive".into());
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return fail("batch size and replay capacity must be positive".into());
        }
        let e = self.exploration;
        if !(0.0 <= e.epsilon_min && e.epsilon_min <= e.epsilon && e.epsilon <= 1.0) {
            return fail(format!(
                "need 0 <= epsilon_min <= epsilon <= 1, got {} and {}",
                e.epsilon_min, e.epsilon
            ));
        }
        if !(e.decay > 0.0 && e.decay <= 1.0) {
            return fail(format!("epsilon decay must lie in (0, 1], got {}", e.decay));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        let a = self.adam;
        if !(a.learning_rate > 0.0)
            || !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || !(a.epsilon > 0.0)
        {
            return fail("adam hyperparameters out of range".into());
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> [usize; 4] {
        [
            MdpState::COUNT,
            self.hidden_width,
            self.hidden_width,
            MdpAction::COUNT,
        ]
    }
}

/// What one learning step did.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnReport {
    pub batch: Vec<Experience>,
    pub targets: Vec<f64>,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    net: QNetwork,
    optimizer: Adam,
    memory: ReplayMemory,
    schedule: ExplorationSchedule,
    gamma: f64,
    batch_size: usize,
    policy_rng: SimRng,
    replay_rng: SimRng,
    last_report: Option<LearnReport>,
}

impl DqnAgent {
    pub fn new(
        config: &DqnConfig,
        init_rng: &mut SimRng,
        policy_rng: SimRng,
        replay_rng: SimRng,
    ) -> Result<Self> {
        config.validate()?;
        let net = QNetwork::new(&config.layer_sizes(), init_rng);
        Ok(Self {
            optimizer: Adam::new(config.adam, &net),
            net,
            memory: ReplayMemory::new(config.replay_capacity),
            schedule: config.exploration,
            gamma: config.gamma,
            batch_size: config.batch_size,
            policy_rng,
            replay_rng,
            last_report: None,
        })
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn schedule(&self) -> &ExplorationSchedule {
        &self.schedule
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    pub fn last_report(&self) -> Option<&LearnReport> {
        self.last_report.as_ref()
    }

    /// Samples a batch, computes every target with the weights as they stand
    /// before this step, then takes one Adam step on the mean batch loss.
    pub fn learn(&mut self) -> Option<LearnReport> {
        if self.memory.is_empty() {
            return None;
        }
        let batch = self.memory.sample(self.batch_size, &mut self.replay_rng);
        let targets: Vec<f64> = batch
            .iter()
            .map(|e| compute_target(e, &self.net, self.gamma))
            .collect();

        let mut grads: Option<Gradients> = None;
        let mut loss = 0.0;
        for (e, y) in batch.iter().zip(&targets) {
            let (l, g) = self
                .net
                .backward(&encode_state(e.state), e.action.index(), *y);
            loss += l;
            match grads.as_mut() {
                Some(acc) => acc.add_assign(&g),
                None => grads = Some(g),
            }
        }
        let n = batch.len() as f64;
        let mut grads = grads.expect("batch is non-empty");
        grads.scale(1.0 / n);
        self.optimizer.step(&mut self.net, &grads);
        Some(LearnReport {
            batch,
            targets,
            loss: loss / n,
        })
    }

    /// Decays epsilon once, then plays and learns from one full episode.
    pub fn train_episode(&mut self, env: &mut SonEnv, episode: u32) -> Result<EpisodeSummary> {
        run_episode(env, self, episode, |_| {})
    }
}

impl Agent for DqnAgent {
    fn begin_episode(&mut self) {
        self.schedule.decay();
    }

    fn select_action(&mut self, state: MdpState, _register: &FaultRegister) -> MdpAction {
        select_action(state, &self.net, &self.schedule, &mut self.policy_rng)
    }

    fn observe(&mut self, outcome: &StepOutcome) {
        self.memory.push(Experience::from_outcome(outcome));
        self.last_report = self.learn();
    }
}

//! Comparison policies: uniform-random and first-in-first-out fault clearing.

use std::collections::VecDeque;

use rand::Rng;

use crate::fault::{AlarmType, FaultKind, FaultRegister};
use crate::mdp::{Agent, MdpAction, MdpState, StepOutcome};
use crate::rng::SimRng;

/// Clear-action for one active alarm type chosen uniformly; `a0` when
/// nothing is active.
pub fn random_policy(register: &FaultRegister, rng: &mut SimRng) -> MdpAction {
    let active = register.active_types();
    if active.is_empty() {
        return MdpAction::NoOp;
    }
    MdpAction::clearing(active[rng.random_range(0..active.len())])
}

#[derive(Debug, Clone)]
pub struct RandomAgent {
    rng: SimRng,
}

impl RandomAgent {
    pub fn new(rng: SimRng) -> Self {
        Self { rng }
    }
}

impl Agent for RandomAgent {
    fn select_action(&mut self, _state: MdpState, register: &FaultRegister) -> MdpAction {
        random_policy(register, &mut self.rng)
    }
}

/// Pending fault instances in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FifoQueue {
    pending: VecDeque<(AlarmType, u32)>,
}

impl FifoQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, alarm: AlarmType, tti: u32) {
        self.pending.push_back((alarm, tti));
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn head(&self) -> Option<(AlarmType, u32)> {
        self.pending.front().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(AlarmType, u32)> {
        self.pending.iter()
    }

    pub fn clear(&mut self) {
        self.pending.clear();
    }

    /// Drops the oldest pending instance of `alarm`, if any.
    pub fn remove_oldest(&mut self, alarm: AlarmType) -> bool {
        match self.pending.iter().position(|(a, _)| *a == alarm) {
            Some(i) => {
                self.pending.remove(i);
                true
            }
            None => false,
        }
    }

    /// Keeps the queue in step with one environment event.
    pub fn record(&mut self, event: FaultKind, tti: u32) {
        match event {
            FaultKind::Raise(a) => self.push(a, tti),
            FaultKind::Clear(a) => {
                self.remove_oldest(a);
            }
            FaultKind::Normal => {}
        }
    }
}

/// Pops the head of the queue and returns its clear-action; `a0` when empty.
pub fn fifo_policy(queue: &mut FifoQueue) -> MdpAction {
    match queue.pending.pop_front() {
        Some((alarm, _)) => MdpAction::clearing(alarm),
        None => MdpAction::NoOp,
    }
}

/// Handles one fault per TTI, starting the TTI after it appears.
#[derive(Debug, Clone, Default)]
pub struct FifoAgent {
    queue: FifoQueue,
}

impl FifoAgent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn queue(&self) -> &FifoQueue {
        &self.queue
    }
}

impl Agent for FifoAgent {
    fn begin_episode(&mut self) {
        self.queue.clear();
    }

    fn select_action(&mut self, _state: MdpState, register: &FaultRegister) -> MdpAction {
        // Entries whose alarm has since been cleared by other means are stale.
        while let Some((alarm, _)) = self.queue.head() {
            if register.is_active(alarm) {
                break;
            }
            self.queue.pending.pop_front();
        }
        fifo_policy(&mut self.queue)
    }

    fn observe(&mut self, outcome: &StepOutcome) {
        self.queue.record(outcome.event, outcome.tti);
    }
}

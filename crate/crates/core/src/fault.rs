//! Stochastic network faults and the alarm register.
//!
//! Fault identifiers follow the usual numbering of the cluster fault table:
//!
//! | id | event                         | id | event                      |
//! |----|-------------------------------|----|----------------------------|
//! | 0  | cluster normal                | 5  | feeder fault alarm cleared |
//! | 1  | antenna azimuth changed       | 6  | neighbour cell up again    |
//! | 2  | neighbour cell down           | 7  | transmit diversity normal  |
//! | 3  | transmit diversity failed     | 8  | antenna azimuth reset      |
//! | 4  | feeder fault (3 dB loss)      |    |                            |
//!
//! Ids 5 to 8 are spontaneous clears and only happen while their alarm is
//! active.
//!
//! The radio effect of every alarm is a function of its counter, so applying
//! and then clearing an alarm always restores the previous cell state.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::radio::CellState;
use crate::rng::SimRng;

/// Transmit power lost to a feeder fault.
pub const FEEDER_LOSS_DB: f64 = -3.0;

/// Alarm types tracked by the register (`u = 4`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlarmType {
    AzimuthChanged,
    NeighborDown,
    DiversityFailed,
    FeederFault,
}

impl AlarmType {
    pub const ALL: [AlarmType; 4] = [
        AlarmType::AzimuthChanged,
        AlarmType::NeighborDown,
        AlarmType::DiversityFailed,
        AlarmType::FeederFault,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Id of the fault event that raises this alarm.
    pub fn raise_id(self) -> u8 {
        self as u8 + 1
    }

    /// Id of the spontaneous event that clears this alarm.
    pub fn clear_id(self) -> u8 {
        match self {
            AlarmType::FeederFault => 5,
            AlarmType::NeighborDown => 6,
            AlarmType::DiversityFailed => 7,
            AlarmType::AzimuthChanged => 8,
        }
    }
}

/// One environment event per TTI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    Normal,
    Raise(AlarmType),
    Clear(AlarmType),
}

impl FaultKind {
    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(FaultKind::Normal),
            1..=4 => Some(FaultKind::Raise(AlarmType::ALL[id as usize - 1])),
            5..=8 => AlarmType::ALL
                .into_iter()
                .find(|a| a.clear_id() == id)
                .map(FaultKind::Clear),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            FaultKind::Normal => 0,
            FaultKind::Raise(a) => a.raise_id(),
            FaultKind::Clear(a) => a.clear_id(),
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Per-alarm-type instance counters; a bit is set while its counter is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FaultRegister {
    counts: [u32; 4],
}

impl FaultRegister {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, alarm: AlarmType) -> u32 {
        self.counts[alarm.index()]
    }

    pub fn is_active(&self, alarm: AlarmType) -> bool {
        self.count(alarm) > 0
    }

    /// `|phi_fault|`: number of set bits.
    pub fn active_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn is_clear(&self) -> bool {
        self.active_count() == 0
    }

    pub fn active_types(&self) -> Vec<AlarmType> {
        AlarmType::ALL
            .into_iter()
            .filter(|&a| self.is_active(a))
            .collect()
    }

    pub fn bits(&self) -> [bool; 4] {
        self.counts.map(|c| c > 0)
    }

    fn raise(&mut self, alarm: AlarmType) {
        self.counts[alarm.index()] += 1;
    }

    /// Returns false when the alarm was not active.
    fn lower(&mut self, alarm: AlarmType) -> bool {
        let c = &mut self.counts[alarm.index()];
        if *c == 0 {
            return false;
        }
        *c -= 1;
        true
    }
}

/// Categorical event probabilities `p_0..p_8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultRates {
    p: [f64; 9],
}

impl Default for FaultRates {
    fn default() -> Self {
        let ninth = 1.0 / 9.0;
        Self {
            p: [5.0 * ninth, ninth, ninth, ninth, ninth, 0.0, 0.0, 0.0, 0.0],
        }
    }
}

impl FaultRates {
    pub const TOLERANCE: f64 = 1e-9;

    /// Accepts 1 to 9 probabilities; missing trailing entries are zero.
    pub fn new(probabilities: &[f64]) -> Result<Self> {
        if probabilities.is_empty() || probabilities.len() > 9 {
            return Err(Error::InvalidConfig(format!(
                "fault rates need between 1 and 9 entries, got {}",
                probabilities.len()
            )));
        }
        let mut p = [0.0; 9];
        p[..probabilities.len()].copy_from_slice(probabilities);
        if let Some(bad) = p.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "fault probability {bad} outside [0, 1]"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "fault probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { p })
    }

    pub fn probabilities(&self) -> &[f64; 9] {
        &self.p
    }
}

/// Draws one event. Spontaneous clears of inactive alarms degrade to `Normal`.
pub fn sample_event(rates: &FaultRates, register: &FaultRegister, rng: &mut SimRng) -> FaultKind {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut id = 0u8;
    for (i, p) in rates.p.iter().enumerate() {
        acc += p;
        if u < acc {
            id = i as u8;
            break;
        }
        // Rounding can leave `acc` a hair below 1; fall back to the last
        // event with positive mass.
        if *p > 0.0 {
            id = i as u8;
        }
    }
    match FaultKind::from_id(id).expect("id below 9") {
        FaultKind::Clear(a) if !register.is_active(a) => FaultKind::Normal,
        kind => kind,
    }
}

/// Applies and reverts the radio effect of alarms.
///
/// Azimuth, diversity and feeder faults strike the designated serving cell;
/// neighbour-down faults take out one uniformly chosen up cell elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultEngine {
    pub serving_cell: usize,
    pub azimuth_delta_deg: f64,
    /// Neighbours taken down, most recent last. `None` records a
    /// neighbour-down alarm raised when no neighbour was left up.
    downed: Vec<Option<usize>>,
}

impl FaultEngine {
    pub fn new(serving_cell: usize, azimuth_delta_deg: f64) -> Self {
        Self {
            serving_cell,
            azimuth_delta_deg,
            downed: Vec::new(),
        }
    }

    pub fn reset(&mut self) {
        self.downed.clear();
    }

    pub fn downed_neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.downed.iter().flatten().copied()
    }

    /// Raises `alarm`, increments its counter and applies its radio effect.
    pub fn apply(
        &mut self,
        alarm: AlarmType,
        cells: &mut [CellState],
        register: &mut FaultRegister,
        rng: &mut SimRng,
    ) {
        if alarm == AlarmType::NeighborDown {
            let candidates: Vec<usize> = cells
                .iter()
                .enumerate()
                .filter(|(c, cell)| *c != self.serving_cell && cell.is_up)
                .map(|(c, _)| c)
                .collect();
            let victim = if candidates.is_empty() {
                None
            } else {
                Some(candidates[rng.random_range(0..candidates.len())])
            };
            if let Some(v) = victim {
                cells[v].is_up = false;
            }
            self.downed.push(victim);
        }
        register.raise(alarm);
        self.sync_serving(alarm, cells, register);
    }

    /// Reverts one instance of `alarm`; a no-op when it is not active.
    /// Returns whether an instance was cleared.
    pub fn clear(
        &mut self,
        alarm: AlarmType,
        cells: &mut [CellState],
        register: &mut FaultRegister,
    ) -> bool {
        if !register.lower(alarm) {
            return false;
        }
        if alarm == AlarmType::NeighborDown {
            if let Some(Some(v)) = self.downed.pop() {
                cells[v].is_up = true;
            }
        }
        self.sync_serving(alarm, cells, register);
        true
    }

    fn sync_serving(&self, alarm: AlarmType, cells: &mut [CellState], register: &FaultRegister) {
        let count = register.count(alarm);
        let Some(cell) = cells.get_mut(self.serving_cell) else {
            return;
        };
        match alarm {
            AlarmType::AzimuthChanged => {
                cell.azimuth_offset_deg = count as f64 * self.azimuth_delta_deg
            }
            AlarmType::DiversityFailed => cell.diversity_enabled = count == 0,
            AlarmType::FeederFault => {
                cell.tx_power_delta_db = if count > 0 { FEEDER_LOSS_DB } else { 0.0 }
            }
            AlarmType::NeighborDown => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::ClusterConfig;
    use crate::rng::{SeedStreams, Stream};

    fn cells() -> Vec<CellState> {
        let config = ClusterConfig::default();
        let s = SeedStreams::new(0);
        crate::radio::build_cluster(
            &config,
            &mut s.rng(Stream::Geometry),
            &mut s.rng(Stream::Shadowing),
        )
        .unwrap()
        .0
    }

    fn rng() -> SimRng {
        SeedStreams::new(99).rng(Stream::FaultTarget(0))
    }

    #[test]
    fn ids_round_trip_through_table_numbering() {
        for id in 0..9u8 {
            assert_eq!(FaultKind::from_id(id).unwrap().id(), id);
        }
        assert_eq!(
            FaultKind::from_id(5),
            Some(FaultKind::Clear(AlarmType::FeederFault))
        );
        assert_eq!(
            FaultKind::from_id(8),
            Some(FaultKind::Clear(AlarmType::AzimuthChanged))
        );
        assert_eq!(FaultKind::from_id(9), None);
    }

    #[test]
    fn certain_normal_rates_always_draw_normal() {
        let rates = FaultRates::new(&[1.0]).unwrap();
        let reg = FaultRegister::new();
        let mut r = rng();
        assert!((0..1000).all(|_| sample_event(&rates, &reg, &mut r) == FaultKind::Normal));
    }

    #[test]
    fn inadmissible_clear_degrades_to_normal() {
        let rates = FaultRates::new(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut reg = FaultRegister::new();
        let mut r = rng();
        assert_eq!(sample_event(&rates, &reg, &mut r), FaultKind::Normal);
        reg.raise(AlarmType::FeederFault);
        assert_eq!(
            sample_event(&rates, &reg, &mut r),
            FaultKind::Clear(AlarmType::FeederFault)
        );
    }

    #[test]
    fn rates_must_form_a_distribution() {
        assert!(FaultRates::new(&[0.5, 0.4]).is_err());
        assert!(FaultRates::new(&[1.2, -0.2]).is_err());
        assert!(FaultRates::new(&[]).is_err());
        assert!(FaultRates::new(&[0.1; 10]).is_err());
        assert!(FaultRates::new(&[1.0, 0.0, 0.0, 0.0, 0.0]).is_ok());
        let d = FaultRates::default();
        assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_event_changes_nothing() {
        // Normal is never dispatched to the engine; the register stays empty.
        let reg = FaultRegister::new();
        assert_eq!(reg.active_count(), 0);
        assert!(reg.is_clear());
    }

    #[test]
    fn feeder_fault_sets_loss_and_bit() {
        let mut cells = cells();
        let mut reg = FaultRegister::new();
        let mut engine = FaultEngine::new(0, 30.0);
        engine.apply(AlarmType::FeederFault, &mut cells, &mut reg, &mut rng());
        assert_eq!(cells[0].tx_power_delta_db, -3.0);
        assert!(reg.is_active(AlarmType::FeederFault));
        // Re-raising counts but does not compound the loss.
        engine.apply(AlarmType::FeederFault, &mut cells, &mut reg, &mut rng());
        assert_eq!(cells[0].tx_power_delta_db, -3.0);
        assert_eq!(reg.count(AlarmType::FeederFault), 2);
        assert_eq!(reg.active_count(), 1);
    }

    #[test]
    fn double_neighbor_down_counts_twice() {
        let mut cells = cells();
        let mut reg = FaultRegister::new();
        let mut engine = FaultEngine::new(0, 30.0);
        let mut r = rng();
        engine.apply(AlarmType::NeighborDown, &mut cells, &mut reg, &mut r);
        engine.apply(AlarmType::NeighborDown, &mut cells, &mut reg, &mut r);
        let down: Vec<usize> = (0..cells.len()).filter(|&c| !cells[c].is_up).collect();
        assert_eq!(down.len(), 2);
        assert!(!down.contains(&0));
        assert_eq!(reg.count(AlarmType::NeighborDown), 2);
        assert_eq!(reg.active_count(), 1);

        assert!(engine.clear(AlarmType::NeighborDown, &mut cells, &mut reg));
        assert!(reg.is_active(AlarmType::NeighborDown));
        assert_eq!(cells.iter().filter(|c| !c.is_up).count(), 1);
        assert!(engine.clear(AlarmType::NeighborDown, &mut cells, &mut reg));
        assert!(reg.is_clear());
        assert!(cells.iter().all(|c| c.is_up));
    }

    #[test]
    fn clearing_inactive_alarm_is_a_noop() {
        let mut cells = cells();
        let before = cells.clone();
        let mut reg = FaultRegister::new();
        let mut engine = FaultEngine::new(0, 30.0);
        for a in AlarmType::ALL {
            assert!(!engine.clear(a, &mut cells, &mut reg));
        }
        assert_eq!(cells, before);
        assert!(reg.is_clear());
    }

    #[test]
    fn apply_then_clear_restores_cells() {
        for a in AlarmType::ALL {
            let mut cells = cells();
            let before = cells.clone();
            let mut reg = FaultRegister::new();
            let mut engine = FaultEngine::new(0, 30.0);
            engine.apply(a, &mut cells, &mut reg, &mut rng());
            assert_ne!(cells, before, "{a:?} had no radio effect");
            engine.clear(a, &mut cells, &mut reg);
            assert_eq!(cells, before, "{a:?}");
            assert!(reg.is_clear());
        }
    }

    #[test]
    fn neighbor_down_without_candidates_still_counts() {
        let mut cells = vec![cells()[0].clone()];
        let mut reg = FaultRegister::new();
        let mut engine = FaultEngine::new(0, 30.0);
        engine.apply(AlarmType::NeighborDown, &mut cells, &mut reg, &mut rng());
        assert!(cells[0].is_up);
        assert_eq!(reg.count(AlarmType::NeighborDown), 1);
        engine.clear(AlarmType::NeighborDown, &mut cells, &mut reg);
        assert!(reg.is_clear());
    }
}

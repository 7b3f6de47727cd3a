//! Radio environment: hexagonal cluster geometry, COST231-Hata link budget,
//! downlink SINR, UE mobility with handover, and equal-share throughput.
//!
//! Coordinates are metres on a flat plane with the centre site at the origin.
//! Azimuths and bearings are compass angles in degrees: 0 is north (+y) and
//! angles grow clockwise.
//!
//! The link budget for UE `u` and cell `c` is
//!
//! ```text
//! rx[u][c] = P_tx + delta_c + A(bearing - azimuth_c) + tilt - PL(d) + shadow[u][c]
//! ```
//!
//! and every up cell other than the serving one is a full-buffer interferer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Half-power beamwidth of the three-sector horizontal pattern.
pub const ANTENNA_BEAMWIDTH_DEG: f64 = 65.0;
/// Front-to-back floor of the horizontal pattern.
pub const ANTENNA_MAX_ATTENUATION_DB: f64 = 20.0;
/// Vertical half-power beamwidth used to turn electrical tilt into a gain offset.
pub const VERTICAL_BEAMWIDTH_DEG: f64 = 10.0;
/// Links shorter than this are evaluated at this distance.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;
/// Standard deviation of the per-TTI heading change of a UE.
pub const HEADING_JITTER_RAD: f64 = 0.05;
/// Length of one TTI.
pub const TTI_MS: f64 = 1.0;

/// Full radio and geometry parameterisation of the cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub inter_site_distance_m: f64,
    pub num_sites: usize,
    pub sectors_per_site: usize,
    pub carrier_freq_mhz: f64,
    pub bandwidth_hz: f64,
    pub bs_tx_power_dbm: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub electrical_tilt_deg: f64,
    pub shadow_sigma_db: f64,
    pub noise_density_dbm_hz: f64,
    pub ues_per_cell: usize,
    pub ue_speed_kmh: f64,
    pub sinr_cap_db: f64,
    pub diversity_gain_db: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            inter_site_distance_m: 200.0,
            num_sites: 7,
            sectors_per_site: 3,
            carrier_freq_mhz: 2100.0,
            bandwidth_hz: 10e6,
            bs_tx_power_dbm: 46.0,
            bs_height_m: 25.0,
            ue_height_m: 1.5,
            electrical_tilt_deg: 4.0,
            shadow_sigma_db: 8.0,
            noise_density_dbm_hz: -174.0,
            ues_per_cell: 10,
            ue_speed_kmh: 3.0,
            sinr_cap_db: 30.0,
            diversity_gain_db: 3.0,
        }
    }
}

impl ClusterConfig {
    pub fn num_cells(&self) -> usize {
        self.num_sites * self.sectors_per_site
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.inter_site_distance_m > 0.0) || !self.inter_site_distance_m.is_finite() {
            return fail("inter_site_distance must be positive");
        }
        if !(1..=7).contains(&self.num_sites) {
            return fail("num_sites must be between 1 and 7 (centre site plus one tier)");
        }
        if self.sectors_per_site == 0 {
            return fail("sectors_per_site must be at least 1");
        }
        if !(self.bandwidth_hz > 0.0) {
            return fail("bandwidth must be positive");
        }
        if !(self.carrier_freq_mhz > 0.0) {
            return fail("carrier frequency must be positive");
        }
        if !(self.bs_height_m > 0.0) || !(self.ue_height_m > 0.0) {
            return fail("antenna heights must be positive");
        }
        if self.ues_per_cell == 0 {
            return fail("ues_per_cell must be at least 1");
        }
        if !(self.shadow_sigma_db >= 0.0) {
            return fail("shadow_sigma must be non-negative");
        }
        if !(self.ue_speed_kmh >= 0.0) {
            return fail("ue_speed must be non-negative");
        }
        if self.sinr_cap_db.is_nan() || !(self.diversity_gain_db >= 0.0) {
            return fail("sinr_cap must be a number and diversity_gain non-negative");
        }
        Ok(())
    }

    /// Thermal noise over the carrier bandwidth.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Fixed gain offset standing in for the vertical pattern at the horizon.
    pub fn tilt_offset_db(&self) -> f64 {
        -(12.0 * (self.electrical_tilt_deg / VERTICAL_BEAMWIDTH_DEG).powi(2))
            .min(ANTENNA_MAX_ATTENUATION_DB)
    }

    /// Distance covered by a UE in one TTI.
    pub fn step_distance_m(&self, duration_ms: f64) -> f64 {
        self.ue_speed_kmh / 3.6 * duration_ms / 1000.0
    }
}

/// One sector of one site.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub cell_id: usize,
    pub site_id: usize,
    pub site_position: [f64; 2],
    /// Default sector boresight.
    pub azimuth_deg: f64,
    /// Clockwise rotation introduced by faults.
    pub azimuth_offset_deg: f64,
    /// Transmit power change introduced by faults.
    pub tx_power_delta_db: f64,
    pub diversity_enabled: bool,
    pub is_up: bool,
}

impl CellState {
    pub fn effective_azimuth_deg(&self) -> f64 {
        (self.azimuth_deg + self.azimuth_offset_deg).rem_euclid(360.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub ue_id: usize,
    pub position: [f64; 2],
    /// `None` when no cell is up.
    pub serving_cell: Option<usize>,
    /// Log-normal shadowing per cell, in dB.
    pub shadow_db: Vec<f64>,
    /// Direction of travel in radians, mathematical convention.
    pub heading_rad: f64,
}

/// Axis-aligned region in which UEs move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Site positions: the centre site followed by the first tier at distance `L`.
pub fn site_positions(config: &ClusterConfig) -> Vec<[f64; 2]> {
    let l = config.inter_site_distance_m;
    let mut sites = vec![[0.0, 0.0]];
    for k in 0..config.num_sites.saturating_sub(1) {
        let bearing = (60.0 * k as f64).to_radians();
        sites.push([l * bearing.sin(), l * bearing.cos()]);
    }
    sites
}

/// Bounding box of the union of site hexagons.
pub fn cluster_bounds(config: &ClusterConfig) -> Bounds {
    let l = config.inter_site_distance_m;
    let (hx, hy) = (l / 3f64.sqrt(), l / 2.0);
    let sites = site_positions(config);
    let mut b = Bounds {
        min: [f64::INFINITY; 2],
        max: [f64::NEG_INFINITY; 2],
    };
    for s in &sites {
        b.min[0] = b.min[0].min(s[0] - hx);
        b.max[0] = b.max[0].max(s[0] + hx);
        b.min[1] = b.min[1].min(s[1] - hy);
        b.max[1] = b.max[1].max(s[1] + hy);
    }
    b
}

/// Compass bearing from `from` to `to`, in [0, 360).
pub fn bearing_deg(from: [f64; 2], to: [f64; 2]) -> f64 {
    let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
    dx.atan2(dy).to_degrees().rem_euclid(360.0)
}

/// Wraps an angle difference into (-180, 180].
pub fn normalize_offset_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    if a > 180.0 {
        a - 360.0
    } else {
        a
    }
}

fn in_site_hexagon(site: [f64; 2], p: [f64; 2], l: f64) -> bool {
    let (dx, dy) = (p[0] - site[0], p[1] - site[1]);
    (0..6).all(|k| {
        let b = (60.0 * k as f64).to_radians();
        dx * b.sin() + dy * b.cos() <= l / 2.0
    })
}

fn sector_of(bearing: f64, sectors: usize) -> usize {
    if sectors == 1 {
        return 0;
    }
    let width = 360.0 / sectors as f64;
    (((bearing + width / 2.0).rem_euclid(360.0)) / width) as usize % sectors
}

/// COST231-Hata urban path loss in dB (`distance_km` clamped at 1 m).
pub fn path_loss_cost231(
    distance_km: f64,
    freq_mhz: f64,
    bs_height_m: f64,
    ue_height_m: f64,
) -> f64 {
    let d = distance_km.max(MIN_LINK_DISTANCE_M / 1000.0);
    let log_f = freq_mhz.log10();
    let log_hb = bs_height_m.log10();
    let a_hm = (1.1 * log_f - 0.7) * ue_height_m - (1.56 * log_f - 0.8);
    46.3 + 33.9 * log_f - 13.82 * log_hb - a_hm + (44.9 - 6.55 * log_hb) * d.log10()
}

/// Horizontal three-sector antenna pattern, relative to boresight.
pub fn antenna_gain(bearing_offset_deg: f64) -> f64 {
    let theta = normalize_offset_deg(bearing_offset_deg);
    -(12.0 * (theta / ANTENNA_BEAMWIDTH_DEG).powi(2)).min(ANTENNA_MAX_ATTENUATION_DB)
}

/// Received power in dBm at `position` from `cell`, given the link shadowing.
pub fn received_power_dbm(
    position: [f64; 2],
    shadow_db: f64,
    cell: &CellState,
    config: &ClusterConfig,
) -> f64 {
    let (dx, dy) = (
        position[0] - cell.site_position[0],
        position[1] - cell.site_position[1],
    );
    let distance_km = dx.hypot(dy) / 1000.0;
    let gain = if config.sectors_per_site > 1 {
        antenna_gain(bearing_deg(cell.site_position, position) - cell.effective_azimuth_deg())
    } else {
        0.0
    };
    config.bs_tx_power_dbm + cell.tx_power_delta_db + gain + config.tilt_offset_db()
        - path_loss_cost231(
            distance_km,
            config.carrier_freq_mhz,
            config.bs_height_m,
            config.ue_height_m,
        )
        + shadow_db
}

/// Handover rule: the up cell with maximal received power, lowest index on ties.
pub fn best_server(ue: &UeState, cells: &[CellState], config: &ClusterConfig) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, cell) in cells.iter().enumerate().filter(|(_, c)| c.is_up) {
        let p = received_power_dbm(ue.position, ue.shadow_db[c], cell, config);
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((c, p));
        }
    }
    best.map(|(c, _)| c)
}

/// Re-evaluates the serving cell of every UE.
pub fn assign_serving(ues: &mut [UeState], cells: &[CellState], config: &ClusterConfig) {
    for ue in ues.iter_mut() {
        ue.serving_cell = best_server(ue, cells, config);
    }
}

/// Drops `q` UEs uniformly inside each sector's dominance area and draws
/// their shadowing.
pub fn build_cluster(
    config: &ClusterConfig,
    geometry_rng: &mut SimRng,
    shadow_rng: &mut SimRng,
) -> Result<(Vec<CellState>, Vec<UeState>)> {
    config.validate()?;
    let l = config.inter_site_distance_m;
    let sectors = config.sectors_per_site;
    let sites = site_positions(config);

    let mut cells = Vec::with_capacity(config.num_cells());
    for (s, &pos) in sites.iter().enumerate() {
        for k in 0..sectors {
            cells.push(CellState {
                cell_id: cells.len(),
                site_id: s,
                site_position: pos,
                azimuth_deg: 360.0 / sectors as f64 * k as f64,
                azimuth_offset_deg: 0.0,
                tx_power_delta_db: 0.0,
                diversity_enabled: true,
                is_up: true,
            });
        }
    }

    let half_x = l / 3f64.sqrt();
    let half_y = l / 2.0;
    let shadow = Normal::new(0.0, config.shadow_sigma_db)
        .map_err(|e| Error::InvalidConfig(format!("shadow sigma: {e}")))?;

    let mut ues = Vec::with_capacity(config.num_cells() * config.ues_per_cell);
    for cell in &cells {
        let site = cell.site_position;
        let mut placed = 0;
        while placed < config.ues_per_cell {
            let p = [
                site[0] + geometry_rng.random_range(-half_x..half_x),
                site[1] + geometry_rng.random_range(-half_y..half_y),
            ];
            if !in_site_hexagon(site, p, l) {
                continue;
            }
            if sector_of(bearing_deg(site, p), sectors) != cell.cell_id % sectors {
                continue;
            }
            let heading = geometry_rng.random_range(0.0..std::f64::consts::TAU);
            ues.push(UeState {
                ue_id: ues.len(),
                position: p,
                serving_cell: None,
                shadow_db: Vec::new(),
                heading_rad: heading,
            });
            placed += 1;
        }
    }
    for ue in &mut ues {
        ue.shadow_db = (0..cells.len())
            .map(|_| shadow.sample(shadow_rng))
            .collect();
    }
    assign_serving(&mut ues, &cells, config);
    Ok((cells, ues))
}

/// Downlink SINR of `ue` in dB, or `-inf` when the UE is in outage.
pub fn compute_sinr(ue: &UeState, cells: &[CellState], config: &ClusterConfig) -> f64 {
    let Some(serving) = ue.serving_cell.filter(|&c| cells[c].is_up) else {
        return f64::NEG_INFINITY;
    };
    let mut interference_mw = 10f64.powf(config.noise_power_dbm() / 10.0);
    let mut signal_dbm = f64::NEG_INFINITY;
    for (c, cell) in cells.iter().enumerate().filter(|(_, c)| c.is_up) {
        let p = received_power_dbm(ue.position, ue.shadow_db[c], cell, config);
        if c == serving {
            signal_dbm = p;
        } else {
            interference_mw += 10f64.powf(p / 10.0);
        }
    }
    let mut sinr = signal_dbm - 10.0 * interference_mw.log10();
    if !cells[serving].diversity_enabled {
        sinr -= config.diversity_gain_db;
    }
    sinr.min(config.sinr_cap_db)
}

/// Moves every UE along its heading, reflecting at the cluster bounds.
pub fn step_mobility(
    ues: &mut [UeState],
    config: &ClusterConfig,
    bounds: &Bounds,
    duration_ms: f64,
    rng: &mut SimRng,
) {
    let step = config.step_distance_m(duration_ms);
    let turn = Normal::new(0.0, HEADING_JITTER_RAD).expect("constant jitter is valid");
    for ue in ues.iter_mut() {
        ue.heading_rad += turn.sample(rng);
        if step == 0.0 {
            continue;
        }
        let mut dir = [ue.heading_rad.cos(), ue.heading_rad.sin()];
        let mut p = [
            ue.position[0] + step * dir[0],
            ue.position[1] + step * dir[1],
        ];
        for i in 0..2 {
            if p[i] < bounds.min[i] {
                p[i] = 2.0 * bounds.min[i] - p[i];
                dir[i] = -dir[i];
            } else if p[i] > bounds.max[i] {
                p[i] = 2.0 * bounds.max[i] - p[i];
                dir[i] = -dir[i];
            }
        }
        ue.position = p;
        ue.heading_rad = dir[1].atan2(dir[0]);
    }
}

/// Equal-share downlink rates: each UE gets `B / q_cell` of its serving cell.
///
/// Returns per-UE and per-cell rates in Mbps. `sinr_db[i]` belongs to `ues[i]`.
pub fn compute_throughputs(
    ues: &[UeState],
    sinr_db: &[f64],
    num_cells: usize,
    config: &ClusterConfig,
) -> (Vec<f64>, Vec<f64>) {
    let mut attached = vec![0usize; num_cells];
    for (ue, s) in ues.iter().zip(sinr_db) {
        if let (Some(c), false) = (ue.serving_cell, *s == f64::NEG_INFINITY) {
            attached[c] += 1;
        }
    }
    let mut ue_rates = vec![0.0; ues.len()];
    let mut cell_rates = vec![0.0; num_cells];
    for (i, (ue, &s)) in ues.iter().zip(sinr_db).enumerate() {
        let Some(c) = ue.serving_cell else { continue };
        if s == f64::NEG_INFINITY {
            continue;
        }
        let share_hz = config.bandwidth_hz / attached[c] as f64;
        let rate = share_hz * (1.0 + 10f64.powf(s / 10.0)).log2() / 1e6;
        ue_rates[i] = rate;
        cell_rates[c] += rate;
    }
    (ue_rates, cell_rates)
}

/// The live radio state of one simulation run.
#[derive(Debug, Clone)]
pub struct RadioEnv {
    pub config: ClusterConfig,
    pub cells: Vec<CellState>,
    pub ues: Vec<UeState>,
    pub bounds: Bounds,
}

/// Per-TTI radio observables.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioSnapshot {
    pub sinr_db: Vec<f64>,
    pub ue_rate_mbps: Vec<f64>,
    pub cell_rate_mbps: Vec<f64>,
}

impl RadioEnv {
    pub fn build(
        config: ClusterConfig,
        geometry_rng: &mut SimRng,
        shadow_rng: &mut SimRng,
    ) -> Result<Self> {
        let (cells, ues) = build_cluster(&config, geometry_rng, shadow_rng)?;
        let bounds = cluster_bounds(&config);
        Ok(Self {
            config,
            cells,
            ues,
            bounds,
        })
    }

    pub fn handover(&mut self) {
        assign_serving(&mut self.ues, &self.cells, &self.config);
    }

    pub fn step_mobility(&mut self, duration_ms: f64, rng: &mut SimRng) {
        step_mobility(&mut self.ues, &self.config, &self.bounds, duration_ms, rng);
        self.handover();
    }

    pub fn sinr_db(&self) -> Vec<f64> {
        self.ues
            .iter()
            .map(|ue| compute_sinr(ue, &self.cells, &self.config))
            .collect()
    }

    pub fn snapshot(&self) -> RadioSnapshot {
        let sinr_db = self.sinr_db();
        let (ue_rate_mbps, cell_rate_mbps) =
            compute_throughputs(&self.ues, &sinr_db, self.cells.len(), &self.config);
        RadioSnapshot {
            sinr_db,
            ue_rate_mbps,
            cell_rate_mbps,
        }
    }
}

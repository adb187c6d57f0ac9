//! Network model: scenarios (channels, multicast groups, power constants) and
//! exact evaluation of SINR, rates, power consumption, and energy efficiency
//! for candidate beamformer/selection solutions.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LN2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Static power/efficiency constants of the network hardware.
///
/// All powers are in watts. `n0_dbw` is the noise power over the whole band
/// in dBW. Defaults follow the standard simulation constants used throughout
/// the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// Power-amplifier efficiency, in (0, 1].
    pub eta: f64,
    /// Power drawn by one active RF chain.
    pub p_rf: f64,
    /// Static power per base station.
    pub p_sta: f64,
    /// Static power per served user.
    pub p_ue: f64,
    /// Per-antenna transmit power cap.
    pub p_max: f64,
    /// Noise power over the band, dBW.
    pub n0_dbw: f64,
    /// System bandwidth, Hz.
    pub bandwidth_hz: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            eta: 0.35,
            p_rf: 0.4,
            p_sta: 4.5,
            p_ue: 0.1,
            p_max: 1.0,
            n0_dbw: -125.0,
            bandwidth_hz: 20e6,
        }
    }
}

impl PowerModel {
    /// Fixed power floor: `B*p_sta + K*p_ue`. Always derived, never cached.
    pub fn p0(&self, num_bs: usize, num_users: usize) -> f64 {
        num_bs as f64 * self.p_sta + num_users as f64 * self.p_ue
    }

    /// Linear noise power in watts.
    pub fn n0_linear(&self) -> f64 {
        10f64.powf(self.n0_dbw / 10.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ModelError::Config(format!("eta must be in (0,1], got {}", self.eta)));
        }
        for (name, v) in [
            ("p_rf", self.p_rf),
            ("p_sta", self.p_sta),
            ("p_ue", self.p_ue),
            ("p_max", self.p_max),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.n0_dbw.is_finite() {
            return Err(ModelError::Config("n0_dbw must be finite".into()));
        }
        Ok(())
    }
}

/// How users are placed relative to the base stations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Every BS-user distance equals `meters`.
    FixedDistance { meters: f64 },
    /// Base stations on a line with spacing `2*cell_radius_m`; users drawn
    /// uniformly along the segment spanned by the outermost BSs (or within
    /// the single cell when there is one BS). Distances clamped to 10 m.
    UniformLine { cell_radius_m: f64 },
}

impl Default for Placement {
    fn default() -> Self {
        Placement::FixedDistance { meters: 250.0 }
    }
}

fn default_num_bs() -> usize {
    2
}
fn default_groups_per_bs() -> usize {
    2
}
fn default_users_per_group() -> usize {
    2
}
fn default_antennas() -> Vec<usize> {
    vec![16, 16]
}

/// Everything needed to generate a scenario deterministically from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub power: PowerModel,
    pub num_bs: usize,
    /// Antenna count per BS; length must equal `num_bs`.
    pub antennas_per_bs: Vec<usize>,
    /// Multicast groups served by each BS (U).
    pub groups_per_bs: usize,
    /// Users per group (L).
    pub users_per_group: usize,
    pub placement: Placement,
    /// Uniform per-user rate target in bits/s.
    pub rate_target_bps: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            power: PowerModel::default(),
            num_bs: default_num_bs(),
            antennas_per_bs: default_antennas(),
            groups_per_bs: default_groups_per_bs(),
            users_per_group: default_users_per_group(),
            placement: Placement::default(),
            rate_target_bps: 20e6,
        }
    }
}

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.num_bs * self.groups_per_bs * self.users_per_group
    }

    pub fn num_groups(&self) -> usize {
        self.num_bs * self.groups_per_bs
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.power.validate()?;
        if self.num_bs == 0 {
            return Err(ModelError::Config("num_bs must be >= 1".into()));
        }
        if self.antennas_per_bs.len() != self.num_bs {
            return Err(ModelError::Config(format!(
                "antennas_per_bs has {} entries for {} base stations",
                self.antennas_per_bs.len(),
                self.num_bs
            )));
        }
        if self.groups_per_bs == 0 || self.users_per_group == 0 {
            return Err(ModelError::Config("groups_per_bs and users_per_group must be >= 1".into()));
        }
        for (b, &n) in self.antennas_per_bs.iter().enumerate() {
            if n == 0 {
                return Err(ModelError::Config(format!(
                    "BS {b} has no antennas but serves {} groups",
                    self.groups_per_bs
                )));
            }
        }
        let d = match self.placement {
            Placement::FixedDistance { meters } => meters,
            Placement::UniformLine { cell_radius_m } => cell_radius_m,
        };
        if !(d > 0.0) || !d.is_finite() {
            return Err(ModelError::Config(format!("placement distance must be positive, got {d}")));
        }
        if !(self.rate_target_bps >= 0.0) {
            return Err(ModelError::Config("rate_target_bps must be >= 0".into()));
        }
        Ok(())
    }
}

/// One multicast group: the BS that serves it and its member users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub serving_bs: usize,
    pub users: Vec<usize>,
}

/// A concrete network realization: channels for every (BS, user) pair plus
/// the group structure and per-user rate targets.
///
/// Immutable after construction; all evaluation methods are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub groups: Vec<Group>,
    /// `channels[b][k]` is the vector from BS `b` to user `k`, length N_b.
    pub channels: Vec<Vec<Vec<Complex64>>>,
    /// Per-user rate targets in bits/s.
    pub rate_targets_bps: Vec<f64>,
    /// BS-to-user distances in meters, `distances_m[b][k]`.
    pub distances_m: Vec<Vec<f64>>,
    pub seed: u64,
}

/// 30*log10(d) + 35 path loss in dB.
pub fn path_loss_db(distance_m: f64) -> f64 {
    30.0 * distance_m.log10() + 35.0
}

fn path_attenuation(distance_m: f64) -> f64 {
    10f64.powf(-path_loss_db(distance_m) / 10.0)
}

fn standard_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Draws a Rayleigh-fading scenario. Channel entries are i.i.d. circularly
/// symmetric complex Gaussian with unit variance, scaled by the square root
/// of the linear path-loss attenuation. Deterministic for a fixed seed.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario, ModelError> {
    config.validate()?;
    let b_count = config.num_bs;
    let k_count = config.num_users();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // User positions first, then channels, in a fixed order.
    let distances_m = match config.placement {
        Placement::FixedDistance { meters } => vec![vec![meters; k_count]; b_count],
        Placement::UniformLine { cell_radius_m } => {
            let bs_x: Vec<f64> = (0..b_count).map(|b| 2.0 * cell_radius_m * b as f64).collect();
            let span = if b_count == 1 { cell_radius_m } else { 2.0 * cell_radius_m * (b_count - 1) as f64 };
            let mut d = vec![vec![0.0; k_count]; b_count];
            for k in 0..k_count {
                let x: f64 = rng.gen::<f64>() * span;
                for b in 0..b_count {
                    d[b][k] = (x - bs_x[b]).abs().max(10.0);
                }
            }
            d
        }
    };

    let mut channels = Vec::with_capacity(b_count);
    for b in 0..b_count {
        let n_b = config.antennas_per_bs[b];
        let mut per_user = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let scale = (path_attenuation(distances_m[b][k]) / 2.0).sqrt();
            let h: Vec<Complex64> = (0..n_b).map(|_| standard_complex(&mut rng) * scale).collect();
            per_user.push(h);
        }
        channels.push(per_user);
    }

    let mut groups = Vec::with_capacity(config.num_groups());
    for b in 0..b_count {
        for u in 0..config.groups_per_bs {
            let base = (b * config.groups_per_bs + u) * config.users_per_group;
            groups.push(Group { serving_bs: b, users: (base..base + config.users_per_group).collect() });
        }
    }

    Ok(Scenario {
        config: config.clone(),
        groups,
        channels,
        rate_targets_bps: vec![config.rate_target_bps; k_count],
        distances_m,
        seed,
    })
}

/// Adds zero-mean complex Gaussian noise with per-element variance `sigma_e2`
/// to every channel entry. Deterministic for a fixed seed.
pub fn perturb_channels(s: &Scenario, sigma_e2: f64, seed: u64) -> Result<Scenario, ModelError> {
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(ModelError::Config(format!("sigma_e2 must be >= 0, got {sigma_e2}")));
    }
    let mut out = s.clone();
    if sigma_e2 == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (sigma_e2 / 2.0).sqrt();
    for per_user in &mut out.channels {
        for h in per_user {
            for e in h {
                *e += standard_complex(&mut rng) * scale;
            }
        }
    }
    Ok(out)
}

/// Per-group beamformers; `per_group[g]` has length N_{b_g}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    pub per_group: Vec<Vec<Complex64>>,
}

impl BeamformerSet {
    pub fn zeros(s: &Scenario) -> Self {
        BeamformerSet {
            per_group: s
                .groups
                .iter()
                .map(|g| vec![Complex64::new(0.0, 0.0); s.config.antennas_per_bs[g.serving_bs]])
                .collect(),
        }
    }

    /// Stacked coefficients of antenna `i` at BS `b` across the groups that
    /// BS serves, in group order.
    pub fn antenna_row(&self, s: &Scenario, b: usize, i: usize) -> Vec<Complex64> {
        s.groups_of_bs(b).iter().map(|&g| self.per_group[g][i]).collect()
    }

    pub fn antenna_row_norm(&self, s: &Scenario, b: usize, i: usize) -> f64 {
        self.antenna_row(s, b, i).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn total_sq_norm(&self) -> f64 {
        self.per_group.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.per_group.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Soft and hard antenna activation state.
///
/// `a` and `v` are flat over antennas (see [`Scenario::antenna_offset`]).
/// After a fixed-mask refit, `mask[j] == false` implies the corresponding
/// beamformer antenna row is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub mask: Vec<bool>,
}

impl SelectionState {
    pub fn all_on(s: &Scenario) -> Self {
        let n = s.num_antennas_total();
        SelectionState { a: vec![1.0; n], v: vec![s.config.power.p_max; n], mask: vec![true; n] }
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn soft_active(&self) -> f64 {
        self.a.iter().sum()
    }
}

pub fn inner_product(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(hi, wi)| hi.conj() * wi).sum()
}

impl Scenario {
    pub fn num_bs(&self) -> usize {
        self.config.num_bs
    }

    pub fn num_users(&self) -> usize {
        self.rate_targets_bps.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_antennas_total(&self) -> usize {
        self.config.antennas_per_bs.iter().sum()
    }

    /// Flat index of antenna (b, 0).
    pub fn antenna_offset(&self, b: usize) -> usize {
        self.config.antennas_per_bs[..b].iter().sum()
    }

    pub fn groups_of_bs(&self, b: usize) -> Vec<usize> {
        (0..self.groups.len()).filter(|&g| self.groups[g].serving_bs == b).collect()
    }

    /// Group a user belongs to. Membership is disjoint by construction.
    pub fn group_of_user(&self, k: usize) -> usize {
        self.groups
            .iter()
            .position(|g| g.users.contains(&k))
            .expect("user not in any group")
    }

    pub fn n0_linear(&self) -> f64 {
        self.config.power.n0_linear()
    }

    pub fn p0(&self) -> f64 {
        self.config.power.p0(self.num_bs(), self.num_users())
    }

    /// Received interference-plus-noise power at user `k` (the SINR denominator).
    pub fn interference_plus_noise(&self, w: &BeamformerSet, k: usize) -> f64 {
        let g_k = self.group_of_user(k);
        let mut acc = self.n0_linear();
        for (u, grp) in self.groups.iter().enumerate() {
            if u == g_k {
                continue;
            }
            acc += inner_product(&self.channels[grp.serving_bs][k], &w.per_group[u]).norm_sqr();
        }
        acc
    }

    pub fn sinr(&self, w: &BeamformerSet, k: usize) -> f64 {
        let g_k = self.group_of_user(k);
        let b_g = self.groups[g_k].serving_bs;
        let sig = inner_product(&self.channels[b_g][k], &w.per_group[g_k]).norm_sqr();
        sig / self.interference_plus_noise(w, k)
    }

    /// Spectral rate of user `k` in nats (natural log of 1 + SINR).
    pub fn user_rate_nats(&self, w: &BeamformerSet, k: usize) -> f64 {
        (1.0 + self.sinr(w, k)).ln()
    }

    /// Group rates in bits/s: `W*log2(1 + min member SINR)`.
    pub fn group_rates_bps(&self, w: &BeamformerSet) -> Vec<f64> {
        let w_hz = self.config.power.bandwidth_hz;
        self.groups
            .iter()
            .map(|grp| {
                let min_sinr =
                    grp.users.iter().map(|&k| self.sinr(w, k)).fold(f64::INFINITY, f64::min);
                w_hz * (1.0 + min_sinr).log2()
            })
            .collect()
    }

    pub fn sum_rate_bps(&self, w: &BeamformerSet) -> f64 {
        self.group_rates_bps(w).iter().sum()
    }

    /// Total consumed power in watts: PA draw, RF chains of masked-on
    /// antennas, and the static floor.
    pub fn total_power(&self, w: &BeamformerSet, state: &SelectionState) -> f64 {
        let pm = &self.config.power;
        w.total_sq_norm() / pm.eta + pm.p_rf * state.active_count() as f64 + self.p0()
    }

    /// Bits per joule.
    pub fn energy_efficiency(&self, w: &BeamformerSet, state: &SelectionState) -> f64 {
        self.sum_rate_bps(w) / self.total_power(w, state)
    }

    /// Minimum number of active antennas each BS needs: the count of its
    /// groups containing at least one user with a positive rate target.
    pub fn min_active_antennas(&self) -> Vec<usize> {
        (0..self.num_bs())
            .map(|b| {
                self.groups
                    .iter()
                    .filter(|g| {
                        g.serving_bs == b && g.users.iter().any(|&k| self.rate_targets_bps[k] > 0.0)
                    })
                    .count()
            })
            .collect()
    }

    /// Per-user rate targets converted to spectral nats.
    pub fn rate_targets_nats(&self) -> Vec<f64> {
        let w_hz = self.config.power.bandwidth_hz;
        self.rate_targets_bps.iter().map(|&r| r * LN2 / w_hz).collect()
    }

    /// Rescales channels by `1/sqrt(N0)` and sets the noise floor to 0 dBW
    /// (unit linear noise). SINR, rates, powers, and EE are invariant; the
    /// rescaling keeps subproblem data well conditioned.
    pub fn noise_normalized(&self) -> Scenario {
        let n0 = self.n0_linear();
        if (n0 - 1.0).abs() < 1e-15 {
            return self.clone();
        }
        let scale = 1.0 / n0.sqrt();
        let mut out = self.clone();
        for per_user in &mut out.channels {
            for h in per_user {
                for e in h {
                    *e *= scale;
                }
            }
        }
        out.config.power.n0_dbw = 0.0;
        out
    }
}

/// Serialized form of a scenario. Channels are optional; when absent they are
/// regenerated from the embedded config and seed. Channel entries are stored
/// interleaved re/im, row-major per (b, k).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub config: ScenarioConfig,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_targets_bps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances_m: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<Vec<Vec<f64>>>>,
}

impl Scenario {
    pub fn to_file(&self) -> ScenarioFile {
        let channels = self
            .channels
            .iter()
            .map(|per_user| {
                per_user
                    .iter()
                    .map(|h| h.iter().flat_map(|c| [c.re, c.im]).collect())
                    .collect()
            })
            .collect();
        ScenarioFile {
            config: self.config.clone(),
            seed: self.seed,
            rate_targets_bps: Some(self.rate_targets_bps.clone()),
            distances_m: Some(self.distances_m.clone()),
            channels: Some(channels),
        }
    }

    pub fn from_file(f: &ScenarioFile) -> Result<Scenario, ModelError> {
        let mut s = generate_scenario(&f.config, f.seed)?;
        if let Some(targets) = &f.rate_targets_bps {
            if targets.len() != s.num_users() {
                return Err(ModelError::Config(format!(
                    "rate_targets_bps has {} entries for {} users",
                    targets.len(),
                    s.num_users()
                )));
            }
            s.rate_targets_bps = targets.clone();
        }
        if let Some(d) = &f.distances_m {
            s.distances_m = d.clone();
        }
        if let Some(ch) = &f.channels {
            if ch.len() != s.config.num_bs {
                return Err(ModelError::Config("channel matrix BS count mismatch".into()));
            }
            let mut channels = Vec::with_capacity(ch.len());
            for (b, per_user) in ch.iter().enumerate() {
                if per_user.len() != s.num_users() {
                    return Err(ModelError::Config("channel matrix user count mismatch".into()));
                }
                let n_b = s.config.antennas_per_bs[b];
                let mut rows = Vec::with_capacity(per_user.len());
                for flat in per_user {
                    if flat.len() != 2 * n_b {
                        return Err(ModelError::Config("channel vector length mismatch".into()));
                    }
                    rows.push(flat.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect());
                }
                channels.push(rows);
            }
            s.channels = channels;
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serialization")
    }

    pub fn from_json(text: &str) -> Result<Scenario, ModelError> {
        let f: ScenarioFile =
            serde_json::from_str(text).map_err(|e| ModelError::Config(e.to_string()))?;
        Scenario::from_file(&f)
    }
}

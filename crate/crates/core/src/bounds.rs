//! Convexifying surrogates used by the SCA subproblems: first-order bounds
//! for the quadratic-over-linear SINR term, the soft-activation power term,
//! the log rate, and the squared-rate-over-power scalarization term, plus the
//! l0-smoothing functions and their affine majorants.
//!
//! Every function here returns plain coefficient records so subproblem
//! builders can embed them directly as conic rows. Each bound is tight (in
//! value and first derivative) at its expansion point and one-sided on its
//! stated domain; the oracle module checks both properties by sampling.

use crate::model::{BeamformerSet, Scenario, LN2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm floor used when building smoothing majorants; antennas below it get
/// the gradient of the floor point. Kept well under the rounding threshold.
pub const PHI_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("expansion point outside the bound's domain: {0}")]
    Domain(String),
}

/// Iterate around which the surrogates are expanded.
///
/// `beta` holds interference-plus-noise powers (positive), `gamma` SINR
/// values, `a` soft antenna activations in (0, 1], and `r`, `x` the
/// sqrt-sum-rate and efficiency scalars used by the scalarization bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPoint {
    pub w: BeamformerSet,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub x: f64,
}

impl ExpansionPoint {
    /// Builds a consistent expansion point from beamformers and a soft
    /// activation vector: beta and gamma are evaluated exactly, r and x from
    /// the spectral (nats) rates and the soft-activation power model.
    pub fn from_beamformers(s: &Scenario, w: &BeamformerSet, a: &[f64]) -> Self {
        let k_count = s.num_users();
        let beta: Vec<f64> = (0..k_count).map(|k| s.interference_plus_noise(w, k)).collect();
        let gamma: Vec<f64> = (0..k_count).map(|k| s.sinr(w, k)).collect();
        let sum_rate_nats: f64 = s
            .groups
            .iter()
            .map(|grp| {
                let min_sinr =
                    grp.users.iter().map(|&k| s.sinr(w, k)).fold(f64::INFINITY, f64::min);
                (1.0 + min_sinr).ln()
            })
            .sum();
        let pm = &s.config.power;
        let power = w.total_sq_norm() / pm.eta
            + pm.p_rf * a.iter().sum::<f64>()
            + s.p0();
        let r = sum_rate_nats.max(1e-12).sqrt();
        let x = (sum_rate_nats / power).max(1e-12);
        ExpansionPoint { w: w.clone(), beta, gamma, a: a.to_vec(), r, x }
    }
}

/// Coefficients of the affine lower bound on `|h^H w|^2 / beta`.
///
/// The bound is `sum_i Re(lin[i] * w_i) - c_beta * beta`; on re/im split
/// variables the coefficient of `Re(w_i)` is `lin[i].re` and of `Im(w_i)` is
/// `-lin[i].im`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiCoefficients {
    pub lin: Vec<Complex64>,
    pub c_beta: f64,
}

impl PsiCoefficients {
    pub fn eval(&self, w: &[Complex64], beta: f64) -> f64 {
        let lin: f64 = self.lin.iter().zip(w).map(|(s, wi)| (s * wi).re).sum();
        lin - self.c_beta * beta
    }
}

/// First-order lower bound of the quadratic-over-linear SINR numerator at
/// `(w_n, beta_n)`: tight at the expansion point and a global lower bound
/// for `beta > 0`.
pub fn psi(
    h: &[Complex64],
    w_n: &[Complex64],
    beta_n: f64,
) -> Result<PsiCoefficients, BoundsError> {
    if !(beta_n > 0.0) {
        return Err(BoundsError::Domain(format!("beta_n must be positive, got {beta_n}")));
    }
    let u: Complex64 = h.iter().zip(w_n).map(|(hi, wi)| hi.conj() * wi).sum();
    let lin: Vec<Complex64> = h.iter().map(|hi| 2.0 * u.conj() * hi.conj() / beta_n).collect();
    let c_beta = u.norm_sqr() / (beta_n * beta_n);
    Ok(PsiCoefficients { lin, c_beta })
}

/// Affine lower bound `constant + slope * a` of `a^chi` on [0, 1], tight at
/// `a_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpsilonCoefficients {
    pub constant: f64,
    pub slope: f64,
}

impl UpsilonCoefficients {
    pub fn eval(&self, a: f64) -> f64 {
        self.constant + self.slope * a
    }
}

pub fn upsilon(a_n: f64, chi: f64) -> UpsilonCoefficients {
    debug_assert!(chi >= 1.0, "chi must be >= 1");
    debug_assert!((0.0..=1.0).contains(&a_n), "a_n must be in [0,1]");
    UpsilonCoefficients {
        constant: (1.0 - chi) * a_n.powf(chi),
        slope: chi * a_n.powf(chi - 1.0),
    }
}

/// Coefficients of the log-rate lower bound `-nu1/gamma + nu2 <= ln(1+gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiCoefficients {
    pub nu1: f64,
    pub nu2: f64,
}

impl XiCoefficients {
    pub fn eval(&self, gamma: f64) -> f64 {
        -self.nu1 / gamma + self.nu2
    }
}

/// Lower bound of `ln(1+gamma)` tight at `gamma_n > 0`; its hypograph over
/// `gamma > 0` is second-order-cone representable.
pub fn xi(gamma_n: f64) -> Result<XiCoefficients, BoundsError> {
    if !(gamma_n > 0.0) {
        return Err(BoundsError::Domain(format!("gamma_n must be positive, got {gamma_n}")));
    }
    Ok(XiCoefficients {
        nu1: gamma_n * gamma_n / (1.0 + gamma_n),
        nu2: (1.0 + gamma_n).ln() + gamma_n / (1.0 + gamma_n),
    })
}

/// Affine lower bound `r_coeff * r - x_coeff * x` of `r^2 / x` for `x > 0`,
/// tight at `(r_n, x_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaCoefficients {
    pub r_coeff: f64,
    pub x_coeff: f64,
}

impl DeltaCoefficients {
    pub fn eval(&self, r: f64, x: f64) -> f64 {
        self.r_coeff * r - self.x_coeff * x
    }
}

pub fn delta(r_n: f64, x_n: f64) -> Result<DeltaCoefficients, BoundsError> {
    if !(r_n > 0.0 && x_n > 0.0) {
        return Err(BoundsError::Domain(format!(
            "delta expansion needs r_n, x_n > 0, got ({r_n}, {x_n})"
        )));
    }
    Ok(DeltaCoefficients { r_coeff: 2.0 * r_n / x_n, x_coeff: (r_n / x_n) * (r_n / x_n) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingKind {
    /// Normalized l1 sum of antenna-row norms (convex, exact surrogate).
    F1,
    /// Sum of norms raised to `1/varsigma` (concave in the norms).
    F2,
    /// Sum of `log2(1 + phi^(1/varsigma))` terms.
    F3,
}

fn phi_of(w: &BeamformerSet, s: &Scenario, b: usize, i: usize) -> f64 {
    w.antenna_row_norm(s, b, i) / s.config.power.p_max.sqrt()
}

/// Value of the selected antenna-count smoothing at `w`.
pub fn smoothing_value(w: &BeamformerSet, s: &Scenario, kind: SmoothingKind, varsigma: f64) -> f64 {
    debug_assert!(varsigma >= 1.0);
    let mut acc = 0.0;
    for b in 0..s.num_bs() {
        for i in 0..s.config.antennas_per_bs[b] {
            let phi = phi_of(w, s, b, i);
            acc += match kind {
                SmoothingKind::F1 => phi,
                SmoothingKind::F2 => phi.powf(1.0 / varsigma),
                SmoothingKind::F3 => (1.0 + phi.powf(1.0 / varsigma)).log2(),
            };
        }
    }
    acc
}

/// Affine-in-the-norms majorant of a smoothing function, expanded at `w_n`.
///
/// The majorant is `constant + sum_j coeff[j] * phi_j` with
/// `phi_j = ||antenna row j|| / sqrt(p_max)`, indexed flat over antennas.
/// Concavity of each term in `phi` makes any tangent a global upper bound,
/// so flooring small expansion norms at [`PHI_FLOOR`] preserves one-sidedness.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingMajorant {
    pub constant: f64,
    pub coeff: Vec<f64>,
}

impl SmoothingMajorant {
    pub fn eval_phis(&self, phis: &[f64]) -> f64 {
        self.constant + self.coeff.iter().zip(phis).map(|(c, p)| c * p).sum::<f64>()
    }

    pub fn eval(&self, w: &BeamformerSet, s: &Scenario) -> f64 {
        let mut phis = Vec::with_capacity(self.coeff.len());
        for b in 0..s.num_bs() {
            for i in 0..s.config.antennas_per_bs[b] {
                phis.push(phi_of(w, s, b, i));
            }
        }
        self.eval_phis(&phis)
    }
}

pub fn smoothing_majorant(
    w_n: &BeamformerSet,
    s: &Scenario,
    kind: SmoothingKind,
    varsigma: f64,
) -> SmoothingMajorant {
    debug_assert!(varsigma >= 1.0);
    let inv = 1.0 / varsigma;
    let mut constant = 0.0;
    let mut coeff = Vec::with_capacity(s.num_antennas_total());
    for b in 0..s.num_bs() {
        for i in 0..s.config.antennas_per_bs[b] {
            match kind {
                SmoothingKind::F1 => {
                    coeff.push(1.0);
                }
                SmoothingKind::F2 => {
                    let p = phi_of(w_n, s, b, i).max(PHI_FLOOR);
                    let c = inv * p.powf(inv - 1.0);
                    coeff.push(c);
                    constant += p.powf(inv) - c * p;
                }
                SmoothingKind::F3 => {
                    let p = phi_of(w_n, s, b, i).max(PHI_FLOOR);
                    let ppow = p.powf(inv);
                    let c = inv * p.powf(inv - 1.0) / ((1.0 + ppow) * LN2);
                    coeff.push(c);
                    constant += (1.0 + ppow).log2() - c * p;
                }
            }
        }
    }
    SmoothingMajorant { constant, coeff }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_scenario, ScenarioConfig};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale)
            .collect()
    }

    #[test]
    fn psi_tight_at_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = rand_vec(&mut rng, 4, 1.0);
        let w_n = rand_vec(&mut rng, 4, 1.0);
        let beta_n = 0.7;
        let p = psi(&h, &w_n, beta_n).unwrap();
        let u: Complex64 = h.iter().zip(&w_n).map(|(hi, wi)| hi.conj() * wi).sum();
        assert_relative_eq!(p.eval(&w_n, beta_n), u.norm_sqr() / beta_n, max_relative = 1e-12);
    }

    #[test]
    fn psi_global_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = rand_vec(&mut rng, 3, 1.0);
        let w_n = rand_vec(&mut rng, 3, 1.0);
        let p = psi(&h, &w_n, 0.9).unwrap();
        for _ in 0..100 {
            let w = rand_vec(&mut rng, 3, 2.0);
            let beta = 0.05 + rng.gen::<f64>() * 3.0;
            let u: Complex64 = h.iter().zip(&w).map(|(hi, wi)| hi.conj() * wi).sum();
            let exact = u.norm_sqr() / beta;
            assert!(p.eval(&w, beta) <= exact + 1e-10);
        }
    }

    #[test]
    fn psi_zero_expansion_and_domain() {
        let h = vec![Complex64::new(1.0, -1.0); 2];
        let z = vec![Complex64::new(0.0, 0.0); 2];
        let p = psi(&h, &z, 1.0).unwrap();
        assert_eq!(p.eval(&h, 5.0), 0.0);
        assert!(psi(&h, &z, 0.0).is_err());
    }

    #[test]
    fn upsilon_examples() {
        let u = upsilon(1.0, 2.0);
        assert_relative_eq!(u.eval(1.0), 1.0);
        assert_relative_eq!(u.constant, -1.0);
        assert_relative_eq!(u.slope, 2.0);
        let id = upsilon(0.3, 1.0);
        for a in [0.0, 0.4, 1.0] {
            assert_relative_eq!(id.eval(a), a);
        }
        assert_relative_eq!(upsilon(0.5, 2.0).eval(0.8), 0.55);
        assert!(0.55 <= 0.8f64.powi(2) + 1e-12);
    }

    #[test]
    fn xi_analytic_case() {
        let c = xi(1.0).unwrap();
        assert_relative_eq!(c.nu1, 0.5);
        assert_relative_eq!(c.nu2, std::f64::consts::LN_2 + 0.5);
        assert_relative_eq!(c.eval(1.0), std::f64::consts::LN_2, max_relative = 1e-14);
        // First derivative matches 1/(1+gamma) at the expansion point.
        let fd = (c.eval(1.0 + 1e-6) - c.eval(1.0 - 1e-6)) / 2e-6;
        assert_relative_eq!(fd, 0.5, epsilon = 1e-6);
        assert!(xi(0.0).is_err());
    }

    #[test]
    fn xi_one_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let gn = 0.01 + rng.gen::<f64>() * 10.0;
            let c = xi(gn).unwrap();
            for _ in 0..100 {
                let g = 1e-3 + rng.gen::<f64>() * 20.0;
                assert!(c.eval(g) <= (1.0 + g).ln() + 1e-12);
            }
        }
    }

    #[test]
    fn delta_examples() {
        let d = delta(2.0, 1.0).unwrap();
        assert_relative_eq!(d.eval(2.0, 1.0), 4.0);
        let d3 = delta(3.0, 1.0).unwrap();
        assert_relative_eq!(d3.eval(3.0, 1.0), 9.0);
        assert!(delta(2.0, 1.0).unwrap().eval(3.0, 1.0) <= 9.0 + 1e-12);
        assert!(d.eval(0.0, 2.0) <= 0.0);
        assert!(delta(0.0, 1.0).is_err());
    }

    fn smoothing_scenario() -> Scenario {
        let cfg = ScenarioConfig {
            antennas_per_bs: vec![3, 3],
            ..ScenarioConfig::default()
        };
        generate_scenario(&cfg, 17).unwrap()
    }

    #[test]
    fn smoothing_values() {
        let s = smoothing_scenario();
        let zero = BeamformerSet::zeros(&s);
        for kind in [SmoothingKind::F1, SmoothingKind::F2, SmoothingKind::F3] {
            assert_eq!(smoothing_value(&zero, &s, kind, 2.0), 0.0);
        }
        let mut w = BeamformerSet::zeros(&s);
        w.per_group[0][0] = Complex64::new(s.config.power.p_max.sqrt(), 0.0);
        // One antenna row exactly at full power contributes log2(2) = 1 to f3.
        assert_relative_eq!(smoothing_value(&w, &s, SmoothingKind::F3, 1.0), 1.0);
        // varsigma = 1 collapses f2 onto f1.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut wr = BeamformerSet::zeros(&s);
        for wg in &mut wr.per_group {
            for e in wg.iter_mut() {
                *e = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.3;
            }
        }
        assert_eq!(
            smoothing_value(&wr, &s, SmoothingKind::F1, 1.0),
            smoothing_value(&wr, &s, SmoothingKind::F2, 1.0)
        );
    }

    #[test]
    fn majorant_tight_and_one_sided() {
        let s = smoothing_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w_n = BeamformerSet::zeros(&s);
        for wg in &mut w_n.per_group {
            for e in wg.iter_mut() {
                *e = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.4;
            }
        }
        for (kind, vs) in [(SmoothingKind::F2, 2.0), (SmoothingKind::F3, 2.0), (SmoothingKind::F3, 3.0)] {
            let m = smoothing_majorant(&w_n, &s, kind, vs);
            assert_relative_eq!(
                m.eval(&w_n, &s),
                smoothing_value(&w_n, &s, kind, vs),
                max_relative = 1e-10
            );
            for _ in 0..100 {
                let mut w = BeamformerSet::zeros(&s);
                for wg in &mut w.per_group {
                    for e in wg.iter_mut() {
                        *e = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    }
                }
                assert!(m.eval(&w, &s) >= smoothing_value(&w, &s, kind, vs) - 1e-10);
            }
        }
    }

    #[test]
    fn majorant_f2_unit_varsigma_is_f1() {
        let s = smoothing_scenario();
        let mut w_n = BeamformerSet::zeros(&s);
        w_n.per_group[0][1] = Complex64::new(0.2, 0.1);
        let m1 = smoothing_majorant(&w_n, &s, SmoothingKind::F1, 1.0);
        let m2 = smoothing_majorant(&w_n, &s, SmoothingKind::F2, 1.0);
        assert_eq!(m1, m2);
    }

    #[test]
    fn expansion_point_from_beamformers() {
        let s = smoothing_scenario().noise_normalized();
        let mut w = BeamformerSet::zeros(&s);
        w.per_group[0][0] = Complex64::new(0.5, 0.0);
        let a = vec![1.0; s.num_antennas_total()];
        let ep = ExpansionPoint::from_beamformers(&s, &w, &a);
        for k in 0..s.num_users() {
            assert!(ep.beta[k] >= 1.0 - 1e-12);
            assert_relative_eq!(ep.gamma[k], s.sinr(&w, k), max_relative = 1e-12);
        }
        assert!(ep.r > 0.0 && ep.x > 0.0);
    }
}

//! Assembles each convex subproblem of the SCA drivers as a [`ConicProgram`]:
//! the scale-lifted efficiency subproblem (fractional objective removed via a
//! Charnes-Cooper lift), its pure-SOCP variant, the sparsity subproblems, the
//! trade-off scalarization subproblem, and the slack-penalized feasibility
//! problem, plus fixed-mask variants used for phase-2 refits.
//!
//! Variable ordering is fixed and documented per builder (beamformer blocks
//! by group first, then per-user, per-antenna, per-group scalars, and the
//! lift scale last) so program dumps are reproducible.

use crate::bounds::{
    delta, psi, smoothing_majorant, upsilon, xi, ExpansionPoint, SmoothingKind,
};
use crate::conic::{ConicProgram, LinearExpr};
use crate::model::{BeamformerSet, Scenario};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Smallest SINR used when expanding the log-rate bound; keeps coefficients
/// finite while leaving any induced expansion-point violation far below
/// solver tolerances.
pub const GAMMA_FLOOR: f64 = 1e-9;

/// How rate-hypograph rows are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatePath {
    /// Second-order-cone rows built from the log lower bound (default).
    Soc,
    /// Exact exponential-cone rows; needs a capable backend.
    Exponential,
}

/// Options shared by the lifted efficiency builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcOptions {
    /// Weight on the adjustable power term; 1 recovers plain efficiency.
    pub kappa: f64,
    /// Emit per-BS minimum-activation rows when the BS has positive targets.
    pub min_active_rows: bool,
    pub rate_path: RatePath,
}

impl Default for CcOptions {
    fn default() -> Self {
        CcOptions { kappa: 1.0, min_active_rows: true, rate_path: RatePath::Soc }
    }
}

/// Where each variable block lives inside a built program.
///
/// Beamformer entries are interleaved re/im per complex coefficient. Offsets
/// are `None` when the builder does not use that block.
#[derive(Debug, Clone, PartialEq)]
pub struct VarLayout {
    pub w_off: Vec<usize>,
    /// Antennas per group (length of group `g`'s complex beamformer).
    pub n_antennas: Vec<usize>,
    pub gamma: usize,
    pub beta: usize,
    pub r: usize,
    /// Per-antenna soft power levels, flat over antennas.
    pub v: Option<usize>,
    /// Per-antenna soft activations, flat over antennas.
    pub a: Option<usize>,
    /// Per-antenna norm epigraphs (sparsity builders).
    pub t: Option<usize>,
    /// Per-group transmit-power epigraphs.
    pub s_pow: Option<usize>,
    /// Charnes-Cooper scale; `None` in unlifted programs.
    pub phi: Option<usize>,
    /// Trade-off sqrt-sum-rate scalar.
    pub r_tot: Option<usize>,
    /// Trade-off efficiency scalar.
    pub x_ee: Option<usize>,
    pub q1: Option<usize>,
    pub q2: Option<usize>,
    pub p_slack: Option<usize>,
    pub mu: Option<usize>,
    pub num_vars: usize,
    pub num_users: usize,
    pub num_groups: usize,
    pub num_ant_total: usize,
}

impl VarLayout {
    pub fn w_re(&self, g: usize, i: usize) -> usize {
        self.w_off[g] + 2 * i
    }

    pub fn w_im(&self, g: usize, i: usize) -> usize {
        self.w_off[g] + 2 * i + 1
    }
}

/// A program together with the layout needed to interpret its solution.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProgram {
    pub prog: ConicProgram,
    pub layout: VarLayout,
}

/// Recovered (unlifted) solution values.
#[derive(Debug, Clone)]
pub struct LiftedSolution {
    pub phi: f64,
    pub w: BeamformerSet,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    /// Soft activations; all-ones when the program had no activation block.
    pub a: Vec<f64>,
    /// Soft per-antenna powers; empty when the program had none.
    pub v: Vec<f64>,
    /// Per-group spectral rates (nats).
    pub r: Vec<f64>,
    pub r_tot: Option<f64>,
    pub x_ee: Option<f64>,
}

/// Slack values of a feasibility program solution.
#[derive(Debug, Clone)]
pub struct SlackBundle {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
}

impl SlackBundle {
    pub fn total(&self) -> f64 {
        self.q1.iter().chain(&self.q2).chain(&self.p).chain(&self.mu).map(|v| v.max(0.0)).sum()
    }

    pub fn worst(&self) -> f64 {
        self.q1
            .iter()
            .chain(&self.q2)
            .chain(&self.p)
            .chain(&self.mu)
            .fold(0.0f64, |m, &v| m.max(v))
    }
}

/// Smallest total power any feasible selection can consume: the static floor
/// plus one RF chain per required active antenna.
pub fn minimum_power(s: &Scenario) -> f64 {
    let x: usize = s.min_active_antennas().iter().sum();
    s.p0() + s.config.power.p_rf * x as f64
}

struct Alloc {
    next: usize,
}

impl Alloc {
    fn new() -> Self {
        Alloc { next: 0 }
    }

    fn block(&mut self, len: usize) -> usize {
        let at = self.next;
        self.next += len;
        at
    }
}

fn base_layout(s: &Scenario) -> (VarLayout, Alloc) {
    let mut al = Alloc::new();
    let n_antennas: Vec<usize> =
        s.groups.iter().map(|g| s.config.antennas_per_bs[g.serving_bs]).collect();
    let w_off: Vec<usize> = n_antennas.iter().map(|&n| al.block(2 * n)).collect();
    let gamma = al.block(s.num_users());
    let beta = al.block(s.num_users());
    let layout = VarLayout {
        w_off,
        n_antennas,
        gamma,
        beta,
        r: 0,
        v: None,
        a: None,
        t: None,
        s_pow: None,
        phi: None,
        r_tot: None,
        x_ee: None,
        q1: None,
        q2: None,
        p_slack: None,
        mu: None,
        num_vars: 0,
        num_users: s.num_users(),
        num_groups: s.num_groups(),
        num_ant_total: s.num_antennas_total(),
    };
    (layout, al)
}

/// Re/im rows of group `g`'s beamformer block.
fn w_group_rows(ly: &VarLayout, g: usize) -> Vec<LinearExpr> {
    (0..ly.n_antennas[g])
        .flat_map(|i| [LinearExpr::var(ly.w_re(g, i)), LinearExpr::var(ly.w_im(g, i))])
        .collect()
}

/// Re/im rows of the stacked antenna-`i` coefficients at BS `b`.
fn antenna_rows(s: &Scenario, ly: &VarLayout, b: usize, i: usize) -> Vec<LinearExpr> {
    s.groups_of_bs(b)
        .iter()
        .flat_map(|&g| [LinearExpr::var(ly.w_re(g, i)), LinearExpr::var(ly.w_im(g, i))])
        .collect()
}

/// Real and imaginary parts of `h^H w_g` as affine rows.
fn inner_rows(h: &[Complex64], ly: &VarLayout, g: usize) -> (LinearExpr, LinearExpr) {
    let mut re = LinearExpr::zero();
    let mut im = LinearExpr::zero();
    for (i, hi) in h.iter().enumerate() {
        re.push(ly.w_re(g, i), hi.re);
        re.push(ly.w_im(g, i), hi.im);
        im.push(ly.w_re(g, i), -hi.im);
        im.push(ly.w_im(g, i), hi.re);
    }
    (re, im)
}

fn phi_expr(ly: &VarLayout) -> LinearExpr {
    match ly.phi {
        Some(p) => LinearExpr::var(p),
        None => LinearExpr::constant(1.0),
    }
}

fn scaled_phi(ly: &VarLayout, s: f64) -> LinearExpr {
    phi_expr(ly).scaled(s)
}

/// True when the group can transmit nothing under the mask (its serving BS
/// has every antenna switched off).
fn group_dead(s: &Scenario, mask: Option<&[bool]>, g: usize) -> bool {
    match mask {
        None => false,
        Some(m) => {
            let b = s.groups[g].serving_bs;
            let off = s.antenna_offset(b);
            (0..s.config.antennas_per_bs[b]).all(|i| !m[off + i])
        }
    }
}

/// `gamma_k <= Psi(w_g, beta_k)` rows; identical algebra lifted or not.
fn add_sinr_rows(
    prog: &mut ConicProgram,
    s: &Scenario,
    ly: &VarLayout,
    ep: &ExpansionPoint,
    mask: Option<&[bool]>,
) {
    for (g, grp) in s.groups.iter().enumerate() {
        if group_dead(s, mask, g) {
            continue;
        }
        for &k in &grp.users {
            let coeffs = psi(&s.channels[grp.serving_bs][k], &ep.w.per_group[g], ep.beta[k])
                .expect("expansion point has positive interference-plus-noise");
            let mut row = LinearExpr::zero();
            for (i, sc) in coeffs.lin.iter().enumerate() {
                row.push(ly.w_re(g, i), sc.re);
                row.push(ly.w_im(g, i), -sc.im);
            }
            row.push(ly.beta + k, -coeffs.c_beta);
            row.push(ly.gamma + k, -1.0);
            prog.nonneg(row);
        }
    }
}

/// `phi*beta_k >= phi^2*N0 + sum_u |h_u^H w_u|^2` rows (with `phi = 1` in
/// unlifted programs), one rotated cone per user.
fn add_interference_rows(
    prog: &mut ConicProgram,
    s: &Scenario,
    ly: &VarLayout,
    mask: Option<&[bool]>,
    q2: Option<usize>,
) {
    let n0_sqrt = s.n0_linear().sqrt();
    for (g, grp) in s.groups.iter().enumerate() {
        if group_dead(s, mask, g) {
            continue;
        }
        for &k in &grp.users {
            let mut vec_rows = vec![scaled_phi(ly, n0_sqrt)];
            for (u, other) in s.groups.iter().enumerate() {
                if u == g {
                    continue;
                }
                let (re, im) = inner_rows(&s.channels[other.serving_bs][k], ly, u);
                vec_rows.push(re);
                vec_rows.push(im);
            }
            let mut cap = LinearExpr::var(ly.beta + k);
            if let Some(q2_off) = q2 {
                cap.push(q2_off + k, 1.0);
            }
            prog.rsoc(phi_expr(ly), cap, vec_rows);
        }
    }
}

/// `r_g <= phi*log(1 + gamma_k/phi)` per group member, via the log lower
/// bound (SOC path) or exact exponential-cone rows.
fn add_rate_rows(
    prog: &mut ConicProgram,
    s: &Scenario,
    ly: &VarLayout,
    ep: &ExpansionPoint,
    path: RatePath,
    mask: Option<&[bool]>,
) {
    for (g, grp) in s.groups.iter().enumerate() {
        if group_dead(s, mask, g) {
            continue;
        }
        for &k in &grp.users {
            match path {
                RatePath::Soc => {
                    let c = xi(ep.gamma[k].max(GAMMA_FLOOR)).expect("floored SINR is positive");
                    // nu1*phi^2 <= gamma_k * (nu2*phi - r_g)
                    let mut y3 = scaled_phi(ly, c.nu2);
                    y3.push(ly.r + g, -1.0);
                    prog.rsoc(
                        LinearExpr::var(ly.gamma + k),
                        y3,
                        vec![scaled_phi(ly, c.nu1.sqrt())],
                    );
                }
                RatePath::Exponential => {
                    let mut z = LinearExpr::var(ly.gamma + k);
                    let phi = phi_expr(ly);
                    z.terms.extend(phi.terms.iter().cloned());
                    z.constant += phi.constant;
                    prog.exp(LinearExpr::var(ly.r + g), phi_expr(ly), z);
                    prog.nonneg(LinearExpr::var(ly.gamma + k));
                }
            }
        }
    }
}

/// `r_g >= phi * target_g` rows (targets in spectral nats, worst member).
fn add_target_rows(prog: &mut ConicProgram, s: &Scenario, ly: &VarLayout) {
    let targets = s.rate_targets_nats();
    for (g, grp) in s.groups.iter().enumerate() {
        let t_g = grp.users.iter().map(|&k| targets[k]).fold(0.0f64, f64::max);
        let mut row = LinearExpr::var(ly.r + g);
        let phi = scaled_phi(ly, -t_g);
        row.terms.extend(phi.terms);
        row.constant += phi.constant;
        prog.nonneg(row);
    }
}

fn add_min_active_rows(prog: &mut ConicProgram, s: &Scenario, ly: &VarLayout) {
    let a_off = ly.a.expect("activation block");
    let ant_off: Vec<usize> = (0..s.num_bs()).map(|b| s.antenna_offset(b)).collect();
    for (b, &x_b) in s.min_active_antennas().iter().enumerate() {
        if x_b == 0 {
            continue;
        }
        let mut row = LinearExpr::zero();
        for i in 0..s.config.antennas_per_bs[b] {
            row.push(a_off + ant_off[b] + i, 1.0);
        }
        let phi = scaled_phi(ly, -(x_b as f64));
        row.terms.extend(phi.terms);
        row.constant += phi.constant;
        prog.nonneg(row);
    }
}

/// Pins every beamformer coefficient of switched-off antennas (and the rate
/// and per-user variables of dead groups) to zero.
fn add_mask_rows(prog: &mut ConicProgram, s: &Scenario, ly: &VarLayout, mask: &[bool]) {
    let mut rows = vec![];
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            if !mask[off + i] {
                for &g in &s.groups_of_bs(b) {
                    rows.push(LinearExpr::var(ly.w_re(g, i)));
                    rows.push(LinearExpr::var(ly.w_im(g, i)));
                }
            }
        }
    }
    for (g, grp) in s.groups.iter().enumerate() {
        if group_dead(s, Some(mask), g) {
            rows.push(LinearExpr::var(ly.r + g));
            for &k in &grp.users {
                rows.push(LinearExpr::var(ly.gamma + k));
                rows.push(LinearExpr::var(ly.beta + k));
            }
        }
    }
    if !rows.is_empty() {
        for row in rows {
            prog.eq_zero(row);
        }
    }
}

/// Lifted efficiency subproblem around `ep`: maximize the lifted sum rate
/// subject to the power budget, the soft-activation coupling, SINR and rate
/// surrogate rows, and per-group rate targets. `opts.rate_path` selects
/// exponential rate rows when the backend supports them.
pub fn build_cc_subproblem(
    s: &Scenario,
    ep: &ExpansionPoint,
    chi: f64,
    opts: &CcOptions,
) -> BuiltProgram {
    let (mut ly, mut al) = base_layout(s);
    let a_total = s.num_antennas_total();
    ly.v = Some(al.block(a_total));
    ly.a = Some(al.block(a_total));
    ly.r = al.block(s.num_groups());
    ly.phi = Some(al.block(1));
    ly.num_vars = al.next;
    let (v_off, a_off, phi) = (ly.v.unwrap(), ly.a.unwrap(), ly.phi.unwrap());

    let mut prog = ConicProgram::new(ly.num_vars);
    for g in 0..s.num_groups() {
        prog.add_objective(ly.r + g, 1.0);
    }

    let pm = &s.config.power;
    let kappa = opts.kappa;

    // Power budget: kappa*(sum v/eta + p_rf*sum a) + phi*p0 <= 1.
    let mut budget = LinearExpr::constant(1.0);
    for j in 0..a_total {
        budget.push(v_off + j, -kappa / pm.eta);
        budget.push(a_off + j, -kappa * pm.p_rf);
    }
    budget.push(phi, -s.p0());
    prog.nonneg(budget);

    // Soft-activation coupling per antenna: ||w_hat||^2 <= v * Ups(a) with
    // the activation bound expanded at ep.a.
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            let j = off + i;
            let u = upsilon(ep.a[j], chi);
            let mut y3 = LinearExpr::term(phi, u.constant);
            y3.push(a_off + j, u.slope);
            prog.rsoc(LinearExpr::var(v_off + j), y3, antenna_rows(s, &ly, b, i));
        }
    }

    // Per-antenna cap and activation box.
    for j in 0..a_total {
        prog.nonneg(LinearExpr::new(vec![(phi, pm.p_max), (v_off + j, -1.0)], 0.0));
        prog.nonneg(LinearExpr::var(a_off + j));
        prog.nonneg(LinearExpr::new(vec![(phi, 1.0), (a_off + j, -1.0)], 0.0));
    }

    add_sinr_rows(&mut prog, s, &ly, ep, None);
    add_interference_rows(&mut prog, s, &ly, None, None);
    add_rate_rows(&mut prog, s, &ly, ep, opts.rate_path, None);
    add_target_rows(&mut prog, s, &ly);
    if opts.min_active_rows {
        add_min_active_rows(&mut prog, s, &ly);
    }
    prog.nonneg(LinearExpr::var(phi));

    BuiltProgram { prog, layout: ly }
}

/// Pure second-order-cone variant of [`build_cc_subproblem`]: identical rows
/// except the rate hypograph always uses the log lower bound.
pub fn build_socp_subproblem(
    s: &Scenario,
    ep: &ExpansionPoint,
    chi: f64,
    opts: &CcOptions,
) -> BuiltProgram {
    build_cc_subproblem(s, ep, chi, &CcOptions { rate_path: RatePath::Soc, ..*opts })
}

/// Sparsity-based subproblem: the activation variables are replaced by a
/// smoothed antenna-count term in the power budget, priced at `p_rf + rho`.
pub fn build_sparsity_subproblem(
    s: &Scenario,
    ep: &ExpansionPoint,
    kind: SmoothingKind,
    rho: f64,
    varsigma: f64,
    rate_path: RatePath,
) -> BuiltProgram {
    let (mut ly, mut al) = base_layout(s);
    let a_total = s.num_antennas_total();
    ly.t = Some(al.block(a_total));
    ly.s_pow = Some(al.block(s.num_groups()));
    ly.r = al.block(s.num_groups());
    ly.phi = Some(al.block(1));
    ly.num_vars = al.next;
    let (t_off, s_off, phi) = (ly.t.unwrap(), ly.s_pow.unwrap(), ly.phi.unwrap());

    let mut prog = ConicProgram::new(ly.num_vars);
    for g in 0..s.num_groups() {
        prog.add_objective(ly.r + g, 1.0);
    }

    let pm = &s.config.power;
    let sqrt_pmax = pm.p_max.sqrt();
    let maj = smoothing_majorant(&ep.w, s, kind, varsigma);

    // Power budget with the smoothed RF term:
    // sum_g s_g/eta + (p_rf+rho)*(maj.constant*phi + sum_j c_j*t_j/sqrt_pmax)
    //   + phi*p0 <= 1.
    let price = pm.p_rf + rho;
    let mut budget = LinearExpr::constant(1.0);
    for g in 0..s.num_groups() {
        budget.push(s_off + g, -1.0 / pm.eta);
    }
    for (j, c) in maj.coeff.iter().enumerate() {
        budget.push(t_off + j, -price * c / sqrt_pmax);
    }
    budget.push(phi, -price * maj.constant - s.p0());
    prog.nonneg(budget);

    // Per-group transmit power epigraphs: ||w_g||^2 <= s_g * phi.
    for g in 0..s.num_groups() {
        prog.rsoc(LinearExpr::var(s_off + g), LinearExpr::var(phi), w_group_rows(&ly, g));
    }

    // Antenna-row norm epigraphs and lifted per-antenna caps via t.
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            let j = off + i;
            prog.soc(LinearExpr::var(t_off + j), antenna_rows(s, &ly, b, i));
            prog.nonneg(LinearExpr::new(vec![(phi, sqrt_pmax), (t_off + j, -1.0)], 0.0));
        }
    }

    add_sinr_rows(&mut prog, s, &ly, ep, None);
    add_interference_rows(&mut prog, s, &ly, None, None);
    add_rate_rows(&mut prog, s, &ly, ep, rate_path, None);
    add_target_rows(&mut prog, s, &ly);
    prog.nonneg(LinearExpr::var(phi));

    BuiltProgram { prog, layout: ly }
}

/// Trade-off scalarization subproblem (unlifted): maximize
/// `x + varrho * sum r_g / p_min` with the efficiency hypograph handled by
/// the squared-rate-over-power bound around `(ep.r, ep.x)`.
pub fn build_scalarization_subproblem(
    s: &Scenario,
    ep: &ExpansionPoint,
    chi: f64,
    varrho: f64,
    p_min: f64,
    opts: &CcOptions,
) -> BuiltProgram {
    let (mut ly, mut al) = base_layout(s);
    let a_total = s.num_antennas_total();
    ly.v = Some(al.block(a_total));
    ly.a = Some(al.block(a_total));
    ly.r = al.block(s.num_groups());
    ly.r_tot = Some(al.block(1));
    ly.x_ee = Some(al.block(1));
    ly.num_vars = al.next;
    let (v_off, a_off) = (ly.v.unwrap(), ly.a.unwrap());
    let (r_tot, x_ee) = (ly.r_tot.unwrap(), ly.x_ee.unwrap());

    let mut prog = ConicProgram::new(ly.num_vars);
    prog.add_objective(x_ee, 1.0);
    for g in 0..s.num_groups() {
        prog.add_objective(ly.r + g, varrho / p_min);
    }

    let pm = &s.config.power;
    let d = delta(ep.r, ep.x).expect("positive trade-off expansion scalars");

    // Power against the efficiency bound:
    // sum v/eta + p_rf*sum a + p0 <= d_r*r - d_x*x.
    let mut row = LinearExpr::constant(-s.p0());
    row.push(r_tot, d.r_coeff);
    row.push(x_ee, -d.x_coeff);
    for j in 0..a_total {
        row.push(v_off + j, -1.0 / pm.eta);
        row.push(a_off + j, -pm.p_rf);
    }
    prog.nonneg(row);

    // Soft-activation coupling, caps, boxes (unlifted).
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            let j = off + i;
            let u = upsilon(ep.a[j], chi);
            let mut y3 = LinearExpr::constant(u.constant);
            y3.push(a_off + j, u.slope);
            prog.rsoc(LinearExpr::var(v_off + j), y3, antenna_rows(s, &ly, b, i));
        }
    }
    for j in 0..a_total {
        prog.nonneg(LinearExpr::new(vec![(v_off + j, -1.0)], pm.p_max));
        prog.nonneg(LinearExpr::var(a_off + j));
        prog.nonneg(LinearExpr::new(vec![(a_off + j, -1.0)], 1.0));
    }

    add_sinr_rows(&mut prog, s, &ly, ep, None);
    add_interference_rows(&mut prog, s, &ly, None, None);
    add_rate_rows(&mut prog, s, &ly, ep, opts.rate_path, None);
    add_target_rows(&mut prog, s, &ly);
    if opts.min_active_rows {
        add_min_active_rows(&mut prog, s, &ly);
    }

    // r^2 <= sum_g r_g, plus nonnegativity of the scalars.
    let mut rate_sum = LinearExpr::zero();
    for g in 0..s.num_groups() {
        rate_sum.push(ly.r + g, 1.0);
    }
    prog.rsoc(rate_sum, LinearExpr::constant(1.0), vec![LinearExpr::var(r_tot)]);
    prog.nonneg(LinearExpr::var(r_tot));
    prog.nonneg(LinearExpr::var(x_ee));

    BuiltProgram { prog, layout: ly }
}

/// Fixed-mask variant of the scalarization subproblem for phase-2 refits:
/// activations are frozen, switched-off rows pinned to zero, and the RF term
/// accounts the active count exactly.
pub fn build_masked_scalarization(
    s: &Scenario,
    ep: &ExpansionPoint,
    mask: &[bool],
    varrho: f64,
    p_min: f64,
    rate_path: RatePath,
) -> BuiltProgram {
    let (mut ly, mut al) = base_layout(s);
    ly.s_pow = Some(al.block(s.num_groups()));
    ly.r = al.block(s.num_groups());
    ly.r_tot = Some(al.block(1));
    ly.x_ee = Some(al.block(1));
    ly.num_vars = al.next;
    let s_off = ly.s_pow.unwrap();
    let (r_tot, x_ee) = (ly.r_tot.unwrap(), ly.x_ee.unwrap());

    let mut prog = ConicProgram::new(ly.num_vars);
    prog.add_objective(x_ee, 1.0);
    for g in 0..s.num_groups() {
        prog.add_objective(ly.r + g, varrho / p_min);
    }

    let pm = &s.config.power;
    let d = delta(ep.r, ep.x).expect("positive trade-off expansion scalars");
    let n_on = mask.iter().filter(|&&m| m).count() as f64;

    let mut row = LinearExpr::constant(-s.p0() - pm.p_rf * n_on);
    row.push(r_tot, d.r_coeff);
    row.push(x_ee, -d.x_coeff);
    for g in 0..s.num_groups() {
        row.push(s_off + g, -1.0 / pm.eta);
    }
    prog.nonneg(row);

    for g in 0..s.num_groups() {
        prog.rsoc(LinearExpr::var(s_off + g), LinearExpr::constant(1.0), w_group_rows(&ly, g));
    }
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            if mask[off + i] {
                prog.soc(LinearExpr::constant(pm.p_max.sqrt()), antenna_rows(s, &ly, b, i));
            }
        }
    }
    add_mask_rows(&mut prog, s, &ly, mask);

    add_sinr_rows(&mut prog, s, &ly, ep, Some(mask));
    add_interference_rows(&mut prog, s, &ly, Some(mask), None);
    add_rate_rows(&mut prog, s, &ly, ep, rate_path, Some(mask));
    add_target_rows(&mut prog, s, &ly);

    let mut rate_sum = LinearExpr::zero();
    for g in 0..s.num_groups() {
        rate_sum.push(ly.r + g, 1.0);
    }
    prog.rsoc(rate_sum, LinearExpr::constant(1.0), vec![LinearExpr::var(r_tot)]);
    prog.nonneg(LinearExpr::var(r_tot));
    prog.nonneg(LinearExpr::var(x_ee));

    BuiltProgram { prog, layout: ly }
}

/// Slack-penalized feasibility problem: maximize the sum rate minus
/// `lambda` times the total constraint violation. All slacks nonnegative;
/// a point is feasible when every slack is (numerically) zero. An optional
/// mask freezes the antenna set as in the refit builders.
pub fn build_feasibility_subproblem(
    s: &Scenario,
    ep: &ExpansionPoint,
    lambda: f64,
    rate_path: RatePath,
    mask: Option<&[bool]>,
) -> BuiltProgram {
    let (mut ly, mut al) = base_layout(s);
    let a_total = s.num_antennas_total();
    ly.r = al.block(s.num_groups());
    ly.q1 = Some(al.block(s.num_users()));
    ly.q2 = Some(al.block(s.num_users()));
    ly.p_slack = Some(al.block(a_total));
    ly.mu = Some(al.block(s.num_groups()));
    ly.num_vars = al.next;
    let (q1, q2) = (ly.q1.unwrap(), ly.q2.unwrap());
    let (p_slack, mu) = (ly.p_slack.unwrap(), ly.mu.unwrap());

    let mut prog = ConicProgram::new(ly.num_vars);
    for g in 0..s.num_groups() {
        prog.add_objective(ly.r + g, 1.0);
        prog.add_objective(mu + g, -lambda);
    }
    for k in 0..s.num_users() {
        prog.add_objective(q1 + k, -lambda);
        prog.add_objective(q2 + k, -lambda);
    }
    for j in 0..a_total {
        prog.add_objective(p_slack + j, -lambda);
    }

    let pm = &s.config.power;

    // Soft per-antenna caps: ||w_hat||^2 <= p_max + p (skipped for
    // switched-off antennas, which are pinned to zero instead).
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            let j = off + i;
            if mask.map_or(true, |m| m[j]) {
                let mut cap = LinearExpr::constant(pm.p_max);
                cap.push(p_slack + j, 1.0);
                prog.rsoc(LinearExpr::constant(1.0), cap, antenna_rows(s, &ly, b, i));
            }
        }
    }
    if let Some(m) = mask {
        add_mask_rows(&mut prog, s, &ly, m);
    }

    // Softened SINR rows: gamma_k - Psi <= q1_k.
    for (g, grp) in s.groups.iter().enumerate() {
        if group_dead(s, mask, g) {
            continue;
        }
        for &k in &grp.users {
            let coeffs = psi(&s.channels[grp.serving_bs][k], &ep.w.per_group[g], ep.beta[k])
                .expect("expansion point has positive interference-plus-noise");
            let mut row = LinearExpr::zero();
            for (i, sc) in coeffs.lin.iter().enumerate() {
                row.push(ly.w_re(g, i), sc.re);
                row.push(ly.w_im(g, i), -sc.im);
            }
            row.push(ly.beta + k, -coeffs.c_beta);
            row.push(ly.gamma + k, -1.0);
            row.push(q1 + k, 1.0);
            prog.nonneg(row);
        }
    }

    // Softened interference rows via the q2 slack inside the cone cap.
    add_interference_rows(&mut prog, s, &ly, mask, Some(q2));

    // Rate rows stay hard; targets soften through mu.
    add_rate_rows(&mut prog, s, &ly, ep, rate_path, mask);
    let targets = s.rate_targets_nats();
    for (g, grp) in s.groups.iter().enumerate() {
        let t_g = grp.users.iter().map(|&k| targets[k]).fold(0.0f64, f64::max);
        let mut row = LinearExpr::new(vec![(ly.r + g, 1.0), (mu + g, 1.0)], -t_g);
        if group_dead(s, mask, g) {
            // Dead group: its rate is pinned to zero, so the slack carries
            // any positive target (signals the infeasible mask).
            row = LinearExpr::new(vec![(mu + g, 1.0)], -t_g);
        }
        prog.nonneg(row);
    }

    for k in 0..s.num_users() {
        prog.nonneg(LinearExpr::var(q1 + k));
        prog.nonneg(LinearExpr::var(q2 + k));
        prog.nonneg(LinearExpr::var(ly.gamma + k));
        prog.nonneg(LinearExpr::var(ly.beta + k));
    }
    for j in 0..a_total {
        prog.nonneg(LinearExpr::var(p_slack + j));
    }
    for g in 0..s.num_groups() {
        prog.nonneg(LinearExpr::var(mu + g));
    }

    BuiltProgram { prog, layout: ly }
}

/// Lifted fixed-mask efficiency refit: activations frozen at the mask, RF
/// power accounted exactly, switched-off rows pinned to zero. Used for
/// phase-2 of the selection drivers, the no-selection baseline, and the
/// exhaustive oracle's inner solver.
pub fn build_masked_refit(
    s: &Scenario,
    ep: &ExpansionPoint,
    mask: &[bool],
    kappa: f64,
    rate_path: RatePath,
) -> BuiltProgram {
    let (mut ly, mut al) = base_layout(s);
    ly.s_pow = Some(al.block(s.num_groups()));
    ly.r = al.block(s.num_groups());
    ly.phi = Some(al.block(1));
    ly.num_vars = al.next;
    let (s_off, phi) = (ly.s_pow.unwrap(), ly.phi.unwrap());

    let mut prog = ConicProgram::new(ly.num_vars);
    for g in 0..s.num_groups() {
        prog.add_objective(ly.r + g, 1.0);
    }

    let pm = &s.config.power;
    let n_on = mask.iter().filter(|&&m| m).count() as f64;

    // Budget: kappa*(sum_g s_g/eta + phi*p_rf*n_on) + phi*p0 <= 1.
    let mut budget = LinearExpr::constant(1.0);
    for g in 0..s.num_groups() {
        budget.push(s_off + g, -kappa / pm.eta);
    }
    budget.push(phi, -kappa * pm.p_rf * n_on - s.p0());
    prog.nonneg(budget);

    for g in 0..s.num_groups() {
        prog.rsoc(LinearExpr::var(s_off + g), LinearExpr::var(phi), w_group_rows(&ly, g));
    }
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            if mask[off + i] {
                prog.soc(LinearExpr::term(phi, pm.p_max.sqrt()), antenna_rows(s, &ly, b, i));
            }
        }
    }
    add_mask_rows(&mut prog, s, &ly, mask);

    add_sinr_rows(&mut prog, s, &ly, ep, Some(mask));
    add_interference_rows(&mut prog, s, &ly, Some(mask), None);
    add_rate_rows(&mut prog, s, &ly, ep, rate_path, Some(mask));
    add_target_rows(&mut prog, s, &ly);
    prog.nonneg(LinearExpr::var(phi));

    BuiltProgram { prog, layout: ly }
}

/// Extracts the recovered (divided by the lift scale where present) solution
/// values from a raw solver vector.
pub fn recover_point(ly: &VarLayout, x: &[f64]) -> LiftedSolution {
    let phi = ly.phi.map_or(1.0, |p| x[p]).max(1e-300);
    let w = BeamformerSet {
        per_group: (0..ly.w_off.len())
            .map(|g| {
                (0..ly.n_antennas[g])
                    .map(|i| Complex64::new(x[ly.w_re(g, i)] / phi, x[ly.w_im(g, i)] / phi))
                    .collect()
            })
            .collect(),
    };
    let gamma = (0..ly.num_users).map(|k| x[ly.gamma + k] / phi).collect();
    let beta = (0..ly.num_users).map(|k| x[ly.beta + k] / phi).collect();
    let a = match ly.a {
        Some(off) => (0..ly.num_ant_total).map(|j| (x[off + j] / phi).clamp(0.0, 1.0)).collect(),
        None => vec![1.0; ly.num_ant_total],
    };
    let v = match ly.v {
        Some(off) => (0..ly.num_ant_total).map(|j| x[off + j] / phi).collect(),
        None => vec![],
    };
    let r = (0..ly.num_groups).map(|g| x[ly.r + g] / phi).collect();
    LiftedSolution {
        phi,
        w,
        gamma,
        beta,
        a,
        v,
        r,
        r_tot: ly.r_tot.map(|i| x[i]),
        x_ee: ly.x_ee.map(|i| x[i]),
    }
}

/// Reads the slack block of a feasibility solution; `None` for programs
/// without slacks.
pub fn extract_slacks(ly: &VarLayout, x: &[f64]) -> Option<SlackBundle> {
    let (q1, q2, p, mu) = (ly.q1?, ly.q2?, ly.p_slack?, ly.mu?);
    Some(SlackBundle {
        q1: (0..ly.num_users).map(|k| x[q1 + k]).collect(),
        q2: (0..ly.num_users).map(|k| x[q2 + k]).collect(),
        p: (0..ly.num_ant_total).map(|j| x[p + j]).collect(),
        mu: (0..ly.num_groups).map(|g| x[mu + g]).collect(),
    })
}

/// Embeds an expansion point into the lifted efficiency layout, producing a
/// vector that is feasible for the program built around that same point
/// (the property behind the monotone objective sequence).
pub fn embed_expansion(
    s: &Scenario,
    ly: &VarLayout,
    ep: &ExpansionPoint,
    chi: f64,
    kappa: f64,
) -> Vec<f64> {
    let pm = &s.config.power;
    let a_total = s.num_antennas_total();
    let mut v = vec![0.0; a_total];
    for b in 0..s.num_bs() {
        let off = s.antenna_offset(b);
        for i in 0..s.config.antennas_per_bs[b] {
            let j = off + i;
            let norm_sq: f64 =
                ep.w.antenna_row(s, b, i).iter().map(|c| c.norm_sqr()).sum();
            let denom = ep.a[j].powf(chi).max(1e-300);
            v[j] = if norm_sq > 0.0 { norm_sq / denom } else { 0.0 };
        }
    }
    let modeled = kappa
        * (v.iter().sum::<f64>() / pm.eta + pm.p_rf * ep.a.iter().sum::<f64>())
        + s.p0();
    let phi = 1.0 / modeled;

    let mut x = vec![0.0; ly.num_vars];
    for (g, wg) in ep.w.per_group.iter().enumerate() {
        for (i, c) in wg.iter().enumerate() {
            x[ly.w_re(g, i)] = phi * c.re;
            x[ly.w_im(g, i)] = phi * c.im;
        }
    }
    for k in 0..ly.num_users {
        x[ly.gamma + k] = phi * ep.gamma[k];
        x[ly.beta + k] = phi * ep.beta[k];
    }
    if let Some(off) = ly.v {
        for j in 0..a_total {
            x[off + j] = phi * v[j];
        }
    }
    if let Some(off) = ly.a {
        for j in 0..a_total {
            x[off + j] = phi * ep.a[j];
        }
    }
    for (g, grp) in s.groups.iter().enumerate() {
        let min_rate = grp
            .users
            .iter()
            .map(|&k| (1.0 + ep.gamma[k]).ln())
            .fold(f64::INFINITY, f64::min);
        x[ly.r + g] = phi * min_rate.max(0.0);
    }
    if let Some(p) = ly.phi {
        x[p] = phi;
    }
    x
}

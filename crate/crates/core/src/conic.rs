//! Conic-program intermediate representation and solver contract.
//!
//! Programs are stated as "maximize c'x subject to a list of cone
//! memberships", each membership being an affine image of x required to lie
//! in a zero, nonnegative, second-order, rotated-second-order, or exponential
//! cone. Rotated cones are lowered to plain second-order cones before the
//! backend sees them, so any SOCP-capable backend suffices for the main path;
//! the exponential cone is available behind [`supports_exponential`].

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Sparse affine functional `sum(coeff * x[var]) + constant`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn zero() -> Self {
        LinearExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinearExpr { terms: vec![], constant: c }
    }

    pub fn var(i: usize) -> Self {
        LinearExpr { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn term(i: usize, coeff: f64) -> Self {
        let mut e = LinearExpr::zero();
        e.push(i, coeff);
        e
    }

    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        LinearExpr { terms, constant }
    }

    pub fn push(&mut self, i: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((i, coeff));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    /// Every row equals zero.
    Zero,
    /// Every row is nonnegative.
    Nonnegative,
    /// `rows[0] >= norm(rows[1..])`.
    SecondOrder,
    /// `rows[0]*rows[1] >= sum(rows[2..]^2)` with `rows[0], rows[1] >= 0`.
    RotatedSecondOrder,
    /// `(x, y, z) = rows`: `y*exp(x/y) <= z`, `y > 0` (closure included).
    Exponential,
}

/// One cone-membership constraint: the affine image `rows(x)` must lie in
/// the cone `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeMembership {
    pub kind: ConeKind,
    pub rows: Vec<LinearExpr>,
}

/// A conic program in maximization form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub num_vars: usize,
    /// Dense objective coefficients, length `num_vars`; the program maximizes
    /// `objective . x`.
    pub objective: Vec<f64>,
    pub constraints: Vec<ConeMembership>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        ConicProgram { num_vars, objective: vec![0.0; num_vars], constraints: vec![] }
    }

    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    /// `expr == 0`.
    pub fn eq_zero(&mut self, expr: LinearExpr) {
        self.constraints.push(ConeMembership { kind: ConeKind::Zero, rows: vec![expr] });
    }

    /// `expr >= 0`.
    pub fn nonneg(&mut self, expr: LinearExpr) {
        self.constraints.push(ConeMembership { kind: ConeKind::Nonnegative, rows: vec![expr] });
    }

    /// `norm(vector) <= radius`.
    pub fn soc(&mut self, radius: LinearExpr, vector: Vec<LinearExpr>) {
        let mut rows = Vec::with_capacity(vector.len() + 1);
        rows.push(radius);
        rows.extend(vector);
        self.constraints.push(ConeMembership { kind: ConeKind::SecondOrder, rows });
    }

    /// `sum(vector^2) <= y2*y3`, `y2, y3 >= 0`.
    pub fn rsoc(&mut self, y2: LinearExpr, y3: LinearExpr, vector: Vec<LinearExpr>) {
        let mut rows = Vec::with_capacity(vector.len() + 2);
        rows.push(y2);
        rows.push(y3);
        rows.extend(vector);
        self.constraints.push(ConeMembership { kind: ConeKind::RotatedSecondOrder, rows });
    }

    /// `y*exp(x/y) <= z`.
    pub fn exp(&mut self, x: LinearExpr, y: LinearExpr, z: LinearExpr) {
        self.constraints
            .push(ConeMembership { kind: ConeKind::Exponential, rows: vec![x, y, z] });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub solve_time: Duration,
    /// Raw backend termination status, for diagnostics.
    pub backend_status: String,
}

/// Solver tolerances: feasibility and (absolute and relative) duality gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolSpec {
    pub feas: f64,
    pub gap: f64,
}

impl Default for TolSpec {
    fn default() -> Self {
        TolSpec { feas: 1e-8, gap: 1e-8 }
    }
}

/// True when the backend can take [`ConeKind::Exponential`] memberships.
pub fn supports_exponential() -> bool {
    true
}

/// Structural checks; an empty list means the program is well formed.
pub fn validate(p: &ConicProgram) -> Vec<String> {
    let mut defects = vec![];
    if p.num_vars == 0 {
        defects.push("program has no variables".to_string());
    }
    if p.objective.len() != p.num_vars {
        defects.push(format!(
            "objective has {} coefficients for {} variables",
            p.objective.len(),
            p.num_vars
        ));
    }
    if p.objective.iter().all(|&c| c == 0.0) {
        defects.push("objective is identically zero".to_string());
    }
    if p.objective.iter().any(|c| !c.is_finite()) {
        defects.push("objective has non-finite coefficients".to_string());
    }
    for (ci, c) in p.constraints.iter().enumerate() {
        let dim = c.rows.len();
        let dim_ok = match c.kind {
            ConeKind::Zero | ConeKind::Nonnegative => dim >= 1,
            ConeKind::SecondOrder => dim >= 2,
            ConeKind::RotatedSecondOrder => dim >= 3,
            ConeKind::Exponential => dim == 3,
        };
        if !dim_ok {
            defects.push(format!("constraint {ci}: {:?} cone with dimension {dim}", c.kind));
        }
        for (ri, row) in c.rows.iter().enumerate() {
            if !row.constant.is_finite() {
                defects.push(format!("constraint {ci} row {ri}: non-finite constant"));
            }
            for &(var, coeff) in &row.terms {
                if var >= p.num_vars {
                    defects.push(format!(
                        "constraint {ci} row {ri}: variable index {var} out of range ({} vars)",
                        p.num_vars
                    ));
                }
                if !coeff.is_finite() {
                    defects.push(format!("constraint {ci} row {ri}: non-finite coefficient"));
                }
            }
        }
    }
    defects
}

fn lowered_rows(c: &ConeMembership) -> (ConeKind, Vec<LinearExpr>) {
    match c.kind {
        ConeKind::RotatedSecondOrder => {
            // norm([y1, (y2-y3)/2]) <= (y2+y3)/2 accepts exactly the points
            // with sum(y1^2) <= y2*y3 and y2, y3 >= 0.
            let y2 = &c.rows[0];
            let y3 = &c.rows[1];
            let mut half_sum = y2.clone().scaled(0.5);
            for t in &y3.terms {
                half_sum.push(t.0, 0.5 * t.1);
            }
            half_sum.constant += 0.5 * y3.constant;
            let mut half_diff = y2.clone().scaled(0.5);
            for t in &y3.terms {
                half_diff.push(t.0, -0.5 * t.1);
            }
            half_diff.constant -= 0.5 * y3.constant;
            let mut rows = Vec::with_capacity(c.rows.len());
            rows.push(half_sum);
            rows.extend(c.rows[2..].iter().cloned());
            rows.push(half_diff);
            (ConeKind::SecondOrder, rows)
        }
        kind => (kind, c.rows.clone()),
    }
}

/// Worst violation of one membership at the point `x` (0 when satisfied).
pub fn membership_residual(c: &ConeMembership, x: &[f64]) -> f64 {
    let (kind, rows) = lowered_rows(c);
    let y: Vec<f64> = rows.iter().map(|r| r.eval(x)).collect();
    match kind {
        ConeKind::Zero => y.iter().fold(0.0, |m, v| m.max(v.abs())),
        ConeKind::Nonnegative => y.iter().fold(0.0, |m, v| m.max(-v)),
        ConeKind::SecondOrder => {
            let norm = y[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm - y[0]).max(0.0)
        }
        ConeKind::Exponential => {
            let (ex, ey, ez) = (y[0], y[1], y[2]);
            if ey > 0.0 {
                (ey * (ex / ey).exp() - ez).max(0.0)
            } else {
                // Closure: y = 0 requires x <= 0, z >= 0.
                (-ey).max(0.0).max(ex.max(0.0)).max((-ez).max(0.0))
            }
        }
        ConeKind::RotatedSecondOrder => unreachable!("lowered above"),
    }
}

/// Worst membership violation across the whole program.
pub fn max_residual(p: &ConicProgram, x: &[f64]) -> f64 {
    p.constraints.iter().map(|c| membership_residual(c, x)).fold(0.0, f64::max)
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

fn to_csc(m: usize, n: usize, t: &Triplets) -> CscMatrix<f64> {
    let mut entries: Vec<(usize, usize, f64)> =
        (0..t.vals.len()).map(|i| (t.cols[i], t.rows[i], t.vals[i])).collect();
    entries.sort_by_key(|e| (e.0, e.1));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(entries.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(entries.len());
    let mut last = None;
    for (c, r, v) in entries {
        if last == Some((c, r)) {
            *nzval.last_mut().unwrap() += v;
        } else {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
            last = Some((c, r));
        }
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

/// Solves the program with an interior-point backend. Infeasibility and
/// unboundedness are reported through the status, never by panicking.
pub fn solve(p: &ConicProgram, tol: &TolSpec) -> ConicSolution {
    let start = Instant::now();
    let n = p.num_vars;

    let defects = validate(p);
    if !defects.is_empty() {
        return ConicSolution {
            status: SolveStatus::NumericalFailure,
            x: vec![0.0; n],
            objective: f64::NAN,
            solve_time: start.elapsed(),
            backend_status: format!("invalid program: {}", defects.join("; ")),
        };
    }

    // Stack memberships as s = b - A x in cone K, i.e. rows of A carry the
    // negated coefficients and b the constants.
    let mut cones: Vec<SupportedConeT<f64>> = vec![];
    let mut trip = Triplets { rows: vec![], cols: vec![], vals: vec![] };
    let mut b: Vec<f64> = vec![];
    for c in &p.constraints {
        let (kind, rows) = lowered_rows(c);
        let dim = rows.len();
        cones.push(match kind {
            ConeKind::Zero => SupportedConeT::ZeroConeT(dim),
            ConeKind::Nonnegative => SupportedConeT::NonnegativeConeT(dim),
            ConeKind::SecondOrder => SupportedConeT::SecondOrderConeT(dim),
            ConeKind::Exponential => SupportedConeT::ExponentialConeT(),
            ConeKind::RotatedSecondOrder => unreachable!("lowered above"),
        });
        for row in rows {
            let r = b.len();
            for (var, coeff) in row.terms {
                trip.rows.push(r);
                trip.cols.push(var);
                trip.vals.push(-coeff);
            }
            b.push(row.constant);
        }
    }
    if b.is_empty() {
        // Backend needs at least one row; add a vacuous one.
        cones.push(SupportedConeT::NonnegativeConeT(1));
        b.push(1.0);
    }

    let a = to_csc(b.len(), n, &trip);
    let p_mat = CscMatrix::new(n, n, vec![0; n + 1], vec![], vec![]);
    let q: Vec<f64> = p.objective.iter().map(|c| -c).collect();

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_feas(tol.feas)
        .tol_gap_abs(tol.gap)
        .tol_gap_rel(tol.gap)
        .max_iter(200)
        .build()
        .expect("solver settings");

    let mut solver = match DefaultSolver::new(&p_mat, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        Err(_) => {
            return ConicSolution {
                status: SolveStatus::NumericalFailure,
                x: vec![0.0; n],
                objective: f64::NAN,
                solve_time: start.elapsed(),
                backend_status: "backend rejected program".into(),
            }
        }
    };
    solver.solve();

    let x = solver.solution.x.clone();
    let status = match solver.solution.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            SolveStatus::Unbounded
        }
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        SolverStatus::AlmostSolved
        | SolverStatus::InsufficientProgress
        | SolverStatus::NumericalError => {
            // Reduced-accuracy exit: accept only a certifiably feasible point.
            if max_residual(p, &x) <= (tol.feas * 100.0).max(1e-6) {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericalFailure
            }
        }
        _ => SolveStatus::NumericalFailure,
    };
    let objective = p.objective_value(&x);
    let backend_status = format!("{:?}", solver.solution.status);
    ConicSolution { status, x, objective, solve_time: start.elapsed(), backend_status }
}

/// Plain-text sparse dump: one block per constraint, rows as
/// `row <index> var <var> coeff <value>` triplets plus per-row constants.
pub fn dump(p: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "maximize over {} vars", p.num_vars);
    for (i, c) in p.objective.iter().enumerate() {
        if *c != 0.0 {
            let _ = writeln!(out, "objective var {i} coeff {c:.17e}");
        }
    }
    for (ci, c) in p.constraints.iter().enumerate() {
        let _ = writeln!(out, "cone {ci} {:?} dim {}", c.kind, c.rows.len());
        for (ri, row) in c.rows.iter().enumerate() {
            if row.constant != 0.0 {
                let _ = writeln!(out, "  row {ri} const {:.17e}", row.constant);
            }
            for &(var, coeff) in &row.terms {
                let _ = writeln!(out, "  row {ri} var {var} coeff {coeff:.17e}");
            }
        }
    }
    out
}

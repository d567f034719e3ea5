//! Local solvers for the block subproblem
//!
//! ```text
//! min_{x ∈ X_t}  f_t(x) + λ̄ᵀA_t x + (ρ/2)‖A_t x + w‖² + (τ_x/2)‖A_t(x − x̄_t)‖²
//! ```
//!
//! behind one request/result interface. Every solver is deterministic and
//! never returns a point with a worse objective than the warm start.

use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::{dot, norm_inf, DenseMatrix};
use crate::auglag::BlockLagrangian;
use crate::model::{ConstraintSet, QuadraticFunction, SmoothFunction};

pub const DEFAULT_INNER_TOL: f64 = 1e-9;
pub const DEFAULT_INNER_CAP: usize = 500;
const ARMIJO_C: f64 = 1e-4;
const STEP_MIN: f64 = 1e-8;
const STEP_MAX: f64 = 1e8;
const MAX_HALVINGS: usize = 60;
const ALM_SIGMA0: f64 = 10.0;
const ALM_SIGMA_CAP: f64 = 1e12;
const ALM_MAX_ROUNDS: usize = 60;
const ACTIVE_SET_MAX_ROUNDS: usize = 50;
const SQP_FD_STEP: f64 = 1e-5;
const SQP_MAX_REGULARIZATIONS: usize = 24;

/// Smooth objective of one block subproblem.
pub trait BlockObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], g: &mut [f64]);

    /// `(H, g₀)` when the objective is `½xᵀHx + g₀ᵀx + const`.
    fn quadratic_model(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        None
    }
}

impl BlockObjective for BlockLagrangian<'_> {
    fn dim(&self) -> usize {
        BlockLagrangian::dim(self)
    }
    fn value(&self, x: &[f64]) -> f64 {
        BlockLagrangian::value(self, x)
    }
    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        BlockLagrangian::gradient_into(self, x, g)
    }
    fn quadratic_model(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        BlockLagrangian::quadratic_model(self)
    }
}

impl BlockObjective for QuadraticFunction {
    fn dim(&self) -> usize {
        QuadraticFunction::dim(self)
    }
    fn value(&self, x: &[f64]) -> f64 {
        QuadraticFunction::value(self, x)
    }
    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        QuadraticFunction::gradient_into(self, x, g)
    }
    fn quadratic_model(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        Some((self.q().to_dense(), self.c.clone()))
    }
}

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Newton step on an unconstrained convex quadratic.
    QuadraticExact,
    /// Primal-dual active set on a convex quadratic with box and affine
    /// equality constraints.
    QuadraticActiveSet,
    /// Projected gradient over a box.
    BoxPg,
    /// Augmented Lagrangian loop for equality constraints.
    EqualityAlm,
    /// Sequential quadratic programming for equality constraints.
    EqualitySqp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    NumericalFailure,
}

pub struct BlockSolveRequest<'a> {
    pub block: usize,
    pub objective: &'a dyn BlockObjective,
    pub set: &'a ConstraintSet,
    pub warm_start: &'a [f64],
    pub tol: f64,
    pub max_iters: usize,
}

impl core::fmt::Debug for BlockSolveRequest<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BlockSolveRequest")
            .field("block", &self.block)
            .field("dim", &self.objective.dim())
            .field("warm_start", &self.warm_start)
            .field("tol", &self.tol)
            .field("max_iters", &self.max_iters)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolveResult {
    pub x: Vec<f64>,
    /// Equality multipliers, sign convention `∇obj + Σ μ_i ∇c_i ∈ −N_box`.
    pub mu: Vec<f64>,
    pub status: SolveStatus,
    pub inner_iterations: usize,
    pub pg_norm: f64,
    pub eq_violation: f64,
    pub solver: SolverKind,
}

/// Coordinatewise clamp onto `[lower, upper]`.
pub fn project_box(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&l, &u))| v.max(l).min(u))
        .collect()
}

/// `‖x − P(x − g)‖∞`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).max(lower[i]).min(upper[i]);
        m = m.max((x[i] - p).abs());
    }
    m
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn failure(x: Vec<f64>, solver: SolverKind, iters: usize) -> BlockSolveResult {
    BlockSolveResult {
        x,
        mu: Vec::new(),
        status: SolveStatus::NumericalFailure,
        inner_iterations: iters,
        pg_norm: f64::INFINITY,
        eq_violation: f64::INFINITY,
        solver,
    }
}

/// Exact minimizer of an unconstrained strictly convex quadratic objective.
pub fn solve_quadratic_exact(req: &BlockSolveRequest<'_>) -> BlockSolveResult {
    let kind = SolverKind::QuadraticExact;
    let warm = req.warm_start.to_vec();
    let Some((h, g0)) = req.objective.quadratic_model() else {
        return failure(warm, kind, 0);
    };
    let Some(chol) = h.cholesky() else {
        return failure(warm, kind, 0);
    };
    let neg: Vec<f64> = g0.iter().map(|v| -v).collect();
    let mut x = chol.solve(&neg);
    // one round of iterative refinement
    let mut r = h.mul_vec(&x);
    for (ri, gi) in r.iter_mut().zip(&g0) {
        *ri += gi;
    }
    let corr = chol.solve(&r);
    for (xi, ci) in x.iter_mut().zip(&corr) {
        *xi -= ci;
    }
    let mut g = h.mul_vec(&x);
    for (gi, g0i) in g.iter_mut().zip(&g0) {
        *gi += g0i;
    }
    let gn = norm_inf(&g);
    if !all_finite(&x) || gn > 1e-10 * (1.0 + norm_inf(&g0)) {
        return failure(warm, kind, 1);
    }
    BlockSolveResult {
        x,
        mu: Vec::new(),
        status: SolveStatus::Converged,
        inner_iterations: 1,
        pg_norm: gn,
        eq_violation: 0.0,
        solver: kind,
    }
}

struct PgOutcome {
    x: Vec<f64>,
    iters: usize,
    pg: f64,
    status: SolveStatus,
}

/// Monotone projected gradient with Barzilai–Borwein initial steps and
/// Armijo backtracking.
fn projected_gradient(
    obj: &dyn BlockObjective,
    lower: &[f64],
    upper: &[f64],
    start: &[f64],
    tol: f64,
    cap: usize,
) -> PgOutcome {
    let n = start.len();
    let mut x = project_box(start, lower, upper);
    let mut f = obj.value(&x);
    let mut g = vec![0.0; n];
    obj.gradient_into(&x, &mut g);
    if !f.is_finite() || !all_finite(&g) {
        return PgOutcome {
            x,
            pg: f64::INFINITY,
            iters: 0,
            status: SolveStatus::NumericalFailure,
        };
    }
    let mut step = (1.0 / norm_inf(&g).max(1.0)).clamp(STEP_MIN, STEP_MAX);
    let mut gn = vec![0.0; n];
    for it in 0..cap {
        let pg = projected_gradient_norm(&x, &g, lower, upper);
        if pg <= tol {
            return PgOutcome {
                x,
                iters: it,
                pg,
                status: SolveStatus::Converged,
            };
        }
        let slack = 4.0 * f64::EPSILON * f.abs();
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = (0..n)
                .map(|i| (x[i] - alpha * g[i]).max(lower[i]).min(upper[i]))
                .collect();
            let d: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm_inf(&d) == 0.0 {
                break;
            }
            let ft = obj.value(&trial);
            if !ft.is_finite() {
                alpha *= 0.5;
                continue;
            }
            if ft - f <= ARMIJO_C * dot(&g, &d) + slack {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            return PgOutcome {
                x,
                iters: it,
                pg,
                status: SolveStatus::IterationCap,
            };
        };
        obj.gradient_into(&xn, &mut gn);
        if !all_finite(&gn) {
            return PgOutcome {
                x,
                iters: it + 1,
                pg: f64::INFINITY,
                status: SolveStatus::NumericalFailure,
            };
        }
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { STEP_MAX };
        step = step.clamp(STEP_MIN, STEP_MAX);
        x = xn;
        f = fnew;
        core::mem::swap(&mut g, &mut gn);
    }
    let pg = projected_gradient_norm(&x, &g, lower, upper);
    let status = if pg <= tol { SolveStatus::Converged } else { SolveStatus::IterationCap };
    PgOutcome {
        x,
        iters: cap,
        pg,
        status,
    }
}

/// Projected gradient over the box of `req.set` (equalities are ignored).
pub fn solve_box_pg(req: &BlockSolveRequest<'_>) -> BlockSolveResult {
    let set = req.set;
    let out = projected_gradient(req.objective, &set.lower, &set.upper, req.warm_start, req.tol, req.max_iters);
    BlockSolveResult {
        x: out.x,
        mu: Vec::new(),
        status: out.status,
        inner_iterations: out.iters,
        pg_norm: out.pg,
        eq_violation: 0.0,
        solver: SolverKind::BoxPg,
    }
}

/// `obj(x) + yᵀc(x) + (σ/2)‖c(x)‖²`.
struct AlmObjective<'a> {
    base: &'a dyn BlockObjective,
    eqs: &'a [SmoothFunction],
    y: &'a [f64],
    sigma: f64,
}

impl BlockObjective for AlmObjective<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.base.value(x);
        for (c, yi) in self.eqs.iter().zip(self.y) {
            let ci = c.value(x);
            v += yi * ci + 0.5 * self.sigma * ci * ci;
        }
        v
    }

    fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.base.gradient_into(x, g);
        let mut gc = vec![0.0; x.len()];
        for (c, yi) in self.eqs.iter().zip(self.y) {
            let w = yi + self.sigma * c.value(x);
            c.gradient_into(x, &mut gc);
            for (gi, gci) in g.iter_mut().zip(&gc) {
                *gi += w * gci;
            }
        }
    }
}

fn eq_values(eqs: &[SmoothFunction], x: &[f64]) -> Vec<f64> {
    eqs.iter().map(|c| c.value(x)).collect()
}

/// Augmented Lagrangian loop on the equalities of `req.set`, with inner
/// projected-gradient solves over its box.
pub fn solve_equality_alm(req: &BlockSolveRequest<'_>) -> BlockSolveResult {
    let set = req.set;
    let eqs = &set.equalities[..];
    let r = eqs.len();
    let mut y = vec![0.0; r];
    let mut sigma = ALM_SIGMA0;
    let mut x = project_box(req.warm_start, &set.lower, &set.upper);
    let mut prev_viol = norm_inf(&eq_values(eqs, &x));
    let mut iters = 0;
    let mut pg = f64::INFINITY;
    let mut viol = prev_viol;
    let mut status = SolveStatus::IterationCap;
    for _ in 0..ALM_MAX_ROUNDS {
        let inner = AlmObjective {
            base: req.objective,
            eqs,
            y: &y,
            sigma,
        };
        let out = projected_gradient(&inner, &set.lower, &set.upper, &x, req.tol, req.max_iters);
        iters += out.iters;
        if out.status == SolveStatus::NumericalFailure {
            return failure(x, SolverKind::EqualityAlm, iters);
        }
        x = out.x;
        pg = out.pg;
        let c = eq_values(eqs, &x);
        viol = norm_inf(&c);
        for (yi, ci) in y.iter_mut().zip(&c) {
            *yi += sigma * ci;
        }
        if viol <= req.tol && pg <= req.tol {
            status = SolveStatus::Converged;
            break;
        }
        if viol > 0.25 * prev_viol {
            if sigma >= ALM_SIGMA_CAP && viol > req.tol {
                break;
            }
            sigma = (10.0 * sigma).min(ALM_SIGMA_CAP);
        }
        prev_viol = viol;
    }
    BlockSolveResult {
        x,
        mu: y,
        status,
        inner_iterations: iters,
        pg_norm: pg,
        eq_violation: viol,
        solver: SolverKind::EqualityAlm,
    }
}

/// Local quadratic model `½(y − x)ᵀH(y − x) + gᵀ(y − x)` in the variable `y`.
struct QpModel {
    h: DenseMatrix,
    lin: Vec<f64>,
}

impl BlockObjective for QpModel {
    fn dim(&self) -> usize {
        self.lin.len()
    }

    fn value(&self, y: &[f64]) -> f64 {
        0.5 * dot(y, &self.h.mul_vec(y)) + dot(&self.lin, y)
    }

    fn gradient_into(&self, y: &[f64], g: &mut [f64]) {
        let hy = self.h.mul_vec(y);
        for i in 0..g.len() {
            g[i] = hy[i] + self.lin[i];
        }
    }

    fn quadratic_model(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        Some((self.h.clone(), self.lin.clone()))
    }
}

fn lagrangian_gradient(obj: &dyn BlockObjective, eqs: &[SmoothFunction], y: &[f64], x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    obj.gradient_into(x, &mut g);
    let mut gc = vec![0.0; x.len()];
    for (c, yi) in eqs.iter().zip(y) {
        c.gradient_into(x, &mut gc);
        for (gi, gci) in g.iter_mut().zip(&gc) {
            *gi += yi * gci;
        }
    }
    g
}

/// Central differences of the Lagrangian gradient, symmetrized.
fn lagrangian_hessian(obj: &dyn BlockObjective, eqs: &[SmoothFunction], y: &[f64], x: &[f64]) -> DenseMatrix {
    let n = x.len();
    let mut h = DenseMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = SQP_FD_STEP * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        let gp = lagrangian_gradient(obj, eqs, y, &xp);
        xp[j] = x[j] - step;
        let gm = lagrangian_gradient(obj, eqs, y, &xp);
        xp[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// Minimum-norm correction `s` with `J s = −c` on the coordinates strictly
/// inside the box.
fn feasibility_correction(eqs: &[SmoothFunction], set: &ConstraintSet, x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let free: Vec<bool> = (0..n).map(|i| x[i] > set.lower[i] && x[i] < set.upper[i]).collect();
    let rows: Vec<Vec<f64>> = eqs
        .iter()
        .map(|c| {
            let mut g = c.gradient(x);
            for i in 0..n {
                if !free[i] {
                    g[i] = 0.0;
                }
            }
            g
        })
        .collect();
    let r = rows.len();
    let mut jj = DenseMatrix::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            jj[(a, b)] = dot(&rows[a], &rows[b]);
        }
    }
    let c: Vec<f64> = eqs.iter().map(|e| -e.value(x)).collect();
    let w = jj.lu()?.solve(&c);
    if !all_finite(&w) {
        return None;
    }
    let mut s = vec![0.0; n];
    for (row, wi) in rows.iter().zip(&w) {
        for i in 0..n {
            s[i] += wi * row[i];
        }
    }
    Some(s)
}

/// Sequential quadratic programming for equality-constrained blocks with
/// bounds. Each step solves a convexified local QP with
/// [`solve_quadratic_active_set`] and is globalized by backtracking on the
/// `ℓ1` merit function, with a second-order feasibility correction when the
/// full step is rejected. Returns `None` when a local QP cannot be solved,
/// so that the caller can fall back to [`solve_equality_alm`].
pub fn solve_equality_sqp(req: &BlockSolveRequest<'_>) -> Option<BlockSolveResult> {
    let set = req.set;
    let eqs = &set.equalities[..];
    let obj = req.objective;
    let n = obj.dim();
    let kind = SolverKind::EqualitySqp;
    let mut x = project_box(req.warm_start, &set.lower, &set.upper);
    let mut y = vec![0.0; eqs.len()];
    let mut penalty = 0.0_f64;
    let mut iters = 0;
    let merit = |x: &[f64], pen: f64| obj.value(x) + pen * eqs.iter().map(|c| c.value(x).abs()).sum::<f64>();
    loop {
        let mut g = vec![0.0; n];
        obj.gradient_into(&x, &mut g);
        if !all_finite(&g) {
            return Some(failure(x, kind, iters));
        }
        let c = eq_values(eqs, &x);
        let viol = norm_inf(&c);
        let kkt = crate::auglag::normal_cone_distance(set, &x, &g);
        if viol <= req.tol && kkt <= req.tol {
            return Some(BlockSolveResult {
                x,
                mu: y,
                status: SolveStatus::Converged,
                inner_iterations: iters,
                pg_norm: kkt,
                eq_violation: viol,
                solver: kind,
            });
        }
        if iters >= req.max_iters {
            return Some(BlockSolveResult {
                x,
                mu: y,
                status: SolveStatus::IterationCap,
                inner_iterations: iters,
                pg_norm: kkt,
                eq_violation: viol,
                solver: kind,
            });
        }
        iters += 1;

        let h0 = lagrangian_hessian(obj, eqs, &y, &x);
        let hscale = h0.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let equalities: Vec<SmoothFunction> = eqs
            .iter()
            .zip(&c)
            .map(|(e, ci)| {
                let row = e.gradient(&x);
                let c0 = ci - dot(&row, &x);
                SmoothFunction::Quadratic(QuadraticFunction::affine(row, c0))
            })
            .collect();
        let lin_set = ConstraintSet {
            lower: set.lower.clone(),
            upper: set.upper.clone(),
            equalities,
        };
        let mut shift = 0.0;
        let mut qp = None;
        for _ in 0..SQP_MAX_REGULARIZATIONS {
            let mut h = h0.clone();
            for i in 0..n {
                h[(i, i)] += shift;
            }
            let hx = h.mul_vec(&x);
            let lin: Vec<f64> = (0..n).map(|i| g[i] - hx[i]).collect();
            let model = QpModel { h, lin };
            let sub = BlockSolveRequest {
                block: req.block,
                objective: &model,
                set: &lin_set,
                warm_start: &x,
                tol: req.tol,
                max_iters: req.max_iters,
            };
            if let Some(r) = solve_quadratic_active_set(&sub) {
                qp = Some(r);
                break;
            }
            shift = if shift == 0.0 { 1e-8 * hscale } else { 10.0 * shift };
        }
        let qp = qp?;
        let d: Vec<f64> = qp.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        if norm_inf(&d) <= f64::EPSILON * (1.0 + norm_inf(&x)) {
            // stationary for the local model: multipliers are final
            y = qp.mu;
            let c_new = eq_values(eqs, &x);
            let kkt = crate::auglag::normal_cone_distance(set, &x, &g);
            return Some(BlockSolveResult {
                status: if kkt <= req.tol && norm_inf(&c_new) <= req.tol {
                    SolveStatus::Converged
                } else {
                    SolveStatus::IterationCap
                },
                x,
                mu: y,
                inner_iterations: iters,
                pg_norm: kkt,
                eq_violation: norm_inf(&c_new),
                solver: kind,
            });
        }
        penalty = penalty.max(1.5 * norm_inf(&qp.mu) + 1e-8);
        let c_l1: f64 = c.iter().map(|v| v.abs()).sum();
        let slope = dot(&g, &d) - penalty * c_l1;
        let m0 = merit(&x, penalty);
        let slack = 4.0 * f64::EPSILON * m0.abs();
        let full: Vec<f64> = qp.x.clone();
        let mut accepted = None;
        if merit(&full, penalty) <= m0 + ARMIJO_C * slope + slack {
            accepted = Some((full.clone(), 1.0));
        } else if let Some(s) = feasibility_correction(eqs, set, &full) {
            let soc: Vec<f64> = full.iter().zip(&s).map(|(a, b)| a + b).collect();
            let soc = project_box(&soc, &set.lower, &set.upper);
            if merit(&soc, penalty) <= m0 + ARMIJO_C * slope + slack {
                accepted = Some((soc, 1.0));
            }
        }
        if accepted.is_none() {
            let mut alpha = 0.5;
            for _ in 0..MAX_HALVINGS {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                if merit(&trial, penalty) <= m0 + ARMIJO_C * alpha * slope + slack {
                    accepted = Some((trial, alpha));
                    break;
                }
                alpha *= 0.5;
            }
        }
        let (next, alpha) = accepted?;
        for (yi, mi) in y.iter_mut().zip(&qp.mu) {
            *yi += alpha * (mi - *yi);
        }
        x = next;
    }
}

/// Primal-dual active-set method for a convex quadratic objective over a box
/// intersected with affine equalities. Returns `None` when the structure does
/// not apply or the method does not settle; the answer is a global minimizer
/// whenever it is returned.
pub fn solve_quadratic_active_set(req: &BlockSolveRequest<'_>) -> Option<BlockSolveResult> {
    let set = req.set;
    let (h, g0) = req.objective.quadratic_model()?;
    let n = g0.len();
    let mut c_rows = Vec::with_capacity(set.equalities.len());
    let mut c_rhs = Vec::with_capacity(set.equalities.len());
    for eq in &set.equalities {
        let q = eq.as_quadratic()?;
        if q.q().nnz() != 0 {
            return None;
        }
        c_rows.push(q.c.clone());
        c_rhs.push(-q.c0);
    }
    let fixed: Vec<bool> = (0..n).map(|i| set.lower[i] == set.upper[i]).collect();

    // convexity on the affine hull of the feasible set
    let hmax = h.as_slice().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let gamma = 1e6 * hmax;
    let mut hp = h.clone();
    for row in &c_rows {
        let s = gamma / dot(row, row).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                hp[(i, j)] += s * row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        if fixed[i] {
            hp[(i, i)] += gamma;
        }
    }
    hp.cholesky()?;

    let r = c_rows.len();
    // 0 inactive, -1 at lower, +1 at upper
    let mut act: Vec<i8> = (0..n)
        .map(|i| if fixed[i] { -1 } else { 0 })
        .collect();
    for _round in 1..=ACTIVE_SET_MAX_ROUNDS {
        let bound_idx: Vec<usize> = (0..n).filter(|&i| act[i] != 0).collect();
        let size = n + r + bound_idx.len();
        let mut k = DenseMatrix::zeros(size, size);
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = h[(i, j)];
            }
            rhs[i] = -g0[i];
        }
        for (e, row) in c_rows.iter().enumerate() {
            for i in 0..n {
                k[(n + e, i)] = row[i];
                k[(i, n + e)] = row[i];
            }
            rhs[n + e] = c_rhs[e];
        }
        for (e, &i) in bound_idx.iter().enumerate() {
            k[(n + r + e, i)] = 1.0;
            k[(i, n + r + e)] = 1.0;
            rhs[n + r + e] = if act[i] < 0 { set.lower[i] } else { set.upper[i] };
        }
        let lu = k.lu()?;
        let mut sol = lu.solve(&rhs);
        let kx = k.mul_vec(&sol);
        let res: Vec<f64> = rhs.iter().zip(&kx).map(|(a, b)| a - b).collect();
        let corr = lu.solve(&res);
        for (s, c) in sol.iter_mut().zip(&corr) {
            *s += c;
        }
        if !all_finite(&sol) {
            return None;
        }
        let x = &sol[..n];
        // bound multiplier ν_i enters stationarity as +ν_i e_i
        let mut nu = vec![0.0; n];
        for (e, &i) in bound_idx.iter().enumerate() {
            nu[i] = sol[n + r + e];
        }
        let scale = 1.0 + norm_inf(&g0);
        let mut next = act.clone();
        for i in 0..n {
            if fixed[i] {
                continue;
            }
            let lo_tol = 1e-12 * (1.0 + set.lower[i].abs());
            let up_tol = 1e-12 * (1.0 + set.upper[i].abs());
            next[i] = match act[i] {
                -1 if nu[i] > 1e-12 * scale => 0,
                1 if nu[i] < -1e-12 * scale => 0,
                0 if x[i] < set.lower[i] - lo_tol => -1,
                0 if x[i] > set.upper[i] + up_tol => 1,
                a => a,
            };
        }
        if next == act {
            let x = project_box(x, &set.lower, &set.upper);
            let mu = sol[n..n + r].to_vec();
            let viol = set.equality_violation(&x);
            let mut g = h.mul_vec(&x);
            for i in 0..n {
                g[i] += g0[i];
                for (e, row) in c_rows.iter().enumerate() {
                    g[i] += mu[e] * row[i];
                }
            }
            let pg = crate::auglag::normal_cone_distance(set, &x, &g);
            return Some(BlockSolveResult {
                x,
                mu,
                status: SolveStatus::Converged,
                inner_iterations: _round,
                pg_norm: pg,
                eq_violation: viol,
                solver: SolverKind::QuadraticActiveSet,
            });
        }
        act = next;
    }
    None
}

/// Routes a request to a solver:
///
/// * quadratic objective without bounds or equalities: exact Newton step,
///   projected gradient if the Hessian is not positive definite;
/// * quadratic objective with a box and affine equalities: active set,
///   falling back to the generic path below;
/// * box only: projected gradient;
/// * otherwise: sequential quadratic programming, falling back to the
///   augmented Lagrangian loop when a local QP cannot be solved.
///
/// `force` bypasses the routing.
pub fn dispatch(req: &BlockSolveRequest<'_>, force: Option<SolverKind>) -> BlockSolveResult {
    let res = match force {
        Some(SolverKind::QuadraticExact) => solve_quadratic_exact(req),
        Some(SolverKind::QuadraticActiveSet) => {
            solve_quadratic_active_set(req).unwrap_or_else(|| generic(req))
        }
        Some(SolverKind::BoxPg) => solve_box_pg(req),
        Some(SolverKind::EqualityAlm) => solve_equality_alm(req),
        Some(SolverKind::EqualitySqp) => solve_equality_sqp(req).unwrap_or_else(|| solve_equality_alm(req)),
        None => route(req),
    };
    descent_guard(req, res)
}

fn generic(req: &BlockSolveRequest<'_>) -> BlockSolveResult {
    if req.set.equalities.is_empty() {
        solve_box_pg(req)
    } else {
        solve_equality_sqp(req)
            .filter(|r| r.status != SolveStatus::NumericalFailure)
            .unwrap_or_else(|| solve_equality_alm(req))
    }
}

fn route(req: &BlockSolveRequest<'_>) -> BlockSolveResult {
    let set = req.set;
    let quadratic = req.objective.quadratic_model().is_some();
    if quadratic && set.equalities.is_empty() && !set.has_bounds() {
        let r = solve_quadratic_exact(req);
        if r.status != SolveStatus::NumericalFailure {
            return r;
        }
        return solve_box_pg(req);
    }
    if quadratic {
        if let Some(r) = solve_quadratic_active_set(req) {
            return r;
        }
    }
    generic(req)
}

/// Keeps the warm start if a solver came back with a worse objective while
/// the warm start is itself feasible.
fn descent_guard(req: &BlockSolveRequest<'_>, res: BlockSolveResult) -> BlockSolveResult {
    if res.status == SolveStatus::NumericalFailure {
        return res;
    }
    let warm = project_box(req.warm_start, &req.set.lower, &req.set.upper);
    let fw = req.objective.value(&warm);
    let fr = req.objective.value(&res.x);
    let warm_viol = req.set.equality_violation(&warm);
    if fr <= fw + 1e-12 * (1.0 + fw.abs()) || warm_viol > req.tol {
        return res;
    }
    if res.status == SolveStatus::Converged && res.eq_violation > warm_viol {
        // a converged point that is less feasible is not comparable
        return res;
    }
    BlockSolveResult {
        x: warm,
        status: SolveStatus::IterationCap,
        ..res
    }
}

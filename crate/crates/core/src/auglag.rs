//! Scalar functionals of the method: augmented Lagrangian, block objective,
//! Lyapunov function, stationarity and penalty residuals, and the parameter
//! conditions that guarantee Lyapunov descent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::{
    apply_r, couple_apply_except, coupling_violation, dot, norm2, norm_inf, seminorm_sq, CsrMatrix,
    DenseMatrix, PivotedQr,
};
use crate::model::{IterateState, Params, Problem, SmoothFunction};
use crate::{BlockVectors, Error, Result};

/// Feasibility tolerance below which the dual residual is defined.
pub const SET_FEASIBILITY_TOL: f64 = 1e-8;
/// A coordinate within this distance of a bound counts as active.
pub const ACTIVE_BOUND_TOL: f64 = 1e-10;
/// Largest `T·m` accepted by [`dagger_norm_sq`].
pub const DAGGER_SIZE_CAP: usize = 1 << 20;

fn check_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", v.len())))
    }
}

/// `L(x, z, λ) = Σ f_t(x_t) + (θ/2)‖z‖² + λᵀ(Ax+z−b) + (ρ/2)‖Ax+z−b‖²`.
pub fn aug_lagrangian(p: &Problem, x: &[Vec<f64>], z: &[f64], lambda: &[f64], params: &Params) -> Result<f64> {
    check_len("z", z, p.m)?;
    check_len("lambda", lambda, p.m)?;
    let mut r = coupling_violation(p, x)?;
    for (ri, zi) in r.iter_mut().zip(z) {
        *ri += zi;
    }
    Ok(p.objective(x) + 0.5 * params.theta * dot(z, z) + dot(lambda, &r) + 0.5 * params.rho * dot(&r, &r))
}

/// The block-`t` subproblem objective with everything else frozen:
///
/// ```text
/// f_t(x_t) + λ̄ᵀA_t x_t + (ρ/2)‖A_t x_t + w‖² + (τ_x/2)‖A_t(x_t − anchor)‖²
/// ```
///
/// with `w = A_{≠t} x̄_{≠t} + z̄ − b`.
#[derive(Debug, Clone)]
pub struct BlockLagrangian<'a> {
    pub objective: &'a SmoothFunction,
    pub coupling: &'a CsrMatrix,
    pub lambda: &'a [f64],
    pub offset: Vec<f64>,
    pub rho: f64,
    pub tau_x: f64,
    pub anchor: &'a [f64],
}

impl<'a> BlockLagrangian<'a> {
    /// Builds the block-`t` objective from the frozen iterate
    /// `(x̄, z̄, λ̄)`; `x_bar[t]` itself is ignored.
    pub fn new(
        p: &'a Problem,
        t: usize,
        x_bar: &[Vec<f64>],
        z_bar: &[f64],
        lambda_bar: &'a [f64],
        params: &Params,
        anchor: &'a [f64],
    ) -> Result<Self> {
        check_len("z", z_bar, p.m)?;
        check_len("lambda", lambda_bar, p.m)?;
        let mut offset = couple_apply_except(p, x_bar, t)?;
        for ((o, zi), bi) in offset.iter_mut().zip(z_bar).zip(&p.b) {
            *o += zi - bi;
        }
        let blk = &p.blocks[t];
        check_len("anchor", anchor, blk.n)?;
        Ok(Self {
            objective: &blk.objective,
            coupling: &blk.coupling,
            lambda: lambda_bar,
            offset,
            rho: params.rho,
            tau_x: params.tau_x,
            anchor,
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let ax = self.coupling.mul_vec(x);
        let mut r = ax.clone();
        for (ri, oi) in r.iter_mut().zip(&self.offset) {
            *ri += oi;
        }
        let dx: Vec<f64> = x.iter().zip(self.anchor).map(|(a, b)| a - b).collect();
        let adx = self.coupling.mul_vec(&dx);
        self.objective.value(x) + dot(self.lambda, &ax) + 0.5 * self.rho * dot(&r, &r) + 0.5 * self.tau_x * dot(&adx, &adx)
    }

    /// `∇f_t + A_tᵀλ̄ + ρA_tᵀ(A_t x + w) + τ_x A_tᵀA_t(x − anchor)`.
    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        self.objective.gradient_into(x, g);
        let ax = self.coupling.mul_vec(x);
        let dx: Vec<f64> = x.iter().zip(self.anchor).map(|(a, b)| a - b).collect();
        let adx = self.coupling.mul_vec(&dx);
        let m_vec: Vec<f64> = (0..ax.len())
            .map(|i| self.lambda[i] + self.rho * (ax[i] + self.offset[i]) + self.tau_x * adx[i])
            .collect();
        self.coupling.tr_mul_vec_acc(&m_vec, g);
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// For a quadratic `f_t`: Hessian `Q + (ρ+τ_x)A_tᵀA_t` and the gradient
    /// at the origin.
    pub fn quadratic_model(&self) -> Option<(DenseMatrix, Vec<f64>)> {
        let q = self.objective.as_quadratic()?;
        let n = self.dim();
        let mut h = self.coupling.gram();
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] *= self.rho + self.tau_x;
            }
        }
        for (i, j, v) in q.q().triplets() {
            h[(i, j)] += v;
        }
        let g0 = self.gradient(&vec![0.0; n]);
        Some((h, g0))
    }
}

/// Value of the block-`t` subproblem objective.
pub fn block_objective(
    p: &Problem,
    t: usize,
    x_t: &[f64],
    x_bar: &[Vec<f64>],
    z_bar: &[f64],
    lambda_bar: &[f64],
    params: &Params,
    anchor: &[f64],
) -> Result<f64> {
    let bl = BlockLagrangian::new(p, t, x_bar, z_bar, lambda_bar, params, anchor)?;
    check_len("x_t", x_t, bl.dim())?;
    Ok(bl.value(x_t))
}

/// Gradient of [`block_objective`] with respect to `x_t`.
pub fn block_gradient(
    p: &Problem,
    t: usize,
    x_t: &[f64],
    x_bar: &[Vec<f64>],
    z_bar: &[f64],
    lambda_bar: &[f64],
    params: &Params,
    anchor: &[f64],
) -> Result<Vec<f64>> {
    let bl = BlockLagrangian::new(p, t, x_bar, z_bar, lambda_bar, params, anchor)?;
    check_len("x_t", x_t, bl.dim())?;
    Ok(bl.gradient(x_t))
}

/// `Φ = L(x,z,λ) + (τ_z/4)‖z−ẑ‖² + Σ_t (τ_x/4)‖x_t−x̂_t‖²_{A_tᵀA_t}`.
pub fn lyapunov(
    p: &Problem,
    x: &[Vec<f64>],
    z: &[f64],
    lambda: &[f64],
    x_hat: &[Vec<f64>],
    z_hat: &[f64],
    params: &Params,
) -> Result<f64> {
    let l = aug_lagrangian(p, x, z, lambda, params)?;
    check_len("z_hat", z_hat, p.m)?;
    if x_hat.len() != x.len() {
        return Err(Error::DimensionMismatch("x_hat has the wrong number of blocks".into()));
    }
    let dz: Vec<f64> = z.iter().zip(z_hat).map(|(a, b)| a - b).collect();
    let mut prox = 0.0;
    for (blk, (xt, xh)) in p.blocks.iter().zip(x.iter().zip(x_hat)) {
        check_len("x_hat block", xh, blk.n)?;
        let d: Vec<f64> = xt.iter().zip(xh).map(|(a, b)| a - b).collect();
        prox += seminorm_sq(&blk.coupling, &d)?;
    }
    Ok(l + 0.25 * params.tau_z * dot(&dz, &dz) + 0.25 * params.tau_x * prox)
}

/// `Δz⁰ = −τ_z⁻¹(λ⁰ + θz⁰)`; zero when `τ_z = 0`.
pub fn initial_dz(z0: &[f64], lambda0: &[f64], params: &Params) -> Vec<f64> {
    if params.tau_z == 0.0 {
        return vec![0.0; z0.len()];
    }
    z0.iter()
        .zip(lambda0)
        .map(|(z, l)| -(l + params.theta * z) / params.tau_z)
        .collect()
}

/// `Φ⁰ = L(x⁰, z⁰, λ⁰) + (τ_z/4)‖Δz⁰‖²`.
pub fn initial_lyapunov(p: &Problem, x0: &[Vec<f64>], z0: &[f64], lambda0: &[f64], params: &Params) -> Result<f64> {
    let dz0 = initial_dz(z0, lambda0, params);
    Ok(aug_lagrangian(p, x0, z0, lambda0, params)? + 0.25 * params.tau_z * dot(&dz0, &dz0))
}

/// `π(x) = ‖Ax − b‖`.
pub fn primal_residual(p: &Problem, x: &[Vec<f64>]) -> Result<f64> {
    Ok(norm2(&coupling_violation(p, x)?))
}

/// `δ_t(x_t, λ) = dist(∇f_t(x_t) + A_tᵀλ, −N_{X_t}(x_t))`.
///
/// Box-only sets use the exact per-coordinate rule. With equalities, the
/// multipliers are fitted by least squares on the box-inactive coordinates
/// and the box rule is then applied to the fitted residual on the active
/// ones; this is exact for pure box and pure equality sets.
pub fn dual_residual(p: &Problem, t: usize, x_t: &[f64], lambda: &[f64]) -> Result<f64> {
    let blk = p.blocks.get(t).ok_or(Error::IndexOutOfRange {
        index: t,
        count: p.blocks.len(),
    })?;
    check_len("x_t", x_t, blk.n)?;
    check_len("lambda", lambda, p.m)?;
    let violation = blk.set.bound_violation(x_t).max(blk.set.equality_violation(x_t));
    if violation > SET_FEASIBILITY_TOL {
        return Err(Error::OffSet { block: t, violation });
    }
    let mut g = blk.objective.gradient(x_t);
    blk.coupling.tr_mul_vec_acc(lambda, &mut g);
    Ok(normal_cone_distance(&blk.set, x_t, &g))
}

/// Distance from `g` to `−N_X(x)` for a box-plus-equalities set.
pub fn normal_cone_distance(set: &crate::model::ConstraintSet, x: &[f64], g: &[f64]) -> f64 {
    let n = x.len();
    let at_lower: Vec<bool> = (0..n)
        .map(|i| set.lower[i].is_finite() && x[i] <= set.lower[i] + ACTIVE_BOUND_TOL * (1.0 + set.lower[i].abs()))
        .collect();
    let at_upper: Vec<bool> = (0..n)
        .map(|i| set.upper[i].is_finite() && x[i] >= set.upper[i] - ACTIVE_BOUND_TOL * (1.0 + set.upper[i].abs()))
        .collect();
    let mut res = g.to_vec();
    if !set.equalities.is_empty() {
        let inactive: Vec<usize> = (0..n).filter(|&i| !at_lower[i] && !at_upper[i]).collect();
        let grads: Vec<Vec<f64>> = set.equalities.iter().map(|c| c.gradient(x)).collect();
        if !inactive.is_empty() {
            let r = grads.len();
            let mut j = DenseMatrix::zeros(inactive.len(), r);
            for (row, &i) in inactive.iter().enumerate() {
                for (col, gc) in grads.iter().enumerate() {
                    j[(row, col)] = gc[i];
                }
            }
            let rhs: Vec<f64> = inactive.iter().map(|&i| -g[i]).collect();
            let mu = PivotedQr::new(&j).least_squares(&rhs, 1e-12);
            for (gc, m) in grads.iter().zip(&mu) {
                for i in 0..n {
                    res[i] += m * gc[i];
                }
            }
        }
    }
    let mut acc = 0.0;
    for i in 0..n {
        let c = match (at_lower[i], at_upper[i]) {
            (true, true) => 0.0,
            (true, false) => (-res[i]).max(0.0),
            (false, true) => res[i].max(0.0),
            (false, false) => res[i].abs(),
        };
        acc += c * c;
    }
    libm::sqrt(acc)
}

/// Primal/dual residuals of the original problem and of the penalty
/// formulation at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSnapshot {
    /// `π^k = ‖Ax^k − b‖`.
    pub pi: f64,
    /// `δ_t^k`; `+∞` where the block iterate is off its set.
    pub delta: Vec<f64>,
    /// `p^k = Ax^k + z^k − b`.
    pub p: Vec<f64>,
    /// `d_t^k`.
    pub d_blocks: BlockVectors,
    /// `d_z^k = −τ_zΔz^k`.
    pub d_z: Vec<f64>,
    pub infnorm_p: f64,
    pub infnorm_d: f64,
    /// `‖Ax^k − b‖∞`.
    pub infnorm_coupling: f64,
}

impl ResidualSnapshot {
    pub fn delta_max(&self) -> f64 {
        self.delta.iter().copied().fold(0.0, f64::max)
    }
}

/// Residuals at `state` (which must have `k ≥ 1`):
///
/// ```text
/// p^k   = Ax^k + z^k − b
/// d_t^k = ρA_tᵀA_{≠t}Δx_{≠t}^k − ρA_tᵀΔz^k − τ_x A_tᵀA_tΔx_t^k
/// d_z^k = −τ_zΔz^k
/// ```
pub fn penalty_residuals(p: &Problem, state: &IterateState) -> Result<ResidualSnapshot> {
    if state.k == 0 {
        return Err(Error::NoPreviousIterate);
    }
    let params = &state.params;
    let viol = coupling_violation(p, &state.x)?;
    let pk: Vec<f64> = viol.iter().zip(&state.z).map(|(v, z)| v + z).collect();
    let mut d_blocks = Vec::with_capacity(p.blocks.len());
    for (t, blk) in p.blocks.iter().enumerate() {
        let others = couple_apply_except(p, &state.dx, t)?;
        let own = blk.coupling.mul_vec(&state.dx[t]);
        let v: Vec<f64> = (0..p.m)
            .map(|i| params.rho * (others[i] - state.dz[i]) - params.tau_x * own[i])
            .collect();
        d_blocks.push(blk.coupling.tr_mul_vec(&v));
    }
    let d_z: Vec<f64> = state.dz.iter().map(|v| -params.tau_z * v).collect();
    let delta = (0..p.blocks.len())
        .map(|t| match dual_residual(p, t, &state.x[t], &state.lambda) {
            Ok(d) => Ok(d),
            Err(Error::OffSet { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<f64>>>()?;
    let infnorm_d = d_blocks.iter().map(|d| norm_inf(d)).fold(norm_inf(&d_z), f64::max);
    Ok(ResidualSnapshot {
        pi: norm2(&viol),
        delta,
        infnorm_p: norm_inf(&pk),
        p: pk,
        d_blocks,
        d_z,
        infnorm_d,
        infnorm_coupling: norm_inf(&viol),
    })
}

/// `η_x = τ_x/4 − (T−1)ρ/2`, `η_z = τ_z/4 − 2(θ+τ_z)²/ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPair {
    pub eta_x: f64,
    pub eta_z: f64,
    /// Both strictly positive.
    pub feasible: bool,
}

pub fn eta_pair(params: &Params, blocks: usize) -> EtaPair {
    let t = blocks as f64;
    let eta_x = params.tau_x / 4.0 - (t - 1.0) * params.rho / 2.0;
    let s = params.theta + params.tau_z;
    let eta_z = params.tau_z / 4.0 - 2.0 * s * s / params.rho;
    EtaPair {
        eta_x,
        eta_z,
        feasible: eta_x > 0.0 && eta_z > 0.0,
    }
}

/// `θ = ε⁻², ρ = 64ε⁻², τ_x = 256(T−1)ε⁻², τ_z = 2ε⁻²`.
pub fn theorem1_params(eps: f64, blocks: usize) -> Result<Params> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
    }
    if blocks == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    let inv = 1.0 / (eps * eps);
    Ok(Params {
        theta: inv,
        rho: 64.0 * inv,
        tau_x: 256.0 * (blocks as f64 - 1.0) * inv,
        tau_z: 2.0 * inv,
    })
}

/// Residual bounds guaranteed within the first `K` iterations:
///
/// ```text
/// π^j   ≤ √( 2(Φ¹ − Φ̂)/θ · (1 + 2(θ+τ_z)²/(Kη_zρ)) )
/// δ_t^j ≤ (ρ+τ_x)‖A_t‖ √( 2(T+1)(Φ¹ − Φ^K) / (K min{η_x, η_z}) )
/// ```
pub fn theorem1_bounds(
    phi1: f64,
    phi_hat: f64,
    phi_k: f64,
    k: usize,
    params: &Params,
    spectral_norms: &[f64],
    blocks: usize,
) -> Result<(f64, Vec<f64>)> {
    let eta = eta_pair(params, blocks);
    if !eta.feasible {
        return Err(Error::BoundsUndefined {
            eta_x: eta.eta_x,
            eta_z: eta.eta_z,
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if spectral_norms.len() != blocks {
        return Err(Error::DimensionMismatch(format!(
            "{} spectral norms for {blocks} blocks",
            spectral_norms.len()
        )));
    }
    let kf = k as f64;
    let s = params.theta + params.tau_z;
    let pi_bound = libm::sqrt(
        (2.0 * (phi1 - phi_hat).max(0.0) / params.theta) * (1.0 + 2.0 * s * s / (kf * eta.eta_z * params.rho)),
    );
    let root = libm::sqrt(
        2.0 * (blocks as f64 + 1.0) * (phi1 - phi_k).max(0.0) / (kf * eta.eta_x.min(eta.eta_z)),
    );
    let delta = spectral_norms
        .iter()
        .map(|a| (params.rho + params.tau_x) * a * root)
        .collect();
    Ok((pi_bound, delta))
}

/// Squared contraction norm of the deviation from a reference point:
///
/// ```text
/// ‖D(x−x*)‖²_R + (ρ+τ_z)‖z−z*‖² + ρ⁻¹‖λ−λ*‖² + τ_z‖Δz‖²
/// ```
///
/// with `R = (ρ+τ_x)I − ρEEᵀ` applied through its closed form.
pub fn dagger_norm_sq(
    p: &Problem,
    state: &IterateState,
    ref_x: &[Vec<f64>],
    ref_z: &[f64],
    ref_lambda: &[f64],
    params: &Params,
) -> Result<f64> {
    let size = p.blocks.len() * p.m;
    if size > DAGGER_SIZE_CAP {
        return Err(Error::SizeCapExceeded {
            size,
            cap: DAGGER_SIZE_CAP,
        });
    }
    check_len("ref_z", ref_z, p.m)?;
    check_len("ref_lambda", ref_lambda, p.m)?;
    if ref_x.len() != p.blocks.len() {
        return Err(Error::DimensionMismatch("reference x has the wrong number of blocks".into()));
    }
    let mut dev = Vec::with_capacity(size);
    for (blk, (xt, xr)) in p.blocks.iter().zip(state.x.iter().zip(ref_x)) {
        check_len("reference block", xr, blk.n)?;
        let d: Vec<f64> = xt.iter().zip(xr).map(|(a, b)| a - b).collect();
        dev.extend(blk.coupling.mul_vec(&d));
    }
    let rd = apply_r(params.rho, params.tau_x, p.blocks.len(), p.m, &dev);
    let dz: Vec<f64> = state.z.iter().zip(ref_z).map(|(a, b)| a - b).collect();
    let dl: Vec<f64> = state.lambda.iter().zip(ref_lambda).map(|(a, b)| a - b).collect();
    Ok(dot(&dev, &rd)
        + (params.rho + params.tau_z) * dot(&dz, &dz)
        + dot(&dl, &dl) / params.rho
        + params.tau_z * dot(&state.dz, &state.dz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::scalar_problem;
    use crate::model::{BlockSpec, ConstraintSet, QuadraticFunction};

    fn zero_objective_problem() -> Problem {
        let blk = BlockSpec {
            n: 1,
            objective: SmoothFunction::Quadratic(QuadraticFunction::affine(vec![0.0], 0.0)),
            set: ConstraintSet::unbounded(1),
            coupling: CsrMatrix::identity(1),
        };
        Problem::new(1, vec![0.0], vec![blk])
    }

    #[test]
    fn aug_lagrangian_hand_value() {
        let p = zero_objective_problem();
        let params = Params {
            rho: 2.0,
            theta: 4.0,
            tau_x: 0.0,
            tau_z: 1.0,
        };
        let l = aug_lagrangian(&p, &[vec![1.0]], &[0.0], &[2.0], &params).unwrap();
        assert_eq!(l, 3.0);
    }

    #[test]
    fn aug_lagrangian_at_feasible_point_is_objective() {
        let p = scalar_problem(&[1.0, 1.0], 1.0);
        let params = Params {
            rho: 5.0,
            theta: 3.0,
            tau_x: 1.0,
            tau_z: 1.0,
        };
        let x = [vec![0.25], vec![0.75]];
        let l = aug_lagrangian(&p, &x, &[0.0], &[-7.0], &params).unwrap();
        assert!((l - p.objective(&x)).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_reduces_to_aug_lagrangian() {
        let p = scalar_problem(&[1.0, 2.0], 1.0);
        let params = Params {
            rho: 2.0,
            theta: 1.0,
            tau_x: 3.0,
            tau_z: 0.5,
        };
        let x = [vec![0.3], vec![-0.2]];
        let z = [0.1];
        let lam = [0.7];
        let a = aug_lagrangian(&p, &x, &z, &lam, &params).unwrap();
        let phi = lyapunov(&p, &x, &z, &lam, &x, &z, &params).unwrap();
        assert_eq!(a, phi);
    }

    #[test]
    fn initial_lyapunov_convention() {
        let p = scalar_problem(&[1.0], 0.0);
        let params = Params {
            rho: 1.0,
            theta: 1.0,
            tau_x: 0.0,
            tau_z: 2.0,
        };
        let dz0 = initial_dz(&[2.0], &[0.0], &params);
        assert_eq!(dz0, vec![-1.0]);
        let phi0 = initial_lyapunov(&p, &[vec![1.0]], &[2.0], &[0.0], &params).unwrap();
        let l = aug_lagrangian(&p, &[vec![1.0]], &[2.0], &[0.0], &params).unwrap();
        assert!((phi0 - (l + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn proximal_term_vanishes_at_anchor() {
        let p = scalar_problem(&[1.0, 1.0], 1.0);
        let x_bar = [vec![0.4], vec![0.1]];
        let mut params = Params {
            rho: 2.0,
            theta: 1.0,
            tau_x: 0.0,
            tau_z: 1.0,
        };
        let anchor = [0.4];
        let v0 = block_objective(&p, 0, &[0.4], &x_bar, &[0.0], &[1.0], &params, &anchor).unwrap();
        params.tau_x = 1e6;
        let v1 = block_objective(&p, 0, &[0.4], &x_bar, &[0.0], &[1.0], &params, &anchor).unwrap();
        assert_eq!(v0, v1);
    }

    #[test]
    fn primal_residual_examples() {
        let p = scalar_problem(&[1.0, 1.0], 1.0);
        assert_eq!(primal_residual(&p, &[vec![1.0], vec![1.0]]).unwrap(), 1.0);
        assert_eq!(primal_residual(&p, &[vec![0.5], vec![0.5]]).unwrap(), 0.0);
    }

    #[test]
    fn box_normal_cone_rule() {
        let set = ConstraintSet::boxed(vec![0.0], vec![f64::INFINITY]);
        assert_eq!(normal_cone_distance(&set, &[0.0], &[-3.0]), 3.0);
        assert_eq!(normal_cone_distance(&set, &[0.0], &[3.0]), 0.0);
        assert_eq!(normal_cone_distance(&set, &[1.0], &[3.0]), 3.0);
        let fixed = ConstraintSet::boxed(vec![1.0], vec![1.0]);
        assert_eq!(normal_cone_distance(&fixed, &[1.0], &[-5.0]), 0.0);
    }

    #[test]
    fn equality_normal_cone_least_squares() {
        let mut set = ConstraintSet::unbounded(2);
        set.equalities
            .push(SmoothFunction::Quadratic(QuadraticFunction::affine(vec![1.0, -1.0], 0.0)));
        let d = normal_cone_distance(&set, &[0.5, 0.5], &[1.0, 1.0]);
        assert!((d - libm::sqrt(2.0)).abs() < 1e-14);
        // g parallel to ∇c is fully absorbed by the multiplier
        let d = normal_cone_distance(&set, &[0.5, 0.5], &[2.0, -2.0]);
        assert!(d < 1e-14);
    }

    #[test]
    fn dual_residual_rejects_infeasible_point() {
        let mut p = scalar_problem(&[1.0], 0.0);
        p.blocks[0].set = ConstraintSet::boxed(vec![0.0], vec![1.0]);
        assert!(matches!(dual_residual(&p, 0, &[2.0], &[0.0]), Err(Error::OffSet { .. })));
    }

    fn close4(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) {
        for (x, y) in [(a.0, b.0), (a.1, b.1), (a.2, b.2), (a.3, b.3)] {
            assert!((x - y).abs() <= 1e-12 * y.abs(), "{x} vs {y}");
        }
    }

    #[test]
    fn eta_examples() {
        let params = theorem1_params(0.1, 3).unwrap();
        close4((params.theta, params.rho, params.tau_x, params.tau_z), (100.0, 6400.0, 51200.0, 200.0));
        let e = eta_pair(&params, 3);
        assert!((e.eta_x - 6400.0).abs() < 1e-9);
        assert!((e.eta_z - 21.875).abs() < 1e-9);
        assert!(e.feasible);
        let e = eta_pair(
            &Params {
                rho: 1.0,
                theta: 1.0,
                tau_x: 0.0,
                tau_z: 1.0,
            },
            2,
        );
        assert!(e.eta_x < 0.0 && !e.feasible);
        let theta = 3.0;
        let e = eta_pair(
            &Params {
                rho: 32.0 * theta,
                theta,
                tau_x: 1e9,
                tau_z: theta,
            },
            2,
        );
        assert_eq!(e.eta_z, 0.0);
        assert!(!e.feasible);
    }

    #[test]
    fn theorem1_params_examples() {
        let p = theorem1_params(0.1, 2).unwrap();
        close4((p.theta, p.rho, p.tau_x, p.tau_z), (100.0, 6400.0, 25600.0, 200.0));
        let p = theorem1_params(0.5, 2).unwrap();
        assert_eq!((p.theta, p.rho, p.tau_x, p.tau_z), (4.0, 256.0, 1024.0, 8.0));
        assert_eq!(theorem1_params(0.5, 1).unwrap().tau_x, 0.0);
        assert!(theorem1_params(1.0, 2).is_err());
        assert!(theorem1_params(0.0, 2).is_err());
    }

    #[test]
    fn theorem1_bounds_shape() {
        let params = theorem1_params(0.1, 2).unwrap();
        let (pi, _) = theorem1_bounds(5.0, 5.0, 4.0, 10, &params, &[1.0, 1.0], 2).unwrap();
        assert_eq!(pi, 0.0);
        let (_, d1) = theorem1_bounds(5.0, 0.0, 4.0, 100, &params, &[1.0, 2.0], 2).unwrap();
        let (_, d2) = theorem1_bounds(5.0, 0.0, 4.0, 400, &params, &[1.0, 2.0], 2).unwrap();
        assert!((d1[0] / d2[0] - 2.0).abs() < 1e-12);
        assert!((d1[1] / d1[0] - 2.0).abs() < 1e-12);
        let bad = Params {
            rho: 1.0,
            theta: 1.0,
            tau_x: 0.0,
            tau_z: 1.0,
        };
        assert!(matches!(
            theorem1_bounds(1.0, 0.0, 1.0, 1, &bad, &[1.0, 1.0], 2),
            Err(Error::BoundsUndefined { .. })
        ));
    }
}

//! Fixed-parameter proximal Jacobi iteration.
//!
//! One iteration solves all block subproblems against the previous iterate
//! (fork-join through a [`BlockExecutor`]), then applies the closed-form
//! slack update and the multiplier update:
//!
//! ```text
//! z^k = (τ_z z^{k−1} − ρ(Ax^k − b) − λ^{k−1}) / (τ_z + ρ + θ)
//! λ^k = λ^{k−1} + ρ(Ax^k + z^k − b)
//! ```

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::{coupling_violation, dot, norm_inf, seminorm_sq};
use crate::auglag::{initial_dz, initial_lyapunov, lyapunov, penalty_residuals, BlockLagrangian};
use crate::model::{IterateState, Params, Problem};
use crate::subsolver::{
    dispatch, project_box, BlockSolveRequest, BlockSolveResult, SolveStatus, SolverKind, DEFAULT_INNER_CAP,
    DEFAULT_INNER_TOL,
};
use crate::{BlockVectors, Error, Result};

/// Task run once per block inside an iteration.
pub type BlockTask<'a> = dyn Fn(usize) -> Result<BlockSolveResult> + Sync + 'a;

/// Runs the `T` independent block solves of an iteration. Implementations
/// must return results in block order.
pub trait BlockExecutor {
    fn run(&self, blocks: usize, task: &BlockTask<'_>) -> Vec<Result<BlockSolveResult>>;
}

/// Solves blocks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl BlockExecutor for SerialExecutor {
    fn run(&self, blocks: usize, task: &BlockTask<'_>) -> Vec<Result<BlockSolveResult>> {
        (0..blocks).map(task).collect()
    }
}

/// Millisecond clock used for phase timings.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Clock that always reads zero; yields timing-free traces.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

pub struct RunConfig<'a> {
    /// Iteration limit `K`.
    pub max_iters: usize,
    pub inner_tol: f64,
    pub inner_cap: usize,
    /// Compute `z^k` from `x^{k−1}` so it can overlap the block solves.
    pub parallel_z: bool,
    /// Per-block solver choice; missing or `None` entries use the default
    /// routing.
    pub solver_overrides: Vec<Option<SolverKind>>,
    pub executor: &'a dyn BlockExecutor,
    pub clock: &'a dyn Clock,
}

impl core::fmt::Debug for RunConfig<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("RunConfig")
            .field("max_iters", &self.max_iters)
            .field("inner_tol", &self.inner_tol)
            .field("inner_cap", &self.inner_cap)
            .field("parallel_z", &self.parallel_z)
            .field("solver_overrides", &self.solver_overrides)
            .finish_non_exhaustive()
    }
}

impl RunConfig<'static> {
    /// Serial execution, no timings.
    pub fn serial(max_iters: usize) -> Self {
        Self {
            max_iters,
            inner_tol: DEFAULT_INNER_TOL,
            inner_cap: DEFAULT_INNER_CAP,
            parallel_z: false,
            solver_overrides: Vec::new(),
            executor: &SerialExecutor,
            clock: &NoClock,
        }
    }
}

/// Per-iteration metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub phi: f64,
    /// `Φ^k − Φ^{k−1}`.
    pub dphi: f64,
    /// `‖Ax^k − b‖∞`.
    pub coupling_inf: f64,
    pub p_inf: f64,
    pub d_inf: f64,
    pub pi: f64,
    pub delta: Vec<f64>,
    pub delta_max: f64,
    /// Parameters in force during the iteration.
    pub params: Params,
    pub t_xupd_ms: f64,
    pub t_zupd_ms: f64,
    pub t_lupd_ms: f64,
    pub inner_iters: Vec<usize>,
    pub inner_iters_total: usize,
    /// Blocks whose solver stopped at its iteration cap.
    pub capped_blocks: usize,
    /// `‖λ^k + θz^k + τ_zΔz^k‖∞`, relative.
    pub lemma1_res: f64,
    /// `Δλ^k` against `−θz^k − τ_zΔz^k + θz^{k−1} + τ_zΔz^{k−1}`, relative.
    pub dlambda_res: f64,
    /// `p^k` against `Δλ^k/ρ`, relative.
    pub p_identity_res: f64,
    /// `λ^{k−1} + ρp^k + θz^k + τ_zΔz^k`, relative.
    pub zstat_res: f64,
    /// `Σ_t ‖Δx_t^k‖²_{A_tᵀA_t}`.
    pub dx_sq: f64,
    pub dx_sq_prev: f64,
    pub dz_sq: f64,
    pub dz_sq_prev: f64,
}

/// Initial state: `x⁰` projected onto the boxes, `Δx⁰ = 0`,
/// `Δz⁰ = −τ_z⁻¹(λ⁰ + θz⁰)` and `Φ⁰ = L(x⁰,z⁰,λ⁰) + (τ_z/4)‖Δz⁰‖²`.
pub fn init_state(p: &Problem, x0: &[Vec<f64>], z0: &[f64], lambda0: &[f64], params: &Params) -> Result<IterateState> {
    params.validate()?;
    if x0.len() != p.blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial blocks for {} blocks",
            x0.len(),
            p.blocks.len()
        )));
    }
    if z0.len() != p.m || lambda0.len() != p.m {
        return Err(Error::DimensionMismatch("z0 / lambda0 must have length m".to_string()));
    }
    let mut x = Vec::with_capacity(x0.len());
    for (t, (blk, xt)) in p.blocks.iter().zip(x0).enumerate() {
        if xt.len() != blk.n {
            return Err(Error::DimensionMismatch(format!(
                "block {t}: initial vector has length {}, expected {}",
                xt.len(),
                blk.n
            )));
        }
        x.push(project_box(xt, &blk.set.lower, &blk.set.upper));
    }
    let dz = initial_dz(z0, lambda0, params);
    let phi = initial_lyapunov(p, &x, z0, lambda0, params)?;
    let z_prev: Vec<f64> = z0.iter().zip(&dz).map(|(z, d)| z - d).collect();
    Ok(IterateState {
        k: 0,
        x_prev: x.clone(),
        dx: p.zeros(),
        dx_prev: p.zeros(),
        x,
        z: z0.to_vec(),
        lambda: lambda0.to_vec(),
        z_prev,
        lambda_prev: lambda0.to_vec(),
        dz_prev: vec![0.0; p.m],
        dz,
        params: *params,
        params_prev: *params,
        phi,
    })
}

/// Solves every block subproblem against `(x^{k−1}, z^{k−1}, λ^{k−1})`.
pub fn x_update_all(
    p: &Problem,
    state: &IterateState,
    params: &Params,
    config: &RunConfig<'_>,
) -> Result<Vec<BlockSolveResult>> {
    let (tol, cap, overrides) = (config.inner_tol, config.inner_cap, &config.solver_overrides);
    let task = |t: usize| -> Result<BlockSolveResult> {
        let bl = BlockLagrangian::new(p, t, &state.x, &state.z, &state.lambda, params, &state.x[t])?;
        let req = BlockSolveRequest {
            block: t,
            objective: &bl,
            set: &p.blocks[t].set,
            warm_start: &state.x[t],
            tol,
            max_iters: cap,
        };
        let force = overrides.get(t).copied().flatten();
        Ok(dispatch(&req, force))
    };
    let results = config.executor.run(p.blocks.len(), &task);
    let mut out = Vec::with_capacity(results.len());
    for (t, r) in results.into_iter().enumerate() {
        let r = r?;
        if r.status == SolveStatus::NumericalFailure {
            return Err(Error::BlockFailure {
                block: t,
                reason: format!("{:?} solver reported a numerical failure", r.solver),
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// `z^k = (τ_z z^{k−1} − ρ(Ax^k − b) − λ^{k−1}) / (τ_z + ρ + θ)`.
pub fn z_update(p: &Problem, x_k: &[Vec<f64>], z_prev: &[f64], lambda_prev: &[f64], params: &Params) -> Result<Vec<f64>> {
    let viol = coupling_violation(p, x_k)?;
    let denom = params.tau_z + params.rho + params.theta;
    Ok((0..p.m)
        .map(|i| (params.tau_z * z_prev[i] - params.rho * viol[i] - lambda_prev[i]) / denom)
        .collect())
}

/// `λ^k = λ^{k−1} + ρ(Ax^k + z^k − b)`.
pub fn lambda_update(p: &Problem, x_k: &[Vec<f64>], z_k: &[f64], lambda_prev: &[f64], params: &Params) -> Result<Vec<f64>> {
    let viol = coupling_violation(p, x_k)?;
    Ok((0..p.m)
        .map(|i| lambda_prev[i] + params.rho * (viol[i] + z_k[i]))
        .collect())
}

fn max_abs(vs: &[&[f64]]) -> f64 {
    vs.iter().map(|v| norm_inf(v)).fold(0.0, f64::max)
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| s * x).collect()
}

/// One iteration with parameters `params`; returns the new state and its
/// trace record.
pub fn iterate(p: &Problem, state: &IterateState, params: &Params, config: &RunConfig<'_>) -> Result<(IterateState, TraceRecord)> {
    params.validate()?;
    let clock = config.clock;
    let t0 = clock.now_ms();
    let z_early = if config.parallel_z {
        Some(z_update(p, &state.x, &state.z, &state.lambda, params)?)
    } else {
        None
    };
    let results = x_update_all(p, state, params, config)?;
    let t1 = clock.now_ms();
    let x: BlockVectors = results.iter().map(|r| r.x.clone()).collect();
    let z = match z_early {
        Some(z) => z,
        None => z_update(p, &x, &state.z, &state.lambda, params)?,
    };
    let t2 = clock.now_ms();
    let lambda = lambda_update(p, &x, &z, &state.lambda, params)?;
    let t3 = clock.now_ms();

    let dx: BlockVectors = x
        .iter()
        .zip(&state.x)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect())
        .collect();
    let dz: Vec<f64> = z.iter().zip(&state.z).map(|(a, b)| a - b).collect();
    let phi = lyapunov(p, &x, &z, &lambda, &state.x, &state.z, params)?;
    let next = IterateState {
        k: state.k + 1,
        x,
        z,
        lambda,
        x_prev: state.x.clone(),
        z_prev: state.z.clone(),
        lambda_prev: state.lambda.clone(),
        dz,
        dz_prev: state.dz.clone(),
        dx,
        dx_prev: state.dx.clone(),
        params: *params,
        params_prev: state.params,
        phi,
    };
    let res = penalty_residuals(p, &next)?;

    // algebraic identities of the method, relative to the largest term
    let (th, tz, rho) = (params.theta, params.tau_z, params.rho);
    let (th_prev, tz_prev) = (state.params.theta, state.params.tau_z);
    let m = p.m;
    let th_z = scaled(&next.z, th);
    let tz_dz = scaled(&next.dz, tz);
    let lemma1: Vec<f64> = (0..m).map(|i| next.lambda[i] + th_z[i] + tz_dz[i]).collect();
    let lemma1_res = norm_inf(&lemma1) / (1.0 + max_abs(&[&next.lambda, &th_z, &tz_dz]));

    let dlam: Vec<f64> = (0..m).map(|i| next.lambda[i] - state.lambda[i]).collect();
    let th_zp = scaled(&state.z, th_prev);
    let tz_dzp = scaled(&state.dz, tz_prev);
    let rec: Vec<f64> = (0..m)
        .map(|i| dlam[i] - (-th_z[i] - tz_dz[i] + th_zp[i] + tz_dzp[i]))
        .collect();
    let dlambda_res = norm_inf(&rec) / (1.0 + max_abs(&[&dlam, &th_z, &tz_dz, &th_zp, &tz_dzp]));

    let dlam_rho = scaled(&dlam, 1.0 / rho);
    let pid: Vec<f64> = (0..m).map(|i| res.p[i] - dlam_rho[i]).collect();
    let p_identity_res = norm_inf(&pid) / (1.0 + max_abs(&[&res.p, &dlam_rho]));

    let rho_p = scaled(&res.p, rho);
    let zs: Vec<f64> = (0..m)
        .map(|i| state.lambda[i] + rho_p[i] + th_z[i] + tz_dz[i])
        .collect();
    let zstat_res = norm_inf(&zs) / (1.0 + max_abs(&[&state.lambda, &rho_p, &th_z, &tz_dz]));

    let mut dx_sq = 0.0;
    let mut dx_sq_prev = 0.0;
    for (t, blk) in p.blocks.iter().enumerate() {
        dx_sq += seminorm_sq(&blk.coupling, &next.dx[t])?;
        dx_sq_prev += seminorm_sq(&blk.coupling, &next.dx_prev[t])?;
    }
    let inner_iters: Vec<usize> = results.iter().map(|r| r.inner_iterations).collect();
    let record = TraceRecord {
        k: next.k,
        phi,
        dphi: phi - state.phi,
        coupling_inf: res.infnorm_coupling,
        p_inf: res.infnorm_p,
        d_inf: res.infnorm_d,
        pi: res.pi,
        delta_max: res.delta_max(),
        delta: res.delta,
        params: *params,
        t_xupd_ms: t1 - t0,
        t_zupd_ms: t2 - t1,
        t_lupd_ms: t3 - t2,
        inner_iters_total: inner_iters.iter().sum(),
        inner_iters,
        capped_blocks: results.iter().filter(|r| r.status == SolveStatus::IterationCap).count(),
        lemma1_res,
        dlambda_res,
        p_identity_res,
        zstat_res,
        dx_sq,
        dx_sq_prev,
        dz_sq: dot(&next.dz, &next.dz),
        dz_sq_prev: dot(&next.dz_prev, &next.dz_prev),
    };
    Ok((next, record))
}

/// Final state and trace of a run; `error` is set when the run aborted, in
/// which case the trace holds every completed iteration.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: IterateState,
    pub trace: Vec<TraceRecord>,
    pub error: Option<Error>,
}

/// Runs up to `config.max_iters` iterations with fixed `params`. The
/// observer sees every new state and record and returns `true` to stop.
pub fn run_fixed(
    p: &Problem,
    params: &Params,
    init: IterateState,
    config: &RunConfig<'_>,
    observer: &mut dyn FnMut(&IterateState, &TraceRecord) -> bool,
) -> RunOutcome {
    let mut state = init;
    let mut trace = Vec::new();
    for _ in 0..config.max_iters {
        match iterate(p, &state, params, config) {
            Ok((next, rec)) => {
                let stop = observer(&next, &rec);
                state = next;
                trace.push(rec);
                if stop {
                    break;
                }
            }
            Err(e) => {
                return RunOutcome {
                    state,
                    trace,
                    error: Some(e),
                }
            }
        }
    }
    RunOutcome {
        state,
        trace,
        error: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::scalar_problem;

    #[test]
    fn initial_dz_conventions() {
        let p = scalar_problem(&[1.0], 0.0);
        let params = Params::new(1.0, 1.0, 0.0, 2.0).unwrap();
        let s = init_state(&p, &[vec![0.0]], &[2.0], &[0.0], &params).unwrap();
        assert_eq!(s.dz, vec![-1.0]);
        let s = init_state(&p, &[vec![0.0]], &[0.0], &[0.0], &params).unwrap();
        assert_eq!(s.dz, vec![0.0]);
        let s = init_state(&p, &[vec![0.0]], &[0.5], &[-0.5], &params).unwrap();
        assert_eq!(s.dz, vec![0.0]);
    }

    #[test]
    fn z_update_arithmetic() {
        let p = scalar_problem(&[1.0], 0.0);
        let params = Params::new(4.0, 2.0, 0.0, 2.0).unwrap();
        let z = z_update(&p, &[vec![0.5]], &[1.0], &[1.0], &params).unwrap();
        assert_eq!(z, vec![-0.125]);
        let z = z_update(&p, &[vec![0.0]], &[0.0], &[0.0], &params).unwrap();
        assert_eq!(z, vec![0.0]);
    }

    #[test]
    fn lambda_update_arithmetic() {
        let p = scalar_problem(&[1.0], 0.0);
        let params = Params::new(2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(lambda_update(&p, &[vec![0.5]], &[0.0], &[0.0], &params).unwrap(), vec![1.0]);
        assert_eq!(lambda_update(&p, &[vec![0.5]], &[-0.5], &[3.0], &params).unwrap(), vec![3.0]);
    }

    #[test]
    fn zero_iterations_return_init() {
        let p = scalar_problem(&[1.0, 1.0], 1.0);
        let params = Params::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let init = init_state(&p, &p.zeros(), &[0.0], &[0.0], &params).unwrap();
        let out = run_fixed(&p, &params, init.clone(), &RunConfig::serial(0), &mut |_, _| false);
        assert!(out.trace.is_empty());
        assert_eq!(out.state, init);
    }

    #[test]
    fn identities_hold_along_a_run() {
        let p = scalar_problem(&[1.0, 2.0, -1.0], 1.0);
        let params = Params::new(2.0, 1.0, 5.0, 0.5).unwrap();
        let init = init_state(&p, &p.zeros(), &[0.0], &[0.0], &params).unwrap();
        let out = run_fixed(&p, &params, init, &RunConfig::serial(30), &mut |_, _| false);
        assert!(out.error.is_none());
        for r in &out.trace {
            assert!(r.lemma1_res < 1e-12, "{r:?}");
            assert!(r.dlambda_res < 1e-12);
            assert!(r.p_identity_res < 1e-12);
            assert!(r.zstat_res < 1e-12);
        }
    }
}

//! Adaptive parameter scheme around the Jacobi iteration.
//!
//! Starting from `θ = ε⁻², ρ = ρ₀, τ_x = κ_xρ, τ_z = κ_zρ`, each completed
//! iteration is followed by these rules, in order:
//!
//! 1. if `Φ^k − Φ^{k−1} > ζ|Φ^k|`: `τ_x ← min{ν_xτ_x, (2T−1)ρ}`;
//! 2. if `max{‖p‖∞, ‖d‖∞} ≤ ε` and `‖Ax−b‖∞ > ε`: `θ ← ν_θθ`;
//! 3. if `‖p‖∞ > χ‖d‖∞` and `ρ < ωθ`: `ρ ← min{ν_ρρ, ωθ}`; otherwise if
//!    `‖d‖∞ > χ‖p‖∞` and `ψ < Ψ`: `ρ ← ρ/ν_ρ`, `ψ ← ψ+1`; after either
//!    change `τ_x = κ_xρ`, `τ_z = κ_zρ`;
//! 4. stop once `‖Ax−b‖∞ ≤ ε`.

use alloc::format;
use alloc::vec::Vec;

use crate::jacobi::{init_state, iterate, RunConfig, TraceRecord};
use crate::model::{IterateState, Params, Problem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerConfig {
    pub eps: f64,
    pub rho0: f64,
    pub omega: f64,
    pub kappa_x: f64,
    pub kappa_z: f64,
    pub zeta: f64,
    /// `Ψ`: cap on the number of `ρ` decreases.
    pub psi_cap: u32,
    pub nu_x: f64,
    pub nu_rho: f64,
    pub nu_theta: f64,
    pub chi: f64,
    pub max_outer: usize,
}

impl Default for TunerConfig {
    /// Small-instance defaults: `ρ₀ = 1e-3`, `κ_x = 2`.
    fn default() -> Self {
        Self {
            eps: 1e-3,
            rho0: 1e-3,
            omega: 32.0,
            kappa_x: 2.0,
            kappa_z: 1.0 / 32.0,
            zeta: 1e-4,
            psi_cap: 100,
            nu_x: 2.0,
            nu_rho: 2.0,
            nu_theta: 10.0,
            chi: 10.0,
            max_outer: 10_000,
        }
    }
}

impl TunerConfig {
    /// Large-instance defaults: `ρ₀ = 1e-5`, `κ_x = 2.5`.
    pub fn large() -> Self {
        Self {
            rho0: 1e-5,
            kappa_x: 2.5,
            ..Self::default()
        }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} ({self:?})")));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("eps must lie in (0, 1)");
        }
        if [self.rho0, self.omega, self.kappa_x, self.kappa_z, self.zeta]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return bad("rho0, omega, kappa_x, kappa_z, zeta must be positive");
        }
        if self.psi_cap == 0 {
            return bad("Psi must be positive");
        }
        if [self.nu_x, self.nu_rho, self.nu_theta, self.chi]
            .iter()
            .any(|v| !(*v > 1.0 && v.is_finite()))
        {
            return bad("nu_x, nu_rho, nu_theta, chi must exceed 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerState {
    pub params: Params,
    /// Number of `ρ` decreases so far.
    pub psi: u32,
    pub k: usize,
    pub last_phi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

pub fn init_params(cfg: &TunerConfig) -> (Params, TunerState) {
    let rho = cfg.rho0;
    let params = Params {
        rho,
        theta: 1.0 / (cfg.eps * cfg.eps),
        tau_x: cfg.kappa_x * rho,
        tau_z: cfg.kappa_z * rho,
    };
    (
        params,
        TunerState {
            params,
            psi: 0,
            k: 0,
            last_phi: None,
        },
    )
}

/// Applies the adaptation rules to the metrics of the iteration just
/// completed. `blocks` is `T`.
pub fn tune_step(state: &TunerState, metrics: &TraceRecord, blocks: usize, cfg: &TunerConfig) -> (TunerState, StopDecision) {
    let mut s = *state;
    let pr = &mut s.params;
    if metrics.dphi > cfg.zeta * metrics.phi.abs() {
        pr.tau_x = (cfg.nu_x * pr.tau_x).min((2.0 * blocks as f64 - 1.0) * pr.rho);
    }
    let (p_inf, d_inf) = (metrics.p_inf, metrics.d_inf);
    if p_inf.max(d_inf) <= cfg.eps && metrics.coupling_inf > cfg.eps {
        pr.theta *= cfg.nu_theta;
    }
    if p_inf > cfg.chi * d_inf && pr.rho < cfg.omega * pr.theta {
        pr.rho = (cfg.nu_rho * pr.rho).min(cfg.omega * pr.theta);
        pr.tau_x = cfg.kappa_x * pr.rho;
        pr.tau_z = cfg.kappa_z * pr.rho;
    } else if d_inf > cfg.chi * p_inf && s.psi < cfg.psi_cap {
        pr.rho /= cfg.nu_rho;
        pr.tau_x = cfg.kappa_x * pr.rho;
        pr.tau_z = cfg.kappa_z * pr.rho;
        s.psi += 1;
    }
    s.k = metrics.k;
    s.last_phi = Some(metrics.phi);
    let decision = if metrics.coupling_inf <= cfg.eps {
        StopDecision::Stop
    } else {
        StopDecision::Continue
    };
    (s, decision)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    FeasibleStop,
    IterationCap,
    BlockFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::FeasibleStop => "feasible-stop",
            Termination::IterationCap => "iteration-cap",
            Termination::BlockFailure => "block-failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub state: IterateState,
    pub tuner: TunerState,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    pub error: Option<Error>,
}

/// Alternates Jacobi iterations and [`tune_step`] until the coupling
/// violation drops to `ε` or `cfg.max_outer` iterations have run.
pub fn run_adaptive(
    p: &Problem,
    cfg: &TunerConfig,
    x0: &[Vec<f64>],
    z0: &[f64],
    lambda0: &[f64],
    run: &RunConfig<'_>,
    observer: &mut dyn FnMut(&IterateState, &TraceRecord),
) -> Result<AdaptiveOutcome> {
    cfg.validate()?;
    let (params, mut tuner) = init_params(cfg);
    let mut state = init_state(p, x0, z0, lambda0, &params)?;
    tuner.last_phi = Some(state.phi);
    let mut trace = Vec::new();
    for _ in 0..cfg.max_outer {
        match iterate(p, &state, &tuner.params, run) {
            Ok((next, rec)) => {
                observer(&next, &rec);
                let (t, decision) = tune_step(&tuner, &rec, p.blocks.len(), cfg);
                tuner = t;
                state = next;
                trace.push(rec);
                if decision == StopDecision::Stop {
                    return Ok(AdaptiveOutcome {
                        state,
                        tuner,
                        trace,
                        termination: Termination::FeasibleStop,
                        error: None,
                    });
                }
            }
            Err(e) => {
                return Ok(AdaptiveOutcome {
                    state,
                    tuner,
                    trace,
                    termination: Termination::BlockFailure,
                    error: Some(e),
                })
            }
        }
    }
    Ok(AdaptiveOutcome {
        state,
        tuner,
        trace,
        termination: Termination::IterationCap,
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(phi: f64, dphi: f64, p_inf: f64, d_inf: f64, coupling_inf: f64, params: Params) -> TraceRecord {
        TraceRecord {
            k: 1,
            phi,
            dphi,
            coupling_inf,
            p_inf,
            d_inf,
            pi: coupling_inf,
            delta: Vec::new(),
            delta_max: 0.0,
            params,
            t_xupd_ms: 0.0,
            t_zupd_ms: 0.0,
            t_lupd_ms: 0.0,
            inner_iters: Vec::new(),
            inner_iters_total: 0,
            capped_blocks: 0,
            lemma1_res: 0.0,
            dlambda_res: 0.0,
            p_identity_res: 0.0,
            zstat_res: 0.0,
            dx_sq: 0.0,
            dx_sq_prev: 0.0,
            dz_sq: 0.0,
            dz_sq_prev: 0.0,
        }
    }

    #[test]
    fn init_matches_defaults() {
        let (p, s) = init_params(&TunerConfig::default());
        assert_eq!(p.theta, 1e6);
        assert_eq!(p.rho, 1e-3);
        assert_eq!(p.tau_x, 2e-3);
        assert_eq!(p.tau_z, 3.125e-5);
        assert_eq!(s.psi, 0);
        let (p, _) = init_params(&TunerConfig::default().with_eps(0.5));
        assert_eq!(p.theta, 4.0);
    }

    #[test]
    fn tau_x_rule_is_capped() {
        let params = Params::new(10.0, 1.0, 1.0, 1.0).unwrap();
        let st = TunerState {
            params,
            psi: 0,
            k: 0,
            last_phi: None,
        };
        // p and d balanced so that only the first rule fires
        let rec = record(1.0, 1.0, 1.0, 1.0, 1.0, params);
        let (s, _) = tune_step(&st, &rec, 3, &TunerConfig::default());
        assert_eq!(s.params.tau_x, 2.0);
    }

    #[test]
    fn theta_rule_alone() {
        let params = Params::new(1.0, 1e6, 1.0, 1.0).unwrap();
        let st = TunerState {
            params,
            psi: 0,
            k: 0,
            last_phi: None,
        };
        let rec = record(1.0, 0.0, 1e-9, 1e-9, 1e-2, params);
        let (s, d) = tune_step(&st, &rec, 2, &TunerConfig::default());
        assert_eq!(s.params.theta, 1e7);
        assert_eq!((s.params.rho, s.params.tau_x, s.params.tau_z), (1.0, 1.0, 1.0));
        assert_eq!(d, StopDecision::Continue);
    }

    #[test]
    fn psi_cap_blocks_decrease() {
        let cfg = TunerConfig::default();
        let params = Params::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let st = TunerState {
            params,
            psi: cfg.psi_cap,
            k: 0,
            last_phi: None,
        };
        let rec = record(1.0, 0.0, 0.01, 1.0, 1.0, params);
        let (s, _) = tune_step(&st, &rec, 2, &cfg);
        assert_eq!(s.params.rho, 1.0);
        assert_eq!(s.psi, cfg.psi_cap);
    }
}

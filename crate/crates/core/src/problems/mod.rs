//! Test-problem generators and reference oracles.
//!
//! * [`gen_multiperiod_dispatch`]: ramp-coupled economic dispatch with a
//!   linear demand balance per period (convex, has a KKT oracle);
//! * [`gen_acopf_toy`]: multi-period polar AC power flow on a small network
//!   (nonconvex, feasibility checks only);
//! * [`gen_coupled_qp`]: random strictly convex quadratic blocks with a
//!   full-row-rank coupling and an exact KKT solution;
//! * [`kkt_reference_solve`], [`penalty_reference_solve`] and
//!   [`separable_lower_bound`]: oracles for convex quadratic instances.

mod bound;
mod dispatch;
mod network;
mod qp;

use alloc::format;
use alloc::vec::Vec;

pub use bound::separable_lower_bound;
pub use dispatch::{gen_multiperiod_dispatch, DispatchGenerator};
pub use network::{acopf_balance, gen_acopf_toy, Line, NetGenerator, NetworkData, ACOPF_MAX_BUSES, ACOPF_MAX_PERIODS};
pub use qp::{coupled_qp_from_parts, gen_coupled_qp, kkt_reference_solve, penalty_reference_solve, QP_RANK_ATTEMPTS};

use crate::algebra::CsrMatrix;
use crate::model::{Problem, QuadraticFunction, SmoothFunction};
use crate::BlockVectors;

/// How an oracle solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    KktLinearSolve,
    GridSearch,
    ClosedForm,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::KktLinearSolve => "kkt-linear-solve",
            Provenance::GridSearch => "grid-search",
            Provenance::ClosedForm => "closed-form",
        }
    }
}

/// Reference primal-dual solution of a coupled problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x_star: BlockVectors,
    pub lambda_star: Vec<f64>,
    /// Slack at the reference point; zero for the original problem.
    pub z_star: Vec<f64>,
    /// Multipliers of the block equalities.
    pub mu_star: BlockVectors,
    pub objective: f64,
    pub provenance: Provenance,
}

/// Multiplies every quadratic block objective by `factor` and records it in the
/// metadata under `objective_scale`.
pub fn scale_objective(p: &Problem, factor: f64) -> Problem {
    let mut out = p.clone();
    for blk in &mut out.blocks {
        if let SmoothFunction::Quadratic(q) = &blk.objective {
            let scaled: Vec<_> = q.q().triplets().map(|(i, j, v)| (i, j, factor * v)).collect();
            let qm = CsrMatrix::from_triplets(q.dim(), q.dim(), &scaled).expect("same shape");
            let c = q.c.iter().map(|v| factor * v).collect();
            blk.objective = SmoothFunction::Quadratic(QuadraticFunction::new(qm, c, factor * q.c0).expect("same shape"));
        }
    }
    out.meta.insert("objective_scale".into(), format!("{factor}"));
    out
}

//! Problem data model: blocks, constraint sets, parameters and the iterate
//! state shared by the solver modules.

mod function;
mod transform;
mod validate;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use function::{
    polar_injection, BalancePart, Builtin, BusInjection, PowerBalance, QuadraticFunction, SmoothFunction,
};
pub use transform::variable_splitting_transform;
pub use validate::{validate_problem, ValidationReport};

use crate::algebra::CsrMatrix;
use crate::{BlockVectors, Error, Result};

/// Block feasible set `X_t`: coordinate bounds plus scalar equalities
/// `c_{t,i}(x_t) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub equalities: Vec<SmoothFunction>,
}

impl ConstraintSet {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: alloc::vec![f64::NEG_INFINITY; n],
            upper: alloc::vec![f64::INFINITY; n],
            equalities: Vec::new(),
        }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            lower,
            upper,
            equalities: Vec::new(),
        }
    }

    pub fn has_bounds(&self) -> bool {
        self.lower.iter().any(|l| l.is_finite()) || self.upper.iter().any(|u| u.is_finite())
    }

    pub fn all_bounds_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    /// Largest bound violation of `x` (0 inside the box).
    pub fn bound_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xi, (&l, &u))| (l - xi).max(xi - u).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `‖c_t(x)‖∞`.
    pub fn equality_violation(&self, x: &[f64]) -> f64 {
        self.equalities.iter().map(|c| c.value(x).abs()).fold(0.0, f64::max)
    }

    /// Midpoint of the box; coordinates with an infinite side start at the
    /// finite side (or 0 when both are infinite).
    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l.max(0.0),
                (false, true) => u.min(0.0),
                (false, false) => 0.0,
            })
            .collect()
    }
}

/// Block `t`: dimension, objective `f_t`, set `X_t` and coupling matrix `A_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub n: usize,
    pub objective: SmoothFunction,
    pub set: ConstraintSet,
    pub coupling: CsrMatrix,
}

/// `min Σ f_t(x_t)  s.t.  Σ A_t x_t = b,  x_t ∈ X_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub m: usize,
    pub b: Vec<f64>,
    pub blocks: Vec<BlockSpec>,
    /// Free-form provenance (generator name, objective scale, seed, …).
    pub meta: BTreeMap<String, String>,
}

impl Problem {
    pub fn new(m: usize, b: Vec<f64>, blocks: Vec<BlockSpec>) -> Self {
        Self {
            m,
            b,
            blocks,
            meta: BTreeMap::new(),
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    /// Zero vector in block layout.
    pub fn zeros(&self) -> BlockVectors {
        self.blocks.iter().map(|b| alloc::vec![0.0; b.n]).collect()
    }

    /// Box midpoints of all blocks.
    pub fn midpoint(&self) -> BlockVectors {
        self.blocks.iter().map(|b| b.set.midpoint()).collect()
    }

    /// `Σ_t f_t(x_t)`.
    pub fn objective(&self, x: &[Vec<f64>]) -> f64 {
        self.blocks.iter().zip(x).map(|(b, xt)| b.objective.value(xt)).sum()
    }
}

/// Penalty weights `ρ, θ` and proximal weights `τ_x, τ_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub rho: f64,
    pub theta: f64,
    pub tau_x: f64,
    pub tau_z: f64,
}

impl Params {
    pub fn new(rho: f64, theta: f64, tau_x: f64, tau_z: f64) -> Result<Self> {
        let p = Self {
            rho,
            theta,
            tau_x,
            tau_z,
        };
        p.validate()?;
        Ok(p)
    }

    /// `ρ, θ > 0` and `τ_x, τ_z ≥ 0`, all finite.
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.theta > 0.0
            && self.tau_x >= 0.0
            && self.tau_z >= 0.0
            && [self.rho, self.theta, self.tau_x, self.tau_z].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }
}

/// Iterates `(x^k, z^k, λ^k)` with the previous iterate and the differences
/// consumed by the Lyapunov and residual formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub k: usize,
    pub x: BlockVectors,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub x_prev: BlockVectors,
    pub z_prev: Vec<f64>,
    pub lambda_prev: Vec<f64>,
    /// `Δz^k`; at `k = 0` this is `−τ_z⁻¹(λ⁰ + θz⁰)`.
    pub dz: Vec<f64>,
    /// `Δz^{k−1}`.
    pub dz_prev: Vec<f64>,
    /// `Δx^k` per block (zero at `k = 0`).
    pub dx: BlockVectors,
    /// `Δx^{k−1}` per block.
    pub dx_prev: BlockVectors,
    /// Parameters used to produce this iterate.
    pub params: Params,
    /// Parameters that produced the previous iterate.
    pub params_prev: Params,
    /// `Φ^k`.
    pub phi: f64,
}

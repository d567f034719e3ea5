//! Distributed proximal Jacobi augmented-Lagrangian method for block-structured
//! nonconvex problems coupled only through linear equality constraints:
//!
//! ```text
//! minimize   Σ_t f_t(x_t)
//! subject to Σ_t A_t x_t = b,   x_t ∈ X_t,  t = 1..T
//! ```
//!
//! The coupling is relaxed with slack variables `z` penalized by `(θ/2)‖z‖²`,
//! and every iteration solves the `T` block subproblems independently (Jacobi
//! style), followed by closed-form slack and multiplier updates. A Lyapunov
//! function built from the augmented Lagrangian plus proximal terms certifies
//! progress and drives the adaptive parameter scheme in [`tuner`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the threaded
//! block executor and the command-line tool live in the companion `proxjacobi`
//! crate.
//!
//! Module map:
//!
//! * [`model`]: problem data, parameters, iterate state, validation and the
//!   variable-splitting transform.
//! * [`algebra`]: sparse/dense kernels, coupling products, seminorms and
//!   spectral quantities.
//! * [`auglag`]: augmented Lagrangian, Lyapunov function, residuals and the
//!   parameter feasibility conditions.
//! * [`subsolver`]: local solvers for the block subproblems.
//! * [`jacobi`]: the fixed-parameter iteration and its trace.
//! * [`tuner`]: the adaptive parameter scheme.
//! * [`problems`]: generators and reference oracles.
#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::too_many_arguments)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod algebra;
pub mod auglag;
mod error;
pub mod jacobi;
pub mod model;
pub mod problems;
pub mod subsolver;
pub mod tuner;

pub use error::{Error, Result};

/// Block-partitioned vector: one dense vector per block.
pub type BlockVectors = alloc::vec::Vec<alloc::vec::Vec<f64>>;

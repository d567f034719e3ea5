//! Coupling-matrix products, seminorms and spectral quantities.
//!
//! Every reduction over blocks runs serially in block order `t = 1..T`, so
//! results are bit-reproducible no matter how the block solves were
//! scheduled.

pub mod dense;
pub mod sparse;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use dense::{dot, norm2, norm_inf, DenseMatrix, PivotedQr};
pub use sparse::CsrMatrix;

use crate::model::Problem;
use crate::{Error, Result};

/// Largest `T·m` for which the `R` matrix is formed explicitly.
pub const EIGENCHECK_SIZE_CAP: usize = 2000;

fn check_blocks(p: &Problem, x: &[Vec<f64>]) -> Result<()> {
    if x.len() != p.blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} block vectors for {} blocks",
            x.len(),
            p.blocks.len()
        )));
    }
    for (t, (xt, blk)) in x.iter().zip(&p.blocks).enumerate() {
        if xt.len() != blk.n {
            return Err(Error::DimensionMismatch(format!(
                "block {t}: vector has length {}, expected {}",
                xt.len(),
                blk.n
            )));
        }
    }
    Ok(())
}

/// `Σ_t A_t x_t`.
pub fn couple_apply(p: &Problem, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_blocks(p, x)?;
    let mut out = vec![0.0; p.m];
    for (blk, xt) in p.blocks.iter().zip(x) {
        blk.coupling.mul_vec_acc(xt, &mut out);
    }
    Ok(out)
}

/// `Σ_{s≠t} A_s x_s`, summed in block order with block `t` skipped.
pub fn couple_apply_except(p: &Problem, x: &[Vec<f64>], t: usize) -> Result<Vec<f64>> {
    if t >= p.blocks.len() {
        return Err(Error::IndexOutOfRange {
            index: t,
            count: p.blocks.len(),
        });
    }
    check_blocks(p, x)?;
    let mut out = vec![0.0; p.m];
    for (s, (blk, xs)) in p.blocks.iter().zip(x).enumerate() {
        if s != t {
            blk.coupling.mul_vec_acc(xs, &mut out);
        }
    }
    Ok(out)
}

/// `Ax − b`.
pub fn coupling_violation(p: &Problem, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut r = couple_apply(p, x)?;
    for (ri, bi) in r.iter_mut().zip(&p.b) {
        *ri -= bi;
    }
    Ok(r)
}

/// `‖A_t v‖² = vᵀ A_tᵀ A_t v`.
pub fn seminorm_sq(a: &CsrMatrix, v: &[f64]) -> Result<f64> {
    if v.len() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a matrix with {} columns",
            v.len(),
            a.ncols()
        )));
    }
    let av = a.mul_vec(v);
    Ok(dot(&av, &av))
}

/// Largest singular value by power iteration on `AᵀA` (at most 200 steps,
/// stopping once the Rayleigh quotient changes by less than 1e-12 relative).
pub fn spectral_norm(a: &CsrMatrix) -> f64 {
    let n = a.ncols();
    if a.nnz() == 0 || n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * libm::sin(1.0 + i as f64)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = 0.0_f64;
    for _ in 0..200 {
        let w = a.tr_mul_vec(&a.mul_vec(&v));
        let rq = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            // start vector fell into the null space
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (rq - est).abs() <= 1e-12 * rq.abs();
        est = rq;
        if done {
            break;
        }
    }
    // final Rayleigh quotient of the normalized iterate
    let av = a.mul_vec(&v);
    libm::sqrt(est.max(dot(&av, &av)))
}

/// Cached per-block quantities of the coupling matrices.
#[derive(Debug, Clone)]
pub struct CouplingWorkspace {
    /// Euclidean norm of every column of every `A_t`.
    pub column_norms: Vec<Vec<f64>>,
    /// `‖A_t‖` estimates.
    pub spectral_norms: Vec<f64>,
    /// Block sizes of the stacked `Dx = (A_1 x_1, …, A_T x_T)`.
    pub m: usize,
    pub blocks: usize,
}

impl CouplingWorkspace {
    pub fn new(p: &Problem) -> Self {
        let column_norms = p
            .blocks
            .iter()
            .map(|b| {
                let mut cn = vec![0.0; b.n];
                for (_, j, v) in b.coupling.triplets() {
                    cn[j] += v * v;
                }
                cn.into_iter().map(libm::sqrt).collect()
            })
            .collect();
        let spectral_norms = p.blocks.iter().map(|b| spectral_norm(&b.coupling)).collect();
        Self {
            column_norms,
            spectral_norms,
            m: p.m,
            blocks: p.blocks.len(),
        }
    }

    /// `D x = (A_1 x_1, …, A_T x_T)` stacked into one `T·m` vector.
    pub fn stacked_product(&self, p: &Problem, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_blocks(p, x)?;
        let mut out = Vec::with_capacity(self.blocks * self.m);
        for (blk, xt) in p.blocks.iter().zip(x) {
            out.extend(blk.coupling.mul_vec(xt));
        }
        Ok(out)
    }
}

/// Applies `R = (ρ+τ_x) I − ρ E Eᵀ` to a stacked `T·m` vector, with
/// `Eᵀ = [I … I]`.
pub fn apply_r(rho: f64, tau_x: f64, blocks: usize, m: usize, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(v.len(), blocks * m);
    let mut sum = vec![0.0; m];
    for t in 0..blocks {
        for i in 0..m {
            sum[i] += v[t * m + i];
        }
    }
    let mut out = Vec::with_capacity(v.len());
    for t in 0..blocks {
        for i in 0..m {
            out.push((rho + tau_x) * v[t * m + i] - rho * sum[i]);
        }
    }
    out
}

/// Extreme eigenvalues of `R = (ρ+τ_x) I − ρ (e eᵀ ⊗ I_m)`, computed from the
/// explicitly assembled matrix.
pub fn r_matrix_eigencheck(rho: f64, tau_x: f64, blocks: usize, m: usize) -> Result<(f64, f64)> {
    if blocks == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("T = {blocks}, m = {m}: both must be >= 1")));
    }
    let size = blocks * m;
    if size > EIGENCHECK_SIZE_CAP {
        return Err(Error::SizeCapExceeded {
            size,
            cap: EIGENCHECK_SIZE_CAP,
        });
    }
    let mut r = DenseMatrix::zeros(size, size);
    for s in 0..blocks {
        for t in 0..blocks {
            for i in 0..m {
                // (e eᵀ ⊗ I) has a 1 at (s·m + i, t·m + i) for every block pair
                r[(s * m + i, t * m + i)] -= rho;
            }
        }
    }
    for d in 0..size {
        r[(d, d)] += rho + tau_x;
    }
    let eig = r.symmetric_eigenvalues();
    Ok((eig[0], eig[size - 1]))
}

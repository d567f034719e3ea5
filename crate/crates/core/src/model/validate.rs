use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::Problem;
use crate::algebra::DenseMatrix;

/// Relative pivot drop tolerance of the rank check on the stacked `A`.
pub const RANK_DROP_TOL: f64 = 1e-10;

/// Outcome of [`validate_problem`]: the problem is usable iff `errors` is
/// empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks dimensions, bound ordering and full row rank of `A = [A_1 … A_T]`.
///
/// Compactness of `X_t` is only approximated: a block with equalities but an
/// infinite bound gets a warning.
pub fn validate_problem(p: &Problem) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if p.blocks.is_empty() {
        rep.errors.push("problem has no blocks".into());
    }
    if p.b.len() != p.m {
        rep.errors
            .push(format!("b has length {} but m = {}", p.b.len(), p.m));
    }
    let mut dims_ok = true;
    for (t, blk) in p.blocks.iter().enumerate() {
        if blk.coupling.nrows() != p.m {
            rep.errors.push(format!(
                "block {t}: coupling matrix has {} rows, expected m = {}",
                blk.coupling.nrows(),
                p.m
            ));
            dims_ok = false;
        }
        if blk.coupling.ncols() != blk.n {
            rep.errors.push(format!(
                "block {t}: coupling matrix has {} columns, expected n = {}",
                blk.coupling.ncols(),
                blk.n
            ));
            dims_ok = false;
        }
        if let Err(e) = blk.objective.check_dim(blk.n) {
            rep.errors.push(format!("block {t}: objective: {e}"));
        }
        for (i, c) in blk.set.equalities.iter().enumerate() {
            if let Err(e) = c.check_dim(blk.n) {
                rep.errors.push(format!("block {t}: equality {i}: {e}"));
            }
        }
        if blk.set.lower.len() != blk.n || blk.set.upper.len() != blk.n {
            rep.errors.push(format!("block {t}: bounds do not have length n = {}", blk.n));
        } else {
            for (i, (l, u)) in blk.set.lower.iter().zip(&blk.set.upper).enumerate() {
                if !(l <= u) {
                    rep.errors
                        .push(format!("block {t}: lower bound {l} exceeds upper bound {u} at coordinate {i}"));
                }
            }
        }
        if !blk.set.equalities.is_empty() && !blk.set.all_bounds_finite() {
            rep.warnings.push(format!(
                "block {t}: equality constraints with infinite bounds; compactness of the block set is not verified"
            ));
        }
    }
    if dims_ok && !p.blocks.is_empty() && p.m > 0 {
        let n = p.total_dim();
        let mut a = DenseMatrix::zeros(p.m, n);
        let mut offset = 0;
        for blk in &p.blocks {
            for (i, j, v) in blk.coupling.triplets() {
                a[(i, offset + j)] = v;
            }
            offset += blk.n;
        }
        let rank = a.rank(RANK_DROP_TOL);
        if rank < p.m {
            rep.errors.push(format!(
                "coupling matrix rank-deficient: rank {rank} < m = {}",
                p.m
            ));
        }
    }
    rep
}

use alloc::vec;
use alloc::vec::Vec;

use super::{BlockSpec, ConstraintSet, Problem, QuadraticFunction, SmoothFunction};
use crate::algebra::CsrMatrix;

/// Variable-splitting reformulation: block `t` gains `m` copies `y_t` with
/// the local equalities `A_t x_t − y_t = 0`, and the coupling becomes
/// `Σ_t y_t = b`. The result is fully decomposable in the original `x_t`.
pub fn variable_splitting_transform(p: &Problem) -> Problem {
    let m = p.m;
    let blocks = p
        .blocks
        .iter()
        .map(|blk| {
            let n = blk.n;
            let n_new = n + m;
            let mut equalities: Vec<SmoothFunction> =
                blk.set.equalities.iter().map(|c| c.padded(n_new)).collect();
            let mut rows: Vec<Vec<f64>> = vec![vec![0.0; n_new]; m];
            for (i, j, v) in blk.coupling.triplets() {
                rows[i][j] += v;
            }
            for (i, mut row) in rows.into_iter().enumerate() {
                row[n + i] = -1.0;
                equalities.push(SmoothFunction::Quadratic(QuadraticFunction::affine(row, 0.0)));
            }
            let mut lower = blk.set.lower.clone();
            let mut upper = blk.set.upper.clone();
            lower.resize(n_new, f64::NEG_INFINITY);
            upper.resize(n_new, f64::INFINITY);
            let selector: Vec<_> = (0..m).map(|i| (i, n + i, 1.0)).collect();
            BlockSpec {
                n: n_new,
                objective: blk.objective.padded(n_new),
                set: ConstraintSet {
                    lower,
                    upper,
                    equalities,
                },
                coupling: CsrMatrix::from_triplets(m, n_new, &selector).expect("selector in range"),
            }
        })
        .collect();
    let mut out = Problem::new(m, p.b.clone(), blocks);
    out.meta = p.meta.clone();
    out.meta.insert("transform".into(), "variable-splitting".into());
    out
}

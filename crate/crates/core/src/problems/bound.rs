use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::DenseMatrix;
use crate::model::{ConstraintSet, Problem, QuadraticFunction};
use crate::{Error, Result};

const ENUMERATION_MAX_DIM: usize = 3;

/// `Φ̂ = Σ_t min_{x_t ∈ X_t} f_t(x_t)`, each term computed exactly:
/// diagonal quadratics coordinate by coordinate, convex quadratics by a
/// Newton step (unbounded) or by enumerating active sets (`n_t ≤ 3`).
pub fn separable_lower_bound(p: &Problem) -> Result<f64> {
    let mut total = 0.0;
    for (t, blk) in p.blocks.iter().enumerate() {
        let unavailable = |why: &str| Error::LowerBoundUnavailable(format!("block {t}: {why}"));
        let q = blk.objective.as_quadratic().ok_or_else(|| unavailable("objective is not quadratic"))?;
        if !blk.set.equalities.is_empty() {
            return Err(unavailable("equality constraints"));
        }
        let v = if q.q().is_diagonal() {
            diagonal_min(q, &blk.set).ok_or_else(|| unavailable("unbounded below"))?
        } else {
            convex_min(q, &blk.set).ok_or_else(|| unavailable("not a supported convex quadratic"))?
        };
        total += v;
    }
    Ok(total)
}

fn diagonal_min(q: &QuadraticFunction, set: &ConstraintSet) -> Option<f64> {
    let mut total = q.c0;
    for i in 0..q.dim() {
        let (a, c) = (q.q().get(i, i), q.c[i]);
        let (l, u) = (set.lower[i], set.upper[i]);
        let f = |x: f64| 0.5 * a * x * x + c * x;
        let best = if a > 0.0 {
            f((-c / a).max(l).min(u))
        } else if a == 0.0 && c == 0.0 {
            0.0
        } else {
            if (a < 0.0 && !(l.is_finite() && u.is_finite())) || (c > 0.0 && !l.is_finite()) || (c < 0.0 && !u.is_finite()) {
                return None;
            }
            let mut m = f64::INFINITY;
            if l.is_finite() {
                m = m.min(f(l));
            }
            if u.is_finite() {
                m = m.min(f(u));
            }
            m
        };
        total += best;
    }
    Some(total)
}

fn convex_min(q: &QuadraticFunction, set: &ConstraintSet) -> Option<f64> {
    let n = q.dim();
    let h = q.q().to_dense();
    h.cholesky()?;
    if !set.has_bounds() {
        let chol = h.cholesky()?;
        let neg: Vec<f64> = q.c.iter().map(|v| -v).collect();
        return Some(q.value(&chol.solve(&neg)));
    }
    if n > ENUMERATION_MAX_DIM {
        return None;
    }
    // every coordinate free (0), at lower (1) or at upper (2)
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut pattern = vec![0u8; n];
        let mut c = code;
        for v in pattern.iter_mut() {
            *v = (c % 3) as u8;
            c /= 3;
        }
        let mut x = vec![0.0; n];
        let mut ok = true;
        for i in 0..n {
            match pattern[i] {
                1 if set.lower[i].is_finite() => x[i] = set.lower[i],
                2 if set.upper[i].is_finite() => x[i] = set.upper[i],
                0 => {}
                _ => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 0).collect();
        if !free.is_empty() {
            let mut hf = DenseMatrix::zeros(free.len(), free.len());
            let mut rhs = vec![0.0; free.len()];
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    hf[(a, b)] = h[(i, j)];
                }
                let mut r = -q.c[i];
                for j in 0..n {
                    if pattern[j] != 0 {
                        r -= h[(i, j)] * x[j];
                    }
                }
                rhs[a] = r;
            }
            let sol = hf.cholesky()?.solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        if set.bound_violation(&x) <= 1e-12 {
            best = best.min(q.value(&x));
        }
    }
    best.is_finite().then_some(best)
}

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OracleSolution, Provenance};
use crate::algebra::{norm_inf, CsrMatrix, DenseMatrix, PivotedQr};
use crate::model::{BlockSpec, ConstraintSet, Problem, QuadraticFunction, SmoothFunction};
use crate::{Error, Result};

/// Attempts at drawing a full-row-rank coupling matrix.
pub const QP_RANK_ATTEMPTS: usize = 100;
const GEN_RANK_TOL: f64 = 1e-8;
const BOUND_ACTIVITY_TOL: f64 = 1e-10;

/// Unconstrained quadratic blocks `½xᵀQ_t x + c_tᵀx + c0_t` coupled by the
/// dense matrices `A_t`.
pub fn coupled_qp_from_parts(
    qs: &[DenseMatrix],
    cs: &[Vec<f64>],
    c0s: &[f64],
    a: &[DenseMatrix],
    b: Vec<f64>,
) -> Result<Problem> {
    let m = b.len();
    if qs.len() != cs.len() || qs.len() != a.len() || qs.len() != c0s.len() {
        return Err(Error::DimensionMismatch("per-block part counts differ".into()));
    }
    let mut blocks = Vec::with_capacity(qs.len());
    for (t, (q, c)) in qs.iter().zip(cs).enumerate() {
        let n = c.len();
        if a[t].nrows() != m || a[t].ncols() != n {
            return Err(Error::DimensionMismatch(format!("block {t}: A_t must be {m}x{n}")));
        }
        let f = QuadraticFunction::new(CsrMatrix::from_dense(q), c.clone(), c0s[t])?;
        blocks.push(BlockSpec {
            n,
            objective: SmoothFunction::Quadratic(f),
            set: ConstraintSet::unbounded(n),
            coupling: CsrMatrix::from_dense(&a[t]),
        });
    }
    Ok(Problem::new(m, b, blocks))
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

/// Random instance with `Q_t = M_tᵀM_t + ½I`, entries of `M_t`, `c_t`, `A_t`
/// and `b` uniform in `[−1, 1)`, and `A` redrawn until it has full row rank.
/// Returns the instance and its KKT solution.
pub fn gen_coupled_qp(seed: u64, blocks: usize, n_t: usize, m: usize) -> Result<(Problem, OracleSolution)> {
    if blocks == 0 || n_t == 0 || m == 0 {
        return Err(Error::InvalidParameter("T, n_t and m must be positive".into()));
    }
    if m > blocks * n_t {
        return Err(Error::InvalidParameter(format!("m = {m} exceeds the total dimension {}", blocks * n_t)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qs = Vec::with_capacity(blocks);
    let mut cs = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        let mut mm = DenseMatrix::zeros(n_t, n_t);
        for i in 0..n_t {
            for j in 0..n_t {
                mm[(i, j)] = uniform(&mut rng);
            }
        }
        let mut q = mm.transpose().matmul(&mm);
        for i in 0..n_t {
            q[(i, i)] += 0.5;
        }
        qs.push(q);
        cs.push((0..n_t).map(|_| uniform(&mut rng)).collect::<Vec<f64>>());
    }
    let mut a = None;
    for _ in 0..QP_RANK_ATTEMPTS {
        let draw: Vec<DenseMatrix> = (0..blocks)
            .map(|_| {
                let mut at = DenseMatrix::zeros(m, n_t);
                for i in 0..m {
                    for j in 0..n_t {
                        at[(i, j)] = uniform(&mut rng);
                    }
                }
                at
            })
            .collect();
        let mut stacked = DenseMatrix::zeros(m, blocks * n_t);
        for (t, at) in draw.iter().enumerate() {
            for i in 0..m {
                for j in 0..n_t {
                    stacked[(i, t * n_t + j)] = at[(i, j)];
                }
            }
        }
        if PivotedQr::new(&stacked).rank(GEN_RANK_TOL) == m {
            a = Some(draw);
            break;
        }
    }
    let a = a.ok_or(Error::RankRejection(QP_RANK_ATTEMPTS))?;
    let b: Vec<f64> = (0..m).map(|_| uniform(&mut rng)).collect();
    let mut p = coupled_qp_from_parts(&qs, &cs, &vec![0.0; blocks], &a, b)?;
    p.meta.insert("generator".into(), "coupled-qp".into());
    p.meta.insert("seed".into(), format!("{seed}"));
    let oracle = kkt_reference_solve(&p)?;
    Ok((p, oracle))
}

/// Solution of the equality-constrained QP `min Σ f_t  s.t.  Ax = b`, with
/// affine block equalities and fixed coordinates (`lower = upper`) kept as
/// constraints. Fails if another bound is active at the solution.
pub fn kkt_reference_solve(p: &Problem) -> Result<OracleSolution> {
    kkt_solve(p, None)
}

/// Stationary point of the penalty formulation
/// `min Σ f_t + (θ/2)‖z‖²  s.t.  Ax + z = b`, i.e. the fixed point of the
/// iteration for penalty weight `θ`; `z* = −λ*/θ`.
pub fn penalty_reference_solve(p: &Problem, theta: f64) -> Result<OracleSolution> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!("theta = {theta}")));
    }
    kkt_solve(p, Some(theta))
}

fn kkt_solve(p: &Problem, theta: Option<f64>) -> Result<OracleSolution> {
    let nt = p.total_dim();
    let m = p.m;
    let mut offsets = Vec::with_capacity(p.blocks.len());
    let mut quads = Vec::with_capacity(p.blocks.len());
    let mut eq_rows: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    let mut off = 0;
    for (t, blk) in p.blocks.iter().enumerate() {
        offsets.push(off);
        let q = blk
            .objective
            .as_quadratic()
            .ok_or_else(|| Error::InvalidParameter(format!("block {t}: objective is not quadratic")))?;
        quads.push(q);
        for c in &blk.set.equalities {
            let c = c
                .as_quadratic()
                .filter(|c| c.q().nnz() == 0)
                .ok_or_else(|| Error::InvalidParameter(format!("block {t}: equality is not affine")))?;
            eq_rows.push((t, c.c.clone(), -c.c0));
        }
        for j in 0..blk.n {
            if blk.set.lower[j] == blk.set.upper[j] {
                fixed.push((off + j, blk.set.lower[j]));
            }
        }
        off += blk.n;
    }
    let size = nt + m + eq_rows.len() + fixed.len();
    let mut k = DenseMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for (t, blk) in p.blocks.iter().enumerate() {
        let o = offsets[t];
        for (i, j, v) in quads[t].q().triplets() {
            k[(o + i, o + j)] += v;
        }
        for (j, cj) in quads[t].c.iter().enumerate() {
            rhs[o + j] = -cj;
        }
        for (i, j, v) in blk.coupling.triplets() {
            k[(nt + i, o + j)] = v;
            k[(o + j, nt + i)] = v;
        }
    }
    for i in 0..m {
        rhs[nt + i] = p.b[i];
        if let Some(th) = theta {
            k[(nt + i, nt + i)] = -1.0 / th;
        }
    }
    let mut row = nt + m;
    for (t, c, r) in &eq_rows {
        for (j, v) in c.iter().enumerate() {
            k[(row, offsets[*t] + j)] = *v;
            k[(offsets[*t] + j, row)] = *v;
        }
        rhs[row] = *r;
        row += 1;
    }
    for &(j, v) in &fixed {
        k[(row, j)] = 1.0;
        k[(j, row)] = 1.0;
        rhs[row] = v;
        row += 1;
    }
    let lu = k.lu().ok_or_else(|| Error::Singular("KKT matrix".into()))?;
    let mut sol = lu.solve(&rhs);
    for _ in 0..2 {
        let ks = k.mul_vec(&sol);
        let r: Vec<f64> = rhs.iter().zip(&ks).map(|(a, b)| a - b).collect();
        let d = lu.solve(&r);
        for (s, di) in sol.iter_mut().zip(&d) {
            *s += di;
        }
    }
    let ks = k.mul_vec(&sol);
    let resid: Vec<f64> = rhs.iter().zip(&ks).map(|(a, b)| a - b).collect();
    if !sol.iter().all(|v| v.is_finite()) || norm_inf(&resid) > 1e-8 * (1.0 + norm_inf(&rhs)) {
        return Err(Error::Singular("KKT solve is inaccurate".into()));
    }

    let mut x_star = Vec::with_capacity(p.blocks.len());
    for (t, blk) in p.blocks.iter().enumerate() {
        let xt = sol[offsets[t]..offsets[t] + blk.n].to_vec();
        for j in 0..blk.n {
            let (l, u) = (blk.set.lower[j], blk.set.upper[j]);
            if l == u {
                continue;
            }
            if (l.is_finite() && xt[j] <= l + BOUND_ACTIVITY_TOL) || (u.is_finite() && xt[j] >= u - BOUND_ACTIVITY_TOL) {
                return Err(Error::ActiveBounds { block: t, coord: j });
            }
        }
        x_star.push(xt);
    }
    let lambda_star = sol[nt..nt + m].to_vec();
    let mut mu_star: Vec<Vec<f64>> = vec![Vec::new(); p.blocks.len()];
    for (e, (t, _, _)) in eq_rows.iter().enumerate() {
        mu_star[*t].push(sol[nt + m + e]);
    }
    let z_star = match theta {
        Some(th) => lambda_star.iter().map(|l| -l / th).collect(),
        None => vec![0.0; m],
    };
    Ok(OracleSolution {
        objective: p.objective(&x_star),
        x_star,
        lambda_star,
        z_star,
        mu_star,
        provenance: Provenance::KktLinearSolve,
    })
}

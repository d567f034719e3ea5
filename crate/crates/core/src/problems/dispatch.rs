use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::algebra::CsrMatrix;
use crate::model::{BlockSpec, ConstraintSet, Problem, QuadraticFunction, SmoothFunction};
use crate::{Error, Result};

/// Generator with output limits and cost `a·p² + b·p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchGenerator {
    pub p_min: f64,
    pub p_max: f64,
    pub cost_quad: f64,
    pub cost_lin: f64,
}

/// Multi-period dispatch with ramp limits `|p_{g,t+1} − p_{g,t}| ≤ r_g`,
/// `r_g = ramp_frac · p_max` and unit period length.
///
/// Block `t` holds `(p_t, s_t)` with `s_t ∈ [0, 2r]` and the demand balance
/// `Σ_g p_{g,t} = profile[t]`; the slack of the first period is pinned at
/// `r` by equal bounds. Coupling rows `p_{g,t+1} − p_{g,t} + s_{g,t+1} = r_g`
/// link consecutive periods, so `m = |G|·(T−1)`.
pub fn gen_multiperiod_dispatch(
    periods: usize,
    generators: &[DispatchGenerator],
    ramp_frac: f64,
    profile: &[f64],
) -> Result<Problem> {
    if periods < 2 {
        return Err(Error::InvalidParameter("dispatch needs at least 2 periods".into()));
    }
    if !(ramp_frac > 0.0 && ramp_frac <= 1.0) {
        return Err(Error::InvalidParameter(format!("ramp fraction {ramp_frac} outside (0, 1]")));
    }
    if generators.is_empty() {
        return Err(Error::InvalidParameter("no generators".into()));
    }
    if profile.len() != periods {
        return Err(Error::DimensionMismatch(format!(
            "load profile has {} entries for {periods} periods",
            profile.len()
        )));
    }
    let g = generators.len();
    let n = 2 * g;
    let m = g * (periods - 1);
    let ramps: Vec<f64> = generators.iter().map(|gen| ramp_frac * gen.p_max).collect();
    let mut blocks = Vec::with_capacity(periods);
    for t in 0..periods {
        let q: Vec<_> = generators
            .iter()
            .enumerate()
            .map(|(i, gen)| (i, i, 2.0 * gen.cost_quad))
            .collect();
        let mut c = vec![0.0; n];
        for (i, gen) in generators.iter().enumerate() {
            c[i] = gen.cost_lin;
        }
        let objective = QuadraticFunction::new(CsrMatrix::from_triplets(n, n, &q)?, c, 0.0)?;
        let mut lower: Vec<f64> = generators.iter().map(|gen| gen.p_min).collect();
        let mut upper: Vec<f64> = generators.iter().map(|gen| gen.p_max).collect();
        for &r in &ramps {
            if t == 0 {
                lower.push(r);
                upper.push(r);
            } else {
                lower.push(0.0);
                upper.push(2.0 * r);
            }
        }
        let mut balance = vec![0.0; n];
        balance[..g].iter_mut().for_each(|v| *v = 1.0);
        let set = ConstraintSet {
            lower,
            upper,
            equalities: vec![SmoothFunction::Quadratic(QuadraticFunction::affine(balance, -profile[t]))],
        };
        let mut trip = Vec::new();
        for i in 0..g {
            if t > 0 {
                let row = (t - 1) * g + i;
                trip.push((row, i, 1.0));
                trip.push((row, g + i, 1.0));
            }
            if t + 1 < periods {
                trip.push((t * g + i, i, -1.0));
            }
        }
        blocks.push(BlockSpec {
            n,
            objective: SmoothFunction::Quadratic(objective),
            set,
            coupling: CsrMatrix::from_triplets(m, n, &trip)?,
        });
    }
    let b: Vec<f64> = (0..periods - 1).flat_map(|_| ramps.iter().copied()).collect();
    let mut p = Problem::new(m, b, blocks);
    p.meta.insert("generator".into(), "dispatch".into());
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_problem;

    #[test]
    fn single_generator_ramp_row() {
        let gen = DispatchGenerator {
            p_min: 0.0,
            p_max: 1.0,
            cost_quad: 1.0,
            cost_lin: 0.0,
        };
        let p = gen_multiperiod_dispatch(2, &[gen], 1.0, &[0.5, 0.6]).unwrap();
        assert_eq!(p.m, 1);
        assert_eq!(p.b, vec![1.0]);
        // −p₁ from block 1, p₂ + s₂ from block 2
        assert_eq!(p.blocks[0].coupling.get(0, 0), -1.0);
        assert_eq!(p.blocks[1].coupling.get(0, 0), 1.0);
        assert_eq!(p.blocks[1].coupling.get(0, 1), 1.0);
        assert!(validate_problem(&p).is_valid());
    }

    #[test]
    fn rejects_bad_ramp_fraction() {
        let gen = DispatchGenerator {
            p_min: 0.0,
            p_max: 1.0,
            cost_quad: 1.0,
            cost_lin: 0.0,
        };
        assert!(gen_multiperiod_dispatch(2, &[gen], 0.0, &[0.5, 0.6]).is_err());
        assert!(gen_multiperiod_dispatch(2, &[gen], 1.5, &[0.5, 0.6]).is_err());
    }
}

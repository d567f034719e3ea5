//! Post-hoc verification of a recorded trace against its problem.

use std::fmt;

use proxjacobi_core::algebra::spectral_norm;
use proxjacobi_core::auglag::{eta_pair, theorem1_bounds};
use proxjacobi_core::jacobi::TraceRecord;
use proxjacobi_core::model::Problem;
use proxjacobi_core::problems::separable_lower_bound;

use crate::{Error, Result};

/// Bound on the relative identity residuals.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative slack of the Lyapunov inequalities: `tol·(1+|Φ|)`.
pub const LYAPUNOV_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.outcome != Outcome::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    fn push(&mut self, name: &'static str, outcome: Outcome, detail: String) {
        self.items.push(CheckItem { name, outcome, detail });
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            let tag = match i.outcome {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::Skip => "SKIP",
            };
            writeln!(f, "{tag} {:<20} {}", i.name, i.detail)?;
        }
        Ok(())
    }
}

/// Records whose Lyapunov difference is comparable: η feasible for the
/// parameters in force, and the same parameters as the previous record.
fn comparable(records: &[TraceRecord], blocks: usize) -> Vec<usize> {
    (0..records.len())
        .filter(|&j| eta_pair(&records[j].params, blocks).feasible && (j == 0 || records[j - 1].params == records[j].params))
        .collect()
}

fn slack(phi: f64) -> f64 {
    LYAPUNOV_TOL * (1.0 + phi.abs())
}

/// Checks, in order:
///
/// * `identities`: the four relative identity residuals are at most
///   [`IDENTITY_TOL`] on every record;
/// * `monotonicity`: `ΔΦ^k ≤ tol·(1+|Φ^k|)` on comparable records, or on
///   every record of a fixed-parameter run without any;
/// * `lower-bound`: `Φ^k ≥ Φ̂ − tol·(1+|Φ̂|)` when the separable bound exists;
/// * `descent-inequality`: `ΔΦ^k ≤ −η_x(‖Δx^k‖² + ‖Δx^{k−1}‖²) − η_z(‖Δz^k‖² + ‖Δz^{k−1}‖²) + tol`
///   on comparable records;
/// * `theorem1-bounds`: for a fixed-parameter run with feasible η, some
///   record meets both residual bounds.
///
/// Checks without applicable records are reported as skipped.
pub fn check_trace(p: &Problem, records: &[TraceRecord]) -> Result<CheckReport> {
    let blocks = p.num_blocks();
    if records.is_empty() {
        return Err(Error::Trace("trace has no records".into()));
    }
    if let Some(r) = records.iter().find(|r| r.delta.len() != blocks) {
        return Err(Error::Trace(format!(
            "trace has {} blocks but the problem has {blocks} (record k = {})",
            r.delta.len(),
            r.k
        )));
    }
    let mut rep = CheckReport::default();

    let worst = records
        .iter()
        .map(|r| r.lemma1_res.max(r.dlambda_res).max(r.p_identity_res).max(r.zstat_res))
        .fold(0.0, f64::max);
    let ok = worst <= IDENTITY_TOL;
    rep.push(
        "identities",
        if ok { Outcome::Pass } else { Outcome::Fail },
        format!("max relative residual {worst:.3e} (limit {IDENTITY_TOL:e})"),
    );

    let comp = comparable(records, blocks);
    let fixed = records.iter().all(|r| r.params == records[0].params);
    let (scope, scope_note): (Vec<usize>, &str) = if !comp.is_empty() {
        (comp.clone(), "")
    } else if fixed {
        ((0..records.len()).collect(), ", eta infeasible")
    } else {
        (Vec::new(), "")
    };
    if scope.is_empty() {
        rep.push("monotonicity", Outcome::Skip, "no record with feasible eta".into());
    } else {
        let bad: Vec<usize> = scope.iter().copied().filter(|&j| records[j].dphi > slack(records[j].phi)).collect();
        let worst = scope
            .iter()
            .map(|&j| records[j].dphi / (1.0 + records[j].phi.abs()))
            .fold(f64::NEG_INFINITY, f64::max);
        let detail = match bad.first() {
            None => format!("{} records{scope_note}, max dphi/(1+|phi|) {worst:.3e}", scope.len()),
            Some(&j) => format!(
                "{} of {} records increase{scope_note}, first at k = {}, max dphi/(1+|phi|) {worst:.3e}",
                bad.len(),
                scope.len(),
                records[j].k
            ),
        };
        rep.push("monotonicity", if bad.is_empty() { Outcome::Pass } else { Outcome::Fail }, detail);
    }

    let phi_hat = separable_lower_bound(p).ok();
    match phi_hat {
        Some(h) if !comp.is_empty() => {
            let low = comp.iter().map(|&j| records[j].phi).fold(f64::INFINITY, f64::min);
            let ok = low >= h - slack(h);
            rep.push(
                "lower-bound",
                if ok { Outcome::Pass } else { Outcome::Fail },
                format!("min phi {low:.6e} against bound {h:.6e}"),
            );
        }
        Some(_) => rep.push("lower-bound", Outcome::Skip, "no record with feasible eta".into()),
        None => rep.push("lower-bound", Outcome::Skip, "separable lower bound unavailable".into()),
    }

    if comp.is_empty() {
        rep.push("descent-inequality", Outcome::Skip, "no record with feasible eta".into());
    } else {
        let mut first_bad = None;
        let mut worst = f64::NEG_INFINITY;
        for &j in &comp {
            let r = &records[j];
            let eta = eta_pair(&r.params, blocks);
            let rhs = -eta.eta_x * (r.dx_sq + r.dx_sq_prev) - eta.eta_z * (r.dz_sq + r.dz_sq_prev);
            let excess = (r.dphi - rhs) / (1.0 + r.phi.abs());
            worst = worst.max(excess);
            if r.dphi > rhs + slack(r.phi) && first_bad.is_none() {
                first_bad = Some(r.k);
            }
        }
        let detail = match first_bad {
            None => format!("max relative excess {worst:.3e}"),
            Some(k) => format!("violated at k = {k}, max relative excess {worst:.3e}"),
        };
        rep.push(
            "descent-inequality",
            if first_bad.is_none() { Outcome::Pass } else { Outcome::Fail },
            detail,
        );
    }

    let params = records[0].params;
    match (fixed, phi_hat) {
        (false, _) => rep.push("theorem1-bounds", Outcome::Skip, "parameters change along the run".into()),
        (true, None) => rep.push("theorem1-bounds", Outcome::Skip, "separable lower bound unavailable".into()),
        (true, Some(h)) => {
            let norms: Vec<f64> = p.blocks.iter().map(|b| spectral_norm(&b.coupling)).collect();
            let last = records.last().expect("non-empty");
            match theorem1_bounds(records[0].phi, h, last.phi, records.len(), &params, &norms, blocks) {
                Err(_) => rep.push("theorem1-bounds", Outcome::Skip, "eta infeasible".into()),
                Ok((pi_b, delta_b)) => {
                    let hit = records
                        .iter()
                        .find(|r| r.pi <= pi_b && r.delta.iter().zip(&delta_b).all(|(d, b)| d <= b));
                    let max_delta_b = delta_b.iter().copied().fold(0.0, f64::max);
                    match hit {
                        Some(r) => rep.push(
                            "theorem1-bounds",
                            Outcome::Pass,
                            format!("k = {} meets pi <= {pi_b:.3e}, delta_t <= {max_delta_b:.3e}", r.k),
                        ),
                        None => rep.push(
                            "theorem1-bounds",
                            Outcome::Fail,
                            format!("no record meets pi <= {pi_b:.3e}, delta_t <= {max_delta_b:.3e}"),
                        ),
                    }
                }
            }
        }
    }
    Ok(rep)
}

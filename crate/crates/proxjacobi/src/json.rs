//! JSON documents.
//!
//! Problem schema (matrices are `[row, col, value]` triplet lists, 0-indexed;
//! repeated triplets are summed):
//!
//! ```text
//! { "m": int, "b": [float],
//!   "blocks": [ { "n": int,
//!       "objective": {"type": "quadratic", "Q": [[r,c,v]], "c": [float], "c0": float}
//!                  | {"type": "builtin", "name": "acopf_re" | "acopf_im", "payload": {...}},
//!       "bounds": {"lower": [float | "-inf"], "upper": [float | "inf"]},
//!       "equalities": [ <function> ],
//!       "A": [[r,c,v]] } ],
//!   "meta": {string: string} }
//! ```
//!
//! `bounds`, `equalities`, `c0` and `meta` are optional. Builtin payloads:
//! `bus`, `v_offset`, `theta_offset`, `injections`, `load`, `admittance`
//! (`[[j, re, im]]`, row `bus` of the admittance matrix) and `neighbors`.
//!
//! Serialization is canonical: loading, writing and loading again gives the
//! same [`Problem`] and the same bytes.

use std::collections::BTreeMap;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use proxjacobi_core::algebra::CsrMatrix;
use proxjacobi_core::model::{
    BalancePart, BlockSpec, Builtin, ConstraintSet, PowerBalance, Problem, QuadraticFunction, SmoothFunction,
};
use proxjacobi_core::problems::{Line, NetGenerator, NetworkData, OracleSolution};

use crate::{Error, Result};

type Triplet = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Num(f64),
    Text(String),
}

impl Bound {
    fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Bound::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Bound::Text("-inf".into())
        } else {
            Bound::Num(v)
        }
    }

    fn to_f64(&self, path: &str) -> Result<f64> {
        match self {
            Bound::Num(v) => Ok(*v),
            Bound::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(schema(path, format!("expected a number, \"inf\" or \"-inf\", got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsDoc {
    lower: Vec<Bound>,
    upper: Vec<Bound>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayloadDoc {
    bus: usize,
    v_offset: usize,
    theta_offset: usize,
    #[serde(default)]
    injections: Vec<usize>,
    load: f64,
    admittance: Vec<(usize, f64, f64)>,
    #[serde(default)]
    neighbors: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum FunctionDoc {
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Triplet>,
        c: Vec<f64>,
        #[serde(default)]
        c0: f64,
    },
    Builtin {
        name: String,
        payload: PayloadDoc,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    n: usize,
    objective: FunctionDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<BoundsDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    equalities: Vec<FunctionDoc>,
    #[serde(rename = "A")]
    a: Vec<Triplet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    m: usize,
    b: Vec<f64>,
    blocks: Vec<BlockDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn parse_doc<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Parse(inner.to_string())
        } else {
            schema(&path, inner.to_string())
        }
    })
}

fn to_pretty<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn function_from_doc(doc: &FunctionDoc, n: usize, path: &str) -> Result<SmoothFunction> {
    match doc {
        FunctionDoc::Quadratic { q, c, c0 } => {
            if c.len() != n {
                return Err(schema(&format!("{path}.c"), format!("length {} but the block has n = {n}", c.len())));
            }
            let qm = CsrMatrix::from_triplets(n, n, q).map_err(|e| schema(&format!("{path}.Q"), e.to_string()))?;
            let f = QuadraticFunction::new(qm, c.clone(), *c0).map_err(|e| schema(path, e.to_string()))?;
            Ok(SmoothFunction::Quadratic(f))
        }
        FunctionDoc::Builtin { name, payload } => {
            let part = match name.as_str() {
                "acopf_re" => BalancePart::Real,
                "acopf_im" => BalancePart::Imag,
                other => return Err(schema(&format!("{path}.name"), format!("unknown builtin {other:?}"))),
            };
            let pb = PowerBalance {
                part,
                bus: payload.bus,
                v_offset: payload.v_offset,
                theta_offset: payload.theta_offset,
                injections: payload.injections.clone(),
                load: payload.load,
                admittance: payload.admittance.clone(),
                neighbors: payload.neighbors.clone(),
            };
            let f = SmoothFunction::Builtin(Builtin::PowerBalance(pb));
            f.check_dim(n).map_err(|e| schema(&format!("{path}.payload"), e))?;
            Ok(f)
        }
    }
}

fn function_to_doc(f: &SmoothFunction) -> FunctionDoc {
    match f {
        SmoothFunction::Quadratic(q) => FunctionDoc::Quadratic {
            q: q.q().triplets().collect(),
            c: q.c.clone(),
            c0: q.c0,
        },
        SmoothFunction::Builtin(b) => {
            let Builtin::PowerBalance(pb) = b;
            FunctionDoc::Builtin {
                name: b.name().to_string(),
                payload: PayloadDoc {
                    bus: pb.bus,
                    v_offset: pb.v_offset,
                    theta_offset: pb.theta_offset,
                    injections: pb.injections.clone(),
                    load: pb.load,
                    admittance: pb.admittance.clone(),
                    neighbors: pb.neighbors.clone(),
                },
            }
        }
    }
}

fn check_finite(values: &[f64], path: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(schema(&format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

/// Parses a problem document.
pub fn load_problem(text: &str) -> Result<Problem> {
    let doc: ProblemDoc = parse_doc(text)?;
    if doc.b.len() != doc.m {
        return Err(schema("b", format!("length {} but m = {}", doc.b.len(), doc.m)));
    }
    check_finite(&doc.b, "b")?;
    let mut blocks = Vec::with_capacity(doc.blocks.len());
    for (t, bd) in doc.blocks.iter().enumerate() {
        let path = format!("blocks[{t}]");
        let n = bd.n;
        let objective = function_from_doc(&bd.objective, n, &format!("{path}.objective"))?;
        let mut set = match &bd.bounds {
            None => ConstraintSet::unbounded(n),
            Some(bounds) => {
                let conv = |v: &[Bound], name: &str| -> Result<Vec<f64>> {
                    if v.len() != n {
                        return Err(schema(
                            &format!("{path}.bounds.{name}"),
                            format!("length {} but the block has n = {n}", v.len()),
                        ));
                    }
                    v.iter()
                        .enumerate()
                        .map(|(i, b)| b.to_f64(&format!("{path}.bounds.{name}[{i}]")))
                        .collect()
                };
                ConstraintSet::boxed(conv(&bounds.lower, "lower")?, conv(&bounds.upper, "upper")?)
            }
        };
        for (i, e) in bd.equalities.iter().enumerate() {
            set.equalities.push(function_from_doc(e, n, &format!("{path}.equalities[{i}]"))?);
        }
        let coupling =
            CsrMatrix::from_triplets(doc.m, n, &bd.a).map_err(|e| schema(&format!("{path}.A"), e.to_string()))?;
        blocks.push(BlockSpec {
            n,
            objective,
            set,
            coupling,
        });
    }
    let mut p = Problem::new(doc.m, doc.b, blocks);
    p.meta = doc.meta;
    Ok(p)
}

/// Canonical JSON text of a problem.
pub fn problem_to_json(p: &Problem) -> String {
    let blocks = p
        .blocks
        .iter()
        .map(|blk| BlockDoc {
            n: blk.n,
            objective: function_to_doc(&blk.objective),
            bounds: blk.set.has_bounds().then(|| BoundsDoc {
                lower: blk.set.lower.iter().map(|&v| Bound::from_f64(v)).collect(),
                upper: blk.set.upper.iter().map(|&v| Bound::from_f64(v)).collect(),
            }),
            equalities: blk.set.equalities.iter().map(function_to_doc).collect(),
            a: blk.coupling.triplets().collect(),
        })
        .collect();
    to_pretty(&ProblemDoc {
        m: p.m,
        b: p.b.clone(),
        blocks,
        meta: p.meta.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    from: usize,
    to: usize,
    r: f64,
    x: f64,
    #[serde(default)]
    b_shunt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorDoc {
    bus: usize,
    p_min: f64,
    p_max: f64,
    q_min: f64,
    q_max: f64,
    ramp: f64,
    cost_quad: f64,
    cost_lin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    buses: usize,
    lines: Vec<LineDoc>,
    generators: Vec<GeneratorDoc>,
    p_load: Vec<Vec<f64>>,
    q_load: Vec<Vec<f64>>,
    #[serde(default = "one")]
    delta_t: f64,
    #[serde(default)]
    v_min: Option<f64>,
    #[serde(default)]
    v_max: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// Parses network data: buses, lines with series `r`, `x` and total
/// shunt susceptance `b_shunt`, generators, and per-period loads
/// (`p_load[t][bus]`). Lines are converted to admittance entries.
pub fn load_network(text: &str) -> Result<NetworkData> {
    let doc: NetworkDoc = parse_doc(text)?;
    let lines: Vec<Line> = doc
        .lines
        .iter()
        .map(|l| Line {
            from: l.from,
            to: l.to,
            r: l.r,
            x: l.x,
            b_shunt: l.b_shunt,
        })
        .collect();
    let gens = doc
        .generators
        .iter()
        .map(|g| NetGenerator {
            bus: g.bus,
            p_min: g.p_min,
            p_max: g.p_max,
            q_min: g.q_min,
            q_max: g.q_max,
            ramp: g.ramp,
            cost_quad: g.cost_quad,
            cost_lin: g.cost_lin,
        })
        .collect();
    let mut net = NetworkData::from_lines(doc.buses, &lines, gens, doc.p_load, doc.q_load, doc.delta_t)
        .map_err(|e| schema("", e.to_string()))?;
    if let Some(v) = doc.v_min {
        net.v_min = v;
    }
    if let Some(v) = doc.v_max {
        net.v_max = v;
    }
    Ok(net)
}

/// Reference solution document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDoc {
    pub x_star: Vec<Vec<f64>>,
    pub lambda_star: Vec<f64>,
    pub z_star: Vec<f64>,
    pub mu_star: Vec<Vec<f64>>,
    pub objective: f64,
    pub provenance: String,
}

impl From<&OracleSolution> for OracleDoc {
    fn from(o: &OracleSolution) -> Self {
        Self {
            x_star: o.x_star.clone(),
            lambda_star: o.lambda_star.clone(),
            z_star: o.z_star.clone(),
            mu_star: o.mu_star.clone(),
            objective: o.objective,
            provenance: o.provenance.as_str().to_string(),
        }
    }
}

pub fn oracle_to_json(o: &OracleSolution) -> String {
    to_pretty(&OracleDoc::from(o))
}

pub fn load_oracle(text: &str) -> Result<OracleDoc> {
    parse_doc(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub rho: f64,
    pub theta: f64,
    pub tau_x: f64,
    pub tau_z: f64,
}

impl From<proxjacobi_core::model::Params> for ParamsDoc {
    fn from(p: proxjacobi_core::model::Params) -> Self {
        Self {
            rho: p.rho,
            theta: p.theta,
            tau_x: p.tau_x,
            tau_z: p.tau_z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualsDoc {
    /// `‖Ax − b‖`.
    pub pi: f64,
    /// `‖Ax − b‖∞`.
    pub coupling_inf: f64,
    pub p_inf: f64,
    pub d_inf: f64,
    /// Per-block dual residual; `null` when the block is off its set.
    pub delta: Vec<Option<f64>>,
    /// Largest `|c_{t,i}(x_t)|` per block.
    pub block_equality_violation: Vec<f64>,
}

/// Output of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub termination: String,
    pub iterations: usize,
    pub objective: f64,
    pub params: ParamsDoc,
    pub residuals: ResidualsDoc,
    /// Iterations with `ΔΦ^k > 1e-8·(1+|Φ^k|)`.
    pub lyapunov_increases: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub x: Vec<Vec<f64>>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
}

pub fn solution_to_json(s: &SolutionDoc) -> String {
    to_pretty(s)
}

pub fn load_solution(text: &str) -> Result<SolutionDoc> {
    parse_doc(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "m": 1, "b": [1.0],
        "blocks": [
            {"n": 1, "objective": {"type": "quadratic", "Q": [[0,0,2]], "c": [0], "c0": 0},
             "bounds": {"lower": ["-inf"], "upper": [5]}, "A": [[0,0,1]]},
            {"n": 1, "objective": {"type": "quadratic", "Q": [[0,0,1],[0,0,1]], "c": [-1]},
             "A": [[0,0,1]]}
        ]
    }"#;

    #[test]
    fn minimal_problem_loads() {
        let p = load_problem(MINIMAL).unwrap();
        assert_eq!(p.num_blocks(), 2);
        assert_eq!(p.blocks[0].set.lower[0], f64::NEG_INFINITY);
        assert_eq!(p.blocks[0].set.upper[0], 5.0);
        assert!(!p.blocks[1].set.has_bounds());
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let p = load_problem(MINIMAL).unwrap();
        assert_eq!(p.blocks[1].objective.as_quadratic().unwrap().q().get(0, 0), 2.0);
    }

    #[test]
    fn missing_b_is_named() {
        let text = MINIMAL.replace(r#""b": [1.0],"#, "");
        let err = load_problem(&text).unwrap_err().to_string();
        assert!(err.contains("`b`"), "{err}");
    }

    #[test]
    fn bad_bound_string_names_the_field() {
        let text = MINIMAL.replace(r#"["-inf"]"#, r#"["minus infinity"]"#);
        let err = load_problem(&text).unwrap_err().to_string();
        assert!(err.contains("blocks[0].bounds.lower[0]"), "{err}");
    }

    #[test]
    fn wrong_length_names_the_field() {
        let text = MINIMAL.replace(r#""c": [-1]"#, r#""c": [-1, 2]"#);
        let err = load_problem(&text).unwrap_err().to_string();
        assert!(err.contains("blocks[1].objective.c"), "{err}");
    }

    #[test]
    fn syntax_errors_are_parse_errors() {
        assert!(matches!(load_problem("{\"m\": 1,"), Err(Error::Parse(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let p = load_problem(MINIMAL).unwrap();
        let text = problem_to_json(&p);
        let q = load_problem(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(text, problem_to_json(&q));
    }
}

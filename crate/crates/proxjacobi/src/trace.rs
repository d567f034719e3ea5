//! Trace CSV.
//!
//! The leading columns are
//! `k, phi, dphi, coupling_inf, p_inf, d_inf, pi, delta_max, rho, theta,
//! tau_x, tau_z, t_xupd_ms, t_zupd_ms, inner_iters_total`, followed by the
//! diagnostic columns in [`EXTRA_COLUMNS`] and one `delta_<t>` column per
//! block (1-based). Floats carry 17 significant digits, so a trace read back
//! reproduces the recorded values exactly.

use std::io::{Read, Write};

use proxjacobi_core::jacobi::TraceRecord;
use proxjacobi_core::model::Params;

use crate::{Error, Result};

pub const BASE_COLUMNS: [&str; 15] = [
    "k",
    "phi",
    "dphi",
    "coupling_inf",
    "p_inf",
    "d_inf",
    "pi",
    "delta_max",
    "rho",
    "theta",
    "tau_x",
    "tau_z",
    "t_xupd_ms",
    "t_zupd_ms",
    "inner_iters_total",
];

pub const EXTRA_COLUMNS: [&str; 10] = [
    "t_lupd_ms",
    "capped_blocks",
    "lemma1_res",
    "dlambda_res",
    "p_identity_res",
    "zstat_res",
    "dx_sq",
    "dx_sq_prev",
    "dz_sq",
    "dz_sq_prev",
];

pub fn header(blocks: usize) -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .chain(EXTRA_COLUMNS.iter())
        .map(|s| s.to_string())
        .chain((1..=blocks).map(|t| format!("delta_{t}")))
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(r: &TraceRecord) -> Vec<String> {
    let mut out = vec![
        r.k.to_string(),
        fmt(r.phi),
        fmt(r.dphi),
        fmt(r.coupling_inf),
        fmt(r.p_inf),
        fmt(r.d_inf),
        fmt(r.pi),
        fmt(r.delta_max),
        fmt(r.params.rho),
        fmt(r.params.theta),
        fmt(r.params.tau_x),
        fmt(r.params.tau_z),
        fmt(r.t_xupd_ms),
        fmt(r.t_zupd_ms),
        r.inner_iters_total.to_string(),
        fmt(r.t_lupd_ms),
        r.capped_blocks.to_string(),
        fmt(r.lemma1_res),
        fmt(r.dlambda_res),
        fmt(r.p_identity_res),
        fmt(r.zstat_res),
        fmt(r.dx_sq),
        fmt(r.dx_sq_prev),
        fmt(r.dz_sq),
        fmt(r.dz_sq_prev),
    ];
    out.extend(r.delta.iter().map(|&d| fmt(d)));
    out
}

fn csv_err(e: csv::Error) -> Error {
    Error::Trace(e.to_string())
}

/// Streams records to CSV; the header is written on construction.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
    blocks: usize,
}

impl<W: Write> std::fmt::Debug for TraceWriter<W> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceWriter").field("blocks", &self.blocks).finish_non_exhaustive()
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W, blocks: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header(blocks)).map_err(csv_err)?;
        Ok(Self { inner, blocks })
    }

    pub fn push(&mut self, r: &TraceRecord) -> Result<()> {
        if r.delta.len() != self.blocks {
            return Err(Error::Trace(format!("record has {} blocks, trace has {}", r.delta.len(), self.blocks)));
        }
        self.inner.write_record(row(r)).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::Trace(e.to_string()))?;
        self.inner.into_inner().map_err(|e| Error::Trace(e.to_string()))
    }
}

pub fn write_trace<W: Write>(out: W, blocks: usize, records: &[TraceRecord]) -> Result<W> {
    let mut w = TraceWriter::new(out, blocks)?;
    for r in records {
        w.push(r)?;
    }
    w.finish()
}

pub fn trace_to_string(blocks: usize, records: &[TraceRecord]) -> String {
    let bytes = write_trace(Vec::new(), blocks, records).expect("writing to memory");
    String::from_utf8(bytes).expect("CSV is ASCII")
}

/// Parses a trace written by [`TraceWriter`]. Returns the records and the
/// number of blocks. Per-block inner iteration counts are not stored and
/// come back empty.
pub fn read_trace<R: Read>(input: R) -> Result<(Vec<TraceRecord>, usize)> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let fixed = BASE_COLUMNS.len() + EXTRA_COLUMNS.len();
    if head.len() < fixed {
        return Err(Error::Trace(format!("header has {} columns, expected at least {fixed}", head.len())));
    }
    let blocks = head.len() - fixed;
    if head != header(blocks) {
        return Err(Error::Trace("unexpected header".into()));
    }
    let mut records = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = line + 2;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Error::Trace(format!("line {line}, column {}: not a number: {:?}", head[i], &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i]
                .parse::<usize>()
                .map_err(|_| Error::Trace(format!("line {line}, column {}: not an integer: {:?}", head[i], &rec[i])))
        };
        records.push(TraceRecord {
            k: u(0)?,
            phi: f(1)?,
            dphi: f(2)?,
            coupling_inf: f(3)?,
            p_inf: f(4)?,
            d_inf: f(5)?,
            pi: f(6)?,
            delta_max: f(7)?,
            params: Params {
                rho: f(8)?,
                theta: f(9)?,
                tau_x: f(10)?,
                tau_z: f(11)?,
            },
            t_xupd_ms: f(12)?,
            t_zupd_ms: f(13)?,
            inner_iters_total: u(14)?,
            t_lupd_ms: f(15)?,
            capped_blocks: u(16)?,
            lemma1_res: f(17)?,
            dlambda_res: f(18)?,
            p_identity_res: f(19)?,
            zstat_res: f(20)?,
            dx_sq: f(21)?,
            dx_sq_prev: f(22)?,
            dz_sq: f(23)?,
            dz_sq_prev: f(24)?,
            delta: (fixed..fixed + blocks).map(f).collect::<Result<_>>()?,
            inner_iters: Vec::new(),
        });
    }
    if records.is_empty() {
        return Err(Error::Trace("trace has no records".into()));
    }
    Ok((records, blocks))
}

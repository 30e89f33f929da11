use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 11] = [
    "k",
    "f",
    "grad_norm",
    "l_k",
    "r_hat_k",
    "R_hat_k",
    "sigma_k",
    "rho_k",
    "success",
    "cum_rel_hessians",
    "wall_time_s",
];

/// One row of the iteration log.
///
/// Rows `0..K` describe iterations: `f`/`grad_norm` at `xₖ`, the sketch used,
/// and the budget charged up to and including iteration `k`. The last row of
/// every run is a terminal row for the final iterate; it carries no charge,
/// `rho_k = NaN` and `r_hat_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationTrace {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub l_k: usize,
    pub r_hat_k: usize,
    #[serde(rename = "R_hat_k")]
    pub rank_max_k: usize,
    pub sigma_k: f64,
    pub rho_k: f64,
    pub success: bool,
    pub cum_rel_hessians: f64,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub terminal: bool,
}

/// Writes a trace as CSV. Floats use the shortest round-trip representation.
pub fn write_trace_csv<W: Write>(writer: W, trace: &[IterationTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for t in trace {
        w.write_record([
            t.k.to_string(),
            t.f.to_string(),
            t.grad_norm.to_string(),
            t.l_k.to_string(),
            t.r_hat_k.to_string(),
            t.rank_max_k.to_string(),
            t.sigma_k.to_string(),
            t.rho_k.to_string(),
            t.success.to_string(),
            t.cum_rel_hessians.to_string(),
            t.wall_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]; the last row is marked
/// terminal.
pub fn read_trace_csv<R: Read>(reader: R) -> Result<Vec<IterationTrace>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(Error::InvalidInput(format!("unexpected trace header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |i: usize| Error::InvalidInput(format!("bad `{}` value `{}`", TRACE_HEADER[i], field(i)));
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let int = |i: usize| field(i).parse::<usize>().map_err(|_| bad(i));
        out.push(IterationTrace {
            k: int(0)?,
            f: float(1)?,
            grad_norm: float(2)?,
            l_k: int(3)?,
            r_hat_k: int(4)?,
            rank_max_k: int(5)?,
            sigma_k: float(6)?,
            rho_k: float(7)?,
            success: field(8).parse().map_err(|_| bad(8))?,
            cum_rel_hessians: float(9)?,
            wall_time_s: float(10)?,
            terminal: false,
        });
    }
    if let Some(last) = out.last_mut() {
        last.terminal = true;
    }
    Ok(out)
}

//! Run traces and their CSV form.
//!
//! ```text
//! # schema=1
//! outer_t,inner_s,comm_rounds,ifo_strict,ifo_paper,train_loss,grad_norm_sq,consensus_err,test_acc
//! 0,0,0,50,50,0.6931471805599453,0.0123,0,
//! ```
//!
//! Floats use the shortest representation that parses back exactly,
//! switching to exponent form outside `[1e-4, 1e15)`. A missing `test_acc`
//! is an empty field.

use std::path::Path;

use crate::error::{Result, SimError};
use crate::io::write_atomic;

pub const SCHEMA_VERSION: u32 = 1;
pub const COLUMNS: [&str; 9] =
    ["outer_t", "inner_s", "comm_rounds", "ifo_strict", "ifo_paper", "train_loss", "grad_norm_sq", "consensus_err", "test_acc"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer_t: usize,
    pub inner_s: usize,
    pub comm_rounds: u64,
    pub ifo_strict: u64,
    pub ifo_paper: u64,
    pub train_loss: f64,
    pub grad_norm_sq: f64,
    /// `‖X − 1x̄ᵀ‖_F²` of the stacked iterate.
    pub consensus_err: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// The last row whose counter stays within `limit`.
    pub fn at_budget(&self, limit: u64, counter: impl Fn(&TraceRow) -> u64) -> Option<&TraceRow> {
        self.rows.iter().take_while(|r| counter(r) <= limit).last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# schema={SCHEMA_VERSION}\n{}\n", COLUMNS.join(","));
        for r in &self.rows {
            let acc = r.test_acc.map(fmt_float).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.outer_t,
                r.inner_s,
                r.comm_rounds,
                r.ifo_strict,
                r.ifo_paper,
                fmt_float(r.train_loss),
                fmt_float(r.grad_norm_sq),
                fmt_float(r.consensus_err),
                acc
            ));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == format!("# schema={SCHEMA_VERSION}") => {}
            _ => return Err(SimError::ConfigInvalid(format!("trace must start with '# schema={SCHEMA_VERSION}'"))),
        }
        match lines.next() {
            Some((_, l)) if l.trim() == COLUMNS.join(",") => {}
            _ => return Err(SimError::ConfigInvalid("unexpected trace header".into())),
        }
        let mut rows = Vec::new();
        for (line, l) in lines.filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != COLUMNS.len() {
                return Err(SimError::RaggedRow { line, expected: COLUMNS.len(), found: fields.len() });
            }
            let int = |s: &str| s.parse::<u64>().map_err(|_| SimError::Parse { line, token: s.to_string() });
            let float = |s: &str| s.parse::<f64>().map_err(|_| SimError::Parse { line, token: s.to_string() });
            rows.push(TraceRow {
                outer_t: int(fields[0])? as usize,
                inner_s: int(fields[1])? as usize,
                comm_rounds: int(fields[2])?,
                ifo_strict: int(fields[3])?,
                ifo_paper: int(fields[4])?,
                train_loss: float(fields[5])?,
                grad_norm_sq: float(fields[6])?,
                consensus_err: float(fields[7])?,
                test_acc: if fields[8].is_empty() { None } else { Some(float(fields[8])?) },
            });
        }
        Ok(Self { rows })
    }
}

pub fn fmt_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

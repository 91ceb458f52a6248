//! CSV serialization and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use bloch_core::kinetics::KineticTrace;
use bloch_core::{EnsembleTrace, SystemParams};
use tempfile::NamedTempFile;

use crate::error::CliError;

pub const TRACE_HEADER: &str = "t,n_mean,n_std,n_stderr,q_mean,model,seed";

/// 17 significant digits, round-trip exact; negative zero prints as zero.
pub fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// Columns of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub model: String,
    pub seed: u64,
    pub t: Vec<f64>,
    pub n_mean: Vec<f64>,
    pub n_std: Vec<f64>,
    pub n_stderr: Vec<f64>,
    pub q_mean: Vec<f64>,
}

impl TraceTable {
    pub fn from_ensemble(trace: &EnsembleTrace, params: &SystemParams, seed: u64) -> Self {
        Self {
            model: "sde".into(),
            seed,
            t: trace.t.clone(),
            n_mean: trace.n_mean.clone(),
            n_std: trace.n_std(),
            n_stderr: trace.n_stderr.clone(),
            q_mean: trace.q_mean(params),
        }
    }

    /// Every `every`-th grid point of a deterministic trace, always including the last.
    pub fn from_kinetic(trace: &KineticTrace, every: usize, seed: u64) -> Self {
        let last = trace.len() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(every.max(1)).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        Self {
            model: trace.model.name().into(),
            seed,
            t: idx.iter().map(|&k| trace.t[k]).collect(),
            n_mean: idx.iter().map(|&k| trace.n[k]).collect(),
            n_std: vec![0.0; idx.len()],
            n_stderr: vec![0.0; idx.len()],
            q_mean: idx.iter().map(|&k| trace.q[k]).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.t.len() * 120);
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for k in 0..self.t.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                num(self.t[k]),
                num(self.n_mean[k]),
                num(self.n_std[k]),
                num(self.n_stderr[k]),
                num(self.q_mean[k]),
                self.model,
                self.seed
            ));
        }
        s
    }
}

/// Parse a trace CSV written by [`TraceTable::to_csv`].
pub fn parse_trace_csv(text: &str) -> Result<TraceTable, String> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err("unexpected header".into());
    }
    let mut t = TraceTable {
        model: String::new(),
        seed: 0,
        t: vec![],
        n_mean: vec![],
        n_std: vec![],
        n_stderr: vec![],
        q_mean: vec![],
    };
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(format!("row {}: expected 7 columns", i + 2));
        }
        let f = |j: usize| cols[j].parse::<f64>().map_err(|e| format!("row {}: {e}", i + 2));
        t.t.push(f(0)?);
        t.n_mean.push(f(1)?);
        t.n_std.push(f(2)?);
        t.n_stderr.push(f(3)?);
        t.q_mean.push(f(4)?);
        t.model = cols[5].to_string();
        t.seed = cols[6].parse().map_err(|e| format!("row {}: {e}", i + 2))?;
    }
    Ok(t)
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.flush())
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(path.to_path_buf())
}

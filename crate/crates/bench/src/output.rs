//! CSV output.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! reader never sees a partial file. Lines end in LF and floats use Rust's
//! shortest round-trip formatting, which makes output byte-identical across
//! runs with the same seed.

use std::io::Write;
use std::path::Path;

use zoro::solver::RunTrace;

use crate::error::{BenchError, Result};

/// Columns of a per-run trace.
pub const TRACE_HEADER: [&str; 7] = ["iter", "queries", "F", "F_err", "grad_norm", "support_size", "step_norm"];

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

/// Writes `header` and `rows` to `path` atomically.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| BenchError::io(dir, e))?;
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(tmp);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.into_iter()).map_err(csv_err)?;
    }
    let mut tmp = w.into_inner().map_err(|e| BenchError::io(path, e.into_error()))?;
    tmp.flush().map_err(|e| BenchError::io(path, e))?;
    tmp.persist(path).map_err(|e| BenchError::io(path, e.error))?;
    Ok(())
}

/// `F_err` of a record: `F − f*` when the optimum is known, else `F`.
pub fn objective_error(objective: f64, error: Option<f64>, optimum: Option<f64>) -> f64 {
    error.unwrap_or_else(|| objective - optimum.unwrap_or(0.0))
}

/// Writes one run's trace.
pub fn write_trace(path: &Path, trace: &RunTrace, optimum: Option<f64>) -> Result<()> {
    let rows = trace.records.iter().map(|r| {
        vec![
            r.iter.to_string(),
            r.queries.to_string(),
            r.objective.to_string(),
            objective_error(r.objective, r.objective_error, optimum).to_string(),
            r.grad_norm.to_string(),
            r.support_size.to_string(),
            r.step_norm.to_string(),
        ]
    });
    write_csv(path, &TRACE_HEADER, rows)
}

//! Learning-curve CSV files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rl_lab_core::ppo::IterationRecord;

use crate::error::{runtime, usage, CliResult};

pub const HEADER: [&str; 8] = [
    "iteration",
    "env_steps",
    "return_mean",
    "return_std_over_seeds",
    "penalty_value",
    "beta",
    "wall_time_s",
    "nonfinite_grad_count",
];

/// One CSV row. `env_steps` is fractional in merged files, where it is a
/// mean over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub iteration: usize,
    pub env_steps: f64,
    pub return_mean: f64,
    pub return_std_over_seeds: f64,
    pub penalty_value: f64,
    pub beta: f64,
    pub wall_time_s: f64,
    pub nonfinite_grad_count: u64,
}

impl CurveRow {
    /// Row for a single seed. Wall time is zeroed unless requested, so
    /// repeated runs produce identical bytes.
    pub fn from_record(r: &IterationRecord, record_wall_time: bool) -> Self {
        CurveRow {
            iteration: r.iteration,
            env_steps: r.env_steps as f64,
            return_mean: r.mean_return,
            return_std_over_seeds: 0.0,
            penalty_value: r.penalty_value,
            beta: r.beta,
            wall_time_s: if record_wall_time { r.wall_time_s } else { 0.0 },
            nonfinite_grad_count: r.nonfinite_grad_count as u64,
        }
    }

    fn fields(&self) -> [String; 8] {
        [
            self.iteration.to_string(),
            self.env_steps.to_string(),
            self.return_mean.to_string(),
            self.return_std_over_seeds.to_string(),
            self.penalty_value.to_string(),
            self.beta.to_string(),
            self.wall_time_s.to_string(),
            self.nonfinite_grad_count.to_string(),
        ]
    }
}

/// Appends rows to a curve file, flushing after each so an aborted run
/// leaves every finished iteration on disk.
pub struct CurveWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl CurveWriter {
    pub fn create(path: &Path) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        inner.write_record(HEADER)?;
        inner.flush()?;
        Ok(CurveWriter { inner })
    }

    pub fn push(&mut self, row: &CurveRow) -> CliResult<()> {
        self.inner.write_record(row.fields())?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| runtime(e.to_string()))?.flush()?;
        Ok(())
    }
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> CliResult<()> {
    let mut w = CurveWriter::create(path)?;
    for r in rows {
        w.push(r)?;
    }
    w.finish()
}

/// Reads a curve file. A header that differs from [`HEADER`] or a malformed
/// field is a usage error.
pub fn read_curve(path: &Path) -> CliResult<Vec<CurveRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(usage(format!(
            "{}: header mismatch, expected {}",
            path.display(),
            HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let bad = |col: &str| usage(format!("{}: row {}: bad {col}", path.display(), line + 1));
        let f = |i: usize| -> CliResult<f64> { rec[i].parse().map_err(|_| bad(HEADER[i])) };
        rows.push(CurveRow {
            iteration: rec[0].parse().map_err(|_| bad(HEADER[0]))?,
            env_steps: f(1)?,
            return_mean: f(2)?,
            return_std_over_seeds: f(3)?,
            penalty_value: f(4)?,
            beta: f(5)?,
            wall_time_s: f(6)?,
            nonfinite_grad_count: rec[7].parse().map_err(|_| bad(HEADER[7]))?,
        });
    }
    Ok(rows)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Merges per-seed curves row by row: `return_mean` becomes the mean over
/// seeds and `return_std_over_seeds` the population std; other float columns
/// are averaged and the non-finite counts summed. Every input must cover the
/// same iterations.
pub fn aggregate(per_seed: &[Vec<CurveRow>]) -> CliResult<Vec<CurveRow>> {
    let Some(first) = per_seed.first() else {
        return Err(usage("nothing to aggregate"));
    };
    if per_seed.iter().any(|c| c.len() != first.len()) {
        return Err(usage("per-seed curves differ in length"));
    }
    let mut out = Vec::with_capacity(first.len());
    for i in 0..first.len() {
        let rows: Vec<&CurveRow> = per_seed.iter().map(|c| &c[i]).collect();
        if rows.iter().any(|r| r.iteration != first[i].iteration) {
            return Err(usage(format!("iteration mismatch at row {i}")));
        }
        let col = |f: fn(&CurveRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let returns = col(|r| r.return_mean);
        let m = mean(&returns);
        let var = returns.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / returns.len() as f64;
        out.push(CurveRow {
            iteration: first[i].iteration,
            env_steps: mean(&col(|r| r.env_steps)),
            return_mean: m,
            return_std_over_seeds: var.sqrt(),
            penalty_value: mean(&col(|r| r.penalty_value)),
            beta: mean(&col(|r| r.beta)),
            wall_time_s: mean(&col(|r| r.wall_time_s)),
            nonfinite_grad_count: rows.iter().map(|r| r.nonfinite_grad_count).sum(),
        });
    }
    Ok(out)
}

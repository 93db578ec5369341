//! CSV and summary emission. Fixed schema, UTF-8, LF line endings, and a
//! deterministic float format so identical runs produce byte-identical files.

use anyhow::{Context, Result};
use num_complex::Complex64;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// A uniform observable series, whatever engine produced it.
#[derive(Debug, Clone)]
pub struct Series {
    pub times: Vec<f64>,
    pub n_target: Vec<f64>,
    pub n_aux: Vec<f64>,
    pub mean_target: Vec<Complex64>,
    pub trace: Vec<f64>,
    pub sem_n_target: Option<Vec<f64>>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Schema: t_s, n_target, n_aux, re_a, im_a, trace[, sem_n_target].
pub fn write_series_csv(path: &Path, series: &Series) -> Result<()> {
    let mut out = String::new();
    out.push_str("t_s,n_target,n_aux,re_a,im_a,trace");
    if series.sem_n_target.is_some() {
        out.push_str(",sem_n_target");
    }
    out.push('\n');
    for k in 0..series.len() {
        out.push_str(&fmt(series.times[k]));
        out.push(',');
        out.push_str(&fmt(series.n_target[k]));
        out.push(',');
        out.push_str(&fmt(series.n_aux[k]));
        out.push(',');
        out.push_str(&fmt(series.mean_target[k].re));
        out.push(',');
        out.push_str(&fmt(series.mean_target[k].im));
        out.push(',');
        out.push_str(&fmt(series.trace[k]));
        if let Some(sem) = &series.sem_n_target {
            out.push(',');
            out.push_str(&fmt(sem[k]));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_table_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// One scenario's outcome: resolved parameters, headline metrics (each
/// traceable to a CSV column), notes, and emitted files.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub engine: String,
    pub resolved: Vec<(String, String)>,
    /// (name, value, source CSV column)
    pub metrics: Vec<(String, f64, &'static str)>,
    pub notes: Vec<String>,
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

impl RunReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, v, _)| *v)
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, column: &'static str) {
        self.metrics.push((name.into(), value, column));
    }
}

pub fn write_summary(report: &RunReport) -> Result<()> {
    let mut f = fs::File::create(&report.summary_path)
        .with_context(|| format!("creating {}", report.summary_path.display()))?;
    writeln!(f, "command = {}", report.command)?;
    writeln!(f, "engine = {}", report.engine)?;
    writeln!(f, "# resolved parameters")?;
    for (k, v) in &report.resolved {
        writeln!(f, "{k} = {v}")?;
    }
    writeln!(f, "# headline metrics (source column in trailing comment)")?;
    for (k, v, col) in &report.metrics {
        writeln!(f, "{k} = {}  # from {col}", fmt(*v))?;
    }
    for n in &report.notes {
        writeln!(f, "# note: {n}")?;
    }
    for p in &report.csv_paths {
        writeln!(f, "# csv: {}", p.display())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_deterministic_and_lf_terminated() {
        let s = Series {
            times: vec![0.0, 1.0e-6],
            n_target: vec![3.68, 1.2],
            n_aux: vec![0.0, 0.5],
            mean_target: vec![Complex64::new(0.0, 0.0), Complex64::new(1e-3, -2e-3)],
            trace: vec![1.0, 1.0],
            sem_n_target: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_series_csv(&p1, &s).unwrap();
        write_series_csv(&p2, &s).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2);
        let text = String::from_utf8(b1).unwrap();
        assert!(text.starts_with("t_s,n_target,n_aux,re_a,im_a,trace\n"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 3);
    }
}

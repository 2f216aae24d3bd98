use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::metrics::Metric;
use crate::error::{Result, SpicError};

pub const CSV_HEADER: &str = "model,dataset,k,beta,runs,epochs,metric,mean,std,seconds_per_run";

/// Aggregated outcome of `runs` independent trainings. Metrics are
/// fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub model: String,
    pub dataset: String,
    /// Iteration count actually used (the validation winner when several
    /// were offered).
    pub k: usize,
    pub beta: u32,
    pub metric: Metric,
    /// Test metric of run `i` (seed `seed_base + i`), in run order.
    pub test: Vec<f64>,
    pub val: Vec<f64>,
    pub mean: f64,
    /// Sample (n − 1) standard deviation; 0 for a single run.
    pub std: f64,
    pub epochs: usize,
    pub runs: usize,
    pub seed_base: u64,
    pub seconds_per_run: f64,
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&self.model),
            csv_field(&self.dataset),
            self.k,
            self.beta,
            self.runs,
            self.epochs,
            self.metric,
            format_sig(self.mean),
            format_sig(self.std),
            format_sig(self.seconds_per_run)
        )
    }

    /// `82.3 ± 0.5` style summary in percent.
    pub fn summary(&self) -> String {
        format!(
            "{} on {} (k={}, β={}): {} {} ± {} % over {} runs",
            self.model,
            self.dataset,
            self.k,
            self.beta,
            self.metric,
            format_sig(100.0 * self.mean),
            format_sig(100.0 * self.std),
            self.runs
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

pub fn write_csv(reports: &[RunReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(64 * (reports.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(out, "{}", r.csv_row()).expect("writing to a String");
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| SpicError::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| SpicError::io(path, e))
}

/// Six significant digits in the style of C's `%g`: fixed notation for
/// exponents in [−4, 6), scientific otherwise, trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

//! JSON metric reports and delimited curve files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::metrics::{AuseSet, DepthMetrics, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub value: f64,
    /// Absent when no uncertainty map was evaluated.
    pub ause: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tool: String,
    pub version: String,
    pub abs_rel: MetricEntry,
    pub rmse_log: MetricEntry,
    pub delta_125: MetricEntry,
    pub n_valid: usize,
    pub n_invalid: usize,
    pub config: RunConfig,
}

impl MetricReport {
    pub fn new(metrics: &DepthMetrics, ause: Option<&AuseSet>, n_invalid: usize, config: RunConfig) -> Self {
        let entry = |m: Metric, value| MetricEntry {
            value,
            ause: ause.map(|a| a.get(m)),
        };
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            abs_rel: entry(Metric::AbsRel, metrics.abs_rel),
            rmse_log: entry(Metric::RmseLog, metrics.rmse_log),
            delta_125: entry(Metric::Delta125, metrics.delta_125),
            n_valid: metrics.n_valid,
            n_invalid,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Two-column `fraction,value` text with a header line.
pub fn format_curve(fractions: &[f64], values: &[f64]) -> String {
    let mut s = String::from("fraction,value\n");
    for (f, v) in fractions.iter().zip(values) {
        s.push_str(&format!("{f:?},{v:?}\n"));
    }
    s
}

pub fn write_curve(path: impl AsRef<Path>, fractions: &[f64], values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_curve(fractions, values)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_text() {
        assert_eq!(format_curve(&[0.0, 0.5], &[1.0, 0.25]), "fraction,value\n0.0,1.0\n0.5,0.25\n");
    }
}

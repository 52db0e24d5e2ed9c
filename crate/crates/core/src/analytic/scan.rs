use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{response_p, AcSignal, SensorModel, SequenceParams};
use crate::error::{Error, Result};

/// Sampled `p(tau)` spectrum plus an echo of everything that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub tau_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub metadata: serde_json::Value,
}

impl ScanResult {
    pub fn new(tau_values: Vec<f64>, p_values: Vec<f64>, metadata: serde_json::Value) -> Self {
        assert_eq!(tau_values.len(), p_values.len());
        ScanResult {
            tau_values,
            p_values,
            metadata,
        }
    }

    pub fn len(&self) -> usize {
        self.tau_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_values.is_empty()
    }

    /// `1 / (2 tau)` for every point.
    pub fn f_equiv(&self) -> impl Iterator<Item = f64> + '_ {
        self.tau_values.iter().map(|t| 1.0 / (2.0 * t))
    }

    pub fn csv_header() -> &'static str {
        "tau_s,f_equiv_hz,p"
    }

    /// Rows of `tau_s,f_equiv_hz,p`, without header.
    pub fn write_csv_rows(&self, out: &mut String, extra: Option<&str>) {
        for (tau, p) in self.tau_values.iter().zip(&self.p_values) {
            write!(out, "{tau:.16e},{:.16e},{p:.16e}", 1.0 / (2.0 * tau)).unwrap();
            if let Some(extra) = extra {
                write!(out, ",{extra}").unwrap();
            }
            out.push('\n');
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push('\n');
        self.write_csv_rows(&mut out, None);
        out
    }
}

/// Evenly spaced `tau` values, each computed from its index so that tiny
/// steps do not accumulate rounding.
pub fn tau_grid(tau_start: f64, tau_step: f64, n_points: usize) -> Vec<f64> {
    (0..n_points).map(|i| tau_start + i as f64 * tau_step).collect()
}

/// Evaluate [`response_p`] on a `tau` grid. Points are independent and run in
/// parallel; the result does not depend on scheduling.
pub fn scan_response(
    template: &SequenceParams,
    tau_start: f64,
    tau_step: f64,
    n_points: usize,
    signals: &[AcSignal],
    sensor: &SensorModel,
) -> Result<ScanResult> {
    if n_points == 0 {
        return Err(Error::invalid("n_points", "must be at least 1"));
    }
    let taus = tau_grid(tau_start, tau_step, n_points);
    let ps = taus
        .par_iter()
        .map(|&tau| response_p(&template.with_tau(tau), signals, sensor))
        .collect::<Result<Vec<_>>>()?;
    let metadata = json!({
        "kind": "analytic_scan",
        "version": crate::VERSION,
        "sequence": template,
        "tau_start_s": tau_start,
        "tau_step_s": tau_step,
        "n_points": n_points,
        "signals": signals,
        "sensor": sensor,
    });
    Ok(ScanResult::new(taus, ps, metadata))
}

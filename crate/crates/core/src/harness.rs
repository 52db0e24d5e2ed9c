//! Figure-level experiment runners.
//!
//! Each [`ExperimentKind`] owns a parameter struct whose defaults reproduce
//! the corresponding measurement. An [`ExperimentSpec`] names a kind plus
//! overrides for any of those parameters; unknown keys are rejected.
//!
//! The default scan windows for the analytic figures are chosen to frame the
//! dip and are approximate.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytic::{
    resonant_tau, scan_response, tau_grid, tau_step_to_freq_step, AcSignal, ScanResult, SensorModel, SequenceParams,
};
use crate::envelope::{PulseShape, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::spinsim::{
    compare_pulse_shapes, spin_scan, DriveParams, HyperfineCoupling, NuclearBath, PhaseCycle, Playback, PulseVariant,
    FIG_S1_VARIANTS,
};
use crate::write_atomic;

/// AC test tone used by the analytic figures, Hz.
pub const TEST_TONE_HZ: f64 = 9.746969e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "fig2_square")]
    Fig2Square,
    #[serde(rename = "fig2_shaped")]
    Fig2Shaped,
    #[serde(rename = "fig3_scaling")]
    Fig3Scaling,
    #[serde(rename = "fig3_zoom")]
    Fig3Zoom,
    #[serde(rename = "fig4_twotone")]
    Fig4TwoTone,
    #[serde(rename = "fig4_c13")]
    Fig4C13,
    #[serde(rename = "figS1_shapes")]
    FigS1Shapes,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Fig2Square,
        ExperimentKind::Fig2Shaped,
        ExperimentKind::Fig3Scaling,
        ExperimentKind::Fig3Zoom,
        ExperimentKind::Fig4TwoTone,
        ExperimentKind::Fig4C13,
        ExperimentKind::FigS1Shapes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2Square => "fig2_square",
            ExperimentKind::Fig2Shaped => "fig2_shaped",
            ExperimentKind::Fig3Scaling => "fig3_scaling",
            ExperimentKind::Fig3Zoom => "fig3_zoom",
            ExperimentKind::Fig4TwoTone => "fig4_twotone",
            ExperimentKind::Fig4C13 => "fig4_c13",
            ExperimentKind::FigS1Shapes => "figS1_shapes",
        }
    }

    /// Default parameters as a JSON object.
    pub fn defaults(self) -> Value {
        let v = match self {
            ExperimentKind::Fig2Square => serde_json::to_value(Fig2Params::square()),
            ExperimentKind::Fig2Shaped => serde_json::to_value(Fig2Params::shaped()),
            ExperimentKind::Fig3Scaling => serde_json::to_value(Fig3ScalingParams::default()),
            ExperimentKind::Fig3Zoom => serde_json::to_value(Fig3ZoomParams::default()),
            ExperimentKind::Fig4TwoTone => serde_json::to_value(TwoToneParams::default()),
            ExperimentKind::Fig4C13 => serde_json::to_value(C13Params::default()),
            ExperimentKind::FigS1Shapes => serde_json::to_value(ShapeParams::default()),
        };
        v.expect("parameter structs serialize")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    /// Accepts the full name or a short alias such as `figS1`, `fig2` or `fig4`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "fig2" => ExperimentKind::Fig2Shaped,
            "fig3" => ExperimentKind::Fig3Scaling,
            "fig4" => ExperimentKind::Fig4TwoTone,
            "figS1" | "figs1" => ExperimentKind::FigS1Shapes,
            _ => *ExperimentKind::ALL
                .iter()
                .find(|k| k.name() == s)
                .ok_or_else(|| Error::invalid("kind", format!("unknown experiment `{s}`")))?,
        };
        Ok(kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.overrides.insert(key.to_string(), value.into());
        self
    }

    /// Defaults merged with the overrides. Fails on any key the kind does
    /// not define and on values of the wrong type.
    pub fn resolved(&self) -> Result<Value> {
        let mut params = self.kind.defaults();
        let map = params.as_object_mut().expect("parameters are a JSON object");
        for (key, value) in &self.overrides {
            if !map.contains_key(key) {
                return Err(Error::UnknownParameter {
                    kind: self.kind.name().to_string(),
                    key: key.clone(),
                });
            }
            map.insert(key.clone(), value.clone());
        }
        Ok(params)
    }

    fn params<P: DeserializeOwned>(&self) -> Result<P> {
        serde_json::from_value(self.resolved()?).map_err(|e| Error::invalid("overrides", e.to_string()))
    }
}

/// Parameters of the square- and shaped-pulse timing comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Params {
    pub n_pulses: u32,
    pub f_ac_hz: f64,
    pub b_ac_t: f64,
    pub t_pi_s: f64,
    pub tau_start_s: f64,
    pub tau_stop_s: f64,
    /// Ignored for square pulses, which step on the sample grid.
    pub tau_step_s: f64,
    pub sample_rate_hz: f64,
    pub t2_s: Option<f64>,
}

impl Fig2Params {
    /// `n_pulses` is read off the plotted linewidth.
    pub fn shaped() -> Self {
        Fig2Params {
            n_pulses: 48,
            f_ac_hz: TEST_TONE_HZ,
            b_ac_t: 7.15e-6,
            t_pi_s: 25e-9,
            tau_start_s: 40e-9,
            tau_stop_s: 62e-9,
            tau_step_s: 0.05e-9,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            t2_s: None,
        }
    }

    pub fn square() -> Self {
        Fig2Params {
            tau_step_s: 1.0 / DEFAULT_SAMPLE_RATE,
            ..Fig2Params::shaped()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3ScalingParams {
    pub n_pulses: Vec<u32>,
    pub f_ac_hz: f64,
    pub b_ac_t: f64,
    pub t2_s: Option<f64>,
    pub t_pi_s: f64,
    /// Half-width of each scan in units of the `2 tau / N` bandwidth.
    pub window_bandwidths: f64,
    pub n_points: usize,
}

impl Default for Fig3ScalingParams {
    fn default() -> Self {
        Fig3ScalingParams {
            n_pulses: vec![192, 672, 10_000],
            f_ac_hz: TEST_TONE_HZ,
            b_ac_t: 0.84e-6,
            t2_s: Some(535e-6),
            t_pi_s: 25e-9,
            window_bandwidths: 4.0,
            n_points: 801,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3ZoomParams {
    pub n_pulses: u32,
    pub f_ac_hz: f64,
    pub b_ac_t: f64,
    pub t2_s: Option<f64>,
    pub t_pi_s: f64,
    pub tau_step_s: f64,
    /// Scan is centred on the resonant tau.
    pub n_points: usize,
}

impl Default for Fig3ZoomParams {
    fn default() -> Self {
        Fig3ZoomParams {
            n_pulses: 10_000,
            f_ac_hz: TEST_TONE_HZ,
            b_ac_t: 0.84e-6,
            t2_s: Some(535e-6),
            t_pi_s: 25e-9,
            tau_step_s: 0.6e-12,
            n_points: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoToneParams {
    pub f_ac_hz: f64,
    pub separation_hz: f64,
    pub b_ac_t: f64,
    /// `None` picks the smallest even N with `1/(N tau) <= bandwidth_hz`.
    pub n_pulses: Option<u32>,
    pub bandwidth_hz: f64,
    pub t_pi_s: f64,
    pub tau_step_s: f64,
    /// Extra tau on either side of the two resonances.
    pub margin_s: f64,
    pub t2_s: Option<f64>,
}

impl Default for TwoToneParams {
    fn default() -> Self {
        TwoToneParams {
            f_ac_hz: TEST_TONE_HZ,
            separation_hz: 3e3,
            b_ac_t: 5e-9,
            n_pulses: None,
            bandwidth_hz: 1e3,
            t_pi_s: 25e-9,
            tau_step_s: 0.2e-12,
            margin_s: 20e-12,
            t2_s: None,
        }
    }
}

/// Nucleus given in Hz; converted to rad/s when the bath is built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingHz {
    pub a_par_hz: f64,
    pub a_perp_hz: f64,
}

impl CouplingHz {
    fn to_coupling(self) -> HyperfineCoupling {
        HyperfineCoupling::new(2.0 * PI * self.a_par_hz, 2.0 * PI * self.a_perp_hz)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C13Params {
    pub n_pulses: u32,
    pub t_pi_s: f64,
    pub shape: PulseShape,
    pub larmor_hz: f64,
    /// First entry is the strongly coupled nucleus; the others are
    /// illustrative weak couplings.
    pub nuclei: Vec<CouplingHz>,
    pub detuning_hz: f64,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub n_points: usize,
    pub substeps_per_sample: u32,
    pub sample_rate_hz: f64,
}

impl Default for C13Params {
    fn default() -> Self {
        C13Params {
            n_pulses: 320,
            t_pi_s: 25e-9,
            shape: PulseShape::CosineSquare,
            larmor_hz: 1.975e6,
            nuclei: vec![
                CouplingHz {
                    a_par_hz: 114e3,
                    a_perp_hz: 62e3,
                },
                CouplingHz {
                    a_par_hz: 45e3,
                    a_perp_hz: 25e3,
                },
                CouplingHz {
                    a_par_hz: -30e3,
                    a_perp_hz: 18e3,
                },
                CouplingHz {
                    a_par_hz: 20e3,
                    a_perp_hz: 10e3,
                },
            ],
            detuning_hz: 0.0,
            f_start_hz: 1.85e6,
            f_stop_hz: 2.15e6,
            n_points: 151,
            substeps_per_sample: 4,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub n_pulses: u32,
    pub t_pi_s: f64,
    pub larmor_hz: f64,
    pub nucleus: CouplingHz,
    pub detuning_hz: f64,
    /// `None` centres the scan on the nuclear resonance `pi / w_mean`.
    pub tau_center_s: Option<f64>,
    /// Half-width of the scan relative to its centre.
    pub window_rel: f64,
    pub n_points: usize,
    pub vertical_bits: u32,
    pub substeps_per_sample: u32,
    pub sample_rate_hz: f64,
    pub playback: Playback,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            n_pulses: 320,
            t_pi_s: 25e-9,
            larmor_hz: 1.975e6,
            nucleus: CouplingHz {
                a_par_hz: 114e3,
                a_perp_hz: 62e3,
            },
            detuning_hz: 0.0,
            tau_center_s: None,
            window_rel: 0.02,
            n_points: 81,
            vertical_bits: 14,
            substeps_per_sample: 4,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            playback: Playback::Continuous,
        }
    }
}

/// Located dip of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub tau_min: f64,
    /// FWHM of the `1 - p` dip in tau.
    pub linewidth: f64,
    pub p_min: f64,
}

/// Parabolic minimum and FWHM of the deepest interior dip of `scan`.
///
/// The dip is measured from the largest `p` in the scan, so the half level
/// is `p_max - (p_max - p_min) / 2`.
pub fn find_resonance(scan: &ScanResult) -> Result<Resonance> {
    let (t, p) = (&scan.tau_values, &scan.p_values);
    if p.len() < 3 || p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoInteriorMinimum);
    }
    let i = (0..p.len()).min_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
    let p_max = p.iter().copied().fold(f64::MIN, f64::max);
    if i == 0 || i + 1 == p.len() || p_max <= p[i] {
        return Err(Error::NoInteriorMinimum);
    }

    let (tau_min, p_min) = parabola_vertex([t[i - 1], t[i], t[i + 1]], [p[i - 1], p[i], p[i + 1]]);
    let half = p_max - 0.5 * (p_max - p_min);
    let crossing = |j: usize, k: usize| t[j] + (half - p[j]) * (t[k] - t[j]) / (p[k] - p[j]);
    let left = (1..=i)
        .rev()
        .find(|&j| p[j - 1] >= half)
        .map(|j| crossing(j, j - 1))
        .ok_or(Error::TruncatedLobe { side: "left" })?;
    let right = (i..p.len() - 1)
        .find(|&j| p[j + 1] >= half)
        .map(|j| crossing(j, j + 1))
        .ok_or(Error::TruncatedLobe { side: "right" })?;
    Ok(Resonance {
        tau_min,
        linewidth: right - left,
        p_min,
    })
}

fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (d1, d2) = (x[0] - x[1], x[2] - x[1]);
    let (s1, s2) = ((y[0] - y[1]) / d1, (y[2] - y[1]) / d2);
    // y - y1 = b u + a u^2 with u = x - x1
    let a = (s2 - s1) / (d2 - d1);
    let b = s1 - a * d1;
    if !(a > 0.0) {
        return (x[1], y[1]);
    }
    let u = (-b / (2.0 * a)).clamp(d1, d2);
    (x[1] + u, y[1] + b * u + a * u * u)
}

/// Interior local minima of `p`, deepest first.
fn local_minima(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..p.len().saturating_sub(1))
        .filter(|&i| p[i] < p[i - 1] && p[i] <= p[i + 1])
        .collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    idx
}

/// Linear-interpolated positions where `p` crosses 1/2.
pub fn zero_crossings(scan: &ScanResult) -> Vec<f64> {
    let (t, p) = (&scan.tau_values, &scan.p_values);
    (1..p.len())
        .filter_map(|j| {
            let (a, b) = (p[j - 1] - 0.5, p[j] - 0.5);
            if a == 0.0 {
                Some(t[j - 1])
            } else if a * b < 0.0 {
                Some(t[j - 1] + a / (a - b) * (t[j] - t[j - 1]))
            } else {
                None
            }
        })
        .collect()
}

fn sub_scan(scan: &ScanResult, range: std::ops::Range<usize>) -> ScanResult {
    ScanResult::new(
        scan.tau_values[range.clone()].to_vec(),
        scan.p_values[range].to_vec(),
        Value::Null,
    )
}

fn resonance_json(r: &Resonance, f_ac: Option<f64>) -> Value {
    let mut v = json!({
        "tau_min_s": r.tau_min,
        "linewidth_s": r.linewidth,
        "p_min": r.p_min,
        "f_equiv_hz": 1.0 / (2.0 * r.tau_min),
    });
    if let Some(f) = f_ac {
        v["linewidth_hz"] = json!(tau_step_to_freq_step(r.linewidth, f));
    }
    v
}

/// Scans, summary and resolved parameters of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    /// `(label, scan)`; the label is empty for single-scan runs.
    pub scans: Vec<(String, ScanResult)>,
    pub summary: Value,
    /// Extra CSV files keyed by file name.
    pub extra_files: BTreeMap<String, String>,
}

impl ExperimentOutput {
    /// Column naming the scan in multi-scan CSVs.
    fn label_column(&self) -> &'static str {
        match self.spec.kind {
            ExperimentKind::FigS1Shapes => "shape",
            _ => "series",
        }
    }

    pub fn scan_csv(&self) -> String {
        if let [(_, scan)] = self.scans.as_slice() {
            return scan.to_csv();
        }
        let mut out = format!("{},{}\n", ScanResult::csv_header(), self.label_column());
        for (label, scan) in &self.scans {
            scan.write_csv_rows(&mut out, Some(label));
        }
        out
    }

    /// The fully resolved spec; loading it back reproduces this run.
    pub fn params(&self) -> Value {
        json!({
            "kind": self.spec.kind,
            "overrides": self.spec.resolved().unwrap_or(Value::Null),
        })
    }

    /// Write `scan.csv`, `summary.json`, `params.json` and any extras into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("scan.csv"), self.scan_csv().as_bytes())?;
        write_atomic(&dir.join("summary.json"), pretty(&self.summary)?.as_bytes())?;
        write_atomic(&dir.join("params.json"), pretty(&self.params())?.as_bytes())?;
        for (name, body) in &self.extra_files {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Run one experiment. Outputs depend only on the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let (scans, summary, extra_files) = match spec.kind {
        ExperimentKind::Fig2Square => run_fig2(&spec.params()?, true)?,
        ExperimentKind::Fig2Shaped => run_fig2(&spec.params()?, false)?,
        ExperimentKind::Fig3Scaling => run_fig3_scaling(&spec.params()?)?,
        ExperimentKind::Fig3Zoom => run_fig3_zoom(&spec.params()?)?,
        ExperimentKind::Fig4TwoTone => run_two_tone(&spec.params()?)?,
        ExperimentKind::Fig4C13 => run_c13(&spec.params()?)?,
        ExperimentKind::FigS1Shapes => run_shapes(&spec.params()?)?,
    };
    let mut summary = summary;
    summary["kind"] = json!(spec.kind);
    summary["version"] = json!(crate::VERSION);
    Ok(ExperimentOutput {
        spec: spec.clone(),
        scans,
        summary,
        extra_files,
    })
}

type RunnerOutput = (Vec<(String, ScanResult)>, Value, BTreeMap<String, String>);

fn sensor(t2: Option<f64>) -> SensorModel {
    SensorModel {
        t2,
        ..SensorModel::default()
    }
}

fn positive(name: &'static str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::invalid(name, format!("{x} is not positive")))
    }
}

fn at_least(name: &'static str, n: usize, min: usize) -> Result<usize> {
    if n >= min {
        Ok(n)
    } else {
        Err(Error::invalid(name, format!("{n} is below {min}")))
    }
}

fn run_fig2(p: &Fig2Params, square: bool) -> Result<RunnerOutput> {
    let ts = 1.0 / positive("sample_rate_hz", p.sample_rate_hz)?;
    if !(p.tau_stop_s > p.tau_start_s) {
        return Err(Error::invalid("tau_stop_s", "must exceed tau_start_s"));
    }
    let (start, step, n) = if square {
        // only whole samples are reachable
        let k0 = (p.tau_start_s / ts - 1e-9).ceil();
        let k1 = (p.tau_stop_s / ts + 1e-9).floor();
        (k0 * ts, ts, (k1 - k0) as usize + 1)
    } else {
        let step = positive("tau_step_s", p.tau_step_s)?;
        (p.tau_start_s, step, ((p.tau_stop_s - p.tau_start_s) / step).round() as usize + 1)
    };
    let shape = if square { PulseShape::Square } else { PulseShape::CosineSquare };
    let seq = SequenceParams::new(p.n_pulses, start, p.t_pi_s, shape);
    let signal = [AcSignal::new(p.f_ac_hz, p.b_ac_t)];
    let scan = scan_response(&seq, start, step, n, &signal, &sensor(p.t2_s))?;
    let res = find_resonance(&scan)?;
    let summary = json!({
        "resonant_tau_s": resonant_tau(p.f_ac_hz)?,
        "minima": [resonance_json(&res, Some(p.f_ac_hz))],
        "tau_step_s": step,
        "freq_step_hz": tau_step_to_freq_step(step, p.f_ac_hz),
        "n_points": n,
    });
    Ok((vec![(String::new(), scan)], summary, BTreeMap::new()))
}

fn run_fig3_scaling(p: &Fig3ScalingParams) -> Result<RunnerOutput> {
    let tau0 = resonant_tau(p.f_ac_hz)?;
    let n_points = at_least("n_points", p.n_points, 3)?;
    if p.n_pulses.is_empty() {
        return Err(Error::invalid("n_pulses", "need at least one value"));
    }
    let signal = [AcSignal::new(p.f_ac_hz, p.b_ac_t)];
    let mut scans = Vec::new();
    let mut per_n = Vec::new();
    for &n in &p.n_pulses {
        let half = positive("window_bandwidths", p.window_bandwidths)? * 2.0 * tau0 / n.max(1) as f64;
        let step = 2.0 * half / (n_points - 1) as f64;
        let seq = SequenceParams::new(n, tau0, p.t_pi_s, PulseShape::CosineSquare);
        let scan = scan_response(&seq, tau0 - half, step, n_points, &signal, &sensor(p.t2_s))?;
        let res = find_resonance(&scan);
        per_n.push(json!({
            "n_pulses": n,
            "tau_step_s": step,
            "peak_bessel_argument": 2.0 / PI * SensorModel::default().gamma * p.b_ac_t * n as f64 * tau0,
            "resonance": res.as_ref().map(|r| resonance_json(r, Some(p.f_ac_hz))).unwrap_or(Value::Null),
            "zero_crossings_s": zero_crossings(&scan),
        }));
        scans.push((n.to_string(), scan, res.ok()));
    }
    let width = |n: u32| {
        scans
            .iter()
            .find(|(l, _, _)| *l == n.to_string())
            .and_then(|(_, _, r)| r.map(|r| r.linewidth))
    };
    let mut summary = json!({ "series": per_n });
    if let (Some(a), Some(b)) = (width(192), width(672)) {
        summary["linewidth_ratio_672_192"] = json!(b / a);
        summary["expected_ratio_672_192"] = json!(192.0 / 672.0);
    }
    let scans = scans.into_iter().map(|(l, s, _)| (l, s)).collect();
    Ok((scans, summary, BTreeMap::new()))
}

fn run_fig3_zoom(p: &Fig3ZoomParams) -> Result<RunnerOutput> {
    let tau0 = resonant_tau(p.f_ac_hz)?;
    let step = positive("tau_step_s", p.tau_step_s)?;
    let n = at_least("n_points", p.n_points, 3)?;
    let start = tau0 - step * ((n - 1) / 2) as f64;
    let seq = SequenceParams::new(p.n_pulses, tau0, p.t_pi_s, PulseShape::CosineSquare);
    let signal = [AcSignal::new(p.f_ac_hz, p.b_ac_t)];
    let scan = scan_response(&seq, start, step, n, &signal, &sensor(p.t2_s))?;
    let i_min = (0..scan.len()).min_by(|&a, &b| scan.p_values[a].total_cmp(&scan.p_values[b])).unwrap();
    let summary = json!({
        "tau_step_s": step,
        "freq_step_hz": tau_step_to_freq_step(step, p.f_ac_hz),
        "resonant_tau_s": tau0,
        "p_at_resonance": scan.p_values[(n - 1) / 2],
        "tau_of_lowest_p_s": scan.tau_values[i_min],
        "zero_crossings_s": zero_crossings(&scan),
    });
    Ok((vec![(String::new(), scan)], summary, BTreeMap::new()))
}

/// Smallest even N whose bandwidth `1/(N tau)` does not exceed `bandwidth`.
pub fn pulses_for_bandwidth(tau: f64, bandwidth: f64) -> Result<u32> {
    let n = (1.0 / (positive("tau", tau)? * positive("bandwidth_hz", bandwidth)?)).ceil();
    let n = n as u32;
    Ok(n + n % 2)
}

fn run_two_tone(p: &TwoToneParams) -> Result<RunnerOutput> {
    let f_hi = p.f_ac_hz + p.separation_hz;
    let tau_lo = resonant_tau(f_hi)?;
    let tau_hi = resonant_tau(p.f_ac_hz)?;
    let n_pulses = match p.n_pulses {
        Some(n) => n,
        None => pulses_for_bandwidth(tau_hi, p.bandwidth_hz)?,
    };
    let step = positive("tau_step_s", p.tau_step_s)?;
    let (a, b) = (tau_lo.min(tau_hi) - p.margin_s, tau_lo.max(tau_hi) + p.margin_s);
    let n = ((b - a) / step).ceil() as usize + 1;
    let seq = SequenceParams::new(n_pulses, tau_hi, p.t_pi_s, PulseShape::CosineSquare);
    let signals = [AcSignal::new(p.f_ac_hz, p.b_ac_t), AcSignal::new(f_hi, p.b_ac_t)];
    let scan = scan_response(&seq, a, step, n, &signals, &sensor(p.t2_s))?;

    let mut minima = Vec::new();
    let mut resolved = false;
    let lows = local_minima(&scan.p_values);
    if let [i, j, ..] = lows[..] {
        let (i, j) = (i.min(j), i.max(j));
        let split = (i..=j).max_by(|&x, &y| scan.p_values[x].total_cmp(&scan.p_values[y])).unwrap();
        let left = find_resonance(&sub_scan(&scan, 0..split + 1));
        let right = find_resonance(&sub_scan(&scan, split..scan.len()));
        if let (Ok(l), Ok(r)) = (left, right) {
            resolved = (r.tau_min - l.tau_min).abs() > l.linewidth.max(r.linewidth);
            minima = vec![l, r];
        }
    }
    let summary = json!({
        "n_pulses": n_pulses,
        "bandwidth_hz": 1.0 / (n_pulses as f64 * tau_hi),
        "expected_tau_s": [tau_lo, tau_hi],
        "minima": minima.iter().map(|r| resonance_json(r, Some(p.f_ac_hz))).collect::<Vec<_>>(),
        "separation_s": if minima.len() == 2 { json!(minima[1].tau_min - minima[0].tau_min) } else { Value::Null },
        "resolved": resolved,
        "tau_step_s": step,
        "freq_step_hz": tau_step_to_freq_step(step, p.f_ac_hz),
    });
    Ok((vec![(String::new(), scan)], summary, BTreeMap::new()))
}

fn run_c13(p: &C13Params) -> Result<RunnerOutput> {
    let n = at_least("n_points", p.n_points, 3)?;
    if !(p.f_stop_hz > p.f_start_hz) || !(p.f_start_hz > 0.0) {
        return Err(Error::invalid("f_stop_hz", "need 0 < f_start_hz < f_stop_hz"));
    }
    let bath = NuclearBath::new(
        2.0 * PI * p.larmor_hz,
        p.nuclei.iter().map(|c| c.to_coupling()).collect(),
    );
    let drive = DriveParams::pi_matched(p.t_pi_s, p.shape)
        .with_detuning(2.0 * PI * p.detuning_hz)
        .with_substeps(p.substeps_per_sample);
    let drive = DriveParams {
        sample_rate: p.sample_rate_hz,
        ..drive
    };
    // evenly spaced in frequency, as plotted
    let taus: Vec<f64> = (0..n)
        .map(|i| {
            let f = p.f_start_hz + (p.f_stop_hz - p.f_start_hz) * i as f64 / (n - 1) as f64;
            1.0 / (2.0 * f)
        })
        .rev()
        .collect();
    let scan = spin_scan(p.n_pulses, &taus, &drive, &bath)?;
    let res = find_resonance(&scan).ok();
    let summary = json!({
        "n_nuclei": bath.n_nuclei(),
        "dimension": bath.dim(),
        "minima": res.iter().map(|r| resonance_json(r, None)).collect::<Vec<_>>(),
        "p_min": scan.p_values.iter().copied().fold(f64::INFINITY, f64::min),
    });
    Ok((vec![(String::new(), scan)], summary, BTreeMap::new()))
}

/// `pi / w_mean`, where `w_mean` averages the two NV-conditioned precession
/// frequencies of nucleus 0.
pub fn nuclear_resonance_tau(bath: &NuclearBath) -> f64 {
    let (w0, w1) = bath.conditional_frequencies(0);
    2.0 * PI / (w0 + w1)
}

fn run_shapes(p: &ShapeParams) -> Result<RunnerOutput> {
    let n = at_least("n_points", p.n_points, 2)?;
    let bath = NuclearBath::single(2.0 * PI * p.larmor_hz, p.nucleus.to_coupling());
    bath.validate()?;
    let center = match p.tau_center_s {
        Some(t) => positive("tau_center_s", t)?,
        None => nuclear_resonance_tau(&bath),
    };
    let half = positive("window_rel", p.window_rel)? * center;
    let taus = tau_grid(center - half, 2.0 * half / (n - 1) as f64, n);
    let drive = DriveParams {
        detuning: 2.0 * PI * p.detuning_hz,
        sample_rate: p.sample_rate_hz,
        substeps_per_sample: p.substeps_per_sample,
        phase_cycle: PhaseCycle::Cpmg,
        playback: p.playback,
        ..DriveParams::pi_matched(p.t_pi_s, PulseShape::CosineSquare)
    };
    let variants = FIG_S1_VARIANTS.map(|v| match v {
        PulseVariant::CosineSquareQuantized(_) => PulseVariant::CosineSquareQuantized(p.vertical_bits),
        v => v,
    });
    let cmp = compare_pulse_shapes(p.n_pulses, &taus, &drive, &bath, &variants)?;
    let quantized = variants[3];
    let dq = cmp.max_abs_difference(quantized, PulseVariant::CosineSquare).unwrap();
    let dshape = cmp.max_abs_difference(PulseVariant::Square, PulseVariant::CosineSquare).unwrap();
    let dsq = cmp.max_abs_difference(PulseVariant::Square, PulseVariant::Ideal).unwrap();
    let dcos = cmp.max_abs_difference(PulseVariant::CosineSquare, PulseVariant::Ideal).unwrap();
    let dfinite = dsq.max(dcos);
    let ideal = find_resonance(cmp.curve(PulseVariant::Ideal).unwrap()).ok();
    let summary = json!({
        "tau_center_s": center,
        "tau_step_s": taus[1] - taus[0],
        "ideal_minimum": ideal.map(|r| resonance_json(&r, None)),
        "max_abs_dp_quantized_vs_cosine": dq,
        "quantization_below_1e-6": dq < 1e-6,
        "max_abs_dp_square_vs_cosine": dshape,
        "max_abs_dp_square_vs_ideal": dsq,
        "max_abs_dp_cosine_vs_ideal": dcos,
        "shape_difference_small": dshape <= dfinite,
        "vertical_bits": p.vertical_bits,
        "playback": p.playback,
    });
    let mut extra = BTreeMap::new();
    extra.insert("differences.csv".to_string(), cmp.differences_csv().unwrap());
    let scans = cmp.curves.into_iter().map(|(v, s)| (v.label(), s)).collect();
    Ok((scans, summary, extra))
}

//! Closed-form response of a dynamical-decoupling sensor to classical AC
//! fields: frequency increments, the sequence filter function, and the
//! phase-averaged Bessel response.

mod bessel;
mod scan;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::envelope::PulseShape;
use crate::error::{ensure_finite, Error, Result};

pub use bessel::bessel_j0;
pub use scan::{scan_response, tau_grid, ScanResult};

/// Electron gyromagnetic ratio of the NV centre, rad s^-1 T^-1.
pub const GAMMA_NV: f64 = 2.0 * PI * 28.0e9;

/// Offset from the nearest resonance (in units of `2 f tau`) below which the
/// filter weight is evaluated from its series expansion.
pub const RESONANCE_SWITCH: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub gamma: f64,
    /// Gaussian coherence time; `None` disables decoherence.
    pub t2: Option<f64>,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            gamma: GAMMA_NV,
            t2: None,
        }
    }
}

impl SensorModel {
    pub fn with_t2(mut self, t2: f64) -> Self {
        self.t2 = Some(t2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(ensure_finite(self.gamma)? > 0.0) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if let Some(t2) = self.t2 {
            if !(ensure_finite(t2)? > 0.0) {
                return Err(Error::invalid("t2", "must be positive"));
            }
        }
        Ok(())
    }

    /// `exp(-(t/T2)^2)`, or 1 without decoherence.
    pub fn decoherence(&self, t: f64) -> f64 {
        self.t2.map_or(1.0, |t2| (-(t / t2).powi(2)).exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalPhase {
    /// Phase uniformly random from shot to shot.
    Unsynchronized,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcSignal {
    pub f_ac: f64,
    /// Amplitude in tesla.
    pub b_ac: f64,
    pub phase: SignalPhase,
}

impl AcSignal {
    pub fn new(f_ac: f64, b_ac: f64) -> Self {
        AcSignal {
            f_ac,
            b_ac,
            phase: SignalPhase::Unsynchronized,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(ensure_finite(self.f_ac)? > 0.0) {
            return Err(Error::invalid("f_ac", "must be positive"));
        }
        if !(ensure_finite(self.b_ac)? >= 0.0) {
            return Err(Error::invalid("b_ac", "must be non-negative"));
        }
        if let SignalPhase::Fixed(_) = self.phase {
            return Err(Error::invalid(
                "phase",
                "only unsynchronized signals have a closed-form response",
            ));
        }
        Ok(())
    }
}

/// Skeleton of a periodic pi-pulse sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub n_pulses: u32,
    pub tau: f64,
    pub t_pi: f64,
    pub shape: PulseShape,
}

impl SequenceParams {
    pub fn new(n_pulses: u32, tau: f64, t_pi: f64, shape: PulseShape) -> Self {
        SequenceParams {
            n_pulses,
            tau,
            t_pi,
            shape,
        }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        SequenceParams { tau, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 || !self.n_pulses.is_multiple_of(2) {
            return Err(Error::invalid(
                "n_pulses",
                format!("{} is not a positive even number", self.n_pulses),
            ));
        }
        if !(ensure_finite(self.tau)? > 0.0) {
            return Err(Error::invalid("tau", "must be positive"));
        }
        ensure_finite(self.t_pi)?;
        Ok(())
    }

    /// Total phase-acquisition time `N * tau`.
    pub fn duration(&self) -> f64 {
        self.n_pulses as f64 * self.tau
    }

    pub fn filter_weight(&self, f_ac: f64) -> Result<f64> {
        filter_weight(f_ac, self.n_pulses, self.tau)
    }
}

/// Smallest frequency step reachable by changing `tau` by one sample time.
/// Returns `(exact, 2 t_s f^2)` in Hz, with `f = 1/(2 tau)`.
pub fn min_freq_increment(tau: f64, t_s: f64) -> Result<(f64, f64)> {
    if !(ensure_finite(tau)? > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    if !(ensure_finite(t_s)? >= 0.0) {
        return Err(Error::invalid("t_s", "must be non-negative"));
    }
    let f = 1.0 / (2.0 * tau);
    let exact = f - 1.0 / (2.0 * tau + 2.0 * t_s);
    Ok((exact, 2.0 * t_s * f * f))
}

/// Filter weight `|sinc(pi f N tau) (1 - sec(pi f tau))|` of an N-pulse
/// sequence at frequency `f_ac`.
///
/// Near the odd resonances `2 f tau = 2m + 1` the secant diverges while the
/// sinc vanishes; within [`RESONANCE_SWITCH`] of them the ratio is taken from
/// its expansion in `delta = pi (2 f tau - 2m - 1) / 2`:
///
/// ```text
/// sin(N delta) / sin(delta) = N [1 - (N^2 - 1) delta^2 / 6 + (3N^4 - 10N^2 + 7) delta^4 / 360]
/// ```
///
/// which gives exactly `2 / (pi (2m + 1))` on resonance. Only even N has a
/// finite limit there.
pub fn filter_weight(f_ac: f64, n_pulses: u32, tau: f64) -> Result<f64> {
    if !(ensure_finite(f_ac)? >= 0.0) {
        return Err(Error::invalid("f_ac", "must be non-negative"));
    }
    if !(ensure_finite(tau)? > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    if n_pulses == 0 {
        return Err(Error::invalid("n_pulses", "must be positive"));
    }
    let n = n_pulses as f64;
    let x = 2.0 * f_ac * tau;
    let m = ((x - 1.0) / 2.0).round().max(0.0);
    let eps = x - (2.0 * m + 1.0);

    if eps.abs() < RESONANCE_SWITCH {
        if !n_pulses.is_multiple_of(2) {
            return Err(Error::OddPulseCount { n_pulses });
        }
        return Ok(series_filter_weight(f_ac, n, tau, m, eps));
    }

    Ok(raw_filter_weight(f_ac, n, tau))
}

fn series_filter_weight(f_ac: f64, n: f64, tau: f64, m: f64, eps: f64) -> f64 {
    let delta = PI * eps / 2.0;
    let d2 = delta * delta;
    let n2 = n * n;
    let ratio = n * (1.0 - (n2 - 1.0) * d2 / 6.0 + (3.0 * n2 * n2 - 10.0 * n2 + 7.0) * d2 * d2 / 360.0);
    // cos(theta) = s sin(delta) with s = (-1)^(m+1)
    let s = if (m as u64).is_multiple_of(2) { -1.0 } else { 1.0 };
    let theta = PI * f_ac * tau;
    (ratio * (1.0 - s * delta.sin())).abs() / (n * theta)
}

pub(crate) fn raw_filter_weight(f_ac: f64, n: f64, tau: f64) -> f64 {
    let z = PI * f_ac * n * tau;
    let sinc = if z == 0.0 { 1.0 } else { z.sin() / z };
    (sinc * (1.0 - 1.0 / (PI * f_ac * tau).cos())).abs()
}

/// Probability that the sensor stays in its initial state after the
/// sequence, for phase-unsynchronized tones:
///
/// `p = (1 + D(t) * prod_i J0(W(f_i) gamma B_i t)) / 2`, `t = N tau`.
///
/// Independent uniformly random phases make the contrast factorise into one
/// Bessel factor per tone. `D(t)` is the Gaussian decay of [`SensorModel`],
/// applied to the contrast so that `p -> 1/2` at long times.
pub fn response_p(seq: &SequenceParams, signals: &[AcSignal], sensor: &SensorModel) -> Result<f64> {
    seq.validate()?;
    sensor.validate()?;
    let t = seq.duration();
    let mut contrast = sensor.decoherence(t);
    for s in signals {
        s.validate()?;
        let w = seq.filter_weight(s.f_ac)?;
        contrast *= bessel_j0(w * sensor.gamma * s.b_ac * t)?;
    }
    Ok(0.5 * (1.0 + contrast))
}

/// Repetition time that puts the filter peak on `f_ac`.
pub fn resonant_tau(f_ac: f64) -> Result<f64> {
    if !(ensure_finite(f_ac)? > 0.0) {
        return Err(Error::invalid("f_ac", "must be positive"));
    }
    Ok(1.0 / (2.0 * f_ac))
}

/// Timing step reachable by amplitude interpolation, `t_pi * 2^-bits`.
pub fn interpolated_resolution(t_pi: f64, bits: u32) -> Result<f64> {
    if !(ensure_finite(t_pi)? > 0.0) {
        return Err(Error::invalid("t_pi", "must be positive"));
    }
    Ok(t_pi * (-(bits as f64)).exp2())
}

/// Frequency step `2 dt f^2` corresponding to a `tau` step `dt` at `f`.
pub fn tau_step_to_freq_step(tau_step: f64, f_ac: f64) -> f64 {
    2.0 * tau_step * f_ac * f_ac
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: f64 = 1e-9;

    fn seq(n: u32, tau: f64) -> SequenceParams {
        SequenceParams::new(n, tau, 25.0 * NS, PulseShape::CosineSquare)
    }

    #[test]
    fn increment_at_5_mhz_with_1_ns_sampling() {
        let (exact, approx) = min_freq_increment(100.0 * NS, 1.0 * NS).unwrap();
        assert!((approx - 50e3).abs() < 1e-6);
        // 1/200 ns - 1/202 ns
        let oracle = 1.0 / 200e-9 - 1.0 / 202e-9;
        assert!((exact - oracle).abs() < 1e-6);
        assert!((exact - 49_504.950_495).abs() < 1e-3);
    }

    #[test]
    fn increment_degenerate_sampling() {
        assert_eq!(min_freq_increment(1e-7, 0.0).unwrap(), (0.0, 0.0));
        assert!(min_freq_increment(0.0, 1e-9).is_err());
    }

    #[test]
    fn increment_ratio_approaches_one() {
        let (e, a) = min_freq_increment(100.0, 1.0).unwrap();
        assert!((a / e - 1.0).abs() < 0.015);
        let (e, a) = min_freq_increment(1.0, 1e-6).unwrap();
        assert!((a / e - 1.0).abs() < 1e-5);
    }

    #[test]
    fn filter_weight_on_resonance() {
        let tau = 51.298 * NS;
        for n in [2, 192, 320, 672, 10_000] {
            let w = filter_weight(1.0 / (2.0 * tau), n, tau).unwrap();
            assert!((w - 2.0 / PI).abs() < 1e-12, "N={n}: {w}");
        }
    }

    #[test]
    fn filter_weight_higher_harmonic() {
        let tau = 1e-6;
        let w = filter_weight(3.0 / (2.0 * tau), 64, tau).unwrap();
        assert!((w - 2.0 / (3.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn filter_weight_nulls() {
        let tau = 51.298 * NS;
        assert!(filter_weight(1.0 / tau, 320, tau).unwrap() < 1e-12);
        assert_eq!(filter_weight(0.0, 320, tau).unwrap(), 0.0);
        assert!(filter_weight(1.0, 320, tau).unwrap() < 1e-9);
    }

    #[test]
    fn series_and_raw_agree_at_switch() {
        let tau = 1.0;
        for n in [2u32, 192, 320, 672, 10_000] {
            for eps in [-RESONANCE_SWITCH, RESONANCE_SWITCH] {
                let f = (1.0 + eps) / 2.0;
                let raw = raw_filter_weight(f, n as f64, tau);
                let series = series_filter_weight(f, n as f64, tau, 0.0, 2.0 * f * tau - 1.0);
                assert!((raw - series).abs() < 1e-9, "N={n}: {raw} vs {series}");
            }
        }
    }

    #[test]
    fn odd_n_near_resonance_is_rejected() {
        let tau = 51.298 * NS;
        assert!(matches!(
            filter_weight(1.0 / (2.0 * tau), 321, tau),
            Err(Error::OddPulseCount { n_pulses: 321 })
        ));
        assert!(filter_weight(0.3 / tau, 321, tau).is_ok());
    }

    #[test]
    fn zero_field_leaves_sensor_untouched() {
        let p = response_p(&seq(672, 51.298 * NS), &[AcSignal::new(9.746969e6, 0.0)], &SensorModel::default()).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn full_decoherence_limit() {
        let sensor = SensorModel::default().with_t2(1e-6);
        let p = response_p(&seq(10_000, 51.298 * NS), &[AcSignal::new(9.746969e6, 1e-6)], &sensor).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn resonant_response_matches_scalar_arithmetic() {
        // argument 2/pi * (2 pi 28e9) * 7.15e-6 * 672 * 51.298e-9
        let arg = 2.0 / PI * GAMMA_NV * 7.15e-6 * (672.0 * 51.298e-9);
        assert!((arg - 27.605_382_604_8).abs() < 1e-8);
        let tau = 51.298 * NS;
        let f = 1.0 / (2.0 * tau);
        let p = response_p(&seq(672, tau), &[AcSignal::new(f, 7.15e-6)], &SensorModel::default()).unwrap();
        // 0.5 * (1 + J0(27.6053826048)) from a 40-digit evaluation
        assert!((p - 0.491_520_202_149_089).abs() < 1e-10, "{p}");
    }

    #[test]
    fn resonance_and_resolution() {
        let tau = resonant_tau(9.746969e6).unwrap();
        assert_eq!((tau * 1e12).round() / 1e3, 51.298);
        let dt = interpolated_resolution(25.0 * NS, 14).unwrap();
        assert!((dt - 1.52587890625e-12).abs() < 1e-24);
        assert_eq!(interpolated_resolution(25.0 * NS, 0).unwrap(), 25.0 * NS);
    }

    #[test]
    fn rejects_synchronized_and_odd_sequences() {
        let mut s = AcSignal::new(1e6, 1e-6);
        s.phase = SignalPhase::Fixed(0.0);
        assert!(response_p(&seq(10, 1e-7), &[s], &SensorModel::default()).is_err());
        assert!(response_p(&seq(11, 1e-7), &[], &SensorModel::default()).is_err());
    }
}

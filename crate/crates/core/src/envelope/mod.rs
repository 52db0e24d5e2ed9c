//! Amplitude envelopes of shaped dynamical-decoupling sequences on a DAC
//! sample grid.
//!
//! The synthesis follows the five-step phase map used to program the AWG:
//!
//! ```text
//! u = i * N / n          (pulse phase of sample i)
//! u = frac(u)
//! x = 1 - (tau / t_pi) * |u - 1/2|
//! x = max(x, 0)
//! a = sin(pi * x / 2)^2
//! ```
//!
//! `n` is the real-valued `N * tau * sample_rate`, so pulse centres land at
//! `(k + 1/2) * tau` for any real `tau`, not just multiples of the sample
//! time. The sub-sample timing information lives entirely in the amplitudes.

mod analysis;
mod io;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub use analysis::{envelope_area, envelope_fwhm, lobes, measure_pulse_centers, Lobe};
pub use io::{export_waveform, read_waveform, WaveformFormat, BINARY_FULL_SCALE, BINARY_MAGIC};

pub const DEFAULT_SAMPLE_RATE: f64 = 5.0e8;
pub const DEFAULT_VERTICAL_BITS: u32 = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Instantaneous rotation. Only the spin simulator understands it.
    Ideal,
    Square,
    CosineSquare,
}

impl PulseShape {
    pub fn name(self) -> &'static str {
        match self {
            PulseShape::Ideal => "ideal",
            PulseShape::Square => "square",
            PulseShape::CosineSquare => "cosine_square",
        }
    }
}

impl std::str::FromStr for PulseShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(PulseShape::Ideal),
            "square" => Ok(PulseShape::Square),
            "cosine_square" | "cosine-square" | "cos2" => Ok(PulseShape::CosineSquare),
            other => Err(Error::invalid(
                "shape",
                format!("`{other}` is not one of ideal, square, cosine_square"),
            )),
        }
    }
}

/// Discrete-time description of a shaped pulse train.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub n_pulses: u32,
    /// Pulse repetition time in seconds. Any positive real.
    pub tau: f64,
    /// Full width at half maximum of one pulse, seconds.
    pub t_pi: f64,
    pub sample_rate: f64,
    pub vertical_bits: u32,
    pub shape: PulseShape,
    pub peak_amplitude: f64,
    /// Literal sample count. When set, the phase map uses `i * N / n` with
    /// this integer `n`, so the realised period is `n / (N * sample_rate)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples_override: Option<usize>,
}

impl WaveformSpec {
    pub fn new(n_pulses: u32, tau: f64, t_pi: f64, shape: PulseShape) -> Self {
        WaveformSpec {
            n_pulses,
            tau,
            t_pi,
            sample_rate: DEFAULT_SAMPLE_RATE,
            vertical_bits: DEFAULT_VERTICAL_BITS,
            shape,
            peak_amplitude: 1.0,
            n_samples_override: None,
        }
    }

    pub fn with_sample_rate(mut self, sample_rate: f64) -> Self {
        self.sample_rate = sample_rate;
        self
    }

    pub fn with_peak_amplitude(mut self, peak: f64) -> Self {
        self.peak_amplitude = peak;
        self
    }

    pub fn with_vertical_bits(mut self, bits: u32) -> Self {
        self.vertical_bits = bits;
        self
    }

    pub fn with_n_samples(mut self, n: usize) -> Self {
        self.n_samples_override = Some(n);
        self
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Real-valued sample count of the phase map.
    pub(crate) fn phase_samples(&self) -> f64 {
        match self.n_samples_override {
            Some(n) => n as f64,
            None => self.n_pulses as f64 * self.tau * self.sample_rate,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self.n_samples_override {
            Some(n) => n,
            None => (self.n_pulses as f64 * self.tau * self.sample_rate).round() as usize,
        }
    }

    /// Period of the pulse train as actually played back, seconds.
    pub fn realized_period(&self) -> f64 {
        self.phase_samples() / (self.n_pulses as f64 * self.sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        for x in [self.tau, self.t_pi, self.sample_rate, self.peak_amplitude] {
            ensure_finite(x)?;
        }
        if self.n_pulses == 0 {
            return Err(Error::invalid("n_pulses", "must be positive"));
        }
        if self.t_pi <= 0.0 {
            return Err(Error::invalid("t_pi", "must be positive"));
        }
        if self.sample_rate <= 0.0 {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        if self.vertical_bits == 0 {
            return Err(Error::invalid("vertical_bits", "must be positive"));
        }
        if !(self.peak_amplitude > 0.0 && self.peak_amplitude <= 1.0) {
            return Err(Error::invalid("peak_amplitude", "must lie in (0, 1]"));
        }
        if self.tau < self.t_pi {
            return Err(Error::PulseOverlap {
                tau: self.tau,
                t_pi: self.t_pi,
            });
        }
        if self.n_samples() < self.n_pulses as usize {
            return Err(Error::invalid(
                "sample_rate",
                format!(
                    "{} samples cannot hold {} pulses",
                    self.n_samples(),
                    self.n_pulses
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledWaveform {
    pub samples: Vec<f64>,
    /// Seconds per sample. Sample `i` sits at time `i * dt`.
    pub dt: f64,
    pub quantized: bool,
    pub vertical_bits: u32,
    /// True once a carrier has been multiplied in.
    pub modulated: bool,
}

impl SampledWaveform {
    pub fn from_samples(samples: Vec<f64>, dt: f64) -> Self {
        SampledWaveform {
            samples,
            dt,
            quantized: false,
            vertical_bits: 0,
            modulated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Unit-peak amplitude at pulse phase `frac` in `[0, 1)`, with the pulse
/// centred on `frac = 1/2`. `width_ratio` is `tau / t_pi`.
pub fn lobe_profile(shape: PulseShape, frac: f64, width_ratio: f64) -> f64 {
    match shape {
        PulseShape::CosineSquare => {
            let x = (1.0 - width_ratio * (frac - 0.5).abs()).max(0.0);
            (PI * x / 2.0).sin().powi(2)
        }
        PulseShape::Square => {
            if (frac - 0.5).abs() <= 0.5 / width_ratio {
                1.0
            } else {
                0.0
            }
        }
        PulseShape::Ideal => 0.0,
    }
}

/// Envelope of the whole pulse train.
pub fn synth_envelope(spec: &WaveformSpec) -> Result<SampledWaveform> {
    if spec.shape == PulseShape::Ideal {
        return Err(Error::NoSampledRepresentation);
    }
    spec.validate()?;

    let n = spec.n_samples();
    let n_phase = spec.phase_samples();
    let pulses = spec.n_pulses as f64;
    let width_ratio = spec.tau / spec.t_pi;

    let samples = (0..n)
        .map(|i| {
            let u = i as f64 * pulses / n_phase;
            lobe_profile(spec.shape, u - u.floor(), width_ratio) * spec.peak_amplitude
        })
        .collect();

    Ok(SampledWaveform::from_samples(samples, spec.dt()))
}

/// Round every sample to the nearest multiple of `2^-bits`, ties away from zero.
pub fn quantize(w: &SampledWaveform, bits: u32) -> Result<SampledWaveform> {
    if bits == 0 || bits > 52 {
        return Err(Error::invalid("bits", format!("{bits} is outside 1..=52")));
    }
    if w.quantized && w.vertical_bits < bits {
        return Err(Error::invalid(
            "bits",
            format!(
                "waveform is already quantized to {} bits; cannot requantize to {bits}",
                w.vertical_bits
            ),
        ));
    }
    let scale = (bits as f64).exp2();
    let samples = w
        .samples
        .iter()
        .map(|&x| (x * scale).round() / scale)
        .collect();
    Ok(SampledWaveform {
        samples,
        quantized: true,
        vertical_bits: bits,
        ..w.clone()
    })
}

/// Multiply an envelope by `sin(2 pi f t + phase)` on the sample grid.
pub fn modulate_carrier(w: &SampledWaveform, f_carrier: f64, phase: f64) -> Result<SampledWaveform> {
    ensure_finite(f_carrier)?;
    ensure_finite(phase)?;
    if w.modulated {
        return Err(Error::invalid("waveform", "already carrier-modulated"));
    }
    let rate = w.sample_rate();
    if f_carrier < 0.0 || f_carrier >= rate / 2.0 {
        return Err(Error::Aliasing {
            carrier_hz: f_carrier,
            sample_rate_hz: rate,
        });
    }
    let omega = 2.0 * PI * f_carrier;
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(i, &a)| a * (omega * i as f64 * w.dt + phase).sin())
        .collect();
    Ok(SampledWaveform {
        samples,
        modulated: true,
        ..w.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: f64 = 1e-9;

    fn cos_spec(n: u32, tau: f64, t_pi: f64) -> WaveformSpec {
        WaveformSpec::new(n, tau, t_pi, PulseShape::CosineSquare)
    }

    // Raised-cosine lobe written directly in time, independent of the phase map.
    fn hann(t: f64, center: f64, t_pi: f64) -> f64 {
        let s = (t - center) / t_pi;
        if s.abs() >= 1.0 {
            0.0
        } else {
            0.5 * (1.0 + (PI * s).cos())
        }
    }

    #[test]
    fn single_back_to_back_pulse_has_13_samples_peaking_near_one() {
        let w = synth_envelope(&cos_spec(1, 25.0 * NS, 25.0 * NS)).unwrap();
        assert_eq!(w.len(), 13);
        // samples at 12 ns and 14 ns bracket the 12.5 ns centre
        let nearest = w.samples[6];
        assert!((nearest - 1.0).abs() < 2e-3, "{nearest}");
        assert!(w.samples.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn floor_between_pulses_is_exactly_zero() {
        let spec = cos_spec(2, 50.0 * NS, 25.0 * NS);
        let w = synth_envelope(&spec).unwrap();
        for (i, &a) in w.samples.iter().enumerate() {
            let u = i as f64 * 2.0 / spec.phase_samples();
            let frac = u - u.floor();
            if (frac - 0.5).abs() >= spec.t_pi / spec.tau {
                assert_eq!(a, 0.0, "sample {i}");
            }
        }
        assert_eq!(w.samples[0], 0.0);
    }

    #[test]
    fn fig_s1_style_train_length_and_first_sample() {
        let spec = cos_spec(320, 51.298 * NS, 25.0 * NS);
        assert_eq!(spec.n_samples(), 8208);
        let w = synth_envelope(&spec).unwrap();
        assert_eq!(w.len(), 8208);
        // 1 - (51.298/25)/2 = -0.02596 clips to 0
        assert_eq!(w.samples[0], 0.0);
    }

    #[test]
    fn matches_raised_cosine_written_in_time() {
        for &(tau, t_pi) in &[(51.298, 25.0), (246.37, 25.0), (100.0, 12.3), (60.0, 30.0)] {
            let spec = cos_spec(5, tau * NS, t_pi * NS);
            let w = synth_envelope(&spec).unwrap();
            for (i, &a) in w.samples.iter().enumerate() {
                let t = w.time(i);
                let k = (t / spec.tau).floor();
                let expect = hann(t, (k + 0.5) * spec.tau, spec.t_pi);
                assert!((a - expect).abs() < 1e-12, "tau={tau} i={i}: {a} vs {expect}");
            }
        }
    }

    #[test]
    fn square_shares_pulse_centres_with_cosine() {
        let spec = WaveformSpec::new(3, 80.0 * NS, 21.0 * NS, PulseShape::Square);
        let w = synth_envelope(&spec).unwrap();
        for (i, &a) in w.samples.iter().enumerate() {
            let t = w.time(i);
            let k = (t / spec.tau).floor();
            let inside = (t - (k + 0.5) * spec.tau).abs() <= spec.t_pi / 2.0;
            assert_eq!(a, if inside { 1.0 } else { 0.0 }, "sample {i}");
        }
    }

    #[test]
    fn literal_sample_count_override() {
        let spec = cos_spec(4, 50.0 * NS, 25.0 * NS).with_n_samples(90);
        let w = synth_envelope(&spec).unwrap();
        assert_eq!(w.len(), 90);
        assert!((spec.realized_period() - 45.0 * NS).abs() < 1e-20);
    }

    #[test]
    fn rejects_ideal_and_overlap() {
        let ideal = WaveformSpec::new(2, 50.0 * NS, 25.0 * NS, PulseShape::Ideal);
        assert!(matches!(synth_envelope(&ideal), Err(Error::NoSampledRepresentation)));
        let overlap = cos_spec(2, 20.0 * NS, 25.0 * NS);
        assert!(matches!(synth_envelope(&overlap), Err(Error::PulseOverlap { .. })));
        let sparse = cos_spec(10, 1.0 * NS, 0.5 * NS);
        assert!(synth_envelope(&sparse).is_err());
    }

    #[test]
    fn quantize_grid_points_and_ties() {
        let w = SampledWaveform::from_samples(vec![0.5, (-15f64).exp2(), -(-15f64).exp2()], 2.0 * NS);
        let q1 = quantize(&w, 1).unwrap();
        assert_eq!(q1.samples[0], 0.5);
        let q14 = quantize(&w, 14).unwrap();
        assert_eq!(q14.samples[1], (-14f64).exp2());
        assert_eq!(q14.samples[2], -(-14f64).exp2());
        assert!(q14.quantized);
        assert_eq!(q14.vertical_bits, 14);
    }

    #[test]
    fn quantize_error_is_bounded_by_half_step() {
        let w = synth_envelope(&cos_spec(320, 51.298 * NS, 25.0 * NS)).unwrap();
        let q = quantize(&w, 14).unwrap();
        let worst = w
            .samples
            .iter()
            .zip(&q.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= (-15f64).exp2());
    }

    #[test]
    fn quantize_rejects_finer_requantization() {
        let w = SampledWaveform::from_samples(vec![0.3], 1.0);
        let q = quantize(&w, 8).unwrap();
        assert!(quantize(&q, 12).is_err());
        assert!(quantize(&q, 4).is_ok());
        assert!(quantize(&w, 0).is_err());
    }

    #[test]
    fn carrier_identities() {
        let env = synth_envelope(&cos_spec(2, 60.0 * NS, 25.0 * NS)).unwrap();
        let same = modulate_carrier(&env, 0.0, PI / 2.0).unwrap();
        assert_eq!(same.samples, env.samples);
        assert!(same.modulated);

        let flat = SampledWaveform::from_samples(vec![1.0; 20], 2.0 * NS);
        let m = modulate_carrier(&flat, 100e6, 0.0).unwrap();
        assert_eq!(m.samples[0], 0.0);
        for i in 0..15 {
            assert!((m.samples[i] - m.samples[i + 5]).abs() < 1e-12);
        }
        assert!(m.samples.iter().all(|a| a.abs() <= 1.0));
    }

    #[test]
    fn carrier_rejects_aliasing() {
        let flat = SampledWaveform::from_samples(vec![1.0; 4], 2.0 * NS);
        assert!(matches!(
            modulate_carrier(&flat, 250e6, 0.0),
            Err(Error::Aliasing { .. })
        ));
        assert!(modulate_carrier(&flat, -1.0, 0.0).is_err());
        let m = modulate_carrier(&flat, 1e6, 0.0).unwrap();
        assert!(modulate_carrier(&m, 1e6, 0.0).is_err());
    }
}

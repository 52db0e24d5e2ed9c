use std::ops::Range;

use super::{SampledWaveform, WaveformSpec};
use crate::error::{Error, Result};

/// One pulse's worth of samples.
#[derive(Clone, Copy, Debug)]
pub struct Lobe<'a> {
    /// Index of `samples[0]` in the parent waveform.
    pub offset: usize,
    pub samples: &'a [f64],
    pub dt: f64,
}

impl Lobe<'_> {
    pub fn area(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt
    }

    /// First moment of the lobe, in seconds from the start of the waveform.
    pub fn centroid(&self) -> Option<f64> {
        let (num, den) = self
            .samples
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(num, den), (j, &a)| {
                (num + a * (self.offset + j) as f64, den + a)
            });
        (den > 0.0).then(|| num / den * self.dt)
    }

    /// Full width at half maximum with linear interpolation between samples.
    pub fn fwhm(&self) -> Result<f64> {
        let (peak_idx, peak) = self
            .samples
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, a)| if a > best.1 { (i, a) } else { best });
        if !(peak > 0.0) {
            return Err(Error::NoLobe { period: 0 });
        }
        let half = peak / 2.0;
        let s = self.samples;

        let left = (0..peak_idx)
            .rev()
            .find(|&i| s[i] < half)
            .map(|i| i as f64 + (half - s[i]) / (s[i + 1] - s[i]))
            .ok_or(Error::TruncatedLobe { side: "left" })?;
        let right = (peak_idx + 1..s.len())
            .find(|&i| s[i] < half)
            .map(|i| i as f64 - (half - s[i]) / (s[i - 1] - s[i]))
            .ok_or(Error::TruncatedLobe { side: "right" })?;
        Ok((right - left) * self.dt)
    }
}

fn period_ranges(w: &SampledWaveform, spec: &WaveformSpec) -> Vec<Range<usize>> {
    let samples_per_period = spec.phase_samples() / spec.n_pulses as f64;
    let n = w.len();
    let boundary = |k: u32| -> usize {
        // first sample whose phase is >= k
        let b = (k as f64 * samples_per_period).ceil() as usize;
        b.min(n)
    };
    (0..spec.n_pulses).map(|k| boundary(k)..boundary(k + 1)).collect()
}

/// Split a pulse-train envelope into one lobe per period of `spec`.
pub fn lobes<'a>(w: &'a SampledWaveform, spec: &WaveformSpec) -> Result<Vec<Lobe<'a>>> {
    if w.modulated {
        return Err(Error::invalid("waveform", "lobe analysis needs an unmodulated envelope"));
    }
    period_ranges(w, spec)
        .into_iter()
        .enumerate()
        .map(|(period, r)| {
            let samples = &w.samples[r.clone()];
            if samples.iter().all(|&a| a <= 0.0) {
                return Err(Error::NoLobe { period });
            }
            Ok(Lobe {
                offset: r.start,
                samples,
                dt: w.dt,
            })
        })
        .collect()
}

/// Centroid estimate of every pulse centre, seconds.
pub fn measure_pulse_centers(w: &SampledWaveform, spec: &WaveformSpec) -> Result<Vec<f64>> {
    lobes(w, spec)?
        .iter()
        .enumerate()
        .map(|(period, lobe)| lobe.centroid().ok_or(Error::NoLobe { period }))
        .collect()
}

fn whole(w: &SampledWaveform) -> Result<Lobe<'_>> {
    if w.samples.iter().all(|&a| a <= 0.0) {
        return Err(Error::NoLobe { period: 0 });
    }
    Ok(Lobe {
        offset: 0,
        samples: &w.samples,
        dt: w.dt,
    })
}

/// Area of a single-pulse waveform, seconds (amplitude * time).
pub fn envelope_area(w: &SampledWaveform) -> Result<f64> {
    Ok(whole(w)?.area())
}

/// FWHM of a single-pulse waveform, seconds.
pub fn envelope_fwhm(w: &SampledWaveform) -> Result<f64> {
    whole(w)?.fwhm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{synth_envelope, PulseShape};

    const NS: f64 = 1e-9;

    #[test]
    fn cosine_lobe_area_and_width() {
        let spec = WaveformSpec::new(1, 100.0 * NS, 25.0 * NS, PulseShape::CosineSquare);
        let w = synth_envelope(&spec).unwrap();
        let area = envelope_area(&w).unwrap();
        assert!((area / (25.0 * NS) - 1.0).abs() < 5e-3, "{area}");
        let fwhm = envelope_fwhm(&w).unwrap();
        assert!((fwhm - 25.0 * NS).abs() <= w.dt, "{fwhm}");
    }

    #[test]
    fn square_lobe_area_and_width() {
        let spec = WaveformSpec::new(1, 100.0 * NS, 25.0 * NS, PulseShape::Square);
        let w = synth_envelope(&spec).unwrap();
        // 12 or 13 samples of 2 ns depending on grid alignment
        let area = envelope_area(&w).unwrap();
        assert!((area - 25.0 * NS).abs() <= w.dt, "{area}");
        let fwhm = envelope_fwhm(&w).unwrap();
        assert!((fwhm - 25.0 * NS).abs() <= w.dt, "{fwhm}");
    }

    #[test]
    fn centroid_of_symmetric_single_pulse() {
        for tau in [50.0, 51.0, 52.0, 64.0] {
            let spec = WaveformSpec::new(1, tau * NS, 25.0 * NS, PulseShape::CosineSquare);
            let w = synth_envelope(&spec).unwrap();
            let c = measure_pulse_centers(&w, &spec).unwrap();
            assert_eq!(c.len(), 1);
            assert!((c[0] - spec.tau / 2.0).abs() < w.dt, "tau={tau}: {}", c[0]);
        }
    }

    #[test]
    fn one_lobe_per_period() {
        let spec = WaveformSpec::new(7, 61.3 * NS, 25.0 * NS, PulseShape::CosineSquare);
        let w = synth_envelope(&spec).unwrap();
        let centers = measure_pulse_centers(&w, &spec).unwrap();
        assert_eq!(centers.len(), 7);
        for (k, c) in centers.iter().enumerate() {
            assert!((c - (k as f64 + 0.5) * spec.tau).abs() < 5e-12, "k={k}");
        }
    }

    #[test]
    fn empty_waveform_has_no_lobe() {
        let w = SampledWaveform::from_samples(vec![0.0; 10], NS);
        assert!(matches!(envelope_area(&w), Err(Error::NoLobe { .. })));
        assert!(envelope_fwhm(&w).is_err());
        let spec = WaveformSpec::new(1, 10.0 * NS, 2.0 * NS, PulseShape::CosineSquare)
            .with_sample_rate(1e9);
        assert!(measure_pulse_centers(&w, &spec).is_err());
    }

    #[test]
    fn truncated_lobe_has_no_fwhm() {
        let w = SampledWaveform::from_samples(vec![1.0, 0.8, 0.2], NS);
        assert!(matches!(envelope_fwhm(&w), Err(Error::TruncatedLobe { side: "left" })));
    }
}

use std::collections::hash_map::{Entry, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::state::{CMatrix, HermitianExp};
use num_complex::Complex64;

use super::{initial_state, nv_sigma_x, DriveParams, HamiltonianParts, NuclearBath, PhaseCycle, Playback};
use crate::analytic::ScanResult;
use crate::envelope::{lobe_profile, quantize, synth_envelope, PulseShape, WaveformSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
enum Step {
    Free(f64),
    /// Pulse `k` of the train, realised by [`pulse_unitary`].
    Pulse { k: usize },
    /// Held drive at `amplitude` (rad/s), applied `repeats` times for `duration` each.
    Held {
        amplitude: f64,
        phase: f64,
        duration: f64,
        repeats: u32,
    },
}

/// Half of the time span a single pulse occupies around its centre.
fn half_support(tau: f64, drive: &DriveParams) -> f64 {
    match drive.shape {
        PulseShape::Ideal => 0.0,
        PulseShape::Square => drive.t_pi / 2.0,
        PulseShape::CosineSquare => drive.t_pi.min(tau / 2.0),
    }
}

fn schedule(n_pulses: u32, tau: f64, drive: &DriveParams) -> Result<Vec<Step>> {
    if drive.shape != PulseShape::Ideal && tau < drive.t_pi {
        return Err(Error::PulseOverlap { tau, t_pi: drive.t_pi });
    }
    if drive.shape == PulseShape::CosineSquare && drive.playback == Playback::SampleHold {
        return held_schedule(n_pulses, tau, drive);
    }
    let n = n_pulses as usize;
    let half = half_support(tau, drive);
    let mut steps = Vec::with_capacity(2 * n + 1);
    let push_free = |steps: &mut Vec<Step>, d: f64| {
        if d > 0.0 {
            steps.push(Step::Free(d));
        }
    };
    push_free(&mut steps, tau / 2.0 - half);
    for k in 0..n {
        steps.push(Step::Pulse { k });
        push_free(&mut steps, if k + 1 == n { tau / 2.0 - half } else { tau - 2.0 * half });
    }
    Ok(steps)
}

/// Cosine-square train played back sample by sample from the DAC waveform.
fn held_schedule(n_pulses: u32, tau: f64, drive: &DriveParams) -> Result<Vec<Step>> {
    let n = n_pulses as usize;
    let total = n_pulses as f64 * tau;
    let spec = WaveformSpec::new(n_pulses, tau, drive.t_pi, PulseShape::CosineSquare)
        .with_sample_rate(drive.sample_rate);
    let mut w = synth_envelope(&spec)?;
    if let Some(bits) = drive.vertical_bits {
        w = quantize(&w, bits)?;
    }
    let dt = w.dt;
    let substeps = drive.substeps_per_sample;
    let mut steps = Vec::new();
    let mut cursor = 0.0;
    for (i, &a) in w.samples.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        // sample i is held over [t_i - dt/2, t_i + dt/2)
        let t = i as f64 * dt;
        let start = (t - dt / 2.0).max(0.0);
        let end = (t + dt / 2.0).min(total);
        if end <= start {
            continue;
        }
        if start > cursor {
            steps.push(Step::Free(start - cursor));
        }
        let k = ((t / tau).floor() as usize).min(n - 1);
        steps.push(Step::Held {
            amplitude: a * drive.rabi_peak,
            phase: drive.phase_cycle.phase(k),
            duration: (end - start) / substeps as f64,
            repeats: substeps,
        });
        cursor = end;
    }
    if total > cursor {
        steps.push(Step::Free(total - cursor));
    }
    Ok(steps)
}

/// Propagator of one pi pulse with drive phase `phase`.
///
/// Shaped pulses are cut into `substeps_per_sample` segments per sample time
/// across their support. Each segment uses the fourth-order Magnus
/// Hamiltonian built from the envelope at the two Gauss points,
///
/// ```text
/// H_eff = (H1 + H2)/2 - i sqrt(3) h / 12 [H2, H1]
/// ```
///
/// which is Hermitian and exponentiated exactly.
fn pulse_unitary(parts: &HamiltonianParts, drive: &DriveParams, tau: f64, phase: f64) -> Result<CMatrix> {
    match drive.shape {
        PulseShape::Ideal => HermitianExp::new(&parts.drive_only(1.0, phase))?.unitary(PI),
        PulseShape::Square => {
            HermitianExp::new(&parts.with_drive(drive.rabi_peak, phase))?.unitary(drive.t_pi)
        }
        PulseShape::CosineSquare => match drive.vertical_bits {
            Some(bits) => staircase_unitary(parts, drive, tau, phase, bits),
            None => magnus_unitary(parts, drive, tau, phase),
        },
    }
}

fn magnus_unitary(parts: &HamiltonianParts, drive: &DriveParams, tau: f64, phase: f64) -> Result<CMatrix> {
    let half = half_support(tau, drive);
    let segments = ((2.0 * half * drive.sample_rate * drive.substeps_per_sample as f64).ceil() as usize).max(1);
    let h = 2.0 * half / segments as f64;
    let ratio = tau / drive.t_pi;
    let amplitude = |s: f64| lobe_profile(PulseShape::CosineSquare, 0.5 + s / tau, ratio) * drive.rabi_peak;
    let gauss = 3f64.sqrt() / 6.0;
    let skew = Complex64::new(0.0, -3f64.sqrt() * h / 12.0);
    let dim = parts.h0.nrows();
    let mut u = CMatrix::identity(dim, dim);
    for j in 0..segments {
        let t0 = -half + j as f64 * h;
        let h1 = parts.with_drive(amplitude(t0 + (0.5 - gauss) * h), phase);
        let h2 = parts.with_drive(amplitude(t0 + (0.5 + gauss) * h), phase);
        let comm = &h2 * &h1 - &h1 * &h2;
        let h_eff = (&h1 + &h2) * Complex64::new(0.5, 0.0) + comm * skew;
        u = HermitianExp::new(&h_eff)?.unitary(h)? * u;
    }
    Ok(u)
}

/// Distances from the pulse centre, largest first, at which the rounded
/// cosine-square envelope changes level, bracketed by `half` and 0.
fn staircase_breaks(t_pi: f64, half: f64, bits: u32) -> Vec<f64> {
    let q = (bits as f64).exp2();
    let levels = q as usize;
    let mut breaks = vec![half];
    // the envelope is sin^2(pi/2 (1 - |s|/t_pi)); it crosses (k + 1/2)/q here
    breaks.extend(
        (0..levels)
            .map(|k| t_pi * (1.0 - 2.0 / PI * ((k as f64 + 0.5) / q).sqrt().asin()))
            .filter(|&d| d < half && d > 0.0),
    );
    breaks.push(0.0);
    breaks
}

/// Cosine-square pulse with amplitudes rounded to `bits`, integrated exactly
/// as the piecewise-constant staircase it becomes.
fn staircase_unitary(parts: &HamiltonianParts, drive: &DriveParams, tau: f64, phase: f64, bits: u32) -> Result<CMatrix> {
    let q = (bits as f64).exp2();
    let ratio = tau / drive.t_pi;
    let breaks = staircase_breaks(drive.t_pi, half_support(tau, drive), bits);
    let mut levels: HashMap<u64, HermitianExp> = HashMap::new();
    let mut left = Vec::with_capacity(breaks.len());
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let a = (lobe_profile(PulseShape::CosineSquare, 0.5 - mid / tau, ratio) * q).round() / q;
        let exp = match levels.entry(a.to_bits()) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(HermitianExp::new(&parts.with_drive(a * drive.rabi_peak, phase))?),
        };
        left.push(exp.unitary(w[0] - w[1])?);
    }
    let dim = parts.h0.nrows();
    let mut u = CMatrix::identity(dim, dim);
    for piece in left.iter().chain(left.iter().rev()) {
        u = piece * u;
    }
    Ok(u)
}

/// Probability of finding the NV back in its initial superposition after an
/// N-pulse sequence `tau/2 - pi - tau - pi - ... - pi - tau/2`.
///
/// The pi/2 preparation and readout pulses are instantaneous; the nuclei
/// start maximally mixed. Finite pulses are centred on the nominal pulse
/// instants and free evolution fills the rest, so the total time is exactly
/// `N tau`. Square pulses are exact rectangles of width `t_pi`; cosine-square
/// pulses follow [`Playback`].
pub fn sequence_response(n_pulses: u32, tau: f64, drive: &DriveParams, bath: &NuclearBath) -> Result<f64> {
    drive.validate()?;
    bath.validate()?;
    if !n_pulses.is_multiple_of(2) {
        return Err(Error::invalid("n_pulses", format!("{n_pulses} is odd")));
    }
    if drive.phase_cycle == PhaseCycle::Xy8 && !n_pulses.is_multiple_of(8) {
        return Err(Error::invalid("n_pulses", "XY8 needs a multiple of 8 pulses"));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid("tau", "must be positive"));
    }
    if n_pulses == 0 {
        return Ok(1.0);
    }

    let parts = HamiltonianParts::new(bath, drive.detuning)?;
    let free = HermitianExp::new(&parts.h0)?;
    let dim = bath.dim();
    let mut total = CMatrix::identity(dim, dim);
    let mut pulses: HashMap<u64, CMatrix> = HashMap::new();
    let mut held: HashMap<(u64, u64, u64), CMatrix> = HashMap::new();

    for step in schedule(n_pulses, tau, drive)? {
        match step {
            Step::Free(dt) => total = free.unitary(dt)? * total,
            Step::Pulse { k } => {
                let phase = drive.phase_cycle.phase(k);
                let u = match pulses.entry(phase.to_bits()) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(pulse_unitary(&parts, drive, tau, phase)?),
                };
                total = &*u * total;
            }
            Step::Held {
                amplitude,
                phase,
                duration,
                repeats,
            } => {
                let key = (amplitude.to_bits(), phase.to_bits(), duration.to_bits());
                let u = match held.entry(key) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(
                        HermitianExp::new(&parts.with_drive(amplitude, phase))?.unitary(duration)?,
                    ),
                };
                for _ in 0..repeats {
                    total = &*u * total;
                }
            }
        }
    }

    let mut state = initial_state(bath.n_nuclei());
    state.evolve(&total);
    Ok(0.5 * (1.0 + state.expectation(&nv_sigma_x(bath.n_nuclei()))))
}

/// Pulse realisations compared against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseVariant {
    Ideal,
    Square,
    CosineSquare,
    /// Cosine-square rounded to the given number of bits.
    CosineSquareQuantized(u32),
}

pub const FIG_S1_VARIANTS: [PulseVariant; 4] = [
    PulseVariant::Ideal,
    PulseVariant::Square,
    PulseVariant::CosineSquare,
    PulseVariant::CosineSquareQuantized(14),
];

impl PulseVariant {
    pub fn label(self) -> String {
        match self {
            PulseVariant::Ideal => "ideal".into(),
            PulseVariant::Square => "square".into(),
            PulseVariant::CosineSquare => "cosine".into(),
            PulseVariant::CosineSquareQuantized(bits) => format!("cosine{bits}"),
        }
    }

    pub fn apply(self, drive: &DriveParams) -> DriveParams {
        let (shape, bits) = match self {
            PulseVariant::Ideal => (PulseShape::Ideal, None),
            PulseVariant::Square => (PulseShape::Square, None),
            PulseVariant::CosineSquare => (PulseShape::CosineSquare, None),
            PulseVariant::CosineSquareQuantized(b) => (PulseShape::CosineSquare, Some(b)),
        };
        drive.clone().with_shape(shape).with_vertical_bits(bits)
    }
}

/// `p(tau)` for one drive on a list of repetition times.
pub fn spin_scan(n_pulses: u32, taus: &[f64], drive: &DriveParams, bath: &NuclearBath) -> Result<ScanResult> {
    let ps = taus
        .par_iter()
        .map(|&tau| sequence_response(n_pulses, tau, drive, bath))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult::new(
        taus.to_vec(),
        ps,
        json!({
            "kind": "spin_scan",
            "version": crate::VERSION,
            "n_pulses": n_pulses,
            "drive": drive,
            "bath": bath,
        }),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeComparison {
    pub curves: Vec<(PulseVariant, ScanResult)>,
}

impl ShapeComparison {
    pub fn curve(&self, v: PulseVariant) -> Option<&ScanResult> {
        self.curves.iter().find(|(k, _)| *k == v).map(|(_, s)| s)
    }

    /// `p_a - p_b` point by point.
    pub fn difference(&self, a: PulseVariant, b: PulseVariant) -> Option<Vec<f64>> {
        let (a, b) = (self.curve(a)?, self.curve(b)?);
        Some(a.p_values.iter().zip(&b.p_values).map(|(x, y)| x - y).collect())
    }

    pub fn max_abs_difference(&self, a: PulseVariant, b: PulseVariant) -> Option<f64> {
        Some(self.difference(a, b)?.into_iter().map(f64::abs).fold(0.0, f64::max))
    }

    /// All curves stacked, with a trailing `shape` column.
    pub fn scans_csv(&self) -> String {
        let mut out = format!("{},shape\n", ScanResult::csv_header());
        for (v, scan) in &self.curves {
            scan.write_csv_rows(&mut out, Some(&v.label()));
        }
        out
    }

    /// Differences to the ideal curve: `tau_s,dp_<label>...`.
    pub fn differences_csv(&self) -> Option<String> {
        let ideal = self.curve(PulseVariant::Ideal)?;
        let others: Vec<_> = self.curves.iter().filter(|(v, _)| *v != PulseVariant::Ideal).collect();
        let mut out = String::from("tau_s");
        for (v, _) in &others {
            write!(out, ",dp_{}", v.label()).unwrap();
        }
        out.push('\n');
        for (i, tau) in ideal.tau_values.iter().enumerate() {
            write!(out, "{tau:.16e}").unwrap();
            for (_, scan) in &others {
                write!(out, ",{:.16e}", scan.p_values[i] - ideal.p_values[i]).unwrap();
            }
            out.push('\n');
        }
        Some(out)
    }
}

/// Run [`sequence_response`] for every pulse variant over `taus`.
pub fn compare_pulse_shapes(
    n_pulses: u32,
    taus: &[f64],
    drive: &DriveParams,
    bath: &NuclearBath,
    variants: &[PulseVariant],
) -> Result<ShapeComparison> {
    let curves = variants
        .iter()
        .map(|&v| Ok((v, spin_scan(n_pulses, taus, &v.apply(drive), bath)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShapeComparison { curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsim::{HyperfineCoupling, C13_LARMOR};

    fn strong() -> NuclearBath {
        NuclearBath::single(C13_LARMOR, HyperfineCoupling::strong_c13())
    }

    #[test]
    fn zero_pulses_leave_the_sensor_alone() {
        let drive = DriveParams::pi_matched(25e-9, PulseShape::Ideal).with_detuning(0.0);
        assert_eq!(sequence_response(0, 246e-9, &drive, &strong()).unwrap(), 1.0);
    }

    #[test]
    fn no_perpendicular_coupling_means_full_echo() {
        let bath = NuclearBath::new(C13_LARMOR, vec![HyperfineCoupling::new(2.0 * PI * 114e3, 0.0); 2]);
        let drive = DriveParams::pi_matched(25e-9, PulseShape::Ideal).with_detuning(0.0);
        for tau in [100e-9, 246.1e-9, 313.7e-9] {
            let p = sequence_response(16, tau, &drive, &bath).unwrap();
            assert!((p - 1.0).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn square_schedule_preserves_total_time() {
        let drive = DriveParams::pi_matched(25e-9, PulseShape::Square);
        let steps = schedule(4, 100e-9, &drive).unwrap();
        let t: f64 = steps
            .iter()
            .map(|s| match *s {
                Step::Free(d) => d,
                Step::Held { duration, repeats, .. } => duration * repeats as f64,
                Step::Pulse { .. } => drive.t_pi,
            })
            .sum();
        assert!((t - 400e-9).abs() < 1e-20);
    }

    #[test]
    fn cosine_schedule_preserves_total_time_and_area() {
        let drive = DriveParams::pi_matched(25e-9, PulseShape::CosineSquare).with_playback(Playback::SampleHold);
        let tau = 246.37e-9;
        let steps = schedule(6, tau, &drive).unwrap();
        let (mut t, mut area) = (0.0, 0.0);
        for s in &steps {
            match *s {
                Step::Free(d) => t += d,
                Step::Held { duration, repeats, amplitude, .. } => {
                    t += duration * repeats as f64;
                    area += amplitude * duration * repeats as f64;
                }
                Step::Pulse { .. } => unreachable!(),
            }
        }
        assert!((t - 6.0 * tau).abs() < 1e-18);
        assert!((area / (6.0 * PI) - 1.0).abs() < 1e-9, "{area}");
    }

    #[test]
    fn finite_shapes_reject_overlap() {
        let drive = DriveParams::pi_matched(25e-9, PulseShape::Square);
        assert!(sequence_response(2, 20e-9, &drive, &strong()).is_err());
        let drive = drive.with_shape(PulseShape::CosineSquare);
        assert!(sequence_response(2, 20e-9, &drive, &strong()).is_err());
    }

    #[test]
    fn xy8_needs_multiple_of_eight() {
        let drive = DriveParams::pi_matched(25e-9, PulseShape::Ideal).with_phase_cycle(PhaseCycle::Xy8);
        assert!(sequence_response(4, 200e-9, &drive, &strong()).is_err());
        let p = sequence_response(16, 200e-9, &drive, &strong()).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn comparison_outputs() {
        let drive = DriveParams::pi_matched(25e-9, PulseShape::Ideal).with_detuning(0.0);
        let taus = [240e-9, 246e-9];
        let cmp = compare_pulse_shapes(8, &taus, &drive, &strong(), &[PulseVariant::Ideal, PulseVariant::Ideal]).unwrap();
        assert_eq!(cmp.max_abs_difference(PulseVariant::Ideal, PulseVariant::Ideal), Some(0.0));

        let cmp = compare_pulse_shapes(8, &taus, &drive, &strong(), &FIG_S1_VARIANTS).unwrap();
        let diff = cmp.differences_csv().unwrap();
        assert_eq!(diff.lines().next(), Some("tau_s,dp_square,dp_cosine,dp_cosine14"));
        assert_eq!(diff.lines().count(), 3);
        let scans = cmp.scans_csv();
        assert_eq!(scans.lines().next(), Some("tau_s,f_equiv_hz,p,shape"));
        assert_eq!(scans.lines().count(), 1 + 8);
    }

    #[test]
    fn staircase_levels_match_rounding() {
        let (t_pi, bits) = (25e-9, 6);
        let breaks = staircase_breaks(t_pi, t_pi, bits);
        assert_eq!(breaks.len(), 64 + 2);
        assert!(breaks.windows(2).all(|w| w[0] > w[1]));
        let q = 64.0;
        let tau = 100e-9;
        let level = |d: f64| (lobe_profile(PulseShape::CosineSquare, 0.5 - d / tau, tau / t_pi) * q).round();
        for w in breaks.windows(2) {
            // constant between breaks
            let a = level(w[0] - 1e-3 * (w[0] - w[1]));
            let b = level(w[1] + 1e-3 * (w[0] - w[1]));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rounding_at_many_bits_approaches_smooth_pulse() {
        let bath = strong();
        let drive = DriveParams::pi_matched(25e-9, PulseShape::CosineSquare).with_substeps(8);
        let p = sequence_response(16, 246e-9, &drive, &bath).unwrap();
        let q = sequence_response(16, 246e-9, &drive.clone().with_vertical_bits(Some(16)), &bath).unwrap();
        assert!((p - q).abs() < 1e-7, "{p} {q}");
    }

    #[test]
    fn shaped_pulse_converges_with_substeps() {
        let bath = strong();
        let drive = DriveParams::pi_matched(25e-9, PulseShape::CosineSquare);
        for tau in [244.3e-9, 246.0e-9] {
            let p4 = sequence_response(64, tau, &drive, &bath).unwrap();
            let p8 = sequence_response(64, tau, &drive.clone().with_substeps(8), &bath).unwrap();
            assert!((p4 - p8).abs() < 1e-8, "{p4} {p8}");
        }
    }

    #[test]
    fn short_square_pulses_approach_ideal() {
        let bath = strong();
        let ideal = DriveParams::pi_matched(25e-9, PulseShape::Ideal);
        let short = DriveParams::pi_matched(0.05e-9, PulseShape::Square);
        let a = sequence_response(32, 246e-9, &ideal, &bath).unwrap();
        let b = sequence_response(32, 246e-9, &short, &bath).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} {b}");
    }

    #[test]
    fn playbacks_agree_roughly() {
        let bath = strong();
        let drive = DriveParams::pi_matched(25e-9, PulseShape::CosineSquare);
        let a = sequence_response(32, 246e-9, &drive, &bath).unwrap();
        let b = sequence_response(32, 246e-9, &drive.clone().with_playback(Playback::SampleHold), &bath).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} {b}");
    }
}

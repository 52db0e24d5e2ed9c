//! Move a pulse train by less than one sample and watch where it lands.
//!
//! The cosine-square lobes keep their sub-sample position through 14-bit
//! rounding; square pulses can only sit on the sample grid.

use ddshaper::analytic::interpolated_resolution;
use ddshaper::envelope::{measure_pulse_centers, quantize, synth_envelope, PulseShape, WaveformSpec};

fn centres(tau: f64, shape: PulseShape) -> ddshaper::Result<(Vec<f64>, Vec<f64>)> {
    let spec = WaveformSpec::new(4, tau, 25e-9, shape);
    let w = quantize(&synth_envelope(&spec)?, 14)?;
    Ok((measure_pulse_centers(&w, &spec)?, w.samples))
}

fn main() -> ddshaper::Result<()> {
    let t_pi = 25e-9;
    let step = interpolated_resolution(t_pi, 14)?;
    println!("smallest representable shift: {:.3} ps", step * 1e12);

    let tau = 100e-9;
    let (c0, s0) = centres(tau, PulseShape::CosineSquare)?;
    for shift in [step, 0.6e-12, 10e-12, 0.5e-9] {
        let (c1, s1) = centres(tau + shift, PulseShape::CosineSquare)?;
        let changed = s0.iter().zip(&s1).filter(|(a, b)| a != b).count();
        println!(
            "cosine  shift {:>8.3} ps: first centre moved {:>8.3} ps, {changed} samples changed",
            shift * 1e12,
            (c1[0] - c0[0]) * 1e12
        );
    }

    let (q0, _) = centres(tau, PulseShape::Square)?;
    for shift in [10e-12, 0.5e-9, 1.2e-9] {
        let (q1, _) = centres(tau + shift, PulseShape::Square)?;
        println!("square  shift {:>8.3} ps: first centre moved {:>8.3} ps", shift * 1e12, (q1[0] - q0[0]) * 1e12);
    }
    Ok(())
}

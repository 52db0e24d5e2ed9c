//! Two tones 3 kHz apart, resolved by a long sequence.

use ddshaper::analytic::{resonant_tau, scan_response, AcSignal, SensorModel, SequenceParams};
use ddshaper::envelope::PulseShape;
use ddshaper::harness::pulses_for_bandwidth;

fn main() -> ddshaper::Result<()> {
    let f0 = 9.746969e6;
    let tones = [AcSignal::new(f0, 5e-9), AcSignal::new(f0 + 3e3, 5e-9)];
    let tau0 = resonant_tau(f0)?;
    let n = pulses_for_bandwidth(tau0, 1e3)?;
    let seq = SequenceParams::new(n, tau0, 25e-9, PulseShape::CosineSquare);

    let start = resonant_tau(f0 + 3e3)? - 20e-12;
    let points = ((tau0 - start + 20e-12) / 0.2e-12).round() as usize + 1;
    let scan = scan_response(&seq, start, 0.2e-12, points, &tones, &SensorModel::default())?;

    println!("N = {n}");
    for (tau, p) in scan.tau_values.iter().zip(&scan.p_values).step_by(10) {
        let bar = "#".repeat(((1.0 - p) * 400.0).round() as usize);
        println!("{:>12.5} ns {p:.5} {bar}", tau * 1e9);
    }
    Ok(())
}

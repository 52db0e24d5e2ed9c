//! Sweep tau across a single-tone resonance and locate the dip.

use ddshaper::analytic::{resonant_tau, scan_response, AcSignal, SensorModel, SequenceParams};
use ddshaper::envelope::PulseShape;
use ddshaper::harness::{find_resonance, zero_crossings};

fn main() -> ddshaper::Result<()> {
    let f_ac = 9.746969e6;
    let tau0 = resonant_tau(f_ac)?;
    let sensor = SensorModel::default().with_t2(535e-6);

    for (n, b) in [(192, 0.84e-6), (10_000, 0.84e-6)] {
        let seq = SequenceParams::new(n, tau0, 25e-9, PulseShape::CosineSquare);
        let half = 4.0 * 2.0 * tau0 / n as f64;
        let scan = scan_response(&seq, tau0 - half, 2.0 * half / 800.0, 801, &[AcSignal::new(f_ac, b)], &sensor)?;
        match find_resonance(&scan) {
            Ok(r) => println!(
                "N = {n}: dip at {:.5} ns, p_min {:.4}, FWHM {:.3} ps",
                r.tau_min * 1e9,
                r.p_min,
                r.linewidth * 1e12
            ),
            Err(e) => println!("N = {n}: {e}"),
        }
        println!("  {} crossings of p = 1/2", zero_crossings(&scan).len());
    }
    Ok(())
}

//! Density-matrix simulation of the sensor coupled to one 13C nucleus.

use ddshaper::envelope::PulseShape;
use ddshaper::harness::nuclear_resonance_tau;
use ddshaper::spinsim::{spin_scan, DriveParams, HyperfineCoupling, NuclearBath, C13_LARMOR};

fn main() -> ddshaper::Result<()> {
    let bath = NuclearBath::single(C13_LARMOR, HyperfineCoupling::strong_c13());
    let tau0 = nuclear_resonance_tau(&bath);
    let taus: Vec<f64> = (-20..=20).map(|i| tau0 + i as f64 * 0.25e-9).collect();

    for shape in [PulseShape::Ideal, PulseShape::CosineSquare] {
        let drive = DriveParams::pi_matched(25e-9, shape);
        let scan = spin_scan(64, &taus, &drive, &bath)?;
        let (i, p) = scan
            .p_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        println!("{:<14} deepest point {:.3} ns, p = {p:.4}", shape.name(), scan.tau_values[i] * 1e9);
    }
    Ok(())
}

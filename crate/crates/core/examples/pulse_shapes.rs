//! Ideal, square, cosine-square and 14-bit cosine-square pulses on the same
//! nuclear resonance.

use ddshaper::envelope::PulseShape;
use ddshaper::harness::nuclear_resonance_tau;
use ddshaper::spinsim::{
    compare_pulse_shapes, DriveParams, HyperfineCoupling, NuclearBath, PulseVariant, C13_LARMOR, FIG_S1_VARIANTS,
};

fn main() -> ddshaper::Result<()> {
    let bath = NuclearBath::single(C13_LARMOR, HyperfineCoupling::strong_c13());
    let tau0 = nuclear_resonance_tau(&bath);
    let taus: Vec<f64> = (-10..=10).map(|i| tau0 * (1.0 + i as f64 * 0.002)).collect();
    let drive = DriveParams::pi_matched(25e-9, PulseShape::CosineSquare);

    let cmp = compare_pulse_shapes(320, &taus, &drive, &bath, &FIG_S1_VARIANTS)?;
    let pairs = [
        (PulseVariant::CosineSquareQuantized(14), PulseVariant::CosineSquare),
        (PulseVariant::Square, PulseVariant::CosineSquare),
        (PulseVariant::CosineSquare, PulseVariant::Ideal),
    ];
    for (a, b) in pairs {
        println!("max |p_{} - p_{}| = {:.3e}", a.label(), b.label(), cmp.max_abs_difference(a, b).unwrap());
    }
    Ok(())
}

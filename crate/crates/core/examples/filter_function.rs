//! Filter weight around the first resonance for a few pulse counts.

use ddshaper::analytic::{filter_weight, min_freq_increment, resonant_tau};

fn main() -> ddshaper::Result<()> {
    let f_ac = 9.746969e6;
    let tau = resonant_tau(f_ac)?;
    println!("resonant tau {:.4} ns", tau * 1e9);

    for n in [48, 192, 672] {
        println!("N = {n}");
        for i in -4..=4 {
            let f = f_ac * (1.0 + i as f64 * 0.5 / n as f64);
            println!("  {:>10.4} MHz  W = {:.6}", f / 1e6, filter_weight(f, n, tau)?);
        }
    }

    for t_s in [2e-9, 1e-9, 1e-12] {
        let (exact, approx) = min_freq_increment(tau, t_s)?;
        println!("tau step {:>6.0} ps -> {exact:>12.3} Hz (approx {approx:.3} Hz)", t_s * 1e12);
    }
    Ok(())
}

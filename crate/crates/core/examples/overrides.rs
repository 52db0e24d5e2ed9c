//! Change preset parameters by key; unknown keys are refused.

use ddshaper::harness::{run_experiment, ExperimentKind, ExperimentSpec};

fn main() -> ddshaper::Result<()> {
    let spec = ExperimentSpec::new(ExperimentKind::Fig3Scaling)
        .with("n_pulses", vec![96, 192, 384])
        .with("b_ac_t", 0.2e-6);
    let out = run_experiment(&spec)?;
    for s in out.summary["series"].as_array().unwrap() {
        println!(
            "N = {:>4}: linewidth {:.3} ps",
            s["n_pulses"],
            s["resonance"]["linewidth_s"].as_f64().unwrap_or(f64::NAN) * 1e12
        );
    }

    let typo = ExperimentSpec::new(ExperimentKind::Fig3Scaling).with("n_pulse", 10);
    if let Err(e) = run_experiment(&typo) {
        println!("rejected: {e}");
    }
    Ok(())
}

//! Put an envelope on a microwave carrier for an arbitrary waveform generator.

use ddshaper::envelope::{modulate_carrier, quantize, synth_envelope, PulseShape, WaveformSpec};

fn main() -> ddshaper::Result<()> {
    let spec = WaveformSpec::new(2, 60e-9, 20e-9, PulseShape::CosineSquare).with_sample_rate(2e9);
    let env = synth_envelope(&spec)?;
    let rf = quantize(&modulate_carrier(&env, 200e6, 0.0)?, 14)?;
    for i in (20..rf.len()).take(40) {
        println!("{:>7.2} ns {:>9.5} {:>9.5}", rf.time(i) * 1e9, env.samples[i], rf.samples[i]);
    }
    Ok(())
}

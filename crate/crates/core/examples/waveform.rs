//! Synthesize a cosine-square train, check each lobe, and export it.

use ddshaper::envelope::{
    export_waveform, lobes, quantize, read_waveform, synth_envelope, PulseShape, WaveformFormat, WaveformSpec,
};

fn main() -> ddshaper::Result<()> {
    let spec = WaveformSpec::new(8, 100e-9, 25e-9, PulseShape::CosineSquare);
    let w = quantize(&synth_envelope(&spec)?, spec.vertical_bits)?;
    println!("{} samples at {:.0} MS/s", w.len(), w.sample_rate() / 1e6);

    for (k, lobe) in lobes(&w, &spec)?.iter().enumerate() {
        println!(
            "pulse {k}: centroid {:.4} ns, fwhm {:.3} ns, area {:.4} ns",
            lobe.centroid().unwrap() * 1e9,
            lobe.fwhm()? * 1e9,
            lobe.area() * 1e9
        );
    }

    let dir = std::env::temp_dir().join("ddshaper-waveform");
    std::fs::create_dir_all(&dir)?;
    for (format, name) in [(WaveformFormat::Csv, "train.csv"), (WaveformFormat::Binary, "train.bin")] {
        let path = dir.join(name);
        export_waveform(&w, format, &path)?;
        let back = read_waveform(&path)?;
        let err = w.samples.iter().zip(&back.samples).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{}: max round-trip error {err:.2e}", path.display());
    }
    Ok(())
}

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SampledWaveform;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"DDWF";
/// Binary code for amplitude 1.0. Symmetric so that +1 and -1 both fit.
pub const BINARY_FULL_SCALE: f64 = 32766.0;

const CSV_HEADER: &str = "index,time_s,amplitude";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WaveformFormat {
    Csv,
    Binary,
}

/// Write `w` to `path`. The file is written to a sibling temp file first and
/// renamed into place.
pub fn export_waveform(w: &SampledWaveform, format: WaveformFormat, path: &Path) -> Result<()> {
    let bytes = match format {
        WaveformFormat::Csv => encode_csv(w),
        WaveformFormat::Binary => encode_binary(w)?,
    };
    crate::write_atomic(path, &bytes)
}

/// Read a waveform written by [`export_waveform`]; the format is sniffed
/// from the magic bytes.
pub fn read_waveform(path: &Path) -> Result<SampledWaveform> {
    let mut file = File::open(path)?;
    let mut head = [0u8; 4];
    let got = file.read(&mut head)?;
    drop(file);
    if got == 4 && &head == BINARY_MAGIC {
        decode_binary(&fs::read(path)?)
    } else {
        decode_csv(BufReader::new(File::open(path)?))
    }
}

fn encode_csv(w: &SampledWaveform) -> Vec<u8> {
    let mut out = BufWriter::new(Vec::with_capacity(w.len() * 48));
    writeln!(out, "{CSV_HEADER}").unwrap();
    for (i, a) in w.samples.iter().enumerate() {
        writeln!(out, "{i},{:.16e},{:.16e}", w.time(i), a).unwrap();
    }
    out.into_inner().unwrap()
}

fn decode_csv(reader: impl BufRead) -> Result<SampledWaveform> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Format(format!("expected header `{CSV_HEADER}`")));
    }
    let mut samples = Vec::new();
    let mut dt = None;
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(idx), Some(t), Some(a), None) = (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(Error::Format(format!("row {row}: expected 3 columns")));
        };
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {row}: bad number `{s}`")))
        };
        if idx.trim().parse::<usize>().ok() != Some(row) {
            return Err(Error::Format(format!("row {row}: index out of sequence")));
        }
        if row == 1 {
            dt = Some(parse(t)?);
        }
        samples.push(parse(a)?);
    }
    let dt = dt
        .filter(|d| *d > 0.0)
        .ok_or_else(|| Error::Format("need at least two rows to infer the sample time".into()))?;
    Ok(SampledWaveform::from_samples(samples, dt))
}

fn encode_binary(w: &SampledWaveform) -> Result<Vec<u8>> {
    let count = u32::try_from(w.len()).map_err(|_| Error::Format("too many samples".into()))?;
    let rate = w.sample_rate().round();
    if !(1.0..=u32::MAX as f64).contains(&rate) {
        return Err(Error::Format(format!("sample rate {rate} Hz does not fit in u32")));
    }
    let mut out = Vec::with_capacity(12 + 2 * w.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(rate as u32).to_le_bytes());
    for &a in &w.samples {
        let code = (a * BINARY_FULL_SCALE)
            .round()
            .clamp(-BINARY_FULL_SCALE, BINARY_FULL_SCALE) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    Ok(out)
}

fn decode_binary(bytes: &[u8]) -> Result<SampledWaveform> {
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Format("missing DDWF header".into()));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rate = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let body = &bytes[12..];
    if body.len() != 2 * count {
        return Err(Error::Format(format!(
            "header announces {count} samples but body holds {} bytes",
            body.len()
        )));
    }
    if rate == 0 {
        return Err(Error::Format("zero sample rate".into()));
    }
    let samples = body
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / BINARY_FULL_SCALE)
        .collect();
    Ok(SampledWaveform::from_samples(samples, 1.0 / rate as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{modulate_carrier, quantize, synth_envelope, PulseShape, WaveformSpec};

    fn cases() -> Vec<SampledWaveform> {
        let spec = WaveformSpec::new(3, 51.298e-9, 25e-9, PulseShape::CosineSquare);
        let env = synth_envelope(&spec).unwrap();
        let q = quantize(&env, 14).unwrap();
        let carrier = modulate_carrier(&q, 100e6, 0.3).unwrap();
        vec![env, q, carrier]
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for (k, w) in cases().into_iter().enumerate() {
            let path = dir.path().join(format!("w{k}.csv"));
            export_waveform(&w, WaveformFormat::Csv, &path).unwrap();
            let back = read_waveform(&path).unwrap();
            assert_eq!(back.dt.to_bits(), w.dt.to_bits());
            assert_eq!(back.samples.len(), w.samples.len());
            for (a, b) in w.samples.iter().zip(&back.samples) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn binary_round_trip_is_bitwise_on_the_code_grid() {
        let dir = tempfile::tempdir().unwrap();
        for (k, w) in cases().into_iter().enumerate() {
            let path = dir.path().join(format!("w{k}.bin"));
            export_waveform(&w, WaveformFormat::Binary, &path).unwrap();
            let first = fs::read(&path).unwrap();
            let back = read_waveform(&path).unwrap();
            assert_eq!(back.len(), w.len());
            assert_eq!(back.dt, w.dt);
            for (a, b) in w.samples.iter().zip(&back.samples) {
                assert!((a - b).abs() <= 0.5 / BINARY_FULL_SCALE + 1e-15);
            }
            export_waveform(&back, WaveformFormat::Binary, &path).unwrap();
            assert_eq!(fs::read(&path).unwrap(), first);
        }
    }

    #[test]
    fn binary_layout() {
        let w = SampledWaveform::from_samples(vec![1.0, -1.0, 0.0], 2e-9);
        let bytes = encode_binary(&w).unwrap();
        assert_eq!(&bytes[..4], b"DDWF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 500_000_000);
        assert_eq!(i16::from_le_bytes([bytes[12], bytes[13]]), 32766);
        assert_eq!(i16::from_le_bytes([bytes[14], bytes[15]]), -32766);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_binary(b"DDWF\x02\x00\x00\x00\x01\x00\x00\x00\x00").is_err());
        assert!(decode_csv("time,amp\n".as_bytes()).is_err());
        assert!(decode_csv("index,time_s,amplitude\n0,0,1\n".as_bytes()).is_err());
        assert!(decode_csv("index,time_s,amplitude\n0,0,1\n2,1e-9,x\n".as_bytes()).is_err());
    }
}

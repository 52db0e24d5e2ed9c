//! The `ddshaper` command line.
//!
//! Every command reads an optional config file (TOML, or JSON when the file
//! ends in `.json`) whose keys carry their unit, e.g. `tau_ns` or
//! `f_ac_mhz`. Flags override single keys. The merged config is echoed as
//! `params.json`, which can be passed back with `--config` to repeat a run.
//!
//! Exit codes: 0 success, 2 invalid input, 1 runtime failure.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analytic::{filter_weight, scan_response, AcSignal, SensorModel, SequenceParams, GAMMA_NV};
use crate::envelope::{
    export_waveform, modulate_carrier, quantize, synth_envelope, PulseShape, WaveformFormat, WaveformSpec,
    DEFAULT_SAMPLE_RATE, DEFAULT_VERTICAL_BITS,
};
use crate::error::Error;
use crate::harness::{run_experiment, ExperimentKind, ExperimentSpec};
use crate::spinsim::{
    compare_pulse_shapes, spin_scan, DriveParams, HyperfineCoupling, NuclearBath, PhaseCycle, Playback,
    FIG_S1_VARIANTS,
};
use crate::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "ddshaper", version, about = "Shaped dynamical-decoupling waveforms and sensor response")]
pub struct Cli {
    /// Output directory (config key output.dir)
    #[arg(long, global = true, env = "DDSHAPER_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel scans
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a pulse-train envelope and export it
    Waveform(WaveformArgs),
    /// Tabulate the filter function over a frequency range
    Filter(FilterArgs),
    /// Analytic p(tau) scan for unsynchronized AC tones
    Response(ResponseArgs),
    /// Density-matrix p(tau) scan of the NV and its nuclei
    Simulate(SimulateArgs),
    /// Ideal, square, cosine and rounded-cosine pulses side by side
    Compare(SimulateArgs),
    /// Run a figure experiment with its default parameters
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file, TOML or JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write a gnuplot script (output.plot)
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct SequenceFlags {
    /// sequence.n_pulses
    #[arg(long)]
    pub n_pulses: Option<u32>,
    /// sequence.tau_ns
    #[arg(long)]
    pub tau_ns: Option<f64>,
    /// sequence.t_pi_ns
    #[arg(long)]
    pub t_pi_ns: Option<f64>,
    /// sequence.shape
    #[arg(long)]
    pub shape: Option<PulseShape>,
}

#[derive(Debug, Args)]
pub struct WaveformArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seq: SequenceFlags,
    /// sequence.sample_rate_msps
    #[arg(long)]
    pub sample_rate_msps: Option<f64>,
    /// sequence.vertical_bits; rounds the envelope
    #[arg(long)]
    pub vertical_bits: Option<u32>,
    /// sequence.carrier_mhz
    #[arg(long)]
    pub carrier_mhz: Option<f64>,
    /// output.format
    #[arg(long, value_enum)]
    pub format: Option<WaveformFormat>,
}

#[derive(Debug, Args)]
pub struct ScanFlags {
    /// scan.tau_start_ns
    #[arg(long)]
    pub tau_start_ns: Option<f64>,
    /// scan.tau_stop_ns
    #[arg(long)]
    pub tau_stop_ns: Option<f64>,
    /// scan.n_points
    #[arg(long)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seq: SequenceFlags,
    /// scan.f_start_mhz
    #[arg(long)]
    pub f_start_mhz: Option<f64>,
    /// scan.f_stop_mhz
    #[arg(long)]
    pub f_stop_mhz: Option<f64>,
    /// scan.n_points
    #[arg(long)]
    pub n_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ResponseArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seq: SequenceFlags,
    #[command(flatten)]
    pub scan: ScanFlags,
    /// signals[0].f_ac_mhz
    #[arg(long)]
    pub f_ac_mhz: Option<f64>,
    /// signals[0].b_ac_ut
    #[arg(long)]
    pub b_ac_ut: Option<f64>,
    /// sensor.t2_us
    #[arg(long)]
    pub t2_us: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seq: SequenceFlags,
    #[command(flatten)]
    pub scan: ScanFlags,
    /// drive.detuning_mhz
    #[arg(long)]
    pub detuning_mhz: Option<f64>,
    /// drive.substeps_per_sample
    #[arg(long)]
    pub substeps: Option<u32>,
    /// drive.vertical_bits
    #[arg(long)]
    pub vertical_bits: Option<u32>,
    /// bath.larmor_mhz
    #[arg(long)]
    pub larmor_mhz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// fig2_square, fig2_shaped, fig3_scaling, fig3_zoom, fig4_twotone,
    /// fig4_c13, figS1_shapes (aliases fig2, fig3, fig4, figS1) or `all`
    pub figure: Option<String>,
    /// Experiment spec (a `params.json` from an earlier run works)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Parameter override KEY=VALUE, VALUE parsed as JSON when possible
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Also write a gnuplot script
    #[arg(long)]
    pub plot: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sensor: SensorSection,
    pub sequence: SequenceSection,
    pub drive: DriveSection,
    pub bath: BathSection,
    pub signals: Vec<SignalSection>,
    pub scan: ScanSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub t2_us: Option<f64>,
    /// Gyromagnetic ratio over 2 pi.
    pub gamma_ghz_per_t: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub n_pulses: Option<u32>,
    pub tau_ns: Option<f64>,
    pub t_pi_ns: Option<f64>,
    pub shape: Option<PulseShape>,
    pub sample_rate_msps: Option<f64>,
    pub vertical_bits: Option<u32>,
    pub carrier_mhz: Option<f64>,
    pub carrier_phase_rad: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    /// Peak Rabi frequency over 2 pi; default gives a pi pulse over t_pi.
    pub rabi_peak_mhz: Option<f64>,
    pub detuning_mhz: Option<f64>,
    pub substeps_per_sample: Option<u32>,
    pub vertical_bits: Option<u32>,
    pub phase_cycle: Option<PhaseCycle>,
    pub playback: Option<Playback>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub larmor_mhz: Option<f64>,
    pub nuclei: Option<Vec<NucleusSection>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucleusSection {
    pub a_par_khz: f64,
    pub a_perp_khz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub f_ac_mhz: f64,
    pub b_ac_ut: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub tau_start_ns: Option<f64>,
    pub tau_stop_ns: Option<f64>,
    pub f_start_mhz: Option<f64>,
    pub f_stop_mhz: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<WaveformFormat>,
    pub plot: Option<bool>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::NonHermitian(_) | Error::NonUnitary(_) | Error::NoInteriorMinimum => 1,
            Error::Format(_) | Error::Json(_) | Error::TruncatedLobe { .. } | Error::NoLobe { .. } => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Read a config file; JSON when the extension is `.json`, TOML otherwise.
pub fn load_config(path: &Path) -> CliResult<Config> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn positive(key: &str, x: Option<f64>, default: f64) -> CliResult<f64> {
    match x {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::usage(format!("`{key}` must be positive, got {v}"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

fn count<T: Copy + PartialOrd + Default + std::fmt::Display>(key: &str, x: Option<T>, default: T) -> CliResult<T> {
    match x {
        Some(v) if v <= T::default() => Err(CliError::usage(format!("`{key}` must be positive, got {v}"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

impl Config {
    fn apply_sequence(&mut self, f: &SequenceFlags) {
        set(&mut self.sequence.n_pulses, f.n_pulses);
        set(&mut self.sequence.tau_ns, f.tau_ns);
        set(&mut self.sequence.t_pi_ns, f.t_pi_ns);
        set(&mut self.sequence.shape, f.shape);
    }

    fn apply_scan(&mut self, f: &ScanFlags) {
        set(&mut self.scan.tau_start_ns, f.tau_start_ns);
        set(&mut self.scan.tau_stop_ns, f.tau_stop_ns);
        set(&mut self.scan.n_points, f.n_points);
    }

    fn n_pulses(&self) -> CliResult<u32> {
        count("sequence.n_pulses", self.sequence.n_pulses, 320)
    }

    fn tau(&self) -> CliResult<f64> {
        Ok(positive("sequence.tau_ns", self.sequence.tau_ns, 51.298)? * 1e-9)
    }

    fn t_pi(&self) -> CliResult<f64> {
        Ok(positive("sequence.t_pi_ns", self.sequence.t_pi_ns, 25.0)? * 1e-9)
    }

    fn shape(&self) -> PulseShape {
        self.sequence.shape.unwrap_or(PulseShape::CosineSquare)
    }

    fn sample_rate(&self) -> CliResult<f64> {
        Ok(positive("sequence.sample_rate_msps", self.sequence.sample_rate_msps, DEFAULT_SAMPLE_RATE / 1e6)? * 1e6)
    }

    fn sensor(&self) -> CliResult<SensorModel> {
        let gamma = positive("sensor.gamma_ghz_per_t", self.sensor.gamma_ghz_per_t, GAMMA_NV / (2.0 * PI * 1e9))?;
        let t2 = match self.sensor.t2_us {
            Some(_) => Some(positive("sensor.t2_us", self.sensor.t2_us, 0.0)? * 1e-6),
            None => None,
        };
        Ok(SensorModel {
            gamma: 2.0 * PI * 1e9 * gamma,
            t2,
        })
    }

    fn signals(&self) -> CliResult<Vec<AcSignal>> {
        if self.signals.is_empty() {
            return Err(CliError::usage("`signals` needs at least one entry with f_ac_mhz and b_ac_ut"));
        }
        self.signals
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let f = positive(&format!("signals[{i}].f_ac_mhz"), Some(s.f_ac_mhz), 0.0)?;
                if !(s.b_ac_ut >= 0.0 && s.b_ac_ut.is_finite()) {
                    return Err(CliError::usage(format!("`signals[{i}].b_ac_ut` must be non-negative")));
                }
                Ok(AcSignal::new(f * 1e6, s.b_ac_ut * 1e-6))
            })
            .collect()
    }

    /// `tau` grid from `scan.tau_start_ns`, `scan.tau_stop_ns`, `scan.n_points`.
    fn tau_scan(&self) -> CliResult<(f64, f64, usize)> {
        let start = positive("scan.tau_start_ns", self.scan.tau_start_ns, 50.0)? * 1e-9;
        let stop = positive("scan.tau_stop_ns", self.scan.tau_stop_ns, 52.6)? * 1e-9;
        let n = count("scan.n_points", self.scan.n_points, 201)?;
        if n < 2 || stop <= start {
            return Err(CliError::usage("`scan.tau_stop_ns` must exceed `scan.tau_start_ns` with n_points >= 2"));
        }
        Ok((start, (stop - start) / (n - 1) as f64, n))
    }

    fn bath(&self) -> CliResult<NuclearBath> {
        let larmor = positive("bath.larmor_mhz", self.bath.larmor_mhz, 1.975)?;
        let nuclei = match &self.bath.nuclei {
            Some(n) => n
                .iter()
                .map(|c| HyperfineCoupling::new(2.0 * PI * c.a_par_khz * 1e3, 2.0 * PI * c.a_perp_khz * 1e3))
                .collect(),
            None => vec![HyperfineCoupling::strong_c13()],
        };
        let bath = NuclearBath::new(2.0 * PI * larmor * 1e6, nuclei);
        bath.validate().map_err(|e| CliError::usage(format!("bath: {e}")))?;
        Ok(bath)
    }

    fn drive(&self) -> CliResult<DriveParams> {
        let t_pi = self.t_pi()?;
        let mut d = DriveParams::pi_matched(t_pi, self.shape());
        if self.drive.rabi_peak_mhz.is_some() {
            d.rabi_peak = 2.0 * PI * 1e6 * positive("drive.rabi_peak_mhz", self.drive.rabi_peak_mhz, 0.0)?;
        }
        d.detuning = 2.0 * PI * 1e6 * self.drive.detuning_mhz.unwrap_or(0.0);
        d.substeps_per_sample = count("drive.substeps_per_sample", self.drive.substeps_per_sample, 4)?;
        d.sample_rate = self.sample_rate()?;
        d.vertical_bits = self.drive.vertical_bits;
        d.phase_cycle = self.drive.phase_cycle.unwrap_or_default();
        d.playback = self.drive.playback.unwrap_or_default();
        d.validate().map_err(|e| CliError::usage(format!("drive: {e}")))?;
        Ok(d)
    }
}

fn output_dir(cli_out: Option<&Path>, cfg: &mut Config) -> PathBuf {
    if let Some(dir) = cli_out {
        cfg.output.dir = Some(dir.to_path_buf());
    }
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("ddshaper-out"))
}

fn write_params(dir: &Path, cfg: &Config) -> CliResult<()> {
    let text = serde_json::to_string_pretty(cfg).map_err(Error::from)? + "\n";
    write_atomic(&dir.join("params.json"), text.as_bytes())?;
    Ok(())
}

/// gnuplot script plotting columns `x:y` of `data`, one curve per label when
/// `labels` is given.
pub fn gnuplot_script(data: &str, xcol: usize, ycol: usize, xlabel: &str, ylabel: &str, labels: &[String]) -> String {
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set key autotitle columnhead").unwrap();
    writeln!(s, "set xlabel '{xlabel}'\nset ylabel '{ylabel}'").unwrap();
    if labels.is_empty() {
        writeln!(s, "plot '{data}' using {xcol}:{ycol} with linespoints").unwrap();
    } else {
        let curves: Vec<String> = labels
            .iter()
            .map(|l| format!("'{data}' using {xcol}:(strcol(4) eq '{l}' ? ${ycol} : NaN) with lines title '{l}'"))
            .collect();
        writeln!(s, "plot {}", curves.join(", \\\n     ")).unwrap();
    }
    writeln!(s, "pause mouse close").unwrap();
    s
}

fn load(common: &Common) -> CliResult<Config> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    if common.plot {
        cfg.output.plot = Some(true);
    }
    Ok(cfg)
}

fn cmd_waveform(args: &WaveformArgs, out: Option<&Path>) -> CliResult<PathBuf> {
    let mut cfg = load(&args.common)?;
    cfg.apply_sequence(&args.seq);
    set(&mut cfg.sequence.sample_rate_msps, args.sample_rate_msps);
    set(&mut cfg.sequence.vertical_bits, args.vertical_bits);
    set(&mut cfg.sequence.carrier_mhz, args.carrier_mhz);
    set(&mut cfg.output.format, args.format);
    let dir = output_dir(out, &mut cfg);

    let bits = count("sequence.vertical_bits", cfg.sequence.vertical_bits, DEFAULT_VERTICAL_BITS)?;
    let spec = WaveformSpec::new(cfg.n_pulses()?, cfg.tau()?, cfg.t_pi()?, cfg.shape())
        .with_sample_rate(cfg.sample_rate()?)
        .with_vertical_bits(bits);
    let mut w = synth_envelope(&spec)?;
    if cfg.sequence.vertical_bits.is_some() {
        w = quantize(&w, bits)?;
    }
    if let Some(f) = cfg.sequence.carrier_mhz {
        w = modulate_carrier(&w, f * 1e6, cfg.sequence.carrier_phase_rad.unwrap_or(0.0))?;
    }
    let format = cfg.output.format.unwrap_or(WaveformFormat::Csv);
    let name = match format {
        WaveformFormat::Csv => "waveform.csv",
        WaveformFormat::Binary => "waveform.bin",
    };
    fs::create_dir_all(&dir)?;
    export_waveform(&w, format, &dir.join(name))?;
    if cfg.output.plot == Some(true) && format == WaveformFormat::Csv {
        let gp = gnuplot_script(name, 2, 3, "time (s)", "amplitude", &[]);
        write_atomic(&dir.join("waveform.gp"), gp.as_bytes())?;
    }
    write_params(&dir, &cfg)?;
    println!("{} samples -> {}", w.len(), dir.join(name).display());
    Ok(dir)
}

fn cmd_filter(args: &FilterArgs, out: Option<&Path>) -> CliResult<PathBuf> {
    let mut cfg = load(&args.common)?;
    cfg.apply_sequence(&args.seq);
    set(&mut cfg.scan.f_start_mhz, args.f_start_mhz);
    set(&mut cfg.scan.f_stop_mhz, args.f_stop_mhz);
    set(&mut cfg.scan.n_points, args.n_points);
    let dir = output_dir(out, &mut cfg);

    let (n, tau) = (cfg.n_pulses()?, cfg.tau()?);
    let f0 = 1.0 / (2.0 * tau);
    let start = positive("scan.f_start_mhz", cfg.scan.f_start_mhz, 0.9 * f0 / 1e6)? * 1e6;
    let stop = positive("scan.f_stop_mhz", cfg.scan.f_stop_mhz, 1.1 * f0 / 1e6)? * 1e6;
    let points = count("scan.n_points", cfg.scan.n_points, 1001)?;
    if points < 2 || stop <= start {
        return Err(CliError::usage("`scan.f_stop_mhz` must exceed `scan.f_start_mhz` with n_points >= 2"));
    }
    let mut csv = String::from("f_hz,w\n");
    for i in 0..points {
        let f = start + (stop - start) * i as f64 / (points - 1) as f64;
        let w = filter_weight(f, n, tau).map_err(|e| match e {
            Error::OddPulseCount { .. } => CliError::usage(format!("sequence.n_pulses: {e}")),
            e => e.into(),
        })?;
        writeln!(csv, "{f:.16e},{w:.16e}").unwrap();
    }
    write_atomic(&dir.join("filter.csv"), csv.as_bytes())?;
    if cfg.output.plot == Some(true) {
        write_atomic(&dir.join("filter.gp"), gnuplot_script("filter.csv", 1, 2, "f (Hz)", "W", &[]).as_bytes())?;
    }
    write_params(&dir, &cfg)?;
    println!("{points} points -> {}", dir.join("filter.csv").display());
    Ok(dir)
}

fn write_scan(dir: &Path, csv: &str, plot: bool, labels: &[String]) -> CliResult<()> {
    write_atomic(&dir.join("scan.csv"), csv.as_bytes())?;
    if plot {
        let gp = gnuplot_script("scan.csv", 1, 3, "tau (s)", "p", labels);
        write_atomic(&dir.join("scan.gp"), gp.as_bytes())?;
    }
    Ok(())
}

fn cmd_response(args: &ResponseArgs, out: Option<&Path>) -> CliResult<PathBuf> {
    let mut cfg = load(&args.common)?;
    cfg.apply_sequence(&args.seq);
    cfg.apply_scan(&args.scan);
    set(&mut cfg.sensor.t2_us, args.t2_us);
    if args.f_ac_mhz.is_some() || args.b_ac_ut.is_some() {
        if cfg.signals.is_empty() {
            cfg.signals.push(SignalSection {
                f_ac_mhz: 9.746969,
                b_ac_ut: 0.84,
            });
        }
        if let Some(f) = args.f_ac_mhz {
            cfg.signals[0].f_ac_mhz = f;
        }
        if let Some(b) = args.b_ac_ut {
            cfg.signals[0].b_ac_ut = b;
        }
    }
    let dir = output_dir(out, &mut cfg);

    let (start, step, n) = cfg.tau_scan()?;
    let seq = SequenceParams::new(cfg.n_pulses()?, start, cfg.t_pi()?, cfg.shape());
    let scan = scan_response(&seq, start, step, n, &cfg.signals()?, &cfg.sensor()?)?;
    write_scan(&dir, &scan.to_csv(), cfg.output.plot == Some(true), &[])?;
    write_params(&dir, &cfg)?;
    println!("{n} points -> {}", dir.join("scan.csv").display());
    Ok(dir)
}

fn simulate_config(args: &SimulateArgs, out: Option<&Path>) -> CliResult<(Config, PathBuf)> {
    let mut cfg = load(&args.common)?;
    cfg.apply_sequence(&args.seq);
    cfg.apply_scan(&args.scan);
    set(&mut cfg.drive.detuning_mhz, args.detuning_mhz);
    set(&mut cfg.drive.substeps_per_sample, args.substeps);
    set(&mut cfg.drive.vertical_bits, args.vertical_bits);
    set(&mut cfg.bath.larmor_mhz, args.larmor_mhz);
    if cfg.scan.tau_start_ns.is_none() && cfg.scan.tau_stop_ns.is_none() {
        cfg.scan.tau_start_ns = Some(241.0);
        cfg.scan.tau_stop_ns = Some(251.0);
    }
    let dir = output_dir(out, &mut cfg);
    Ok((cfg, dir))
}

fn taus(cfg: &Config) -> CliResult<Vec<f64>> {
    let (start, step, n) = cfg.tau_scan()?;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn cmd_simulate(args: &SimulateArgs, out: Option<&Path>) -> CliResult<PathBuf> {
    let (cfg, dir) = simulate_config(args, out)?;
    let scan = spin_scan(cfg.n_pulses()?, &taus(&cfg)?, &cfg.drive()?, &cfg.bath()?)?;
    write_scan(&dir, &scan.to_csv(), cfg.output.plot == Some(true), &[])?;
    write_params(&dir, &cfg)?;
    println!("{} points -> {}", scan.len(), dir.join("scan.csv").display());
    Ok(dir)
}

fn cmd_compare(args: &SimulateArgs, out: Option<&Path>) -> CliResult<PathBuf> {
    let (mut cfg, dir) = simulate_config(args, out)?;
    cfg.sequence.shape = Some(PulseShape::CosineSquare);
    let cmp = compare_pulse_shapes(cfg.n_pulses()?, &taus(&cfg)?, &cfg.drive()?, &cfg.bath()?, &FIG_S1_VARIANTS)?;
    let labels: Vec<String> = FIG_S1_VARIANTS.iter().map(|v| v.label()).collect();
    write_scan(&dir, &cmp.scans_csv(), cfg.output.plot == Some(true), &labels)?;
    write_atomic(&dir.join("differences.csv"), cmp.differences_csv().unwrap_or_default().as_bytes())?;
    let [ideal, square, cosine, rounded] = FIG_S1_VARIANTS;
    let summary = json!({
        "max_abs_dp_quantized_vs_cosine": cmp.max_abs_difference(rounded, cosine),
        "max_abs_dp_square_vs_cosine": cmp.max_abs_difference(square, cosine),
        "max_abs_dp_square_vs_ideal": cmp.max_abs_difference(square, ideal),
        "max_abs_dp_cosine_vs_ideal": cmp.max_abs_difference(cosine, ideal),
    });
    let text = serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n";
    write_atomic(&dir.join("summary.json"), text.as_bytes())?;
    write_params(&dir, &cfg)?;
    println!("{text}");
    Ok(dir)
}

fn parse_override(s: &str) -> CliResult<(String, serde_json::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override `{s}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| json!(v));
    Ok((k.trim().to_string(), value))
}

fn cmd_reproduce(args: &ReproduceArgs, out: Option<&Path>) -> CliResult<PathBuf> {
    let root = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("ddshaper-out"));
    let mut specs = match (&args.config, args.figure.as_deref()) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let spec: ExperimentSpec = if path.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
            } else {
                toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
            };
            vec![spec]
        }
        (None, Some("all")) => ExperimentKind::ALL.iter().map(|&k| ExperimentSpec::new(k)).collect(),
        (None, Some(name)) => vec![ExperimentSpec::new(name.parse()?)],
        (Some(_), Some(_)) => return Err(CliError::usage("give either a figure or --config, not both")),
        (None, None) => return Err(CliError::usage("missing figure; try `reproduce figS1`")),
    };
    for s in &args.overrides {
        let (k, v) = parse_override(s)?;
        for spec in &mut specs {
            spec.overrides.insert(k.clone(), v.clone());
        }
    }
    for spec in &specs {
        let result = run_experiment(spec)?;
        let dir = root.join(spec.kind.name());
        result.write(&dir)?;
        if args.plot {
            let labels: Vec<String> = if result.scans.len() > 1 {
                result.scans.iter().map(|(l, _)| l.clone()).collect()
            } else {
                Vec::new()
            };
            write_atomic(&dir.join("scan.gp"), gnuplot_script("scan.csv", 1, 3, "tau (s)", "p", &labels).as_bytes())?;
        }
        println!("{}: {}", spec.kind, serde_json::to_string(&result.summary).map_err(Error::from)?);
    }
    Ok(root)
}

/// Run a parsed command line.
pub fn run(cli: &Cli) -> CliResult<PathBuf> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("`--threads` must be positive"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Waveform(a) => cmd_waveform(a, out),
        Command::Filter(a) => cmd_filter(a, out),
        Command::Response(a) => cmd_response(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Reproduce(a) => cmd_reproduce(a, out),
    }
}

/// Parse `std::env::args`, run, and return the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ddshaper").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn minimal_waveform_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "[sequence]\nn_pulses = 1\ntau_ns = 25\nt_pi_ns = 25\n").unwrap();
        let out = dir.path().join("o");
        let cli = parse(&["--out", out.to_str().unwrap(), "waveform", "--config", cfg.to_str().unwrap()]);
        run(&cli).unwrap();
        let w = crate::envelope::read_waveform(&out.join("waveform.csv")).unwrap();
        assert_eq!(w.len(), 13);
    }

    #[test]
    fn unknown_key_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        fs::write(&cfg, "[sequence]\ntau_n = 25\n").unwrap();
        let cli = parse(&["waveform", "--config", cfg.to_str().unwrap()]);
        let e = run(&cli).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("tau_n"), "{}", e.message);
    }

    #[test]
    fn odd_n_on_resonance_cites_even_requirement() {
        let dir = tempfile::tempdir().unwrap();
        let cli = parse(&[
            "--out",
            dir.path().to_str().unwrap(),
            "filter",
            "--n-pulses",
            "7",
            "--tau-ns",
            "50",
            "--f-start-mhz",
            "9.99",
            "--f-stop-mhz",
            "10.01",
            "--n-points",
            "3",
        ]);
        let e = run(&cli).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("even"), "{}", e.message);
    }

    #[test]
    fn bad_value_names_its_key() {
        let cli = parse(&["response", "--tau-start-ns=-3"]);
        let e = run(&cli).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("scan.tau_start_ns"), "{}", e.message);
    }

    #[test]
    fn params_echo_reproduces_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        run(&parse(&[
            "--out",
            a.to_str().unwrap(),
            "response",
            "--n-pulses",
            "192",
            "--f-ac-mhz",
            "9.746969",
            "--b-ac-ut",
            "0.84",
            "--n-points",
            "31",
        ]))
        .unwrap();
        let params = a.join("params.json");
        run(&parse(&["--out", b.to_str().unwrap(), "response", "--config", params.to_str().unwrap()])).unwrap();
        let read = |d: &Path| fs::read_to_string(d.join("scan.csv")).unwrap();
        assert_eq!(read(&a), read(&b));
    }

    #[test]
    fn override_parsing() {
        assert_eq!(parse_override("n_points=5").unwrap(), ("n_points".into(), json!(5)));
        assert_eq!(parse_override("playback=sample_hold").unwrap().1, json!("sample_hold"));
        assert!(parse_override("oops").is_err());
    }
}

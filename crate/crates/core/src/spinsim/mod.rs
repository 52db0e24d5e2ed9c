//! Density-matrix simulation of the NV sensor spin coupled to a few 13C
//! nuclei under a full decoupling sequence.
//!
//! The NV is treated as a two-level system `{|0>, |1>}` in the frame
//! rotating with the drive. Each nucleus precesses at the bare Larmor
//! frequency when the NV is in `|0>` and about a tilted axis when it is in
//! `|1>`:
//!
//! ```text
//! H = (Delta/2) sz + (Omega/2)(cos(phi) sx + sin(phi) sy)
//!   + sum_j [ w_L Iz_j + |1><1| (a_par_j Iz_j + a_perp_j Ix_j) ]
//! ```
//!
//! Nuclei do not interact with each other.

mod sequence;
mod state;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{PulseShape, DEFAULT_SAMPLE_RATE};
use crate::error::{ensure_finite, Error, Result};

pub use sequence::{
    compare_pulse_shapes, sequence_response, spin_scan, PulseVariant, ShapeComparison, FIG_S1_VARIANTS,
};
pub use state::{propagate, unitary, CMatrix, HermitianExp, QuantumState, Segment, StateDiagnostics};

pub const MAX_NUCLEI: usize = 4;

/// 13C Larmor frequency used throughout the NMR examples, rad/s.
pub const C13_LARMOR: f64 = 2.0 * PI * 1.975e6;
/// 14N hyperfine shift of the NV line, rad/s.
pub const N14_DETUNING: f64 = 2.0 * PI * 2.16e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperfineCoupling {
    /// rad/s
    pub a_par: f64,
    /// rad/s, non-negative
    pub a_perp: f64,
}

impl HyperfineCoupling {
    pub fn new(a_par: f64, a_perp: f64) -> Self {
        HyperfineCoupling { a_par, a_perp }
    }

    /// The strongly coupled 13C of the NMR spectrum example.
    pub fn strong_c13() -> Self {
        HyperfineCoupling::new(2.0 * PI * 114e3, 2.0 * PI * 62e3)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuclearBath {
    pub larmor: f64,
    pub couplings: Vec<HyperfineCoupling>,
}

impl NuclearBath {
    pub fn new(larmor: f64, couplings: Vec<HyperfineCoupling>) -> Self {
        NuclearBath { larmor, couplings }
    }

    pub fn single(larmor: f64, coupling: HyperfineCoupling) -> Self {
        NuclearBath::new(larmor, vec![coupling])
    }

    pub fn n_nuclei(&self) -> usize {
        self.couplings.len()
    }

    /// Hilbert-space dimension including the NV.
    pub fn dim(&self) -> usize {
        2 << self.couplings.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(ensure_finite(self.larmor)? > 0.0) {
            return Err(Error::invalid("larmor", "must be positive"));
        }
        if self.couplings.is_empty() {
            return Err(Error::invalid("couplings", "need at least one nucleus"));
        }
        if self.couplings.len() > MAX_NUCLEI {
            return Err(Error::DimensionOverflow(self.couplings.len()));
        }
        for c in &self.couplings {
            ensure_finite(c.a_par)?;
            if !(ensure_finite(c.a_perp)? >= 0.0) {
                return Err(Error::invalid("a_perp", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Nuclear precession frequencies `(w0, w1)` of nucleus `j` for the NV in
    /// `|0>` and `|1>`, rad/s.
    pub fn conditional_frequencies(&self, j: usize) -> (f64, f64) {
        let c = self.couplings[j];
        (self.larmor, (self.larmor + c.a_par).hypot(c.a_perp))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseCycle {
    /// All pulses about +x.
    #[default]
    Cpmg,
    /// x y x y y x y x, repeated. Needs N divisible by 8.
    Xy8,
}

impl PhaseCycle {
    pub fn phase(self, k: usize) -> f64 {
        const XY8: [bool; 8] = [false, true, false, true, true, false, true, false];
        match self {
            PhaseCycle::Cpmg => 0.0,
            PhaseCycle::Xy8 => {
                if XY8[k % 8] {
                    PI / 2.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// How a cosine-square pulse reaches the spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Playback {
    /// Smooth envelope centred on each nominal pulse instant, sliced into
    /// `substeps_per_sample` segments per sample time.
    #[default]
    Continuous,
    /// The sampled DAC waveform of the whole train, each sample held for one
    /// sample time. Sub-sample timing enters through the amplitudes.
    SampleHold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Peak Rabi frequency, rad/s.
    pub rabi_peak: f64,
    /// NV resonance offset, rad/s.
    pub detuning: f64,
    /// Pulse FWHM, seconds.
    pub t_pi: f64,
    pub shape: PulseShape,
    pub substeps_per_sample: u32,
    pub sample_rate: f64,
    /// Round shaped envelopes to this many bits before playback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertical_bits: Option<u32>,
    #[serde(default)]
    pub phase_cycle: PhaseCycle,
    #[serde(default)]
    pub playback: Playback,
}

impl DriveParams {
    /// Drive whose peak Rabi frequency gives a pi rotation over `t_pi`.
    pub fn pi_matched(t_pi: f64, shape: PulseShape) -> Self {
        DriveParams {
            rabi_peak: PI / t_pi,
            detuning: 0.0,
            t_pi,
            shape,
            substeps_per_sample: 4,
            sample_rate: DEFAULT_SAMPLE_RATE,
            vertical_bits: None,
            phase_cycle: PhaseCycle::Cpmg,
            playback: Playback::Continuous,
        }
    }

    pub fn with_playback(mut self, playback: Playback) -> Self {
        self.playback = playback;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_shape(mut self, shape: PulseShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_vertical_bits(mut self, bits: Option<u32>) -> Self {
        self.vertical_bits = bits;
        self
    }

    pub fn with_substeps(mut self, substeps: u32) -> Self {
        self.substeps_per_sample = substeps;
        self
    }

    pub fn with_phase_cycle(mut self, cycle: PhaseCycle) -> Self {
        self.phase_cycle = cycle;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.detuning)?;
        if self.substeps_per_sample == 0 {
            return Err(Error::invalid("substeps_per_sample", "must be positive"));
        }
        if !(ensure_finite(self.sample_rate)? > 0.0) {
            return Err(Error::invalid("sample_rate", "must be positive"));
        }
        if self.shape != PulseShape::Ideal {
            if !(ensure_finite(self.t_pi)? > 0.0) {
                return Err(Error::invalid("t_pi", "must be positive"));
            }
            let area = ensure_finite(self.rabi_peak)? * self.t_pi;
            if (area - PI).abs() > 1e-12 {
                return Err(Error::invalid(
                    "rabi_peak",
                    format!("rabi_peak * t_pi = {area}, expected pi"),
                ));
            }
        }
        Ok(())
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn pauli(which: char) -> CMatrix {
    let z = c(0.0);
    let (a, b, cc, d) = match which {
        'x' => (z, c(1.0), c(1.0), z),
        'y' => (z, Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), z),
        'z' => (c(1.0), z, z, c(-1.0)),
        'i' => (c(1.0), z, z, c(1.0)),
        // |1><1| on the NV
        'p' => (z, z, z, c(1.0)),
        _ => unreachable!(),
    };
    CMatrix::from_row_slice(2, 2, &[a, b, cc, d])
}

/// Tensor product with `nv_op` on the NV and `nuc_op` on nucleus `j` (of `k`).
fn embed(nv_op: &CMatrix, nuc: Option<(usize, &CMatrix)>, k: usize) -> CMatrix {
    let id = pauli('i');
    let mut out = nv_op.clone();
    for i in 0..k {
        let factor = match nuc {
            Some((j, op)) if j == i => op,
            _ => &id,
        };
        out = out.kronecker(factor);
    }
    out
}

/// Drive-independent part of the Hamiltonian and the two drive quadratures,
/// so that `H = h0 + Omega/2 (cos(phi) x + sin(phi) y)`.
pub(crate) struct HamiltonianParts {
    pub h0: CMatrix,
    pub x: CMatrix,
    pub y: CMatrix,
}

impl HamiltonianParts {
    pub fn new(bath: &NuclearBath, detuning: f64) -> Result<Self> {
        bath.validate()?;
        let k = bath.n_nuclei();
        let half = c(0.5);
        let iz = pauli('z') * half;
        let ix = pauli('x') * half;
        let proj1 = pauli('p');
        let id = pauli('i');

        let mut h0 = embed(&pauli('z'), None, k) * c(detuning / 2.0);
        for (j, cp) in bath.couplings.iter().enumerate() {
            h0 += embed(&id, Some((j, &iz)), k) * c(bath.larmor);
            h0 += embed(&proj1, Some((j, &iz)), k) * c(cp.a_par);
            h0 += embed(&proj1, Some((j, &ix)), k) * c(cp.a_perp);
        }
        Ok(HamiltonianParts {
            h0,
            x: embed(&pauli('x'), None, k) * half,
            y: embed(&pauli('y'), None, k) * half,
        })
    }

    pub fn with_drive(&self, amplitude: f64, phase: f64) -> CMatrix {
        if amplitude == 0.0 {
            return self.h0.clone();
        }
        let (s, co) = phase.sin_cos();
        &self.h0 + &self.x * c(amplitude * co) + &self.y * c(amplitude * s)
    }

    /// Drive term alone, for instantaneous pulses.
    pub fn drive_only(&self, amplitude: f64, phase: f64) -> CMatrix {
        let (s, co) = phase.sin_cos();
        &self.x * c(amplitude * co) + &self.y * c(amplitude * s)
    }
}

/// Full rotating-frame Hamiltonian for a given instantaneous drive.
pub fn build_hamiltonian(
    bath: &NuclearBath,
    drive_amplitude: f64,
    drive_phase: f64,
    detuning: f64,
) -> Result<CMatrix> {
    ensure_finite(drive_amplitude)?;
    ensure_finite(drive_phase)?;
    ensure_finite(detuning)?;
    Ok(HamiltonianParts::new(bath, detuning)?.with_drive(drive_amplitude, drive_phase))
}

/// `sigma_x` on the NV, identity on the nuclei.
pub fn nv_sigma_x(n_nuclei: usize) -> CMatrix {
    embed(&pauli('x'), None, n_nuclei)
}

/// NV in `(|0> + |1>)/sqrt(2)`, nuclei maximally mixed.
pub fn initial_state(n_nuclei: usize) -> QuantumState {
    let plus = CMatrix::from_element(2, 2, c(0.5));
    let dim_n = 1usize << n_nuclei;
    let mixed = CMatrix::identity(dim_n, dim_n) * c(1.0 / dim_n as f64);
    QuantumState {
        rho: plus.kronecker(&mixed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn bare_larmor_spectrum() {
        let bath = NuclearBath::single(3.0, HyperfineCoupling::new(0.0, 0.0));
        let h = build_hamiltonian(&bath, 0.0, 0.0, 0.0).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.5, -1.5, 1.5, 1.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_frequency_of_strong_c13() {
        let bath = NuclearBath::single(C13_LARMOR, HyperfineCoupling::strong_c13());
        let (w0, w1) = bath.conditional_frequencies(0);
        assert_eq!(w0, C13_LARMOR);
        // sqrt(2.089^2 + 0.062^2) MHz
        assert!((w1 / (2.0 * PI) - 2.089_919_854_922_67e6).abs() < 1e-3);

        // the |1> block of H has eigenvalues +-w1/2
        let h = build_hamiltonian(&bath, 0.0, 0.0, 0.0).unwrap();
        let block = h.view((2, 2), (2, 2)).into_owned();
        let ev = SymmetricEigen::new(block).eigenvalues;
        assert!((ev.max() - w1 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_cap() {
        let bath = NuclearBath::new(1.0, vec![HyperfineCoupling::new(0.1, 0.1); 5]);
        assert!(matches!(
            build_hamiltonian(&bath, 0.0, 0.0, 0.0),
            Err(Error::DimensionOverflow(5))
        ));
        let bath = NuclearBath::new(1.0, vec![HyperfineCoupling::new(0.1, 0.1); 4]);
        assert_eq!(build_hamiltonian(&bath, 1.0, 0.3, 0.2).unwrap().nrows(), 32);
    }

    #[test]
    fn rejects_negative_perp() {
        let bath = NuclearBath::single(1.0, HyperfineCoupling::new(0.1, -0.1));
        assert!(build_hamiltonian(&bath, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn initial_state_is_normalised_and_pure_on_nv() {
        let s = initial_state(2);
        assert_eq!(s.dim(), 8);
        assert!((s.trace().re - 1.0).abs() < 1e-15);
        assert!((s.expectation(&nv_sigma_x(2)) - 1.0).abs() < 1e-15);
        assert!((s.purity() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn drive_validation() {
        let d = DriveParams::pi_matched(25e-9, PulseShape::CosineSquare);
        assert!(d.validate().is_ok());
        let mut bad = d.clone();
        bad.rabi_peak *= 1.001;
        assert!(bad.validate().is_err());
        assert!(d.clone().with_substeps(0).validate().is_err());
    }

    #[test]
    fn xy8_pattern() {
        let phases: Vec<f64> = (0..8).map(|k| PhaseCycle::Xy8.phase(k)).collect();
        assert_eq!(phases, vec![0.0, PI / 2.0, 0.0, PI / 2.0, PI / 2.0, 0.0, PI / 2.0, 0.0]);
        assert_eq!(PhaseCycle::Cpmg.phase(5), 0.0);
    }
}

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const HERMITICITY_TOL: f64 = 1e-12;
pub(crate) const UNITARITY_TOL: f64 = 1e-10;

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_deviation(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    max_deviation(m, &m.adjoint())
}

/// Density matrix of the NV + nuclear register.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub rho: CMatrix,
}

/// Deviations of a state from a proper density matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StateDiagnostics {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
}

impl QuantumState {
    pub fn from_density(rho: CMatrix) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows(),
                found: rho.ncols(),
            });
        }
        Ok(QuantumState { rho })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        let herm = hermiticity_error(&self.rho);
        let sym = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        let min_eigenvalue = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        StateDiagnostics {
            hermiticity: herm,
            trace_error: (self.trace() - Complex64::new(1.0, 0.0)).norm(),
            min_eigenvalue,
            purity: self.purity(),
        }
    }

    /// `rho <- U rho U^dagger`.
    pub fn evolve(&mut self, u: &CMatrix) {
        self.rho = u * &self.rho * u.adjoint();
    }

    /// `Re tr(rho * op)`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (&self.rho * op).trace().re
    }
}

/// Eigendecomposition of a Hermitian generator, reusable for any duration.
#[derive(Clone, Debug)]
pub struct HermitianExp {
    vectors: CMatrix,
    values: DVector<f64>,
}

impl HermitianExp {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                found: h.ncols(),
            });
        }
        let dev = hermiticity_error(h);
        if dev > HERMITICITY_TOL * (1.0 + max_abs(h)) {
            return Err(Error::NonHermitian(dev));
        }
        let eig = SymmetricEigen::new(h.clone());
        Ok(HermitianExp {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    /// `exp(-i H t)`, checked for unitarity.
    pub fn unitary(&self, t: f64) -> Result<CMatrix> {
        let phases = self.values.map(|l| Complex64::from_polar(1.0, -l * t));
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        let u = scaled * self.vectors.adjoint();
        let dev = unitarity_error(&u);
        if dev > UNITARITY_TOL {
            return Err(Error::NonUnitary(dev));
        }
        Ok(u)
    }
}

pub(crate) fn unitarity_error(u: &CMatrix) -> f64 {
    let id = CMatrix::identity(u.nrows(), u.ncols());
    max_deviation(&(u * u.adjoint()), &id)
}

/// `exp(-i H t)` for a Hermitian `H`.
pub fn unitary(h: &CMatrix, t: f64) -> Result<CMatrix> {
    HermitianExp::new(h)?.unitary(t)
}

/// One piece of a piecewise-constant Hamiltonian.
#[derive(Clone, Debug)]
pub struct Segment {
    pub hamiltonian: CMatrix,
    pub duration: f64,
}

/// Apply each segment's `exp(-i H dt)` in order.
pub fn propagate(state: &QuantumState, schedule: &[Segment]) -> Result<QuantumState> {
    let mut out = state.clone();
    for seg in schedule {
        if !(seg.duration > 0.0) || !seg.duration.is_finite() {
            return Err(Error::invalid("duration", format!("{} is not positive", seg.duration)));
        }
        if seg.hamiltonian.nrows() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.dim(),
                found: seg.hamiltonian.nrows(),
            });
        }
        let u = unitary(&seg.hamiltonian, seg.duration)?;
        out.evolve(&u);
    }
    Ok(out)
}

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pulse shape `ideal` has no sampled representation")]
    NoSampledRepresentation,

    #[error("pulses overlap: tau = {tau:e} s is shorter than t_pi = {t_pi:e} s")]
    PulseOverlap { tau: f64, t_pi: f64 },

    #[error("carrier at {carrier_hz} Hz aliases at sample rate {sample_rate_hz} Hz (Nyquist is {} Hz)", sample_rate_hz / 2.0)]
    Aliasing { carrier_hz: f64, sample_rate_hz: f64 },

    #[error("filter weight limit at resonance is undefined for odd N = {n_pulses}; N must be even")]
    OddPulseCount { n_pulses: u32 },

    #[error("no pulse lobe found in period {period}")]
    NoLobe { period: usize },

    #[error("lobe has no half-maximum crossing on the {side} side")]
    TruncatedLobe { side: &'static str },

    #[error("non-finite input {0}")]
    NonFinite(f64),

    #[error("bath has {0} nuclei; at most {max} are supported", max = crate::spinsim::MAX_NUCLEI)]
    DimensionOverflow(usize),

    #[error("matrix dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("hamiltonian is not hermitian (deviation {0:e})")]
    NonHermitian(f64),

    #[error("propagator is not unitary (deviation {0:e})")]
    NonUnitary(f64),

    #[error("scan has no interior minimum")]
    NoInteriorMinimum,

    #[error("unknown parameter `{key}` for experiment `{kind}`")]
    UnknownParameter { kind: String, key: String },

    #[error("malformed waveform file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(x))
    }
}

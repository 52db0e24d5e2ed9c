//! Shaped dynamical-decoupling pulse trains and the response of a single
//! spin sensor to them.
//!
//! - [`envelope`]: cosine-square and square envelopes on a DAC grid,
//!   quantization, carrier modulation, lobe analysis and file export.
//! - [`analytic`]: frequency increments, the sequence filter function and
//!   the Bessel response to unsynchronized AC fields.
//! - [`spinsim`]: density-matrix simulation of the NV coupled to 13C nuclei
//!   with ideal, square or shaped pulses.
//! - [`harness`]: figure-level experiment runners.
//! - [`cli`]: the `ddshaper` command line.
//!
//! Every quantity is SI: seconds, hertz, tesla, and rad/s for angular
//! frequencies.

pub mod analytic;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod harness;
pub mod spinsim;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Write `bytes` to a temp file next to `path` and rename it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("path", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

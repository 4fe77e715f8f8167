//! Text formats: scenario configuration, observed series, trajectory files.

pub mod config;
pub mod series;
pub mod trajectory;

use std::path::Path;

use crate::error::{Result, SvirError};

/// Rounds to 10 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

/// Shortest decimal rendering of `x` rounded to 10 significant digits,
/// in exponent form outside `[1e-5, 1e16)`. Non-finite values render as
/// `NaN`, `inf`, `-inf`.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".to_string()
    } else if r.is_finite() && !(1e-5..1e16).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| SvirError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| SvirError::Io {
        path: path.display().to_string(),
        source,
    })
}

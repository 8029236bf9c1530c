//! File formats: facts, matrices, result tables, heatmaps, and experiment
//! configs.
//!
//! Every format starts with a version comment, every writer goes through an
//! atomic temp-then-rename, and every output is a pure function of its
//! inputs, so identical data always produces byte-identical files.

mod config;
mod facts;
mod matrix;
mod pgm;
mod results;

pub use config::{load_config, parse_config_str};
pub use facts::{load_facts, write_facts};
pub use matrix::{read_matrix, write_matrix};
pub use pgm::{export_heatmap, HeatmapMode};
pub use results::{read_results, write_results, ResultTable};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Write a file atomically: the payload lands in a sibling temp file that is
/// renamed over the destination.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let label = path.display().to_string();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&label, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(&label, e))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Plain-decimal rendering at six significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag >= 5 {
        let scale = 10f64.powi(mag - 5);
        format!("{:.0}", (x / scale).round() * scale)
    } else {
        format!("{:.*}", (5 - mag) as usize, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.0), "0.00000");
        assert_eq!(fmt_sig6(1.0), "1.00000");
        assert_eq!(fmt_sig6(0.077), "0.0770000");
        assert_eq!(fmt_sig6(63247.5), "63247.5");
        assert_eq!(fmt_sig6(-0.5), "-0.500000");
        assert_eq!(fmt_sig6(123456789.0), "123457000");
        assert_eq!(fmt_sig6(0.7281234), "0.728123");
    }
}

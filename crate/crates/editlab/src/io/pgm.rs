//! Heatmap export as plain-text portable graymaps (PGM, magic `P2`).

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// How matrix entries map to gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapMode {
    /// Scale absolute values: pixel = round(255 * |v| / max |v|).
    Abs,
    /// Scale raw values: pixel = round(255 * v / max v), negatives clamp to
    /// black.
    Raw,
}

impl HeatmapMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            HeatmapMode::Abs => "abs",
            HeatmapMode::Raw => "raw",
        }
    }
}

impl std::str::FromStr for HeatmapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" => Ok(HeatmapMode::Abs),
            "raw" => Ok(HeatmapMode::Raw),
            other => Err(Error::UnknownName {
                what: "heatmap mode",
                value: other.to_string(),
            }),
        }
    }
}

/// Render a matrix as a maxval-255 plain PGM.
///
/// A constant matrix (no variation, including all-zero) renders as all-black
/// with the constant recorded in the `maxvalue` comment. Scaling is monotone:
/// a larger value never maps to a darker pixel.
pub fn export_heatmap(matrix: &DMatrix<f64>, path: &Path, mode: HeatmapMode) -> Result<()> {
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if !matrix.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("heatmap matrix"));
    }

    let values = match mode {
        HeatmapMode::Abs => matrix.map(f64::abs),
        HeatmapMode::Raw => matrix.clone(),
    };
    let max = values.max();
    let min = values.min();
    let constant = max == min;

    let mut out = String::from("P2\n");
    out.push_str(&format!(
        "# editlab heatmap v1 mode={} maxvalue={max}\n",
        mode.as_str()
    ));
    out.push_str(&format!("{} {}\n255\n", matrix.ncols(), matrix.nrows()));

    let mut line = String::new();
    let flush = |line: &mut String, out: &mut String| {
        if !line.is_empty() {
            out.push_str(line);
            out.push('\n');
            line.clear();
        }
    };
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            let pixel = if constant || max <= 0.0 {
                0u32
            } else {
                (255.0 * values[(i, j)] / max).round().clamp(0.0, 255.0) as u32
            };
            let token = pixel.to_string();
            // Plain PGM lines stay within 70 characters.
            if !line.is_empty() && line.len() + 1 + token.len() > 70 {
                flush(&mut line, &mut out);
            }
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&token);
        }
    }
    flush(&mut line, &mut out);

    super::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(matrix: &DMatrix<f64>, mode: HeatmapMode) -> String {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        export_heatmap(matrix, &path, mode).unwrap();
        std::fs::read_to_string(&path).unwrap()
    }

    fn pixels(pgm: &str) -> Vec<u32> {
        pgm.lines()
            .skip(4)
            .flat_map(|l| l.split_whitespace().map(|t| t.parse().unwrap()))
            .collect()
    }

    #[test]
    fn zero_matrix_renders_black() {
        let text = render(&DMatrix::zeros(3, 3), HeatmapMode::Abs);
        assert!(text.starts_with("P2\n"));
        assert!(pixels(&text).iter().all(|&p| p == 0));
    }

    #[test]
    fn endpoints_map_to_zero_and_full_scale() {
        let m = DMatrix::from_row_slice(1, 2, &[0.0, 7.5]);
        assert_eq!(pixels(&render(&m, HeatmapMode::Abs)), vec![0, 255]);
    }

    #[test]
    fn constant_matrix_is_black_with_recorded_maxvalue() {
        let text = render(&DMatrix::from_element(2, 2, 3.25), HeatmapMode::Abs);
        assert!(text.contains("maxvalue=3.25"));
        assert!(pixels(&text).iter().all(|&p| p == 0));
    }

    #[test]
    fn abs_mode_is_monotone_in_magnitude() {
        let m = DMatrix::from_row_slice(1, 4, &[-4.0, 1.0, -2.0, 3.0]);
        let p = pixels(&render(&m, HeatmapMode::Abs));
        assert_eq!(p, vec![255, 64, 128, 191]);
    }

    #[test]
    fn raw_mode_clamps_negatives() {
        let m = DMatrix::from_row_slice(1, 3, &[-1.0, 0.0, 2.0]);
        assert_eq!(pixels(&render(&m, HeatmapMode::Raw)), vec![0, 0, 255]);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        assert!(matches!(
            export_heatmap(&DMatrix::zeros(0, 0), &path, HeatmapMode::Abs),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            export_heatmap(
                &DMatrix::from_element(1, 1, f64::INFINITY),
                &path,
                HeatmapMode::Abs
            ),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn lines_stay_within_70_characters() {
        let m = DMatrix::from_fn(16, 16, |i, j| (i * 16 + j) as f64);
        let text = render(&m, HeatmapMode::Abs);
        assert!(text.lines().all(|l| l.len() <= 70));
        assert_eq!(pixels(&text).len(), 256);
    }
}

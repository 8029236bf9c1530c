//! Edit-update regularizers.
//!
//! The central operation is [`rect_mask`]: rank the entries of an update
//! delta by the relative change delta_ij = |dW_ij| / max(|W_ij|, epsilon),
//! keep the top-k% at their original values and zero the rest. [`random_mask`]
//! and [`pca_mask`] are the matching retention baselines.
//!
//! All masks keep exactly ceil(k/100 * size) positions and break score ties
//! by ascending (row, col) index, so every run is reproducible and the
//! retained sets nest as k grows.

use nalgebra::DMatrix;
use rand::seq::index::sample;

use crate::editors::WeightDelta;
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Which retention mask to apply to an update delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMethod {
    /// Keep the full delta.
    None,
    /// Keep the top-k% entries by relative change.
    Rect,
    /// Keep a seeded uniform k% of entries.
    Random,
    /// Rank-truncate via SVD, then keep the top-k% entries of the
    /// reconstruction by absolute value.
    Pca,
}

impl MaskMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskMethod::None => "none",
            MaskMethod::Rect => "rect",
            MaskMethod::Random => "random",
            MaskMethod::Pca => "pca",
        }
    }
}

impl std::fmt::Display for MaskMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MaskMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MaskMethod::None),
            "rect" => Ok(MaskMethod::Rect),
            "random" => Ok(MaskMethod::Random),
            "pca" => Ok(MaskMethod::Pca),
            other => Err(Error::UnknownName {
                what: "mask method",
                value: other.to_string(),
            }),
        }
    }
}

/// Mask selection plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub method: MaskMethod,
    /// Retention fraction in percent, in (0, 100].
    pub k_percent: f64,
    /// Seed for the random mask; the edited layer index is mixed in so
    /// multi-layer updates draw distinct masks.
    pub seed: u64,
    /// Floor for the relative-change denominator.
    pub epsilon: f64,
}

impl RegularizerSpec {
    pub fn none() -> Self {
        RegularizerSpec {
            method: MaskMethod::None,
            k_percent: 100.0,
            seed: 0,
            epsilon: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.k_percent.is_finite() || self.k_percent <= 0.0 || self.k_percent > 100.0 {
            return Err(Error::InvalidKPercent(self.k_percent));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        Ok(())
    }
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        RegularizerSpec::none()
    }
}

/// Elementwise relative change of an update against the weight it is added
/// to. Non-negative and finite everywhere thanks to the epsilon floor.
#[derive(Debug, Clone, PartialEq)]
pub struct RelChangeMatrix {
    pub delta_rel: DMatrix<f64>,
}

/// delta_ij = |dW_ij| / max(|W_ij|, epsilon).
///
/// Entries where the original weight is (near) zero rank maximal: a nonzero
/// update on top of nothing is the largest relative change expressible.
pub fn relative_change(
    weight: &DMatrix<f64>,
    delta: &DMatrix<f64>,
    epsilon: f64,
) -> Result<RelChangeMatrix> {
    if weight.shape() != delta.shape() {
        return Err(shape_mismatch(weight, delta));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let delta_rel = delta.zip_map(weight, |d, w| d.abs() / w.abs().max(epsilon));
    Ok(RelChangeMatrix { delta_rel })
}

/// Number of entries retained for a matrix of `size` entries at `k_percent`.
pub fn retained_count(size: usize, k_percent: f64) -> usize {
    ((k_percent * size as f64 / 100.0).ceil() as usize).min(size)
}

/// Keep exactly the top-k% entries of `delta` by relative change, ties
/// broken by ascending (row, col); everything else becomes exactly zero.
pub fn rect_mask(
    delta: &DMatrix<f64>,
    delta_rel: &RelChangeMatrix,
    k_percent: f64,
) -> Result<DMatrix<f64>> {
    if delta.shape() != delta_rel.delta_rel.shape() {
        return Err(shape_mismatch(delta, &delta_rel.delta_rel));
    }
    check_k(k_percent)?;
    if k_percent == 100.0 {
        return Ok(delta.clone());
    }
    let n_keep = retained_count(delta.len(), k_percent);
    Ok(keep_top_entries(delta, &delta_rel.delta_rel, n_keep))
}

/// Keep a seeded uniform choice of exactly k% of the entries.
pub fn random_mask(delta: &DMatrix<f64>, k_percent: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_k(k_percent)?;
    if k_percent == 100.0 {
        return Ok(delta.clone());
    }
    let size = delta.len();
    let n_keep = retained_count(size, k_percent);
    let mut rng = rng_for("random-mask", &[&seed.to_le_bytes()]);
    let cols = delta.ncols();
    let mut kept = DMatrix::zeros(delta.nrows(), cols);
    for flat in sample(&mut rng, size, n_keep) {
        let (i, j) = (flat / cols, flat % cols);
        kept[(i, j)] = delta[(i, j)];
    }
    Ok(kept)
}

/// Best rank-`rank` approximation of a matrix via SVD truncation.
pub fn rank_truncate(matrix: &DMatrix<f64>, rank: usize) -> Result<DMatrix<f64>> {
    let mut svd = matrix.clone().svd(true, true);
    for i in rank..svd.singular_values.len() {
        svd.singular_values[i] = 0.0;
    }
    svd.recompose().map_err(|_| Error::SingularSystem)
}

/// Compress the update into k% of its entries via PCA: reconstruct at rank
/// max(1, round(k/100 * min(rows, cols))), then keep the top-k% entries of
/// the reconstruction by absolute value (same tie rule as [`rect_mask`]).
pub fn pca_mask(delta: &DMatrix<f64>, k_percent: f64) -> Result<DMatrix<f64>> {
    check_k(k_percent)?;
    let min_dim = delta.nrows().min(delta.ncols());
    let rank = ((k_percent * min_dim as f64 / 100.0).round() as usize).clamp(1, min_dim);
    let recon = rank_truncate(delta, rank)?;
    let n_keep = retained_count(delta.len(), k_percent);
    let scores = recon.map(f64::abs);
    Ok(keep_top_entries(&recon, &scores, n_keep))
}

/// Apply the configured mask to one layer's update. `weight_original` is the
/// weight the delta will be added to; only the relative-change mask reads it.
pub fn regularize(
    delta: &WeightDelta,
    spec: &RegularizerSpec,
    weight_original: &DMatrix<f64>,
) -> Result<WeightDelta> {
    spec.validate()?;
    if weight_original.shape() != delta.delta.shape() {
        return Err(shape_mismatch(weight_original, &delta.delta));
    }
    let masked = match spec.method {
        MaskMethod::None => return Ok(delta.clone()),
        MaskMethod::Rect => {
            let rel = relative_change(weight_original, &delta.delta, spec.epsilon)?;
            rect_mask(&delta.delta, &rel, spec.k_percent)?
        }
        MaskMethod::Random => random_mask(
            &delta.delta,
            spec.k_percent,
            spec.seed.wrapping_add(delta.layer_index as u64),
        )?,
        MaskMethod::Pca => pca_mask(&delta.delta, spec.k_percent)?,
    };
    WeightDelta::new(delta.layer_index, masked)
}

fn check_k(k_percent: f64) -> Result<()> {
    if !k_percent.is_finite() || k_percent <= 0.0 || k_percent > 100.0 {
        return Err(Error::InvalidKPercent(k_percent));
    }
    Ok(())
}

fn shape_mismatch(expected: &DMatrix<f64>, got: &DMatrix<f64>) -> Error {
    Error::ShapeMismatch {
        expected_rows: expected.nrows(),
        expected_cols: expected.ncols(),
        rows: got.nrows(),
        cols: got.ncols(),
    }
}

/// Copy the `n_keep` highest-scoring entries of `source` into a zero matrix.
/// Ordering: score descending, then (row, col) ascending.
fn keep_top_entries(
    source: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    n_keep: usize,
) -> DMatrix<f64> {
    let (rows, cols) = source.shape();
    let mut ranked: Vec<(usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .collect();
    ranked.sort_by(|&(ai, aj), &(bi, bj)| {
        scores[(bi, bj)]
            .partial_cmp(&scores[(ai, aj)])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((ai, aj).cmp(&(bi, bj)))
    });
    let mut kept = DMatrix::zeros(rows, cols);
    for &(i, j) in ranked.iter().take(n_keep) {
        kept[(i, j)] = source[(i, j)];
    }
    kept
}

//! Weight-update editors for the toy model.
//!
//! Three locate-then-edit styles are provided: a rank-one key -> value
//! insertion ([`rome_delta`]), a neuron-restricted column update
//! ([`kn_delta`]), and an ascending multi-layer batch spread
//! ([`memit_delta`]). All of them produce additive [`WeightDelta`]s; a model
//! is only ever modified by [`apply`], which returns a fresh copy.
//!
//! Every editor weights its solve by the key covariance C = K K^T + lambda_c I
//! over the keys the target layer saw at build time, so updates stay small in
//! the directions the stored facts occupy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{embed_token, EditFact, ToyModel};

/// One layer's additive update.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDelta {
    pub layer_index: usize,
    pub delta: DMatrix<f64>,
}

impl WeightDelta {
    pub fn new(layer_index: usize, delta: DMatrix<f64>) -> Result<Self> {
        if !delta.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("weight delta"));
        }
        Ok(WeightDelta { layer_index, delta })
    }
}

/// A batch of facts inserted by one editing operation; N = 1 is
/// instance-editing.
#[derive(Debug, Clone, PartialEq)]
pub struct EditBatch {
    facts: Vec<EditFact>,
}

impl EditBatch {
    pub fn new(facts: Vec<EditFact>) -> Result<Self> {
        if facts.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut ids = std::collections::BTreeSet::new();
        for fact in &facts {
            fact.validate()?;
            if !ids.insert(fact.id) {
                return Err(Error::DuplicateFactId(fact.id));
            }
        }
        Ok(EditBatch { facts })
    }

    pub fn facts(&self) -> &[EditFact] {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

/// Key covariance at a layer: C = K K^T + lambda_c I over the layer's
/// build-time inputs. lambda_c > 0 keeps C positive definite.
fn key_covariance(model: &ToyModel, layer: usize, lambda_c: f64) -> Result<DMatrix<f64>> {
    if lambda_c <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "key covariance lambda must be > 0, got {lambda_c}"
        )));
    }
    let keys = model.stored_inputs(layer)?;
    let dim = keys.nrows();
    Ok(keys * keys.transpose() + DMatrix::identity(dim, dim) * lambda_c)
}

/// The (layer input, layer output target) pair for editing one fact at one
/// layer. The full remaining output error is back-assigned to this layer's
/// output, so for the final layer the target is exactly the new object
/// embedding.
fn edit_point(
    model: &ToyModel,
    layer: usize,
    fact: &EditFact,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let key = model.key_for(fact)?;
    let k = model.layer_input(&key, layer)?;
    if k.norm() == 0.0 {
        return Err(Error::ZeroKey);
    }
    let z = embed_token(&fact.object_new, model.dim(), model.seed())?;
    let final_out = model.forward(&key)?;
    let layer_out = model.layer(layer)? * &k;
    let target = layer_out + (z - final_out);
    Ok((k, target))
}

/// Closed-form rank-one insertion of one fact at one layer:
/// delta = (v - W k) (C^-1 k)^T / (k^T C^-1 k).
///
/// The update is exact at the edited key: (W + delta) k = v.
pub fn rome_delta(
    model: &ToyModel,
    layer: usize,
    fact: &EditFact,
    lambda_c: f64,
) -> Result<WeightDelta> {
    let cov = key_covariance(model, layer, lambda_c)?;
    let chol = cov.cholesky().ok_or(Error::SingularSystem)?;
    let (k, target) = edit_point(model, layer, fact)?;
    let residual = target - model.layer(layer)? * &k;
    let cinv_k = chol.solve(&k);
    let denom = k.dot(&cinv_k);
    if denom <= 0.0 {
        return Err(Error::SingularSystem);
    }
    WeightDelta::new(layer, residual * (cinv_k / denom).transpose())
}

/// Neuron-restricted update: pick the `m` input neurons with the largest
/// attribution proxy |k_j| * ||W[:, j]||, then solve the least-squares update
/// supported on those columns only, scaled by `alpha`.
pub fn kn_delta(
    model: &ToyModel,
    layer: usize,
    fact: &EditFact,
    m: usize,
    alpha: f64,
) -> Result<WeightDelta> {
    let weight = model.layer(layer)?;
    let (d_out, d_in) = weight.shape();
    if m < 1 || m > d_in {
        return Err(Error::NeuronCountOutOfRange { m, d_in });
    }
    let (k, target) = edit_point(model, layer, fact)?;

    let mut scored: Vec<(usize, f64)> = (0..d_in)
        .map(|j| (j, k[j].abs() * weight.column(j).norm()))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let support: Vec<usize> = scored[..m].iter().map(|&(j, _)| j).collect();

    let mass: f64 = support.iter().map(|&j| k[j] * k[j]).sum();
    if mass <= 1e-12 {
        return Err(Error::DegenerateSupport);
    }

    // Least-norm solution of delta k = residual restricted to the support
    // columns: column j gets residual * k_j / mass.
    let residual = target - weight * &k;
    let mut delta = DMatrix::zeros(d_out, d_in);
    for &j in &support {
        delta.set_column(j, &(&residual * (alpha * k[j] / mass)));
    }
    WeightDelta::new(layer, delta)
}

/// Multi-layer batch editor: walks `layers` in ascending order, assigns each
/// fact 1/(remaining layers) of its current output error at that layer, and
/// solves the batch system exactly in the C-weighted least-norm sense:
/// delta = R (K^T C^-1 K)^-1 K^T C^-1, so delta K = R.
///
/// When the last edited layer is the model's final layer the batch facts land
/// exactly on their new object embeddings.
pub fn memit_delta(
    model: &ToyModel,
    layers: &[usize],
    batch: &EditBatch,
    lambda_c: f64,
) -> Result<Vec<WeightDelta>> {
    if layers.is_empty() {
        return Err(Error::InvalidConfig("edit layer set must be non-empty".into()));
    }
    if !layers.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "edit layers must be strictly ascending".into(),
        ));
    }
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }

    let dim = model.dim();
    let n = batch.len();
    let mut work = model.clone();
    let mut deltas = Vec::with_capacity(layers.len());

    for (pos, &layer) in layers.iter().enumerate() {
        let remaining = (layers.len() - pos) as f64;
        let weight = work.layer(layer)?.clone();

        let mut keys = DMatrix::zeros(dim, n);
        let mut residuals = DMatrix::zeros(dim, n);
        for (i, fact) in batch.facts().iter().enumerate() {
            let prompt_key = work.key_for(fact)?;
            let k = work.layer_input(&prompt_key, layer)?;
            if k.norm() == 0.0 {
                return Err(Error::ZeroKey);
            }
            let z = embed_token(&fact.object_new, dim, work.seed())?;
            let err = z - work.forward(&prompt_key)?;
            keys.set_column(i, &k);
            residuals.set_column(i, &(err / remaining));
        }

        let cov = key_covariance(&work, layer, lambda_c)?;
        let cinv_keys = cov
            .cholesky()
            .ok_or(Error::SingularSystem)?
            .solve(&keys);
        let gram = keys.transpose() * &cinv_keys;
        let solved = gram
            .cholesky()
            .ok_or(Error::SingularSystem)?
            .solve(&cinv_keys.transpose());
        let delta = &residuals * solved;

        *work.layer_mut(layer)? = weight + &delta;
        deltas.push(WeightDelta::new(layer, delta)?);
    }

    Ok(deltas)
}

/// Add deltas to a copy of the model: W_l <- W_l + delta_l. The input model
/// is untouched; sequential edits compose by repeated application.
pub fn apply(model: &ToyModel, deltas: &[WeightDelta]) -> Result<ToyModel> {
    let mut edited = model.clone();
    for delta in deltas {
        let weight = edited.layer_mut(delta.layer_index)?;
        if weight.shape() != delta.delta.shape() {
            return Err(Error::ShapeMismatch {
                expected_rows: weight.nrows(),
                expected_cols: weight.ncols(),
                rows: delta.delta.nrows(),
                cols: delta.delta.ncols(),
            });
        }
        *weight += &delta.delta;
    }
    Ok(edited)
}

//! Deterministic associative toy model.
//!
//! Facts of the form (subject, relation, object) are stored as key -> value
//! associations in a small stack of linear layers with a rectifier between
//! them (none after the last). Keys come from token embeddings, values are
//! object embeddings, and every layer is fitted in closed form by ridge
//! regression, so an identical (facts, params) pair always builds a
//! bit-identical model.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{rng_for, unit_vector};

/// Decode vocabulary: object token -> unit-norm embedding.
///
/// A `BTreeMap` keeps iteration in lexicographic token order, which is what
/// gives [`decode`] its deterministic tie-breaking.
pub type Vocab = BTreeMap<String, DVector<f64>>;

/// One knowledge tuple: replace `object_old` with `object_new` for the
/// prompt (`subject`, `relation`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditFact {
    pub subject: String,
    pub relation: String,
    pub object_old: String,
    pub object_new: String,
    pub id: u64,
}

impl EditFact {
    pub fn new(
        id: u64,
        subject: impl Into<String>,
        relation: impl Into<String>,
        object_old: impl Into<String>,
        object_new: impl Into<String>,
    ) -> Result<Self> {
        let fact = EditFact {
            subject: subject.into(),
            relation: relation.into(),
            object_old: object_old.into(),
            object_new: object_new.into(),
            id,
        };
        fact.validate()?;
        Ok(fact)
    }

    /// Check the per-fact invariants: non-empty tokens, old != new.
    pub fn validate(&self) -> Result<()> {
        if self.subject.is_empty()
            || self.relation.is_empty()
            || self.object_old.is_empty()
            || self.object_new.is_empty()
        {
            return Err(Error::EmptyToken);
        }
        if self.object_old == self.object_new {
            return Err(Error::InvalidConfig(format!(
                "fact {}: object_old and object_new must differ",
                self.id
            )));
        }
        Ok(())
    }
}

/// Build-time parameters for [`build_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Embedding width d.
    pub dim: usize,
    /// Number of linear layers (all d x d).
    pub n_layers: usize,
    /// Ridge coefficient for the closed-form layer fits.
    pub ridge_lambda: f64,
    /// Seed controlling all embedding and target randomness.
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            dim: 64,
            n_layers: 1,
            ridge_lambda: 1e-3,
            seed: 0,
        }
    }
}

/// Stack of linear maps acting as a fact store; the substrate that editors
/// modify.
///
/// All state is immutable after construction. `stored_inputs` keeps the
/// per-layer input matrices seen while fitting; editors use them as the key
/// statistics for their covariance terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    layers: Vec<DMatrix<f64>>,
    dim: usize,
    vocab: Vocab,
    seed: u64,
    stored_inputs: Vec<DMatrix<f64>>,
}

impl ToyModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> Result<&DMatrix<f64>> {
        self.layers.get(index).ok_or(Error::LayerOutOfRange {
            index,
            count: self.layers.len(),
        })
    }

    pub(crate) fn layer_mut(&mut self, index: usize) -> Result<&mut DMatrix<f64>> {
        let count = self.layers.len();
        self.layers
            .get_mut(index)
            .ok_or(Error::LayerOutOfRange { index, count })
    }

    /// Object-token decode vocabulary.
    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Inputs the given layer saw during the build-time fit (d x n).
    pub fn stored_inputs(&self, layer: usize) -> Result<&DMatrix<f64>> {
        self.stored_inputs.get(layer).ok_or(Error::LayerOutOfRange {
            index: layer,
            count: self.stored_inputs.len(),
        })
    }

    /// Key vector for a fact's (subject, relation) prompt:
    /// normalize(embed(subject) + embed(relation)).
    pub fn key_for(&self, fact: &EditFact) -> Result<DVector<f64>> {
        let sum = embed_token(&fact.subject, self.dim, self.seed)?
            + embed_token(&fact.relation, self.dim, self.seed)?;
        let norm = sum.norm();
        if norm <= 1e-12 {
            return Err(Error::ZeroKey);
        }
        Ok(sum / norm)
    }

    /// Pure forward pass: v1 = W1 x, then v = W * rect(v) per layer, no
    /// rectifier after the last layer.
    pub fn forward(&self, input: &DVector<f64>) -> Result<DVector<f64>> {
        if input.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: input.len(),
            });
        }
        let mut v = &self.layers[0] * input;
        for layer in &self.layers[1..] {
            v = layer * rect(&v);
        }
        Ok(v)
    }

    /// The vector that reaches `layer` as input when the model is driven
    /// with `input`.
    pub fn layer_input(&self, input: &DVector<f64>, layer: usize) -> Result<DVector<f64>> {
        if layer >= self.layers.len() {
            return Err(Error::LayerOutOfRange {
                index: layer,
                count: self.layers.len(),
            });
        }
        if input.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: input.len(),
            });
        }
        let mut v = input.clone();
        for w in &self.layers[..layer] {
            v = rect(&(w * v));
        }
        Ok(v)
    }

    /// Decode against this model's vocabulary.
    pub fn decode(&self, output: &DVector<f64>) -> Result<Decoded> {
        decode(output, &self.vocab)
    }
}

/// Elementwise rectifier.
pub(crate) fn rect(v: &DVector<f64>) -> DVector<f64> {
    v.map(|x| x.max(0.0))
}

/// Deterministic unit-norm embedding of a token.
///
/// The (token, dim, seed) triple is hashed to seed a Gaussian draw which is
/// then L2-normalized; no vocabulary registration is needed and the same
/// triple reproduces the same vector bit for bit.
pub fn embed_token(token: &str, dim: usize, seed: u64) -> Result<DVector<f64>> {
    if token.is_empty() {
        return Err(Error::EmptyToken);
    }
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let mut rng = rng_for(
        "embed",
        &[
            token.as_bytes(),
            &(dim as u64).to_le_bytes(),
            &seed.to_le_bytes(),
        ],
    );
    Ok(unit_vector(dim, &mut rng))
}

/// Result of decoding a model output against a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub token: String,
    /// Set when the output vector was zero and the argmax was vacuous; the
    /// lexicographically first token is returned in that case.
    pub degenerate: bool,
}

/// Argmax of cosine similarity over the vocabulary, ties broken by
/// lexicographic token order.
pub fn decode(output: &DVector<f64>, vocab: &Vocab) -> Result<Decoded> {
    let norm = output.norm();
    let mut entries = vocab.iter();
    let (first_token, first_emb) = entries.next().ok_or(Error::EmptyVocab)?;
    if norm == 0.0 {
        return Ok(Decoded {
            token: first_token.clone(),
            degenerate: true,
        });
    }
    // Vocab embeddings are unit norm, so cosine reduces to dot / ||output||.
    let mut best_token = first_token;
    let mut best_cos = output.dot(first_emb) / norm;
    for (token, emb) in entries {
        let cos = output.dot(emb) / norm;
        if cos > best_cos {
            best_cos = cos;
            best_token = token;
        }
    }
    Ok(Decoded {
        token: best_token.clone(),
        degenerate: false,
    })
}

/// Fit a toy model that stores every fact's (key -> object_old embedding)
/// association.
///
/// Each layer is a closed-form ridge solve W = Y X^T (X X^T + lambda I)^-1.
/// Intermediate layers are fitted toward seeded random unit targets so that
/// multi-layer models expose distinct per-layer keys; the final layer maps
/// onto the object embeddings.
pub fn build_model(facts: &[EditFact], params: &ModelParams) -> Result<ToyModel> {
    if facts.is_empty() {
        return Err(Error::EmptyFactList);
    }
    if params.ridge_lambda <= 0.0 {
        return Err(Error::NonPositiveRidge(params.ridge_lambda));
    }
    if params.dim < 2 {
        return Err(Error::DimensionTooSmall(params.dim));
    }
    if params.n_layers < 1 {
        return Err(Error::InvalidConfig("n_layers must be >= 1".into()));
    }

    let mut seen_ids = BTreeSet::new();
    let mut prompt_object: BTreeMap<(&str, &str), (u64, &str)> = BTreeMap::new();
    for fact in facts {
        fact.validate()?;
        if !seen_ids.insert(fact.id) {
            return Err(Error::DuplicateFactId(fact.id));
        }
        let prompt = (fact.subject.as_str(), fact.relation.as_str());
        match prompt_object.get(&prompt) {
            Some(&(first_id, object)) if object != fact.object_old => {
                return Err(Error::ConflictingFacts {
                    subject: fact.subject.clone(),
                    relation: fact.relation.clone(),
                    first_id,
                    second_id: fact.id,
                });
            }
            Some(_) => {}
            None => {
                prompt_object.insert(prompt, (fact.id, fact.object_old.as_str()));
            }
        }
    }

    let dim = params.dim;
    let seed = params.seed;

    let mut vocab = Vocab::new();
    for fact in facts {
        for token in [&fact.object_old, &fact.object_new] {
            if !vocab.contains_key(token) {
                vocab.insert(token.clone(), embed_token(token, dim, seed)?);
            }
        }
    }

    // The model skeleton is needed for key_for; layers are filled below.
    let mut model = ToyModel {
        layers: Vec::with_capacity(params.n_layers),
        dim,
        vocab,
        seed,
        stored_inputs: Vec::with_capacity(params.n_layers),
    };

    let n = facts.len();
    let mut inputs = DMatrix::zeros(dim, n);
    for (i, fact) in facts.iter().enumerate() {
        inputs.set_column(i, &model.key_for(fact)?);
    }

    let final_targets = {
        let mut t = DMatrix::zeros(dim, n);
        for (i, fact) in facts.iter().enumerate() {
            t.set_column(i, &embed_token(&fact.object_old, dim, seed)?);
        }
        t
    };

    for layer in 0..params.n_layers {
        let targets = if layer + 1 == params.n_layers {
            final_targets.clone()
        } else {
            let mut t = DMatrix::zeros(dim, n);
            for (i, fact) in facts.iter().enumerate() {
                let mut rng = rng_for(
                    "layer-target",
                    &[
                        &seed.to_le_bytes(),
                        &(layer as u64).to_le_bytes(),
                        &fact.id.to_le_bytes(),
                    ],
                );
                t.set_column(i, &unit_vector(dim, &mut rng));
            }
            t
        };
        let weight = ridge_fit(&inputs, &targets, params.ridge_lambda)?;
        let outputs = &weight * &inputs;
        model.stored_inputs.push(inputs);
        model.layers.push(weight);
        inputs = outputs.map(|x| x.max(0.0));
    }

    Ok(model)
}

/// Closed-form ridge regression: the W minimizing
/// sum_i ||W x_i - y_i||^2 + lambda ||W||_F^2.
fn ridge_fit(inputs: &DMatrix<f64>, targets: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let dim = inputs.nrows();
    let gram = inputs * inputs.transpose() + DMatrix::identity(dim, dim) * lambda;
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    // W = Y X^T G^-1, computed as W^T = G^-1 X Y^T since G is symmetric.
    let wt = chol.solve(&(inputs * targets.transpose()));
    Ok(wt.transpose())
}

/// Fixed evaluation inputs that never get edited: held-out stored facts plus
/// seeded random unit probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub holdout_facts: Vec<EditFact>,
    pub random_probes: Vec<DVector<f64>>,
}

impl ProbeSet {
    pub fn generate(holdout_facts: Vec<EditFact>, n_probes: usize, dim: usize, seed: u64) -> Self {
        let random_probes = (0..n_probes as u64)
            .map(|i| {
                let mut rng = rng_for("probe", &[&seed.to_le_bytes(), &i.to_le_bytes()]);
                unit_vector(dim, &mut rng)
            })
            .collect();
        ProbeSet {
            holdout_facts,
            random_probes,
        }
    }

    /// Reject any overlap between held-out facts and edited fact ids.
    pub fn check_disjoint(&self, edited_ids: &BTreeSet<u64>) -> Result<()> {
        for fact in &self.holdout_facts {
            if edited_ids.contains(&fact.id) {
                return Err(Error::HoldoutOverlap(fact.id));
            }
        }
        Ok(())
    }
}

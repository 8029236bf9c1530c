//! Experiment harness: regimes, editing metrics, and drift statistics.
//!
//! [`run_experiment`] builds a base model, performs editing operations in the
//! configured regime (single or sequential, instance or batch), and records
//! after every operation how well the edits took (reliability,
//! generalization), how much unrelated behavior moved (locality, probe
//! drift), and how far the edited weights wandered from the originals
//! (Manhattan distance and threshold-exceedance fractions).

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::editors::{apply, kn_delta, memit_delta, rome_delta, EditBatch, WeightDelta};
use crate::error::{Error, Result};
use crate::model::{build_model, EditFact, ModelParams, ProbeSet, ToyModel};
use crate::regularizers::{regularize, RegularizerSpec};
use crate::seeding::{gaussian_vector, rng_for};

/// Editing algorithm used by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditorKind {
    Rome,
    Kn,
    Memit,
}

impl EditorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EditorKind::Rome => "rome",
            EditorKind::Kn => "kn",
            EditorKind::Memit => "memit",
        }
    }

    /// Only the multi-layer batch editor accepts N > 1 per operation.
    pub fn supports_batch(&self) -> bool {
        matches!(self, EditorKind::Memit)
    }
}

impl std::fmt::Display for EditorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EditorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rome" => Ok(EditorKind::Rome),
            "kn" => Ok(EditorKind::Kn),
            "memit" => Ok(EditorKind::Memit),
            other => Err(Error::UnknownName {
                what: "editor",
                value: other.to_string(),
            }),
        }
    }
}

/// Whether operations accumulate on one model or stay at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Single,
    Sequential,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Single => "single",
            Regime::Sequential => "sequential",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Regime::Single),
            "sequential" => Ok(Regime::Sequential),
            other => Err(Error::UnknownName {
                what: "regime",
                value: other.to_string(),
            }),
        }
    }
}

/// Where the harness gets its facts.
#[derive(Debug, Clone, PartialEq)]
pub enum FactSource {
    /// Generate `num_edit_operations * batch_size + n_holdout` facts from
    /// the experiment seed.
    Synthetic,
    /// Use the given facts: edit targets first, the remainder held out.
    Explicit(Vec<EditFact>),
}

/// Full description of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub editor: EditorKind,
    /// Ascending layer indices the editor writes to; rome and kn use a
    /// single layer.
    pub edit_layers: Vec<usize>,
    pub regularizer: RegularizerSpec,
    pub regime: Regime,
    /// Facts per editing operation (N).
    pub batch_size: usize,
    pub num_edit_operations: usize,
    pub n_paraphrase: usize,
    pub paraphrase_sigma: f64,
    /// Thresholds for the drift exceedance fractions.
    pub delta_thresholds: Vec<f64>,
    pub n_probes: usize,
    pub n_holdout: usize,
    /// Object-token pool size for synthetic facts.
    pub n_objects: usize,
    pub key_covariance_lambda: f64,
    pub kn_neurons: usize,
    pub kn_alpha: f64,
    pub facts: FactSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelParams::default(),
            editor: EditorKind::Rome,
            edit_layers: vec![0],
            regularizer: RegularizerSpec::none(),
            regime: Regime::Single,
            batch_size: 1,
            num_edit_operations: 1,
            n_paraphrase: 4,
            paraphrase_sigma: 0.05,
            delta_thresholds: vec![0.077, 0.171],
            n_probes: 32,
            n_holdout: 160,
            n_objects: 128,
            key_covariance_lambda: 1e-2,
            kn_neurons: 32,
            kn_alpha: 1.0,
            facts: FactSource::Synthetic,
        }
    }
}

impl ExperimentConfig {
    /// Number of facts the run consumes as edit targets.
    pub fn edit_fact_count(&self) -> usize {
        self.num_edit_operations * self.batch_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.model.dim < 2 {
            return Err(Error::DimensionTooSmall(self.model.dim));
        }
        if self.model.n_layers < 1 {
            return bad("n_layers must be >= 1".into());
        }
        if self.model.ridge_lambda <= 0.0 {
            return Err(Error::NonPositiveRidge(self.model.ridge_lambda));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1".into());
        }
        if self.num_edit_operations < 1 {
            return bad("num_edit_operations must be >= 1".into());
        }
        if self.regime == Regime::Single && self.num_edit_operations != 1 {
            return bad("single regime requires num_edit_operations = 1".into());
        }
        if self.batch_size > 1 && !self.editor.supports_batch() {
            return bad(format!(
                "editor {} does not support batch editing (batch_size {})",
                self.editor, self.batch_size
            ));
        }
        if self.edit_layers.is_empty() {
            return bad("edit_layers must be non-empty".into());
        }
        if !self.edit_layers.windows(2).all(|w| w[0] < w[1]) {
            return bad("edit_layers must be strictly ascending".into());
        }
        if let Some(&max) = self.edit_layers.last() {
            if max >= self.model.n_layers {
                return Err(Error::LayerOutOfRange {
                    index: max,
                    count: self.model.n_layers,
                });
            }
        }
        if self.editor != EditorKind::Memit && self.edit_layers.len() != 1 {
            return bad(format!("editor {} edits exactly one layer", self.editor));
        }
        self.regularizer.validate()?;
        if self.n_paraphrase < 1 {
            return bad("n_paraphrase must be >= 1".into());
        }
        if !self.paraphrase_sigma.is_finite() || self.paraphrase_sigma < 0.0 {
            return bad("paraphrase_sigma must be >= 0".into());
        }
        if self
            .delta_thresholds
            .iter()
            .any(|t| !t.is_finite() || *t <= 0.0)
        {
            return bad("delta thresholds must be positive".into());
        }
        if self.n_probes < 1 {
            return bad("n_probes must be >= 1".into());
        }
        if self.n_holdout < 1 {
            return bad("n_holdout must be >= 1".into());
        }
        if self.n_objects < 2 {
            return bad("n_objects must be >= 2".into());
        }
        if self.key_covariance_lambda <= 0.0 {
            return bad("key_covariance_lambda must be > 0".into());
        }
        if self.editor == EditorKind::Kn
            && (self.kn_neurons < 1 || self.kn_neurons > self.model.dim)
        {
            return Err(Error::NeuronCountOutOfRange {
                m: self.kn_neurons,
                d_in: self.model.dim,
            });
        }
        if !self.kn_alpha.is_finite() {
            return bad("kn_alpha must be finite".into());
        }
        if let FactSource::Explicit(facts) = &self.facts {
            let needed = self.edit_fact_count() + 1;
            if facts.len() < needed {
                return bad(format!(
                    "need at least {needed} facts ({} edit targets + holdout), got {}",
                    self.edit_fact_count(),
                    facts.len()
                ));
            }
        }
        Ok(())
    }

    /// Canonical one-line summary, echoed into result files.
    pub fn echo(&self) -> String {
        let layers = self
            .edit_layers
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let thresholds = self
            .delta_thresholds
            .iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let facts = match &self.facts {
            FactSource::Synthetic => "synthetic".to_string(),
            FactSource::Explicit(v) => format!("explicit({})", v.len()),
        };
        format!(
            "dim={} layers={} ridge_lambda={} seed={} editor={} edit_layers={layers} \
             regularizer={} k_percent={} mask_seed={} epsilon={} regime={} batch_size={} \
             num_edit_operations={} n_paraphrase={} paraphrase_sigma={} thresholds={thresholds} \
             n_probes={} n_holdout={} n_objects={} key_covariance_lambda={} kn_neurons={} \
             kn_alpha={} facts={facts}",
            self.model.dim,
            self.model.n_layers,
            self.model.ridge_lambda,
            self.model.seed,
            self.editor,
            self.regularizer.method,
            self.regularizer.k_percent,
            self.regularizer.seed,
            self.regularizer.epsilon,
            self.regime,
            self.batch_size,
            self.num_edit_operations,
            self.n_paraphrase,
            self.paraphrase_sigma,
            self.n_probes,
            self.n_holdout,
            self.n_objects,
            self.key_covariance_lambda,
            self.kn_neurons,
            self.kn_alpha,
        )
    }
}

/// Editing quality and general-ability proxies after an operation.
#[derive(Debug, Clone, PartialEq)]
pub struct EditMetrics {
    /// Fraction of edited facts decoding to their new object.
    pub reliability: f64,
    /// Same, under noise-paraphrased keys.
    pub generalization: f64,
    /// Fraction of held-out facts whose decode agrees with the base model.
    pub locality: f64,
    /// Mean L2 output change on the fixed random probes.
    pub general_ability_drift: f64,
}

/// Distance between edited and original weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftStats {
    /// Sum of absolute entrywise differences.
    pub manhattan: f64,
    /// (threshold, fraction of entries whose relative change exceeds it).
    pub frac_above: Vec<(f64, f64)>,
}

/// Metrics recorded after one editing operation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// 1-based operation index.
    pub step: usize,
    pub metrics: EditMetrics,
    pub drift: DriftStats,
    pub config_echo: String,
}

/// Fraction of facts whose decoded object equals `target(fact)`.
fn recall_fraction(
    model: &ToyModel,
    facts: &[EditFact],
    target: impl Fn(&EditFact) -> &str,
) -> Result<f64> {
    if facts.is_empty() {
        return Err(Error::EmptyFactList);
    }
    let mut hits = 0usize;
    for fact in facts {
        let out = model.forward(&model.key_for(fact)?)?;
        if model.decode(&out)?.token == target(fact) {
            hits += 1;
        }
    }
    Ok(hits as f64 / facts.len() as f64)
}

/// Fraction of edited facts the model decodes to their new object.
pub fn eval_reliability(model: &ToyModel, edited_facts: &[EditFact]) -> Result<f64> {
    recall_fraction(model, edited_facts, |f| &f.object_new)
}

/// Recall of the new objects under paraphrased keys: each fact's key is
/// perturbed by seeded spherical noise of scale `sigma` and re-normalized,
/// `n_paraphrase` times. `sigma = 0` reproduces [`eval_reliability`] exactly.
pub fn eval_generalization(
    model: &ToyModel,
    edited_facts: &[EditFact],
    n_paraphrase: usize,
    sigma: f64,
    seed: u64,
) -> Result<f64> {
    if edited_facts.is_empty() {
        return Err(Error::EmptyFactList);
    }
    if n_paraphrase == 0 {
        return Err(Error::InvalidConfig("n_paraphrase must be >= 1".into()));
    }
    let mut hits = 0usize;
    for fact in edited_facts {
        let key = model.key_for(fact)?;
        for j in 0..n_paraphrase as u64 {
            let probe = if sigma == 0.0 {
                key.clone()
            } else {
                let mut rng = rng_for(
                    "paraphrase",
                    &[&seed.to_le_bytes(), &fact.id.to_le_bytes(), &j.to_le_bytes()],
                );
                let noisy = &key + gaussian_vector(model.dim(), &mut rng) * sigma;
                let norm = noisy.norm();
                if norm > 0.0 {
                    noisy / norm
                } else {
                    key.clone()
                }
            };
            let out = model.forward(&probe)?;
            if model.decode(&out)?.token == fact.object_new {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (edited_facts.len() * n_paraphrase) as f64)
}

/// Fraction of held-out facts where the edited model's decode agrees with
/// the base model's. Held-out facts must be disjoint from the edited ones.
pub fn eval_locality(
    model_edited: &ToyModel,
    model_base: &ToyModel,
    holdout_facts: &[EditFact],
    edited_facts: &[EditFact],
) -> Result<f64> {
    if holdout_facts.is_empty() {
        return Err(Error::EmptyFactList);
    }
    let edited_ids: BTreeSet<u64> = edited_facts.iter().map(|f| f.id).collect();
    let mut agree = 0usize;
    for fact in holdout_facts {
        if edited_ids.contains(&fact.id) {
            return Err(Error::HoldoutOverlap(fact.id));
        }
        let key = model_base.key_for(fact)?;
        let base = model_base.decode(&model_base.forward(&key)?)?;
        let edited = model_edited.decode(&model_edited.forward(&key)?)?;
        if base.token == edited.token {
            agree += 1;
        }
    }
    Ok(agree as f64 / holdout_facts.len() as f64)
}

/// Mean L2 output change over fixed probes; zero iff the two models agree on
/// all of them.
pub fn eval_general_ability(
    model_edited: &ToyModel,
    model_base: &ToyModel,
    probes: &[nalgebra::DVector<f64>],
) -> Result<f64> {
    if probes.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for probe in probes {
        total += (model_edited.forward(probe)? - model_base.forward(probe)?).norm();
    }
    Ok(total / probes.len() as f64)
}

fn drift_accumulate(
    w_original: &DMatrix<f64>,
    w_current: &DMatrix<f64>,
    thresholds: &[f64],
    epsilon: f64,
) -> Result<(f64, Vec<usize>, usize)> {
    if w_original.shape() != w_current.shape() {
        return Err(Error::ShapeMismatch {
            expected_rows: w_original.nrows(),
            expected_cols: w_original.ncols(),
            rows: w_current.nrows(),
            cols: w_current.ncols(),
        });
    }
    let mut manhattan = 0.0;
    let mut counts = vec![0usize; thresholds.len()];
    for (cur, orig) in w_current.iter().zip(w_original.iter()) {
        let diff = (cur - orig).abs();
        manhattan += diff;
        let rel = diff / orig.abs().max(epsilon);
        for (count, &tau) in counts.iter_mut().zip(thresholds) {
            if rel > tau {
                *count += 1;
            }
        }
    }
    Ok((manhattan, counts, w_original.len()))
}

/// Manhattan distance between two weights plus the fraction of entries whose
/// relative change exceeds each threshold.
pub fn drift_stats(
    w_original: &DMatrix<f64>,
    w_current: &DMatrix<f64>,
    thresholds: &[f64],
    epsilon: f64,
) -> Result<DriftStats> {
    let (manhattan, counts, total) =
        drift_accumulate(w_original, w_current, thresholds, epsilon)?;
    Ok(DriftStats {
        manhattan,
        frac_above: thresholds
            .iter()
            .zip(counts)
            .map(|(&tau, c)| (tau, c as f64 / total as f64))
            .collect(),
    })
}

/// Deterministic synthetic facts: unique subjects, a small relation pool,
/// and old/new objects drawn without agreement from an `n_objects` pool.
pub fn synthesize_facts(count: usize, n_objects: usize, seed: u64) -> Result<Vec<EditFact>> {
    if n_objects < 2 {
        return Err(Error::InvalidConfig("n_objects must be >= 2".into()));
    }
    let mut facts = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let mut rng = rng_for("fact", &[&seed.to_le_bytes(), &i.to_le_bytes()]);
        let old = rand::Rng::random_range(&mut rng, 0..n_objects);
        let offset = rand::Rng::random_range(&mut rng, 1..n_objects);
        let new = (old + offset) % n_objects;
        facts.push(EditFact::new(
            i,
            format!("subject-{i}"),
            format!("relation-{}", i % 8),
            format!("object-{old}"),
            format!("object-{new}"),
        )?);
    }
    Ok(facts)
}

/// A finished experiment: the per-operation rows plus the models they came
/// from, for weight-change export.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub rows: Vec<ResultRow>,
    pub base: ToyModel,
    pub edited: ToyModel,
}

/// Run one experiment: build the base model, edit per the configured regime,
/// and record metrics after every operation. Deterministic per config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_full(config).map(|run| run.rows)
}

/// [`run_experiment`], additionally returning the base and final models.
pub fn run_experiment_full(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let params = &config.model;

    let all_facts: Vec<EditFact> = match &config.facts {
        FactSource::Synthetic => synthesize_facts(
            config.edit_fact_count() + config.n_holdout,
            config.n_objects,
            params.seed,
        )?,
        FactSource::Explicit(facts) => facts.clone(),
    };
    let edit_facts = &all_facts[..config.edit_fact_count()];
    let holdout = all_facts[config.edit_fact_count()..].to_vec();

    let base = build_model(&all_facts, params)?;
    let probes = ProbeSet::generate(holdout, config.n_probes, params.dim, params.seed);
    probes.check_disjoint(&edit_facts.iter().map(|f| f.id).collect())?;

    let echo = config.echo();
    let mut current = base.clone();
    let mut rows = Vec::with_capacity(config.num_edit_operations);

    for op in 1..=config.num_edit_operations {
        let batch = &edit_facts[(op - 1) * config.batch_size..op * config.batch_size];

        let raw_deltas: Vec<WeightDelta> = match config.editor {
            EditorKind::Rome => vec![rome_delta(
                &current,
                config.edit_layers[0],
                &batch[0],
                config.key_covariance_lambda,
            )?],
            EditorKind::Kn => vec![kn_delta(
                &current,
                config.edit_layers[0],
                &batch[0],
                config.kn_neurons,
                config.kn_alpha,
            )?],
            EditorKind::Memit => memit_delta(
                &current,
                &config.edit_layers,
                &EditBatch::new(batch.to_vec())?,
                config.key_covariance_lambda,
            )?,
        };

        let mut masked = Vec::with_capacity(raw_deltas.len());
        for delta in &raw_deltas {
            masked.push(regularize(
                delta,
                &config.regularizer,
                current.layer(delta.layer_index)?,
            )?);
        }
        current = apply(&current, &masked)?;

        let edited_so_far = &edit_facts[..op * config.batch_size];
        let metrics = EditMetrics {
            reliability: eval_reliability(&current, edited_so_far)?,
            generalization: eval_generalization(
                &current,
                edited_so_far,
                config.n_paraphrase,
                config.paraphrase_sigma,
                params.seed,
            )?,
            locality: eval_locality(&current, &base, &probes.holdout_facts, edited_so_far)?,
            general_ability_drift: eval_general_ability(
                &current,
                &base,
                &probes.random_probes,
            )?,
        };

        // Drift is pooled over the configured edit layers.
        let mut manhattan = 0.0;
        let mut counts = vec![0usize; config.delta_thresholds.len()];
        let mut total = 0usize;
        for &layer in &config.edit_layers {
            let (m, c, n) = drift_accumulate(
                base.layer(layer)?,
                current.layer(layer)?,
                &config.delta_thresholds,
                config.regularizer.epsilon,
            )?;
            manhattan += m;
            for (acc, add) in counts.iter_mut().zip(c) {
                *acc += add;
            }
            total += n;
        }
        let drift = DriftStats {
            manhattan,
            frac_above: config
                .delta_thresholds
                .iter()
                .zip(counts)
                .map(|(&tau, c)| (tau, c as f64 / total as f64))
                .collect(),
        };

        rows.push(ResultRow {
            step: op,
            metrics,
            drift,
            config_echo: echo.clone(),
        });
    }

    Ok(ExperimentRun {
        rows,
        base,
        edited: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editors::{apply, rome_delta, WeightDelta};
    use crate::regularizers::MaskMethod;

    fn seq_config(ops: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            regime: Regime::Sequential,
            num_edit_operations: ops,
            model: ModelParams {
                seed,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn edited_once(seed: u64) -> (ToyModel, ToyModel, Vec<EditFact>) {
        let facts = synthesize_facts(12, 16, seed).unwrap();
        let model = build_model(&facts, &ModelParams::default()).unwrap();
        let delta = rome_delta(&model, 0, &facts[0], 1e-2).unwrap();
        let edited = apply(&model, &[delta]).unwrap();
        (model, edited, facts)
    }

    #[test]
    fn reliability_after_exact_edit_is_one() {
        let (_, edited, facts) = edited_once(0);
        assert_eq!(eval_reliability(&edited, &facts[..1]).unwrap(), 1.0);
    }

    #[test]
    fn reliability_of_unedited_model_is_zero() {
        let (base, _, facts) = edited_once(1);
        assert_eq!(eval_reliability(&base, &facts[..6]).unwrap(), 0.0);
    }

    #[test]
    fn reliability_counts_fractions() {
        // Edit 7 of 10 facts; the other 3 still decode to their old object.
        let facts = synthesize_facts(10, 64, 3).unwrap();
        let base = build_model(&facts, &ModelParams::default()).unwrap();
        let mut current = base.clone();
        for f in &facts[..7] {
            let d = rome_delta(&current, 0, f, 1e-2).unwrap();
            current = apply(&current, &[d]).unwrap();
        }
        assert_eq!(eval_reliability(&current, &facts).unwrap(), 0.7);
    }

    #[test]
    fn generalization_at_zero_sigma_equals_reliability() {
        let (_, edited, facts) = edited_once(2);
        for n_para in [1, 4, 9] {
            assert_eq!(
                eval_generalization(&edited, &facts[..1], n_para, 0.0, 5).unwrap(),
                eval_reliability(&edited, &facts[..1]).unwrap()
            );
        }
    }

    #[test]
    fn generalization_is_deterministic() {
        let (_, edited, facts) = edited_once(4);
        let a = eval_generalization(&edited, &facts[..1], 8, 0.05, 11).unwrap();
        let b = eval_generalization(&edited, &facts[..1], 8, 0.05, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generalization_at_huge_sigma_approaches_chance() {
        // Balanced construction: every pool token appears equally often as
        // object_new, so the mean success probability over facts is exactly
        // 1/|vocab| no matter how the decode mass is distributed. With
        // sigma = 100 the paraphrase keys are essentially random unit
        // vectors; the Monte-Carlo estimate must sit within 3 standard
        // errors of 1/8.
        let facts: Vec<EditFact> = (0..16)
            .map(|i| {
                EditFact::new(
                    i,
                    format!("subject-{i}"),
                    format!("relation-{i}"),
                    format!("object-{}", (i + 1) % 8),
                    format!("object-{}", i % 8),
                )
                .unwrap()
            })
            .collect();
        let model = build_model(&facts, &ModelParams::default()).unwrap();
        let trials = 250 * 16;
        let p = eval_generalization(&model, &facts, 250, 100.0, 13).unwrap();
        let chance = 1.0 / 8.0;
        let se = (chance * (1.0 - chance) / trials as f64).sqrt();
        assert!(
            (p - chance).abs() <= 3.0 * se,
            "p {p} vs chance {chance} (se {se})"
        );
    }

    #[test]
    fn locality_of_identical_models_is_one() {
        let (base, _, facts) = edited_once(5);
        assert_eq!(
            eval_locality(&base, &base, &facts[6..], &facts[..6]).unwrap(),
            1.0
        );
    }

    #[test]
    fn locality_after_zero_delta_is_one() {
        let (base, _, facts) = edited_once(6);
        let zero = WeightDelta::new(0, DMatrix::zeros(64, 64)).unwrap();
        let same = apply(&base, &[zero]).unwrap();
        assert_eq!(
            eval_locality(&same, &base, &facts[6..], &facts[..6]).unwrap(),
            1.0
        );
    }

    #[test]
    fn locality_rejects_overlap() {
        let (base, edited, facts) = edited_once(7);
        assert!(matches!(
            eval_locality(&edited, &base, &facts[..3], &facts[..1]),
            Err(Error::HoldoutOverlap(0))
        ));
    }

    #[test]
    fn general_ability_drift_zero_for_identical_models() {
        let (base, _, _) = edited_once(8);
        let probes = ProbeSet::generate(vec![], 16, 64, 0);
        assert_eq!(
            eval_general_ability(&base, &base, &probes.random_probes).unwrap(),
            0.0
        );
        let zero = WeightDelta::new(0, DMatrix::zeros(64, 64)).unwrap();
        let same = apply(&base, &[zero]).unwrap();
        assert_eq!(
            eval_general_ability(&same, &base, &probes.random_probes).unwrap(),
            0.0
        );
    }

    #[test]
    fn drift_stats_identity_is_zero() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let d = drift_stats(&w, &w, &[0.077, 0.171], 1e-12).unwrap();
        assert_eq!(d.manhattan, 0.0);
        assert!(d.frac_above.iter().all(|&(_, f)| f == 0.0));
    }

    #[test]
    fn drift_stats_small_fixture() {
        let orig = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let cur = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 4.0, 1.0]);
        let d = drift_stats(&orig, &cur, &[0.077, 0.171, 10.0], 1e-12).unwrap();
        assert_eq!(d.manhattan, 6.0);
        // Relative changes are 1, 2, 3, 0.
        assert_eq!(d.frac_above[0], (0.077, 0.75));
        assert_eq!(d.frac_above[1], (0.171, 0.75));
        assert_eq!(d.frac_above[2], (10.0, 0.0));
    }

    #[test]
    fn drift_stats_rejects_shape_mismatch() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::zeros(2, 3);
        assert!(matches!(
            drift_stats(&a, &b, &[0.1], 1e-12),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_edit_baseline_keeps_everything() {
        let facts = synthesize_facts(20, 32, 9).unwrap();
        let base = build_model(&facts, &ModelParams::default()).unwrap();
        let zero = WeightDelta::new(0, DMatrix::zeros(64, 64)).unwrap();
        let same = apply(&base, &[zero]).unwrap();

        let old_recall = recall_fraction(&same, &facts, |f| &f.object_old).unwrap();
        assert_eq!(old_recall, 1.0);
        assert_eq!(
            eval_locality(&same, &base, &facts[10..], &facts[..10]).unwrap(),
            1.0
        );
        let d = drift_stats(
            base.layer(0).unwrap(),
            same.layer(0).unwrap(),
            &[0.077],
            1e-12,
        )
        .unwrap();
        assert_eq!(d.manhattan, 0.0);
    }

    #[test]
    fn single_regime_produces_one_row() {
        let config = ExperimentConfig::default();
        let rows = run_experiment(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].step, 1);
    }

    #[test]
    fn sequential_manhattan_is_strictly_increasing() {
        let rows = run_experiment(&seq_config(15, 42)).unwrap();
        assert_eq!(rows.len(), 15);
        for pair in rows.windows(2) {
            assert!(
                pair[1].drift.manhattan > pair[0].drift.manhattan,
                "step {}: {} -> {}",
                pair[1].step,
                pair[0].drift.manhattan,
                pair[1].drift.manhattan
            );
        }
    }

    #[test]
    fn sequential_locality_declines_from_first_step() {
        let rows = run_experiment(&seq_config(15, 42)).unwrap();
        assert!(
            rows[14].metrics.locality < rows[0].metrics.locality,
            "{} vs {}",
            rows[14].metrics.locality,
            rows[0].metrics.locality
        );
    }

    #[test]
    fn runs_are_deterministic() {
        let config = seq_config(5, 3);
        assert_eq!(
            run_experiment(&config).unwrap(),
            run_experiment(&config).unwrap()
        );
    }

    #[test]
    fn steps_are_contiguous_and_metrics_bounded() {
        let config = ExperimentConfig {
            editor: EditorKind::Memit,
            batch_size: 4,
            num_edit_operations: 3,
            regime: Regime::Sequential,
            regularizer: RegularizerSpec {
                method: MaskMethod::Rect,
                k_percent: 40.0,
                ..RegularizerSpec::none()
            },
            ..seq_config(3, 11)
        };
        let rows = run_experiment(&config).unwrap();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.step, i + 1);
            for v in [
                row.metrics.reliability,
                row.metrics.generalization,
                row.metrics.locality,
            ] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(row.metrics.general_ability_drift >= 0.0);
            assert!(row.drift.manhattan >= 0.0);
            for &(_, f) in &row.drift.frac_above {
                assert!((0.0..=1.0).contains(&f));
            }
        }
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let batch_rome = ExperimentConfig {
            batch_size: 2,
            ..Default::default()
        };
        assert!(batch_rome.validate().is_err());

        let multi_single = ExperimentConfig {
            num_edit_operations: 3,
            ..Default::default()
        };
        assert!(multi_single.validate().is_err());

        let batch_kn = ExperimentConfig {
            editor: EditorKind::Kn,
            batch_size: 4,
            regime: Regime::Sequential,
            ..Default::default()
        };
        assert!(batch_kn.validate().is_err());

        let batch_memit = ExperimentConfig {
            editor: EditorKind::Memit,
            batch_size: 4,
            ..Default::default()
        };
        assert!(batch_memit.validate().is_ok());

        let bad_layer = ExperimentConfig {
            edit_layers: vec![1],
            ..Default::default()
        };
        assert!(bad_layer.validate().is_err());
    }

    #[test]
    fn synthetic_facts_are_deterministic_and_valid() {
        let a = synthesize_facts(20, 8, 5).unwrap();
        let b = synthesize_facts(20, 8, 5).unwrap();
        assert_eq!(a, b);
        for f in &a {
            f.validate().unwrap();
        }
        // Prefix stability: shorter draws are a prefix of longer ones.
        let c = synthesize_facts(10, 8, 5).unwrap();
        assert_eq!(&a[..10], &c[..]);
    }

    #[test]
    fn editor_and_regime_names_round_trip() {
        for e in ["rome", "kn", "memit"] {
            assert_eq!(e.parse::<EditorKind>().unwrap().as_str(), e);
        }
        for r in ["single", "sequential"] {
            assert_eq!(r.parse::<Regime>().unwrap().as_str(), r);
        }
        assert!("mend".parse::<EditorKind>().is_err());
    }
}

//! Experiment configs: flat `key = value` text files.
//!
//! Every key is optional and falls back to the default experiment config;
//! `#` starts a comment anywhere on a line. `facts_file` points at a fact
//! file (resolved relative to the config's directory); when absent the run
//! synthesizes its facts.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, FactSource};

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = super::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, &path.display().to_string(), base)
}

/// Parse config text; `label` names the source in errors and `base_dir`
/// anchors relative `facts_file` paths.
pub fn parse_config_str(
    text: &str,
    label: &str,
    base_dir: &Path,
) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut edit_layers_set = false;
    let mut kn_neurons_set = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::file_format(label, line_no, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            continue;
        }
        match key {
            "dim" => config.model.dim = num(label, line_no, key, value)?,
            "layers" => config.model.n_layers = num(label, line_no, key, value)?,
            "ridge_lambda" => config.model.ridge_lambda = num(label, line_no, key, value)?,
            "seed" => config.model.seed = num(label, line_no, key, value)?,
            "editor" => config.editor = named(label, line_no, key, value)?,
            "edit_layers" => {
                config.edit_layers = list(label, line_no, key, value)?;
                edit_layers_set = true;
            }
            "regularizer" => config.regularizer.method = named(label, line_no, key, value)?,
            "k_percent" => config.regularizer.k_percent = num(label, line_no, key, value)?,
            "mask_seed" => config.regularizer.seed = num(label, line_no, key, value)?,
            "epsilon" => config.regularizer.epsilon = num(label, line_no, key, value)?,
            "regime" => config.regime = named(label, line_no, key, value)?,
            "batch_size" => config.batch_size = num(label, line_no, key, value)?,
            "num_edit_operations" => {
                config.num_edit_operations = num(label, line_no, key, value)?
            }
            "n_paraphrase" => config.n_paraphrase = num(label, line_no, key, value)?,
            "paraphrase_sigma" => config.paraphrase_sigma = num(label, line_no, key, value)?,
            "delta_thresholds" => config.delta_thresholds = list(label, line_no, key, value)?,
            "n_probes" => config.n_probes = num(label, line_no, key, value)?,
            "n_holdout" => config.n_holdout = num(label, line_no, key, value)?,
            "n_objects" => config.n_objects = num(label, line_no, key, value)?,
            "key_covariance_lambda" => {
                config.key_covariance_lambda = num(label, line_no, key, value)?
            }
            "kn_neurons" => {
                config.kn_neurons = num(label, line_no, key, value)?;
                kn_neurons_set = true;
            }
            "kn_alpha" => config.kn_alpha = num(label, line_no, key, value)?,
            "facts_file" => {
                let file = base_dir.join(value);
                config.facts = FactSource::Explicit(super::load_facts(&file)?);
            }
            other => {
                return Err(Error::file_format(
                    label,
                    line_no,
                    format!("unknown key {other:?}"),
                ))
            }
        }
    }

    if !edit_layers_set {
        config.edit_layers = vec![config.model.n_layers.saturating_sub(1)];
    }
    if !kn_neurons_set {
        config.kn_neurons = (config.model.dim / 2).max(1);
    }
    config.validate()?;
    Ok(config)
}

fn num<T: std::str::FromStr>(label: &str, line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::file_format(label, line, format!("invalid value for {key}: {value:?}")))
}

fn named<T>(label: &str, line: usize, key: &str, value: &str) -> Result<T>
where
    T: std::str::FromStr<Err = Error>,
{
    value
        .parse()
        .map_err(|e| Error::file_format(label, line, format!("{key}: {e}")))
}

fn list<T: std::str::FromStr>(
    label: &str,
    line: usize,
    key: &str,
    value: &str,
) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| num(label, line, key, item.trim()))
        .collect()
}

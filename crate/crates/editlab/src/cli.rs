//! Command-line surface: `run`, `mask`, `stats`, `heatmap`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::DMatrix;

use crate::editors::WeightDelta;
use crate::error::Result;
use crate::harness::{drift_stats, run_experiment_full};
use crate::io::{
    export_heatmap, fmt_sig6, load_config, read_matrix, write_matrix, write_results, HeatmapMode,
};
use crate::regularizers::{regularize, MaskMethod, RegularizerSpec};

#[derive(Parser)]
#[command(
    name = "editlab",
    version,
    about = "Weight-editing laboratory on a deterministic associative toy model",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and write the result table.
    Run {
        /// Path to a key = value config file.
        config: PathBuf,
        /// Result CSV destination.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
        /// Also write the final weight change (edited minus base) of one
        /// layer as a matrix CSV.
        #[arg(long)]
        dump_delta: Option<PathBuf>,
        /// Layer whose weight change --dump-delta exports; defaults to the
        /// first edit layer.
        #[arg(long)]
        dump_layer: Option<usize>,
    },
    /// Mask an update matrix and write the regularized result.
    Mask {
        #[arg(long, value_parser = ["none", "rect", "random", "pca"])]
        method: String,
        /// Retention percentage in (0, 100].
        #[arg(long)]
        k: f64,
        /// Original weight matrix; required by the relative-change method.
        #[arg(long, required_if_eq("method", "rect"))]
        weights: Option<PathBuf>,
        /// Update matrix to mask.
        #[arg(long)]
        delta: PathBuf,
        /// Masked matrix destination.
        #[arg(long)]
        out: PathBuf,
        /// Seed for the random method.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative-change denominator floor.
        #[arg(long, default_value_t = 1e-12)]
        epsilon: f64,
    },
    /// Print drift statistics between two weight matrices.
    Stats {
        /// Original weights.
        #[arg(long)]
        before: PathBuf,
        /// Edited weights.
        #[arg(long)]
        after: PathBuf,
        /// Relative-change thresholds for the exceedance fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.077, 0.171])]
        thresholds: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        epsilon: f64,
    },
    /// Export a matrix as a plain-text PGM heatmap.
    Heatmap {
        /// Matrix to render.
        #[arg(long)]
        delta: PathBuf,
        /// PGM destination.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "abs", value_parser = ["abs", "raw"])]
        mode: String,
    },
}

/// Entry point for the `editlab` binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            dump_delta,
            dump_layer,
        } => {
            let config = load_config(&config)?;
            let run = run_experiment_full(&config)?;
            write_results(&run.rows, &out)?;
            println!("wrote {} ({} rows)", out.display(), run.rows.len());
            if let Some(dump_path) = dump_delta {
                let layer = dump_layer.unwrap_or(config.edit_layers[0]);
                let change = run.edited.layer(layer)? - run.base.layer(layer)?;
                write_matrix(&change, &dump_path)?;
                println!("wrote {} (layer {layer} weight change)", dump_path.display());
            }
            Ok(())
        }
        Command::Mask {
            method,
            k,
            weights,
            delta,
            out,
            seed,
            epsilon,
        } => {
            let method: MaskMethod = method.parse()?;
            let delta = read_matrix(&delta)?;
            let weights = match weights {
                Some(path) => read_matrix(&path)?,
                None => DMatrix::zeros(delta.nrows(), delta.ncols()),
            };
            let spec = RegularizerSpec {
                method,
                k_percent: k,
                seed,
                epsilon,
            };
            let masked = regularize(&WeightDelta::new(0, delta)?, &spec, &weights)?;
            write_matrix(&masked.delta, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Stats {
            before,
            after,
            thresholds,
            epsilon,
        } => {
            let before = read_matrix(&before)?;
            let after = read_matrix(&after)?;
            let stats = drift_stats(&before, &after, &thresholds, epsilon)?;
            println!("manhattan {}", fmt_sig6(stats.manhattan));
            for (tau, frac) in stats.frac_above {
                println!("frac_above_{tau} {}", fmt_sig6(frac));
            }
            Ok(())
        }
        Command::Heatmap { delta, out, mode } => {
            let mode: HeatmapMode = mode.parse()?;
            let matrix = read_matrix(&delta)?;
            export_heatmap(&matrix, &out, mode)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

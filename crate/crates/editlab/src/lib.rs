//! editlab: a desk-scale laboratory for studying the side effects of weight
//! editing.
//!
//! Facts are stored in a deterministic associative toy model
//! ([`model::ToyModel`]), modified by locate-then-edit style weight updates
//! ([`editors`]), optionally regularized by relative-change masking and its
//! baselines ([`regularizers`]), and evaluated across single/sequential and
//! instance/batch regimes by the experiment [`harness`]. The [`io`] module
//! and the `editlab` binary provide the file formats and command-line
//! surface.

pub mod cli;
pub mod editors;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod regularizers;
pub mod seeding;

pub use error::{Error, Result};

//! Simulation and numerical analysis of Lévy processes resurrected in the
//! positive half-line.
//!
//! A Lévy process started at `x > 0` is run until its first passage below
//! zero. If that passage happens by a jump, the jump is removed and the
//! process restarts from its pre-jump position; if it happens continuously,
//! the resurrected process is absorbed. The crate simulates these paths,
//! samples the resurrection kernel, evaluates the known absorption criteria
//! and checks the associated distributional identities by Monte Carlo.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The Monte Carlo checks take model, sizes, controls and seed explicitly.
#![allow(clippy::too_many_arguments)]

pub mod analytics;
pub mod error;
pub mod exec;
pub mod laplace;
pub mod mc_verify;
pub mod models;
pub mod path;
pub mod quad;
pub mod report;
pub mod resurrection;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use models::{make_model, ExpJumps, LevyModel, LongRun, ModelSpec, PropertyFlags};
pub use path::{first_passage_below, sample_path, FirstPassage, SimParams, SimPath};

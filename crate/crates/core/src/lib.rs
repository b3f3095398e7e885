//! Bayesian inference over where hidden objects sit among a set of boxes,
//! combining geometric fit with audio classifier evidence.
//!
//! The pipeline: a [`scene::ParsedScene`] lists objects, boxes and per-box
//! audio posteriors; [`hypothesis`] enumerates placements; [`geometry`]
//! estimates how likely each box's contents are to fit; [`fusion`] combines
//! the two into a posterior and per-object marginals. [`oracle`] is an
//! independent brute-force reference, and [`eval`] compares model output with
//! human ratings.

pub mod cli;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod hypothesis;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scene;

pub use fusion::{
    infer, marginal_table, posterior, Inference, InferenceConfig, MarginalTable, Mode,
    PosteriorResult,
};
pub use hypothesis::{count_hypotheses, enumerate_hypotheses, stirling2, HypothesisSet, Placement};
pub use report::Report;
pub use scene::{load_scene, validate_scene, ParsedScene};

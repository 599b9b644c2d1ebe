//! Combining independent solver modules on multiple-choice questions.
//!
//! Modules emit a probability distribution over each question's choices.
//! The [`merge`] module combines those forecasts with the mixture,
//! logarithmic or product rule; [`train`] fits rule weights by maximum
//! likelihood; [`eval`] scores the resulting solvers; [`lexmodules`]
//! provides offline synonym and analogy solvers that produce forecasts.

pub mod eval;
pub mod formats;
pub mod lexmodules;
pub mod merge;
pub mod problem;
pub mod split;
pub mod train;

pub use merge::{Rule, WeightVector};
pub use problem::{
    argmax_choice, normalize_scores, validate_forecast_set, Distribution, ForecastSet,
    QuestionInstance, QuestionKind, ScoreVector, Term,
};

//! Ingredient pairing engine.
//!
//! The pipeline runs in stages, each owned by one module:
//!
//! * [`corpus`] reads recipes and counts ingredient occurrence and co-occurrence.
//! * [`pairscore`] turns counts into NPMI pairing scores and a split dataset.
//! * [`embedding`] provides fixed ingredient vectors (file or PPMI+SVD).
//! * [`model`] is the Siamese encoder with the wide&deep scoring head.
//! * [`train`] fits the model with backpropagation and Adam.
//! * [`eval`] holds the regression and ranking metrics.
//! * [`predictor`] registers interchangeable pair predictors by name.
//! * [`recommend`] answers pair lookups and top-K partner queries.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod model;
pub mod pairscore;
pub mod predictor;
pub mod recommend;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};

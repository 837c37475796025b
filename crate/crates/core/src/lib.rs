//! Query-by-example talent search.
//!
//! A searcher supplies one to three ideal candidates; the crate turns them
//! into an editable facet query, retrieves matching members from an inverted
//! index and ranks them with a linear model over candidate-similarity and
//! keyword features. Training lists come from search sessions via co-inmail
//! labeling, and [`eval`] holds the offline experiments.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

// `!(x >= 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod eval;
pub mod expertise;
pub mod features;
pub mod label_gen;
pub mod ltr;
pub mod pipeline;
pub mod query_builder;
pub mod retrieval;
pub mod scalar;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Expertise = expertise::ExpertiseMatrix<f64>;
pub type Query = query_builder::StructuredQuery<f64>;
pub type Model = ltr::LinearModel<f64>;
pub type FeatureVec = features::FeatureVector<f64>;
pub type List = label_gen::LabeledList<f64>;
pub type Lists = label_gen::Dataset<f64>;

//! Deep abstaining classifier toolkit.
//!
//! Trains a multitask word-CNN in which every task owns an extra "abstain"
//! class, using a modified cross-entropy that lets the model decline to
//! classify samples it would likely get wrong. A feedback controller keeps
//! the abstention rate within a configured budget. Around the model sit the
//! tools needed to understand *why* it abstains: a synthetic corpus generator
//! with controllable correlated/uncorrelated label noise, selective-accuracy
//! evaluation over tasks and task combinations, a perturbation-based local
//! explainer for text, and exact Fisher tests that associate word stems with
//! abstention decisions.

pub mod adam;
pub mod corpus;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod lime;
pub mod loss;
pub mod model;
pub mod prob;
pub mod report;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use prob::{ProbabilityVector, TargetLabel};
pub use rng::Rng;
pub use tensor::{Parameter, Tensor};

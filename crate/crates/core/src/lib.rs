//! QUBO/Ising regression toolkit for transcription-factor binding models.
//!
//! The crate maps L1-regularized linear regression with binary weights onto a
//! QUBO problem, converts it to an Ising instance, and solves it with
//! simulated annealing or path-integral simulated quantum annealing. Real
//! valued ridge and lasso baselines, precision-recall and Kendall-tau
//! metrics, a calibration/bagging/evaluation pipeline, and weight-logo
//! rendering round out the toolkit.

pub mod baselines;
pub mod error;
pub mod logo;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod samplers;
pub mod seqdata;

pub use error::{Error, Result};

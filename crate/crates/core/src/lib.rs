//! Cost-sensitive classification through targeted adversarial data augmentation.
//!
//! A small multi-layer perceptron is first trained on plain cross-entropy.
//! Training examples are then pushed toward expensive misclassifications with
//! a targeted projected-gradient attack, and the perturbed copies are added
//! back to the objective with their true labels, weighted by a temperature-
//! normalized cost matrix. The decision boundary moves away from the classes
//! whose errors cost the most, even when the training set is fit perfectly.
//!
//! Modules, bottom-up:
//!
//! - [`numcore`]: matrices, seeded RNG, Gaussian/Pareto sampling, softmax.
//! - [`model`]: the MLP, its analytic gradients, SGD, checkpoints.
//! - [`cost`]: cost matrices, normalized weights, critical-pair sampling.
//! - [`attack`]: projected gradient ascent with rejection.
//! - [`losses`]: cross-entropy, augmented, stochastic and penalty objectives.
//! - [`trainer`]: the training loops.
//! - [`data`]: synthetic, CSV and IDX datasets; stratified splits.
//! - [`eval`]: weighted error rate, pairwise error matrices, boundary grids.

pub mod attack;
pub mod cost;
pub mod data;
mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod numcore;
pub mod trainer;

pub use error::{Error, Result};

//! # stochmetrics
//!
//! Metric distances between *stochastic* neural representations.
//!
//! A deterministic representation maps each input condition to a point in
//! activation space; a stochastic one maps it to a probability distribution.
//! This crate measures distances between such representations as a ground
//! metric between per-condition response distributions, averaged over
//! conditions and minimized over a nuisance group of transformations
//! (rotations or permutations of the neuron axes). The result is a true
//! metric on equivalence classes, so downstream analyses that rely on the
//! triangle inequality (embedding, nearest-neighbor prediction) are sound.
//!
//! ## Ground metrics
//!
//! | Ground metric | Input form | Entry point |
//! |---------------|------------|-------------|
//! | Interpolated Gaussian 2-Wasserstein `W̄₂^α` | moments (μ, Σ) | [`align_wasserstein::align_w2`] |
//! | Energy distance `ℰ_q` | samples | [`align_energy::energy_shape_distance`] |
//!
//! The interpolated metric weighs mean and covariance mismatch as
//! `(α‖Δμ‖² + (2−α)·ℬ²)^{1/2}` where `ℬ` is the Bures distance between
//! covariances; `α = 2` ignores covariances, `α = 0` ignores means, and
//! `α = 1` is the exact Gaussian 2-Wasserstein distance. The energy distance
//! is nonparametric and works directly on sampled responses; its estimator
//! may come out slightly negative or violate triangle inequalities, which
//! [`analysis::metric_repair`] projects away.
//!
//! ## Pipeline
//!
//! ```no_run
//! use stochmetrics::align::{AlignOptions, AlignmentGroup};
//! use stochmetrics::analysis::{distance_matrix, metric_repair, mds_with_distortion};
//! use stochmetrics::dataio::ToySpec;
//! use stochmetrics::ground::GroundMetricSpec;
//!
//! let reps = stochmetrics::dataio::generate_toy(&ToySpec::default()).unwrap();
//! let metric = GroundMetricSpec::InterpolatedWasserstein { alpha: 1.0 };
//! let opts = AlignOptions::default();
//! let d = distance_matrix(&reps, &metric, AlignmentGroup::Orthogonal, &opts, None).unwrap();
//! let d = metric_repair(&d).unwrap();
//! let emb = mds_with_distortion(&d, 2).unwrap();
//! # let _ = emb;
//! ```

pub mod align;
pub mod align_energy;
pub mod align_wasserstein;
pub mod analysis;
pub mod dataio;
pub mod error;
pub mod ground;
pub mod linalg;
pub mod moments;

pub use error::{Error, Result};

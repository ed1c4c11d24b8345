//! Neural-network estimators for quantum observables.
//!
//! This crate reconstructs a quantum state from single-qubit projective
//! measurement data using a complex-valued restricted Boltzmann machine
//! (RBM) wavefunction, then uses the trained network to produce Monte Carlo
//! estimates of Pauli-sum observables with far lower variance than the
//! standard per-Pauli averaging scheme.
//!
//! The pipeline, end to end:
//!
//! 1. [`pauli`] — parse a weighted Pauli-sum observable and evaluate its
//!    matrix elements in the computational basis.
//! 2. [`exactsim`] — dense exact simulation at small qubit counts: ground
//!    states, exact expectations, basis rotations and Born-rule sampling.
//!    Serves both as the synthetic-data source and the verification oracle.
//! 3. [`dataset`] — persistence and bookkeeping of basis-tagged measurement
//!    records: load/save, train/validation splits, sub-sampling and
//!    per-Pauli grouping.
//! 4. [`rbm`] — the complex-valued RBM wavefunction: log-amplitudes,
//!    parameter log-derivatives, rotated-basis amplitudes and the exact
//!    partition function.
//! 5. [`sampler`] — parallel-tempering Metropolis sampling of visible
//!    configurations from `|psi|^2`.
//! 6. [`trainer`] — maximum-likelihood reconstruction: NLL, its gradient,
//!    RMSprop updates and checkpoint selection.
//! 7. [`estimator`] — the neural-network Monte Carlo estimator, the
//!    standard per-Pauli estimator, error bounds, chemical-accuracy
//!    probabilities and replicate-ensemble statistics.
//!
//! All randomness flows from explicit seeds through [`seeding`]; every
//! operation is reproducible bit-for-bit given the same inputs and seed.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod exactsim;
pub mod pauli;
pub mod rbm;
pub mod sampler;
pub mod seeding;
pub mod trainer;

pub use dataset::{Dataset, MeasurementRecord};
pub use error::{Error, Result};
pub use estimator::{AccuracyConfig, EnsembleReport, EstimateReport, EstimatorMethod, ShotBudget};
pub use exactsim::{Axis, BasisAssignment, StateVector};
pub use pauli::{Observable, PauliOp, PauliString};
pub use rbm::{GradientVector, RbmWavefunction};
pub use sampler::SamplerConfig;
pub use trainer::{SelectionRule, TrainConfig, TrainReport};

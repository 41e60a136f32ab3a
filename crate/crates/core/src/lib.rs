//! Joint time- and graph-domain sampling and recovery of signals on
//! networked dynamical systems.
//!
//! The pipeline: linearize a stable nonlinear model at its equilibrium
//! ([`spectral::jacobian`]), diagonalize the Jacobian into a graph Fourier
//! basis ([`spectral::decompose`]), pick a fixed node set that pins down a
//! band of graph frequencies ([`sampling::select_sampling_set`]), bound the
//! temporal bandwidth of the response ([`sampling::time_cutoff_bandlimited`]),
//! and rebuild the full trajectory from uniformly sampled nodes
//! ([`sampling::joint_recover`]). [`experiments`] sweeps this end to end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod sampling;
pub mod spectral;

pub use dynamics::{DynamicsModel, ModelKind, Trajectory};
pub use error::{Error, Result};
pub use graph::Network;
pub use sampling::{SampleRecord, SamplingPlan};
pub use spectral::{BandSpec, LinearOperator, SpectralBasis};

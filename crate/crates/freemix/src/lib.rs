//! Approximate the eigenvalue density of a sum of two Hermitian matrices by a
//! convex combination of its free and classical convolutions, with the weight
//! p fixed by fourth-moment matching.
//!
//! The crate provides:
//! - discrete spectra and smoothed density curves ([`spectrum`], [`density`]);
//! - Haar/permutation/GOE sampling and eigenvector statistics ([`ensembles`]);
//! - the classical (all-pairs) convolution and moment combinatorics
//!   ([`classical`]);
//! - an analytic free-convolution engine for N-fold self-sums via the
//!   pole equation of the inverse Cauchy transform ([`free`]);
//! - fourth-moment matching and the p estimators ([`mixture`]);
//! - generators for the worked matrix models, including spin chains
//!   ([`models`]).

pub mod classical;
pub mod density;
pub mod ensembles;
pub mod error;
pub mod free;
pub mod mixture;
pub mod models;
pub mod spectrum;

pub mod cli;

pub use density::{DensityCurve, GridSpec, SmoothingSpec};
pub use ensembles::{MatrixSample, RngSeed};
pub use error::{Error, Result};
pub use mixture::{estimate, EstimateConfig, MomentReport, SummandPair};
pub use spectrum::Spectrum;

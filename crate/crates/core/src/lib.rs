//! Count queries over finite-alphabet sequence datasets with perfect privacy
//! for a designated set of sensitive loci.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the sequence priors (Markov chains, empirical tables,
//!   the HMM-style dataset generator) and exact probability evaluation over
//!   locus subsets.
//! * [`local`] builds the per-user release mechanisms, their closed-form
//!   error probabilities and the entropy lower bound.
//! * [`central`] aggregates counts and builds the trusted-server channel.
//! * [`dp`] contains the differential-privacy baselines used for comparison.
//! * [`audit`] certifies that a mechanism's output is independent of the
//!   sensitive loci.
//! * [`sim`] runs experiment plans and writes CSV results.

pub mod audit;
pub mod central;
pub mod dp;
mod error;
pub mod info;
pub mod local;
pub mod model;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    Alphabet, JointTable, LocusSet, MarkovChainModel, Query, Sequence, SequenceModel,
    TabularModel,
};

/// Absolute tolerance for sum-to-one checks on probability vectors.
pub const SUM_TOLERANCE: f64 = 1e-10;

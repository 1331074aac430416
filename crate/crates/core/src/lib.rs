//! Diverse misinformation spreading with peer correction on two-class,
//! degree-heterogeneous mixed-membership networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`ensemble`] builds the compartment distribution over
//!   `(class, class-1 contacts, class-2 contacts)` and samples explicit
//!   networks from the same generative model.
//! * [`meanfield`] integrates the heterogeneous mean-field equations for the
//!   duped mass of every compartment and locates invasion thresholds.
//! * [`multistrain`] composes independently integrated strains into joint
//!   node states and neighbourhood profiles.
//! * [`abm`] is an exact event-driven simulator used as a stochastic oracle
//!   for the mean-field equations.
//! * [`bias`] holds the classifier statistics (MCC, accuracy, bootstrap
//!   credibility) and the demographic grouping of survey responses.
//! * [`experiments`] scripts the parameter sweeps and figure datasets.

pub mod abm;
pub mod bias;
pub mod ensemble;
mod error;
pub mod experiments;
pub mod meanfield;
pub mod multistrain;
pub mod stats;

pub use error::{check, Error, Result, Violation};
pub use ensemble::{Class, ClassDegreeDistribution, ExplicitNetwork, NetworkConfig};
pub use meanfield::{DupedField, MixingState, SolverConfig, StrainParams, Trajectory};

//! Causal discovery of linear cyclic models with latent confounders from
//! multiple overlapping experimental or observational data sets.
//!
//! The crate provides:
//!
//! - exact linear cyclic models with surgical interventions and equilibrium
//!   statistics ([`model`]),
//! - overlapping experiment specifications, finite-sample and
//!   infinite-sample data generation ([`experiments`]),
//! - partial-correlation independence testing and minimal (in)dependence
//!   search ([`independence`]),
//! - faithfulness rules turning those records into zero and product-zero
//!   constraints on experimental effects ([`faithfulness`]),
//! - a rank-revealing least-squares solver that classifies unknowns as
//!   determined or underdetermined ([`solver`]),
//! - four discovery algorithms, EHS / HEH / BILIN / LININF
//!   ([`algorithms`]),
//! - pair-condition identifiability analysis and experiment planning
//!   ([`identifiability`]),
//! - a simulation harness with reproducible scoring ([`harness`]).
//!
//! All randomness enters through explicit seeds; models and datasets are
//! immutable after construction, so everything here can be freely shared
//! across threads. Heavy loops (benchmark models, BILIN restarts, LININF
//! bootstrap replicates) run under rayon when the default `parallel`
//! feature is enabled and fall back to sequential execution without it.

pub mod algorithms;
pub mod error;
pub mod experiments;
pub mod faithfulness;
pub mod fixtures;
pub mod harness;
pub mod identifiability;
pub mod independence;
pub mod model;
pub mod par;
pub mod solver;
pub mod vars;

pub use error::{Error, Result};
pub use experiments::{DataSet, EffectKey, ExperimentSpec};
pub use model::{LinearCyclicModel, ManipulatedModel};
pub use vars::VarSet;

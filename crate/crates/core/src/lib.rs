//! Deterministic, desk-scale simulator for multiparty privacy learning in a
//! graynet.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: the action-relational graph and its granularized graynet.
//! * [`nn`]: the shared dense network, its forward and negative-direction
//!   passes, the quadratic error with analytic gradient, and top-k support
//!   projection.
//! * [`dataio`]: capture-file reader, flow-record files and the synthetic
//!   traffic generator.
//! * [`pipeline`]: traffic to byte-embedded, normalized, sparse feature
//!   vectors.
//! * [`trainer`]: layer-wise training, depth adaptation, constrained phases
//!   and client-local training.
//! * [`federation`]: broker orchestration over servers and clients.
//! * [`metrics`]: confusion rates, the generalization error `G_E`, k-fold
//!   splits.
//! * [`harness`]: meta-generalization sweeps and table emission.
//! * [`cli`]: the `graynet` command-line entry point.

pub mod cli;
pub mod config;
pub mod dataio;
pub mod federation;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod trainer;

pub use config::ExperimentConfig;
pub use dataio::{FlowRecord, Label};
pub use graph::{ActionRelationalGraph, Graynet};
pub use metrics::{ConfusionRates, Prediction};
pub use nn::{Activation, ActivationSpec, NetworkParams};

//! Determinantal point processes on compact, connected two-point homogeneous
//! spaces: exact sampling of the harmonic and projective ensembles, metric-ball
//! discrepancy over certified nets, and variance/discrepancy scaling experiments.

pub mod discrepancy;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod spaces;
pub mod special;
pub mod tails;
pub mod variance;

pub use discrepancy::{build_net, count_in_ball, discrepancy_sup, BallNet, DiscrepancyResult};
pub use ensembles::{Ensemble, EnsembleKernel, KernelSpec};
pub use error::{Error, Result};
pub use sampler::{sample_dpp, SampleSet};
pub use spaces::{Ball, Point, Space, SpaceKind};

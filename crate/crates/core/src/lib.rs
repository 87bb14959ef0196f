//! Multi-sensor track-to-track association (T2TA).
//!
//! The crate groups sensor-local tracks into clusters that share one physical
//! origin. The central algorithm is a stochastic optimizer ([`so`]) that samples
//! remain/split/move/merge actions weighted by ratios of a multidimensional
//! cluster likelihood ([`likelihood`]). Pairwise baselines and an exact
//! brute-force optimizer live in [`baselines`]; covariance intersection and
//! GOSPA scoring in [`evaluation`]; scenario generators in [`sim`].
//!
//! Track indices are 0-based throughout the Rust API. Cluster ids inside a
//! [`JointAssociation`] are 1-based so that canonical associations read
//! `[1, 2, 1]`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod likelihood;
pub mod sim;
pub mod so;
pub mod track;

pub use association::{canonicalize, clusters_of, is_sensor_valid, Cluster, JointAssociation};
pub use error::{Error, Result};
pub use frame::{GroundTruth, ScenarioFrame};
pub use track::{SensorId, SensorInfo, Track};

//! Comparison association algorithms and an exact brute-force optimizer.

mod brute_force;
mod greedy;
mod hungarian;
mod sensorwise;

pub use brute_force::{brute_force_optimal, count_valid_partitions, DEFAULT_BRUTE_FORCE_CAP};
pub use greedy::{greedy, greedy_with_trace, PairwiseCostMatrix, D_MAX};
pub use hungarian::{hungarian, Assignment};
pub use sensorwise::sensorwise;

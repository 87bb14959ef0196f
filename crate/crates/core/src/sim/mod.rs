//! Scenario generation: static Monte Carlo scenes and a scripted collective
//! perception world (local UKF trackers, CPM generation, lossy channel, RSU).

mod cpm;
mod mc;
mod motion;
mod rsu;
mod scenario;
mod sensing;
mod ukf;

pub use cpm::{cpm_select, CommConfig, CommMode, SentSnapshot};
pub use mc::{gen_mc_frame, McConfig};
pub use motion::{
    ct_predict, ct_transition, noise_gain, process_noise, ObjectState, StateVec, OMEGA_EPS,
};
pub use rsu::{Cpm, CpmTrack, Rsu, RsuStats};
pub use scenario::{
    intersection_script, run_cp_scenario, CpRun, IntersectionParams, ObjectScript, PayloadStats,
    Segment, WorldScript,
};
pub use sensing::{sense, Detection};
pub use ukf::{ukf_predict, ukf_step, ukf_update, LocalTrack, Tracker, INVALIDATE_AFTER};

//! Agreement of SO and greedy with the exact brute-force optimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use t2ta::baselines::{brute_force_optimal, greedy};
use t2ta::likelihood::{DetectionModel, LikelihoodModel, Scene, SpatialKind};
use t2ta::sim::{gen_mc_frame, McConfig};
use t2ta::so::{self, SoConfig};
use t2ta::Error;

use crate::mc::SAMPLER_STREAM;

/// Log-likelihood tolerance for calling a result optimal.
pub const OPTIMUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSpec {
    pub instances: usize,
    pub seed: u64,
    /// Scene generator; its seed is replaced per instance.
    pub scene: McConfig,
    pub sweeps: usize,
    pub gate: f64,
    pub threshold: f64,
    pub cap: usize,
}

impl OracleSpec {
    /// Small ambiguous scenes: 2 objects seen by up to 4 sensors (at most 8 tracks).
    pub fn new(instances: usize, seed: u64) -> Self {
        Self {
            instances,
            seed,
            scene: McConfig {
                side: 5.0,
                n_objects: 2,
                n_sensors: 4,
                sigma: 1.0,
                p_d: 0.7,
                seed,
            },
            sweeps: 500,
            gate: 6.0,
            threshold: 15.0,
            cap: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub instance: usize,
    pub seed: u64,
    pub n_tracks: usize,
    pub optimum_log_lik: f64,
    pub so_log_lik: f64,
    pub so_optimal: bool,
    pub greedy_merge_log_lik: f64,
    pub greedy_merge_optimal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSummary {
    pub instances: usize,
    pub so_optimal: usize,
    pub greedy_merge_optimal: usize,
}

impl OracleSummary {
    pub fn of(rows: &[OracleRow]) -> Self {
        Self {
            instances: rows.len(),
            so_optimal: rows.iter().filter(|r| r.so_optimal).count(),
            greedy_merge_optimal: rows.iter().filter(|r| r.greedy_merge_optimal).count(),
        }
    }

    pub fn so_rate(&self) -> f64 {
        self.so_optimal as f64 / self.instances.max(1) as f64
    }
}

pub fn oracle_check(spec: &OracleSpec) -> Result<Vec<OracleRow>, Error> {
    if spec.instances == 0 {
        return Err(Error::Config("at least one instance is required".into()));
    }
    (0..spec.instances)
        .into_par_iter()
        .map(|i| {
            let seed = spec.seed + i as u64;
            let frame = gen_mc_frame(&spec.scene.with_seed(seed))?;
            let model =
                LikelihoodModel::new(DetectionModel::fixed(spec.scene.p_d), SpatialKind::Proposed);
            let scene = Scene::new(&frame.tracks, &frame.sensors, &model)?;
            let (_, optimum) = brute_force_optimal(&scene, spec.cap)?;
            let so_ll = if frame.tracks.is_empty() {
                0.0
            } else {
                let h = so::run_scene(
                    &scene,
                    &SoConfig::new(spec.sweeps, spec.gate, seed ^ SAMPLER_STREAM, model),
                )?;
                h.best()?.1
            };
            let pairwise = Scene::pairwise(&frame.tracks, &frame.sensors, SpatialKind::Proposed)?;
            let greedy_ll = scene.log_joint_lik(&greedy(&pairwise, spec.threshold, true));
            Ok(OracleRow {
                instance: i,
                seed,
                n_tracks: frame.tracks.len(),
                optimum_log_lik: optimum,
                so_log_lik: so_ll,
                so_optimal: so_ll >= optimum - OPTIMUM_TOL,
                greedy_merge_log_lik: greedy_ll,
                greedy_merge_optimal: greedy_ll >= optimum - OPTIMUM_TOL,
            })
        })
        .collect()
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{GroundTruth, ScenarioFrame};
use crate::track::{SensorInfo, Track};

/// Static Monte Carlo scene parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Side of the square surveillance area in meters.
    pub side: f64,
    pub n_objects: usize,
    pub n_sensors: usize,
    pub sigma: f64,
    pub p_d: f64,
    pub seed: u64,
}

impl McConfig {
    /// 30 m x 30 m, 8 objects, 5 sensors.
    pub fn small(sigma: f64, p_d: f64, seed: u64) -> Self {
        Self {
            side: 30.0,
            n_objects: 8,
            n_sensors: 5,
            sigma,
            p_d,
            seed,
        }
    }

    /// 50 m x 50 m, 20 objects, 12 sensors.
    pub fn big(sigma: f64, p_d: f64, seed: u64) -> Self {
        Self {
            side: 50.0,
            n_objects: 20,
            n_sensors: 12,
            sigma,
            p_d,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side > 0.0 && self.side.is_finite()) {
            return Err(Error::Config(format!(
                "area side must be positive, got {}",
                self.side
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.p_d) {
            return Err(Error::Config(format!(
                "detection probability must lie in [0, 1], got {}",
                self.p_d
            )));
        }
        if self.n_sensors == 0 {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        Ok(())
    }
}

/// Draws one scene: uniform objects and sensors, Bernoulli detections, and
/// one noisy isotropic track per detection. Tracks are grouped by sensor and
/// shuffled within each sensor.
pub fn gen_mc_frame(cfg: &McConfig) -> Result<ScenarioFrame> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let objects: Vec<[f64; 2]> = (0..cfg.n_objects)
        .map(|_| {
            [
                rng.random_range(0.0..cfg.side),
                rng.random_range(0.0..cfg.side),
            ]
        })
        .collect();
    let sensors: Vec<SensorInfo> = (1..=cfg.n_sensors as u32)
        .map(|id| {
            SensorInfo::new(
                id,
                [
                    rng.random_range(0.0..cfg.side),
                    rng.random_range(0.0..cfg.side),
                ],
            )
        })
        .collect();

    let mut tracks = Vec::new();
    for s in &sensors {
        let mut own = Vec::new();
        for (k, o) in objects.iter().enumerate() {
            if rng.random::<f64>() < cfg.p_d {
                let p = [o[0] + noise.sample(&mut rng), o[1] + noise.sample(&mut rng)];
                own.push(Track::isotropic(s.id, p, cfg.sigma)?.with_object(k as u64));
            }
        }
        own.shuffle(&mut rng);
        tracks.extend(own);
    }
    let truths = objects
        .iter()
        .enumerate()
        .map(|(k, &position)| GroundTruth {
            object_id: k as u64,
            position,
            is_vru: false,
        })
        .collect();
    Ok(ScenarioFrame {
        time: 0.0,
        tracks,
        sensors,
        truths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn extreme_detection_probabilities() {
        let full = gen_mc_frame(&McConfig::small(1.0, 1.0, 3)).unwrap();
        assert_eq!(full.tracks.len(), 40);
        assert_eq!(full.truths.len(), 8);
        let none = gen_mc_frame(&McConfig::small(1.0, 0.0, 3)).unwrap();
        assert!(none.tracks.is_empty());
    }

    #[test]
    fn mean_track_count_is_binomial() {
        let (n, p, seeds) = (40.0, 0.6, 1000);
        let total: usize = (0..seeds)
            .map(|s| {
                gen_mc_frame(&McConfig::small(1.0, p, s))
                    .unwrap()
                    .tracks
                    .len()
            })
            .sum();
        let mean = total as f64 / seeds as f64;
        let sd_of_mean = (n * p * (1.0 - p) / seeds as f64).sqrt();
        assert!((mean - n * p).abs() < 3.0 * sd_of_mean, "mean {mean}");
    }

    #[test]
    fn layout_and_uniqueness() {
        let f = gen_mc_frame(&McConfig::big(2.0, 0.7, 11)).unwrap();
        f.validate().unwrap();
        let sensors: Vec<u32> = f.tracks.iter().map(|t| t.sensor()).collect();
        assert!(
            sensors.windows(2).all(|w| w[0] <= w[1]),
            "sensor-major order"
        );
        let pairs: BTreeSet<(u32, u64)> = f
            .tracks
            .iter()
            .map(|t| (t.sensor(), t.object_id().unwrap()))
            .collect();
        assert_eq!(pairs.len(), f.tracks.len());
        for s in &f.sensors {
            assert!(s.position.iter().all(|c| (0.0..50.0).contains(c)));
        }
        assert!(f.tracks.iter().all(|t| t.covariance()[(0, 0)] == 4.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_mc_frame(&McConfig::small(1.0, 0.8, 5)).unwrap();
        let b = gen_mc_frame(&McConfig::small(1.0, 0.8, 5)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_ne!(a, gen_mc_frame(&McConfig::small(1.0, 0.8, 6)).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(gen_mc_frame(&McConfig::small(0.0, 0.5, 1)).is_err());
        assert!(gen_mc_frame(&McConfig::small(1.0, 1.5, 1)).is_err());
    }
}

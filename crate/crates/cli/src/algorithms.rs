//! Uniform dispatch over every association algorithm.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use t2ta::association::ground_truth_association;
use t2ta::baselines::{brute_force_optimal, greedy, sensorwise, DEFAULT_BRUTE_FORCE_CAP};
use t2ta::likelihood::{DetectionModel, LikelihoodModel, Scene, SpatialKind};
use t2ta::so::{self, HypothesisSet, SoConfig};
use t2ta::{Error, JointAssociation, ScenarioFrame};

/// Association algorithms known to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    GroundTruth,
    /// Stochastic optimization with the experiment's detection model.
    So,
    /// Stochastic optimization with the estimated-constant detection model.
    SoC,
    /// Stochastic optimization with the distance-based detection model.
    SoDs,
    GreedyMerge,
    GreedyNoMerge,
    Sensorwise,
    Oracle,
}

impl AlgorithmKind {
    pub const ALL: [Self; 8] = [
        Self::GroundTruth,
        Self::So,
        Self::SoC,
        Self::SoDs,
        Self::GreedyMerge,
        Self::GreedyNoMerge,
        Self::Sensorwise,
        Self::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GroundTruth => "ground_truth",
            Self::So => "so",
            Self::SoC => "so_c",
            Self::SoDs => "so_ds",
            Self::GreedyMerge => "greedy_merge",
            Self::GreedyNoMerge => "greedy_no_merge",
            Self::Sensorwise => "sensorwise",
            Self::Oracle => "oracle",
        }
    }

    pub fn is_so(self) -> bool {
        matches!(self, Self::So | Self::SoC | Self::SoDs)
    }

    pub fn is_pairwise(self) -> bool {
        matches!(
            self,
            Self::GreedyMerge | Self::GreedyNoMerge | Self::Sensorwise
        )
    }

    /// Whether the algorithm needs a proper joint likelihood.
    pub fn needs_likelihood(self) -> bool {
        self.is_so() || self == Self::Oracle
    }

    /// Rejects combinations of a likelihood-based algorithm with a pairwise-only score.
    pub fn check_spatial(self, spatial: SpatialKind) -> Result<(), Error> {
        if self.needs_likelihood() && !spatial.is_likelihood() {
            return Err(Error::Config(format!(
                "{} needs a joint likelihood, but '{}' is a pairwise distance score",
                self.name(),
                spatial.name()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Parameters shared by all algorithms of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgorithmParams {
    pub spatial: SpatialKind,
    /// Detection model used by plain `so` and the oracle.
    pub detection: DetectionModel,
    pub sweeps: usize,
    pub gate: f64,
    /// `d_t` for greedy and sensorwise.
    pub threshold: f64,
    pub oracle_cap: usize,
    /// `rho` of the estimated-constant model.
    pub rho: f64,
}

impl AlgorithmParams {
    pub fn new(
        spatial: SpatialKind,
        detection: DetectionModel,
        sweeps: usize,
        gate: f64,
        threshold: f64,
    ) -> Self {
        Self {
            spatial,
            detection,
            sweeps,
            gate,
            threshold,
            oracle_cap: DEFAULT_BRUTE_FORCE_CAP,
            rho: 0.25,
        }
    }

    /// Detection model a given algorithm runs with.
    pub fn detection_for(&self, kind: AlgorithmKind) -> DetectionModel {
        match kind {
            AlgorithmKind::SoC => DetectionModel::estimated_constant(self.rho),
            AlgorithmKind::SoDs => DetectionModel::collective_perception_default(),
            _ => self.detection,
        }
    }

    /// Short `key=value` summary of what `kind` uses.
    pub fn describe(&self, kind: AlgorithmKind) -> String {
        match kind {
            k if k.is_so() => format!("N={};dg={}", self.sweeps, self.gate),
            k if k.is_pairwise() => format!("dt={}", self.threshold),
            AlgorithmKind::Oracle => format!("cap={}", self.oracle_cap),
            _ => String::new(),
        }
    }
}

/// Result of one algorithm on one frame.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub association: JointAssociation,
    /// Full sample sequence for SO runs.
    pub hypotheses: Option<HypothesisSet>,
}

/// Runs `kind` on `frame`. `seed` drives the SO sampler.
pub fn run_algorithm(
    kind: AlgorithmKind,
    frame: &ScenarioFrame,
    params: &AlgorithmParams,
    seed: u64,
) -> Result<Outcome, Error> {
    kind.check_spatial(params.spatial)?;
    let tracks = &frame.tracks;
    let sensors = &frame.sensors;
    let plain = |association| {
        Ok(Outcome {
            association,
            hypotheses: None,
        })
    };
    match kind {
        AlgorithmKind::GroundTruth => plain(ground_truth_association(tracks)),
        k if k.is_so() => {
            let model = LikelihoodModel::new(params.detection_for(k), params.spatial);
            let h = so::run(
                tracks,
                sensors,
                &SoConfig::new(params.sweeps, params.gate, seed, model),
            )?;
            let association = if h.is_empty() {
                JointAssociation::singletons(0)
            } else {
                h.best()?.0.clone()
            };
            Ok(Outcome {
                association,
                hypotheses: Some(h),
            })
        }
        AlgorithmKind::Oracle => {
            let model = LikelihoodModel::new(params.detection, params.spatial);
            let scene = Scene::new(tracks, sensors, &model)?;
            plain(brute_force_optimal(&scene, params.oracle_cap)?.0)
        }
        _ => {
            let scene = Scene::pairwise(tracks, sensors, params.spatial)?;
            plain(match kind {
                AlgorithmKind::GreedyMerge => greedy(&scene, params.threshold, true),
                AlgorithmKind::GreedyNoMerge => greedy(&scene, params.threshold, false),
                _ => sensorwise(&scene, params.threshold),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in AlgorithmKind::ALL {
            assert_eq!(a.name().parse::<AlgorithmKind>().unwrap(), a);
        }
        assert!("sd_assign".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn euclidean_only_for_pairwise() {
        for a in AlgorithmKind::ALL {
            let ok = a.check_spatial(SpatialKind::Euclidean).is_ok();
            assert_eq!(ok, !a.needs_likelihood(), "{a}");
        }
    }
}

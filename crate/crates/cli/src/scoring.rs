//! GOSPA scoring helpers and summary statistics.

use nalgebra::Vector2;
use serde::Serialize;
use t2ta::evaluation::{evaluate_association, GospaParams, GospaResult};
use t2ta::likelihood::{DetectionModel, LikelihoodModel, Scene, SpatialKind};
use t2ta::so::HypothesisSet;
use t2ta::{Error, JointAssociation, ScenarioFrame};

pub fn truth_positions(frame: &ScenarioFrame) -> Vec<Vector2<f64>> {
    frame
        .truths
        .iter()
        .map(|g| Vector2::from(g.position))
        .collect()
}

pub fn score(
    frame: &ScenarioFrame,
    assoc: &JointAssociation,
    gospa: &GospaParams,
) -> Result<GospaResult, Error> {
    evaluate_association(assoc, &frame.tracks, &truth_positions(frame), gospa)
}

/// Log joint likelihood of `assoc` under `(detection, spatial)`, if that is a likelihood.
pub fn log_lik(
    frame: &ScenarioFrame,
    assoc: &JointAssociation,
    detection: DetectionModel,
    spatial: SpatialKind,
) -> Result<Option<f64>, Error> {
    if !spatial.is_likelihood() {
        return Ok(None);
    }
    let model = LikelihoodModel::new(detection, spatial);
    Ok(Some(
        Scene::new(&frame.tracks, &frame.sensors, &model)?.log_joint_lik(assoc),
    ))
}

/// GOSPA totals of the `k` most likely distinct hypotheses: `(min, mean, max)`.
pub fn top_k_band(
    frame: &ScenarioFrame,
    h: &HypothesisSet,
    k: usize,
    gospa: &GospaParams,
) -> Result<Option<(f64, f64, f64)>, Error> {
    let top = h.top_k(k);
    if top.is_empty() {
        return Ok(None);
    }
    let totals = top
        .iter()
        .map(|d| score(frame, &d.association, gospa).map(|r| r.total))
        .collect::<Result<Vec<_>, _>>()?;
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Some((
        min,
        totals.iter().sum::<f64>() / totals.len() as f64,
        max,
    )))
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStderr {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

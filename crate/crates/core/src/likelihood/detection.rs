//! Detection-probability models.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::{SensorInfo, Track};

/// Upper bound applied to every detection probability. Without it clusters
/// missing any sensor would have zero likelihood and the sampler could not move.
pub const DEFAULT_P_CAP: f64 = 0.97;

/// Smallest probability handed to the log domain.
const P_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectionKind {
    /// Same probability for every sensor and state.
    Fixed { p: f64 },
    /// `rho * N_T / (N_S * max_s |T_s|)`, estimated from the frame.
    EstimatedConstant { rho: f64 },
    /// `p_in` within `range + margin` of the sensor, `p_out` beyond.
    DistanceBased { p_in: f64, p_out: f64, margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub kind: DetectionKind,
    pub p_cap: f64,
}

impl DetectionModel {
    pub fn fixed(p: f64) -> Self {
        Self {
            kind: DetectionKind::Fixed { p },
            p_cap: DEFAULT_P_CAP,
        }
    }

    pub fn estimated_constant(rho: f64) -> Self {
        Self {
            kind: DetectionKind::EstimatedConstant { rho },
            p_cap: DEFAULT_P_CAP,
        }
    }

    pub fn distance_based(p_in: f64, p_out: f64, margin: f64) -> Self {
        Self {
            kind: DetectionKind::DistanceBased {
                p_in,
                p_out,
                margin,
            },
            p_cap: DEFAULT_P_CAP,
        }
    }

    /// 0.97 inside the sensor range plus a 10 m margin, 0.15 outside.
    pub fn collective_perception_default() -> Self {
        Self::distance_based(0.97, 0.15, 10.0)
    }

    pub fn with_cap(mut self, p_cap: f64) -> Self {
        self.p_cap = p_cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: f64| p > 0.0 && p <= 1.0;
        let ok = match self.kind {
            DetectionKind::Fixed { p } => in_unit(p),
            DetectionKind::EstimatedConstant { rho } => rho > 0.0 && rho.is_finite(),
            DetectionKind::DistanceBased {
                p_in,
                p_out,
                margin,
            } => in_unit(p_in) && in_unit(p_out) && margin >= 0.0,
        };
        if !ok || !in_unit(self.p_cap) {
            return Err(Error::Config(format!("invalid detection model {self:?}")));
        }
        Ok(())
    }

    fn cap(&self, p: f64) -> f64 {
        p.min(self.p_cap).max(P_FLOOR)
    }
}

/// Frame-level counts needed by the estimated-constant model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameStats {
    pub n_tracks: usize,
    pub n_sensors: usize,
    pub max_tracks_per_sensor: usize,
}

impl FrameStats {
    pub fn from_tracks(tracks: &[Track], sensors: &[SensorInfo]) -> Self {
        let mut counts = std::collections::HashMap::new();
        for t in tracks {
            *counts.entry(t.sensor()).or_insert(0usize) += 1;
        }
        Self {
            n_tracks: tracks.len(),
            n_sensors: sensors.len(),
            max_tracks_per_sensor: counts.values().copied().max().unwrap_or(0),
        }
    }
}

/// Detection probability of `sensor` for an object at `fused_position`, capped.
pub fn detection_prob(
    model: &DetectionModel,
    fused_position: &Vector2<f64>,
    sensor: &SensorInfo,
    context: Option<&FrameStats>,
) -> Result<f64> {
    let p = match model.kind {
        DetectionKind::Fixed { p } => p,
        DetectionKind::EstimatedConstant { rho } => {
            let ctx = context.ok_or(Error::MissingContext)?;
            estimated_constant(rho, ctx)
        }
        DetectionKind::DistanceBased {
            p_in,
            p_out,
            margin,
        } => {
            let range = sensor.range.ok_or(Error::MissingSensorRange(sensor.id))?;
            if (fused_position - sensor.position_vec()).norm() < range + margin {
                p_in
            } else {
                p_out
            }
        }
    };
    Ok(model.cap(p))
}

fn estimated_constant(rho: f64, ctx: &FrameStats) -> f64 {
    if ctx.n_sensors == 0 || ctx.max_tracks_per_sensor == 0 {
        return P_FLOOR;
    }
    rho * ctx.n_tracks as f64 / (ctx.n_sensors as f64 * ctx.max_tracks_per_sensor as f64)
}

/// A detection model bound to one frame, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) enum BoundDetection {
    /// Log-probabilities `(log p, log(1 - p))` shared by all sensors.
    Constant { log_p: f64, log_q: f64 },
    /// Per-sensor disc of radius `range + margin`.
    PerSensor {
        centers: Vec<Vector2<f64>>,
        radii: Vec<f64>,
        inside: (f64, f64),
        outside: (f64, f64),
    },
}

impl BoundDetection {
    pub(crate) fn bind(
        model: &DetectionModel,
        sensors: &[SensorInfo],
        stats: &FrameStats,
    ) -> Result<Self> {
        model.validate()?;
        let logs = |p: f64| {
            let p = model.cap(p);
            (p.ln(), (1.0 - p).ln())
        };
        Ok(match model.kind {
            DetectionKind::Fixed { p } => {
                let (log_p, log_q) = logs(p);
                Self::Constant { log_p, log_q }
            }
            DetectionKind::EstimatedConstant { rho } => {
                let (log_p, log_q) = logs(estimated_constant(rho, stats));
                Self::Constant { log_p, log_q }
            }
            DetectionKind::DistanceBased {
                p_in,
                p_out,
                margin,
            } => {
                let radii = sensors
                    .iter()
                    .map(|s| {
                        s.range
                            .map(|r| r + margin)
                            .ok_or(Error::MissingSensorRange(s.id))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::PerSensor {
                    centers: sensors.iter().map(SensorInfo::position_vec).collect(),
                    radii,
                    inside: logs(p_in),
                    outside: logs(p_out),
                }
            }
        })
    }

    /// Log cardinality likelihood given the sensor indices present in a cluster.
    pub(crate) fn log_cardinality(
        &self,
        n_sensors: usize,
        present: &[usize],
        center: &Vector2<f64>,
    ) -> f64 {
        match self {
            Self::Constant { log_p, log_q } => {
                let k = present.len() as f64;
                k * log_p + (n_sensors as f64 - k) * log_q
            }
            Self::PerSensor {
                centers,
                radii,
                inside,
                outside,
            } => {
                let pick = |s: usize| {
                    if (center - centers[s]).norm() < radii[s] {
                        *inside
                    } else {
                        *outside
                    }
                };
                let mut total: f64 = (0..centers.len()).map(|s| pick(s).1).sum();
                for &s in present {
                    let (lp, lq) = pick(s);
                    total += lp - lq;
                }
                total
            }
        }
    }
}

//! Cluster and joint-association likelihoods.
//!
//! A cluster's likelihood is the product of a cardinality term (which sensors
//! saw the object, given detection probabilities at the fused position) and a
//! spatial term (Gaussian consistency of the member positions with the fused
//! cluster center). Everything is evaluated in the log domain on the 2-D
//! position block of each track.

mod detection;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

pub(crate) use detection::BoundDetection;
pub use detection::{detection_prob, DetectionKind, DetectionModel, FrameStats, DEFAULT_P_CAP};

use crate::association::{clusters_of, JointAssociation};
use crate::error::{Error, Result};
use crate::track::{SensorId, SensorInfo, Track};

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

/// Which spatial score a cluster is rated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialKind {
    /// `prod_t N(x_t; x_c, P_c + P_t)`: includes the uncertainty of the fused center.
    Proposed,
    /// `prod_t N(x_t; x_c, P_t)`: center treated as exact.
    Generalized,
    /// Negative summed distance to the member centroid. Pairwise baselines only.
    Euclidean,
}

impl SpatialKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Generalized => "generalized",
            Self::Euclidean => "euclidean",
        }
    }

    /// Whether the score is a proper joint likelihood usable by SO and the oracle.
    pub fn is_likelihood(self) -> bool {
        !matches!(self, Self::Euclidean)
    }
}

impl std::str::FromStr for SpatialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "generalized" => Ok(Self::Generalized),
            "euclidean" => Ok(Self::Euclidean),
            other => Err(Error::Config(format!("unknown likelihood kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodModel {
    pub detection: DetectionModel,
    pub spatial: SpatialKind,
}

impl LikelihoodModel {
    pub fn new(detection: DetectionModel, spatial: SpatialKind) -> Self {
        Self { detection, spatial }
    }
}

/// Fused position statistics and cached log-likelihood of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStat {
    pub members: Vec<usize>,
    pub fused_mean: Vector2<f64>,
    pub fused_cov: Matrix2<f64>,
    pub log_lik: f64,
}

/// Information-form fusion `P = (sum P_t^-1)^-1`, `x = P sum P_t^-1 x_t` on full states.
pub fn fuse_cluster(members: &[&Track]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let first = members.first().ok_or(Error::Empty("cluster"))?;
    let n = first.dim();
    if members.len() == 1 {
        return Ok((first.state().clone(), first.covariance().clone()));
    }
    let mut info = DMatrix::zeros(n, n);
    let mut info_mean = DVector::zeros(n);
    for t in members {
        if t.dim() != n {
            return Err(Error::DimensionMismatch {
                state: n,
                rows: t.dim(),
                cols: t.dim(),
            });
        }
        let inv = t
            .covariance()
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        info_mean += &inv * t.state();
        info += inv;
    }
    let cov = info.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse();
    let mean = &cov * info_mean;
    Ok((mean, symmetrize(cov)))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Log cardinality likelihood: `sum_{s in S(C)} log p_D + sum_{s not in S(C)} log(1 - p_D)`.
pub fn log_cardinality_lik(
    cluster_sensors: &[SensorId],
    all_sensors: &[SensorInfo],
    fused_position: &Vector2<f64>,
    model: &DetectionModel,
    context: Option<&FrameStats>,
) -> Result<f64> {
    let mut total = 0.0;
    for s in all_sensors {
        let p = detection_prob(model, fused_position, s, context)?;
        total += if cluster_sensors.contains(&s.id) {
            p.ln()
        } else {
            (1.0 - p).ln()
        };
    }
    Ok(total)
}

/// Log spatial score of a cluster given as tracks.
pub fn log_spatial_lik(members: &[&Track], kind: SpatialKind) -> f64 {
    let g: Vec<PositionGaussian> = members.iter().map(|t| PositionGaussian::of(t)).collect();
    let idx: Vec<usize> = (0..g.len()).collect();
    spatial(&g, &idx, kind).0
}

/// 2-D log density `log N(x; mean, cov)`; `-inf` for a singular covariance.
pub fn log_gauss2(x: &Vector2<f64>, mean: &Vector2<f64>, cov: &Matrix2<f64>) -> f64 {
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
    if !(det > 0.0) || !det.is_finite() {
        return f64::NEG_INFINITY;
    }
    let d = x - mean;
    let quad = (d[0] * d[0] * cov[(1, 1)] - d[0] * d[1] * (cov[(0, 1)] + cov[(1, 0)])
        + d[1] * d[1] * cov[(0, 0)])
        / det;
    -LOG_2PI - 0.5 * det.ln() - 0.5 * quad
}

pub(crate) fn inverse2(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    Some(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// Position block of a track, with its information form precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PositionGaussian {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub info: Matrix2<f64>,
    pub info_mean: Vector2<f64>,
}

impl PositionGaussian {
    pub fn of(t: &Track) -> Self {
        let mean = t.position();
        let cov = t.position_cov();
        // the marginal of an SPD matrix is SPD
        let info = inverse2(&cov).expect("position block of an SPD covariance");
        Self {
            mean,
            cov,
            info,
            info_mean: info * mean,
        }
    }
}

/// Fuses the listed members; returns `(mean, cov)` of the position block.
pub(crate) fn fuse_positions(
    g: &[PositionGaussian],
    members: &[usize],
) -> Option<(Vector2<f64>, Matrix2<f64>)> {
    if let [only] = members {
        return Some((g[*only].mean, g[*only].cov));
    }
    let mut info = Matrix2::zeros();
    let mut info_mean = Vector2::zeros();
    for &m in members {
        info += g[m].info;
        info_mean += g[m].info_mean;
    }
    let cov = inverse2(&info)?;
    Some((cov * info_mean, cov))
}

/// Spatial log score plus the fused center it was evaluated at.
fn spatial(
    g: &[PositionGaussian],
    members: &[usize],
    kind: SpatialKind,
) -> (f64, Vector2<f64>, Matrix2<f64>) {
    match kind {
        SpatialKind::Euclidean => {
            let centroid =
                members.iter().map(|&m| g[m].mean).sum::<Vector2<f64>>() / members.len() as f64;
            let fused = fuse_positions(g, members).unwrap_or((centroid, Matrix2::identity()));
            let score = -members
                .iter()
                .map(|&m| (g[m].mean - centroid).norm())
                .sum::<f64>();
            (score, fused.0, fused.1)
        }
        SpatialKind::Proposed | SpatialKind::Generalized => {
            let Some((center, center_cov)) = fuse_positions(g, members) else {
                return (f64::NEG_INFINITY, Vector2::zeros(), Matrix2::zeros());
            };
            let mut total = 0.0;
            for &m in members {
                let cov = if kind == SpatialKind::Proposed {
                    center_cov + g[m].cov
                } else {
                    g[m].cov
                };
                total += log_gauss2(&g[m].mean, &center, &cov);
            }
            (total, center, center_cov)
        }
    }
}

/// Tracks and sensors of one frame, bound to a likelihood model.
///
/// Holds precomputed position blocks so clusters can be rated repeatedly
/// without touching the original matrices.
#[derive(Debug, Clone)]
pub struct Scene<'a> {
    tracks: &'a [Track],
    sensors: &'a [SensorInfo],
    gauss: Vec<PositionGaussian>,
    sensor_index: Vec<usize>,
    detection: BoundDetection,
    spatial: SpatialKind,
    model: LikelihoodModel,
}

impl<'a> Scene<'a> {
    pub fn new(
        tracks: &'a [Track],
        sensors: &'a [SensorInfo],
        model: &LikelihoodModel,
    ) -> Result<Self> {
        let sensor_index = tracks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                sensors
                    .iter()
                    .position(|s| s.id == t.sensor())
                    .ok_or(Error::UnknownSensor {
                        track: i,
                        sensor: t.sensor(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let stats = FrameStats::from_tracks(tracks, sensors);
        Ok(Self {
            tracks,
            sensors,
            gauss: tracks.iter().map(PositionGaussian::of).collect(),
            sensor_index,
            detection: BoundDetection::bind(&model.detection, sensors, &stats)?,
            spatial: model.spatial,
            model: *model,
        })
    }

    /// Scene for pairwise scoring only; the detection model is never consulted.
    pub fn pairwise(
        tracks: &'a [Track],
        sensors: &'a [SensorInfo],
        spatial: SpatialKind,
    ) -> Result<Self> {
        Self::new(
            tracks,
            sensors,
            &LikelihoodModel::new(DetectionModel::fixed(0.5), spatial),
        )
    }

    pub fn tracks(&self) -> &'a [Track] {
        self.tracks
    }

    pub fn sensors(&self) -> &'a [SensorInfo] {
        self.sensors
    }

    pub fn model(&self) -> &LikelihoodModel {
        &self.model
    }

    pub fn n_tracks(&self) -> usize {
        self.tracks.len()
    }

    /// Index (into `sensors()`) of the sensor that produced track `t`.
    pub fn sensor_of(&self, t: usize) -> usize {
        self.sensor_index[t]
    }

    pub fn position(&self, t: usize) -> Vector2<f64> {
        self.gauss[t].mean
    }

    /// True iff no two members share a sensor.
    pub fn is_sensor_valid(&self, members: &[usize]) -> bool {
        for (i, &a) in members.iter().enumerate() {
            let sa = self.sensor_index[a];
            if members[..i].iter().any(|&b| self.sensor_index[b] == sa) {
                return false;
            }
        }
        true
    }

    /// Rates a cluster. Sensor-invalid or empty member lists give `-inf`.
    pub fn cluster_stat(&self, members: &[usize]) -> ClusterStat {
        let log_lik;
        let (mut fused_mean, mut fused_cov) = (Vector2::zeros(), Matrix2::zeros());
        if members.is_empty() || !self.is_sensor_valid(members) {
            log_lik = f64::NEG_INFINITY;
        } else {
            let (spatial, center, center_cov) = spatial(&self.gauss, members, self.spatial);
            fused_mean = center;
            fused_cov = center_cov;
            log_lik = if self.spatial == SpatialKind::Euclidean || spatial == f64::NEG_INFINITY {
                spatial
            } else {
                let present: Vec<usize> = members.iter().map(|&m| self.sensor_index[m]).collect();
                spatial
                    + self
                        .detection
                        .log_cardinality(self.sensors.len(), &present, &center)
            };
        }
        ClusterStat {
            members: members.to_vec(),
            fused_mean,
            fused_cov,
            log_lik,
        }
    }

    pub fn log_cluster_lik(&self, members: &[usize]) -> f64 {
        self.cluster_stat(members).log_lik
    }

    /// Sum of cluster log-likelihoods over the partition.
    pub fn log_joint_lik(&self, assoc: &JointAssociation) -> f64 {
        if assoc.len() != self.tracks.len() {
            return f64::NEG_INFINITY;
        }
        clusters_of(assoc)
            .iter()
            .map(|c| self.log_cluster_lik(&c.members))
            .sum()
    }

    /// Fused position center of a member list (spatial fusion only).
    pub fn fused_center(&self, members: &[usize]) -> Option<Vector2<f64>> {
        fuse_positions(&self.gauss, members).map(|(m, _)| m)
    }

    /// `-log` of the pairwise spatial score for tracks `i`, `j`.
    ///
    /// For the Euclidean kind this is the plain distance between positions.
    pub fn pairwise_cost(&self, i: usize, j: usize) -> f64 {
        match self.spatial {
            SpatialKind::Euclidean => (self.gauss[i].mean - self.gauss[j].mean).norm(),
            kind => -spatial(&self.gauss, &[i, j], kind).0,
        }
    }
}

/// `log l(C)` of a cluster given by track indices into `tracks`.
pub fn log_cluster_lik(
    members: &[usize],
    tracks: &[Track],
    sensors: &[SensorInfo],
    model: &LikelihoodModel,
) -> Result<f64> {
    Ok(Scene::new(tracks, sensors, model)?.log_cluster_lik(members))
}

/// `log p(x_1..x_N | theta)` as the sum of cluster log-likelihoods.
pub fn log_joint_lik(
    assoc: &JointAssociation,
    tracks: &[Track],
    sensors: &[SensorInfo],
    model: &LikelihoodModel,
) -> Result<f64> {
    Ok(Scene::new(tracks, sensors, model)?.log_joint_lik(assoc))
}

/// Closed form for `log N(x; x, 2 sigma^2 I_2)`, i.e. a singleton under the proposed kind.
pub fn singleton_log_density(sigma: f64) -> f64 {
    -(4.0 * PI * sigma * sigma).ln()
}

#[cfg(test)]
mod tests;

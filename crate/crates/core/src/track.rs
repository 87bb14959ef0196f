//! Sensor-local tracks and sensor descriptions.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the sensor (or sensor-equipped vehicle) that produced a track.
pub type SensorId = u32;

/// One sensor-local state estimate.
///
/// States are laid out position first: `[x0, x1, ...]`. Association and
/// evaluation only read the leading 2-D position block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrackRecord", into = "TrackRecord")]
pub struct Track {
    sensor: SensorId,
    state: DVector<f64>,
    covariance: DMatrix<f64>,
    timestamp: f64,
    object_id: Option<u64>,
    is_vru: bool,
    local_id: Option<u64>,
}

impl Track {
    pub fn new(sensor: SensorId, state: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = state.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch {
                state: n,
                rows: covariance.nrows(),
                cols: covariance.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::MissingPosition(n));
        }
        if !is_spd(&covariance) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            sensor,
            state,
            covariance,
            timestamp: 0.0,
            object_id: None,
            is_vru: false,
            local_id: None,
        })
    }

    /// A 2-D track with isotropic covariance `sigma^2 I`.
    pub fn isotropic(sensor: SensorId, position: [f64; 2], sigma: f64) -> Result<Self> {
        Self::new(
            sensor,
            DVector::from_column_slice(&position),
            DMatrix::identity(2, 2) * (sigma * sigma),
        )
    }

    pub fn with_timestamp(mut self, t: f64) -> Self {
        self.timestamp = t;
        self
    }

    pub fn with_object(mut self, object_id: u64) -> Self {
        self.object_id = Some(object_id);
        self
    }

    pub fn with_vru(mut self, is_vru: bool) -> Self {
        self.is_vru = is_vru;
        self
    }

    pub fn with_local_id(mut self, local_id: u64) -> Self {
        self.local_id = Some(local_id);
        self
    }

    pub fn sensor(&self) -> SensorId {
        self.sensor
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    /// Ground-truth label, for evaluation only.
    pub fn object_id(&self) -> Option<u64> {
        self.object_id
    }

    pub fn is_vru(&self) -> bool {
        self.is_vru
    }

    /// Sensor-local track id (only unique per sensor).
    pub fn local_id(&self) -> Option<u64> {
        self.local_id
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.state[0], self.state[1])
    }

    pub fn position_cov(&self) -> Matrix2<f64> {
        self.covariance.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

pub(crate) fn is_spd(m: &DMatrix<f64>) -> bool {
    if !m.iter().all(|v| v.is_finite()) {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return false;
            }
        }
    }
    m.clone().cholesky().is_some()
}

/// Static description of one sensor at the time of the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorInfo {
    pub id: SensorId,
    pub position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
}

impl SensorInfo {
    pub fn new(id: SensorId, position: [f64; 2]) -> Self {
        Self {
            id,
            position,
            range: None,
        }
    }

    pub fn with_range(mut self, range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::InvalidRange(self.id));
        }
        self.range = Some(range);
        Ok(self)
    }

    pub fn position_vec(&self) -> Vector2<f64> {
        Vector2::new(self.position[0], self.position[1])
    }
}

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    sensor: SensorId,
    state: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    #[serde(default)]
    timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    object_id: Option<u64>,
    #[serde(default)]
    is_vru: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    local_id: Option<u64>,
}

impl TryFrom<TrackRecord> for Track {
    type Error = Error;

    fn try_from(r: TrackRecord) -> Result<Self> {
        let n = r.state.len();
        if r.covariance.len() != n || r.covariance.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                state: n,
                rows: r.covariance.len(),
                cols: r.covariance.first().map_or(0, Vec::len),
            });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| r.covariance[i][j]);
        let mut t = Track::new(r.sensor, DVector::from_vec(r.state), cov)?;
        t.timestamp = r.timestamp;
        t.object_id = r.object_id;
        t.is_vru = r.is_vru;
        t.local_id = r.local_id;
        Ok(t)
    }
}

impl From<Track> for TrackRecord {
    fn from(t: Track) -> Self {
        let n = t.dim();
        TrackRecord {
            sensor: t.sensor,
            state: t.state.iter().copied().collect(),
            covariance: (0..n)
                .map(|i| (0..n).map(|j| t.covariance[(i, j)]).collect())
                .collect(),
            timestamp: t.timestamp,
            object_id: t.object_id,
            is_vru: t.is_vru,
            local_id: t.local_id,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_dimension_mismatch() {
        let err = Track::new(1, DVector::zeros(3), DMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { state: 3, .. }));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            Track::new(1, DVector::zeros(2), cov),
            Err(Error::NotPositiveDefinite)
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Track::new(1, DVector::zeros(2), asym).is_err());
    }

    #[test]
    fn position_block_of_five_dim_state() {
        let state = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 0.1]);
        let mut cov = DMatrix::identity(5, 5);
        cov[(0, 1)] = 0.2;
        cov[(1, 0)] = 0.2;
        let t = Track::new(7, state, cov).unwrap();
        assert_eq!(t.position(), Vector2::new(1.0, 2.0));
        assert_eq!(t.position_cov()[(0, 1)], 0.2);
    }

    #[test]
    fn json_round_trip_keeps_labels() {
        let t = Track::isotropic(3, [1.5, -2.0], 2.0)
            .unwrap()
            .with_object(9)
            .with_vru(true)
            .with_timestamp(4.2);
        let s = serde_json::to_string(&t).unwrap();
        let back: Track = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_rejects_bad_covariance() {
        let s = r#"{"sensor":1,"state":[0,0],"covariance":[[1,0],[0,-1]]}"#;
        assert!(serde_json::from_str::<Track>(s).is_err());
    }

    #[test]
    fn sensor_range_must_be_positive() {
        assert!(SensorInfo::new(1, [0.0, 0.0]).with_range(0.0).is_err());
        assert!(SensorInfo::new(1, [0.0, 0.0]).with_range(85.0).is_ok());
    }
}

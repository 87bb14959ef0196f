use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::motion::ObjectState;
use crate::error::{Error, Result};
use crate::track::SensorInfo;

/// A measurement with known origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub object_id: u64,
    pub z: Vector2<f64>,
}

/// Omnidirectional range-limited sensing: every object within the sensor's
/// range (unlimited when unset) yields `position + N(0, r)`.
pub fn sense<R: Rng + ?Sized>(
    objects: &[(u64, ObjectState)],
    sensor: &SensorInfo,
    r: &Matrix2<f64>,
    rng: &mut R,
) -> Result<Vec<Detection>> {
    let l = if r.iter().all(|&v| v == 0.0) {
        Matrix2::zeros()
    } else {
        r.cholesky().ok_or(Error::NotPositiveDefinite)?.l()
    };
    let origin = sensor.position_vec();
    let mut out = Vec::new();
    for (id, o) in objects {
        let p = o.position();
        if sensor
            .range
            .is_some_and(|range| (p - origin).norm() > range)
        {
            continue;
        }
        let e = Vector2::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        out.push(Detection {
            object_id: *id,
            z: p + l * e,
        });
    }
    Ok(out)
}

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix5, Matrix5x3, Vector2, Vector5};
use serde::{Deserialize, Serialize};

/// `[x0, x1, v0, v1, omega]`.
pub type StateVec = Vector5<f64>;

/// Below this yaw rate the nearly-constant-velocity model is used.
pub const OMEGA_EPS: f64 = 1e-4;

/// Standard deviations of the process noise `[a0, a1, omega_dot]`.
const ACCEL_SD: f64 = 5.0;
const YAW_ACCEL_SD: f64 = 0.08 * PI;

/// Coordinated-turn state with Cartesian velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub x0: f64,
    pub x1: f64,
    pub v0: f64,
    pub v1: f64,
    pub omega: f64,
    #[serde(default)]
    pub is_vru: bool,
}

impl ObjectState {
    pub fn from_vector(x: &StateVec, is_vru: bool) -> Self {
        Self {
            x0: x[0],
            x1: x[1],
            v0: x[2],
            v1: x[3],
            omega: x[4],
            is_vru,
        }
    }

    pub fn to_vector(&self) -> StateVec {
        StateVec::new(self.x0, self.x1, self.v0, self.v1, self.omega)
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x0, self.x1)
    }

    pub fn speed(&self) -> f64 {
        self.v0.hypot(self.v1)
    }
}

/// Closed-form coordinated turn over `dt`; straight-line motion for `|omega| < OMEGA_EPS`.
pub fn ct_transition(x: &StateVec, dt: f64) -> StateVec {
    let (p0, p1, v0, v1, w) = (x[0], x[1], x[2], x[3], x[4]);
    if w.abs() < OMEGA_EPS {
        return StateVec::new(p0 + v0 * dt, p1 + v1 * dt, v0, v1, w);
    }
    let (s, c) = (w * dt).sin_cos();
    StateVec::new(
        p0 + (v0 * s - v1 * (1.0 - c)) / w,
        p1 + (v0 * (1.0 - c) + v1 * s) / w,
        v0 * c - v1 * s,
        v0 * s + v1 * c,
        w,
    )
}

pub fn ct_predict(state: &ObjectState, dt: f64) -> ObjectState {
    ObjectState::from_vector(&ct_transition(&state.to_vector(), dt), state.is_vru)
}

/// Maps `[a0, a1, omega_dot]` into the state.
pub fn noise_gain(dt: f64) -> Matrix5x3<f64> {
    let h = 0.5 * dt * dt;
    #[rustfmt::skip]
    let g = Matrix5x3::new(
        h, 0.0, 0.0,
        0.0, h, 0.0,
        dt, 0.0, 0.0,
        0.0, dt, 0.0,
        0.0, 0.0, dt,
    );
    g
}

/// `G diag(5^2, 5^2, (0.08 pi)^2) G^T`.
pub fn process_noise(dt: f64) -> Matrix5<f64> {
    let g = noise_gain(dt);
    let w = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        ACCEL_SD.powi(2),
        ACCEL_SD.powi(2),
        YAW_ACCEL_SD.powi(2),
    ));
    g * w * g.transpose()
}

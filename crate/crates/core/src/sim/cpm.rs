use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::ukf::LocalTrack;
use crate::error::{Error, Result};

const TIME_EPS: f64 = 1e-6;

const VRU_INTERVAL: f64 = 0.5;
const VEHICLE_INTERVAL: f64 = 1.0;
const POSITION_DELTA: f64 = 4.0;
const SPEED_DELTA: f64 = 0.5;
const HEADING_DELTA_DEG: f64 = 4.0;
/// Below this speed the heading is treated as unchanged.
const HEADING_MIN_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommMode {
    /// Every track updated in the current cycle is sent.
    Full,
    /// Dynamic generation rules with separate VRU and vehicle triggers.
    Etsi,
}

impl CommMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Etsi => "etsi",
        }
    }
}

impl std::str::FromStr for CommMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "etsi" => Ok(Self::Etsi),
            other => Err(Error::Config(format!(
                "unknown communication mode '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommConfig {
    pub mode: CommMode,
    /// CPM generation period (s).
    pub min_interval: f64,
    /// How long the RSU keeps a received track (s).
    pub window: f64,
    /// Tracks whose state is older than this are dropped at the RSU (s).
    pub staleness: f64,
    /// Independent loss probability per CPM.
    pub loss: f64,
    /// Fixed delivery delay (s).
    pub latency: f64,
}

impl CommConfig {
    pub fn full() -> Self {
        Self {
            mode: CommMode::Full,
            min_interval: 0.1,
            window: 0.1,
            staleness: 1.0,
            loss: 0.0,
            latency: 0.0,
        }
    }

    pub fn etsi() -> Self {
        Self {
            mode: CommMode::Etsi,
            window: 1.0,
            ..Self::full()
        }
    }

    pub fn for_mode(mode: CommMode) -> Self {
        match mode {
            CommMode::Full => Self::full(),
            CommMode::Etsi => Self::etsi(),
        }
    }

    pub fn with_loss(mut self, loss: f64) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_latency(mut self, latency: f64) -> Self {
        self.latency = latency;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(Error::Config(format!(
                "loss probability must lie in [0, 1], got {}",
                self.loss
            )));
        }
        for (name, v) in [
            ("min_interval", self.min_interval),
            ("window", self.window),
            ("staleness", self.staleness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(Error::Config(format!(
                "latency must be non-negative, got {}",
                self.latency
            )));
        }
        Ok(())
    }
}

/// Kinematics of a track at its last transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentSnapshot {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

impl SentSnapshot {
    pub fn of(t: &LocalTrack) -> Self {
        Self {
            position: t.position(),
            velocity: t.velocity(),
        }
    }

    fn changed_significantly(&self, t: &LocalTrack) -> bool {
        let (v_old, v_new) = (self.velocity, t.velocity());
        if (t.position() - self.position).norm() > POSITION_DELTA {
            return true;
        }
        if (v_new.norm() - v_old.norm()).abs() > SPEED_DELTA {
            return true;
        }
        heading_change_deg(&v_old, &v_new) > HEADING_DELTA_DEG
    }
}

/// Absolute heading difference in degrees; zero if either speed is negligible.
fn heading_change_deg(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    if a.norm() < HEADING_MIN_SPEED || b.norm() < HEADING_MIN_SPEED {
        return 0.0;
    }
    let d = b[1].atan2(b[0]) - a[1].atan2(a[0]);
    let wrapped =
        (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
    wrapped.abs().to_degrees()
}

/// Indices of the tracks to put into this cycle's CPM. Transmitted tracks
/// get their send time and snapshot refreshed.
pub fn cpm_select(tracks: &mut [&mut LocalTrack], now: f64, mode: CommMode) -> Vec<usize> {
    let selected: Vec<usize> = match mode {
        CommMode::Full => (0..tracks.len())
            .filter(|&i| now - tracks[i].last_update < 0.1 - TIME_EPS)
            .collect(),
        CommMode::Etsi => {
            let due = |t: &LocalTrack| -> bool {
                let (Some(sent_at), Some(snap)) = (t.last_sent, t.sent.as_ref()) else {
                    return true;
                };
                let since = now - sent_at;
                if t.is_vru {
                    since > VRU_INTERVAL + TIME_EPS
                } else {
                    since > VEHICLE_INTERVAL + TIME_EPS || snap.changed_significantly(t)
                }
            };
            let any_vru = tracks.iter().any(|t| t.is_vru && due(t));
            (0..tracks.len())
                .filter(|&i| (any_vru && tracks[i].is_vru) || due(tracks[i]))
                .collect()
        }
    };
    for &i in &selected {
        let snap = SentSnapshot::of(tracks[i]);
        tracks[i].last_sent = Some(now);
        tracks[i].sent = Some(snap);
    }
    selected
}

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::Matrix2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cpm::{cpm_select, CommConfig};
use super::motion::{ct_predict, ObjectState};
use super::rsu::{Cpm, CpmTrack, Rsu};
use super::sensing::sense;
use super::ukf::Tracker;
use crate::error::{Error, Result};
use crate::frame::{GroundTruth, ScenarioFrame};
use crate::track::SensorInfo;

/// Offset between the noise and channel random streams of one run.
const LOSS_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

fn default_step() -> f64 {
    0.1
}
fn default_range() -> f64 {
    85.0
}
fn default_sigma() -> f64 {
    2.0
}

/// A scripted world: objects driven by coordinated-turn segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldScript {
    #[serde(default = "default_step")]
    pub step: f64,
    /// Frames are emitted for `eval_start <= t < eval_end`.
    pub eval_start: f64,
    pub eval_end: f64,
    #[serde(default = "default_range")]
    pub sensor_range: f64,
    /// Measurement noise standard deviation per axis.
    #[serde(default = "default_sigma")]
    pub measurement_sigma: f64,
    /// Fraction of vehicles (non-VRU objects) that carry a sensor.
    pub mpr: f64,
    /// Seed of the equipped-vehicle draw.
    #[serde(default)]
    pub equip_seed: u64,
    pub objects: Vec<ObjectScript>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectScript {
    pub id: u64,
    #[serde(default)]
    pub is_vru: bool,
    /// Time at which the object enters the world; may be negative.
    #[serde(default)]
    pub spawn: f64,
    pub position: [f64; 2],
    pub speed: f64,
    /// Counter-clockwise from the x axis.
    pub heading_deg: f64,
    /// The object leaves the world after the last segment.
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// Positive turns left.
    #[serde(default)]
    pub yaw_rate: f64,
    /// New speed from the start of the segment, keeping the heading.
    #[serde(default)]
    pub speed: Option<f64>,
}

impl WorldScript {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let script: Self = toml::from_str(s)?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::Config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.eval_end > self.eval_start && self.eval_start >= 0.0) {
            return Err(Error::Config(
                "evaluation window must satisfy 0 <= start < end".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mpr) {
            return Err(Error::Config(format!(
                "mpr must lie in [0, 1], got {}",
                self.mpr
            )));
        }
        if !(self.sensor_range > 0.0) || !(self.measurement_sigma >= 0.0) {
            return Err(Error::Config(
                "sensor range must be positive and noise non-negative".into(),
            ));
        }
        let mut ids = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id) {
                return Err(Error::Config(format!("duplicate object id {}", o.id)));
            }
            if u32::try_from(o.id).is_err() {
                return Err(Error::Config(format!(
                    "object id {} does not fit a sensor id",
                    o.id
                )));
            }
            if o.segments.iter().any(|s| !(s.duration > 0.0)) {
                return Err(Error::Config(format!(
                    "object {} has a non-positive segment",
                    o.id
                )));
            }
        }
        Ok(())
    }

    /// Ids of the sensor-equipped vehicles: a seeded shuffle of all vehicles,
    /// of which the first `round(mpr * n)` are taken.
    pub fn equipped(&self) -> Vec<u64> {
        let mut vehicles: Vec<u64> = self
            .objects
            .iter()
            .filter(|o| !o.is_vru)
            .map(|o| o.id)
            .collect();
        vehicles.sort_unstable();
        vehicles.shuffle(&mut ChaCha8Rng::seed_from_u64(self.equip_seed));
        vehicles.truncate((self.mpr * vehicles.len() as f64).round() as usize);
        vehicles.sort_unstable();
        vehicles
    }
}

/// Precomputed segment start states of one object.
#[derive(Debug, Clone)]
struct Trajectory {
    id: u64,
    starts: Vec<(f64, ObjectState, Segment)>,
    end: f64,
}

impl Trajectory {
    fn new(o: &ObjectScript) -> Self {
        let h = o.heading_deg.to_radians();
        let mut state = ObjectState {
            x0: o.position[0],
            x1: o.position[1],
            v0: 0.0,
            v1: 0.0,
            omega: 0.0,
            is_vru: o.is_vru,
        };
        let mut heading = h;
        let mut speed = o.speed;
        let mut t = o.spawn;
        let mut starts = Vec::with_capacity(o.segments.len());
        for seg in &o.segments {
            if let Some(v) = seg.speed {
                speed = v;
            }
            let (s, c) = heading.sin_cos();
            state.v0 = speed * c;
            state.v1 = speed * s;
            state.omega = seg.yaw_rate;
            starts.push((t, state, *seg));
            state = ct_predict(&state, seg.duration);
            heading += seg.yaw_rate * seg.duration;
            t += seg.duration;
        }
        Self {
            id: o.id,
            starts,
            end: t,
        }
    }

    fn state_at(&self, t: f64) -> Option<ObjectState> {
        let first = self.starts.first()?;
        if t < first.0 || t >= self.end {
            return None;
        }
        let (t0, s0, _) = self.starts.iter().rev().find(|(t0, _, _)| *t0 <= t)?;
        Some(ct_predict(s0, t - t0))
    }
}

/// Message volume of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PayloadStats {
    pub cpms: usize,
    pub track_payloads: usize,
    pub lost_cpms: usize,
    pub malformed: usize,
}

#[derive(Debug, Clone)]
pub struct CpRun {
    pub frames: Vec<ScenarioFrame>,
    pub payload: PayloadStats,
    pub equipped: Vec<u64>,
}

/// Steps the world and emits one RSU frame per step inside the evaluation window.
pub fn run_cp_scenario(script: &WorldScript, comm: &CommConfig, seed: u64) -> Result<CpRun> {
    script.validate()?;
    comm.validate()?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut loss_rng = ChaCha8Rng::seed_from_u64(seed ^ LOSS_STREAM);
    let r = Matrix2::identity() * script.measurement_sigma.powi(2);
    let trajectories: Vec<Trajectory> = script.objects.iter().map(Trajectory::new).collect();
    let vru: BTreeMap<u64, bool> = script.objects.iter().map(|o| (o.id, o.is_vru)).collect();
    let equipped = script.equipped();
    let cpm_every = ((comm.min_interval / script.step).round() as usize).max(1);

    let mut trackers: BTreeMap<u64, Tracker> = BTreeMap::new();
    let mut rsu = Rsu::new(*comm, Some(script.sensor_range));
    let mut payload = PayloadStats::default();
    let mut frames = Vec::new();

    let n_steps = (script.eval_end / script.step - 1e-9).ceil() as usize;
    for k in 0..n_steps {
        let now = k as f64 * script.step;
        let alive: Vec<(u64, ObjectState)> = trajectories
            .iter()
            .filter_map(|tr| tr.state_at(now).map(|s| (tr.id, s)))
            .collect();
        trackers.retain(|id, _| alive.iter().any(|(a, _)| a == id));

        for &(id, state) in alive
            .iter()
            .filter(|(id, _)| equipped.binary_search(id).is_ok())
        {
            let sensor =
                SensorInfo::new(id as u32, [state.x0, state.x1]).with_range(script.sensor_range)?;
            let others: Vec<(u64, ObjectState)> =
                alive.iter().filter(|(o, _)| *o != id).copied().collect();
            let detections = sense(&others, &sensor, &r, &mut noise_rng)?;
            let tracker = trackers.entry(id).or_insert_with(|| Tracker::new(r));
            tracker.step(now, &detections, |o| vru.get(&o).copied().unwrap_or(false))?;

            if k % cpm_every != 0 {
                continue;
            }
            let mut local = tracker.tracks_mut();
            let selected = cpm_select(&mut local, now, comm.mode);
            if selected.is_empty() {
                continue;
            }
            let tracks: Vec<CpmTrack> = selected
                .iter()
                .map(|&i| {
                    let t = &local[i];
                    CpmTrack {
                        local_id: t.id,
                        object_id: Some(t.object_id),
                        is_vru: t.is_vru,
                        timestamp: t.time,
                        state: t.state,
                        cov: t.cov,
                    }
                })
                .collect();
            payload.cpms += 1;
            payload.track_payloads += tracks.len();
            rsu.ingest(
                Cpm {
                    sender: id as u32,
                    sender_position: sensor.position,
                    generated: now,
                    tracks,
                },
                now,
                &mut loss_rng,
            );
        }

        if now >= script.eval_start - 1e-9 {
            let truths = alive
                .iter()
                .map(|(id, s)| GroundTruth {
                    object_id: *id,
                    position: [s.x0, s.x1],
                    is_vru: s.is_vru,
                })
                .collect();
            frames.push(rsu.frame(now, truths)?);
        }
    }
    let stats = rsu.stats();
    payload.lost_cpms = stats.lost;
    payload.malformed = stats.malformed;
    Ok(CpRun {
        frames,
        payload,
        equipped,
    })
}

/// Parameters of the built-in four-arm intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionParams {
    /// Length of each arm from the center (m).
    pub arm_length: f64,
    pub n_vehicles: usize,
    pub n_pedestrians: usize,
    pub mpr: f64,
    pub seed: u64,
    pub eval_start: f64,
    pub eval_end: f64,
}

impl Default for IntersectionParams {
    fn default() -> Self {
        Self {
            arm_length: 250.0,
            n_vehicles: 60,
            n_pedestrians: 30,
            mpr: 0.5,
            seed: 1,
            eval_start: 15.0,
            eval_end: 45.0,
        }
    }
}

/// Random traffic through a four-arm intersection centered at the origin.
///
/// Vehicles enter at the end of an arm in the right-hand lane, drive to the
/// center, go straight or turn, and leave through another arm. Pedestrians
/// walk along the sidewalks and may turn at a corner.
pub fn intersection_script(p: &IntersectionParams) -> WorldScript {
    const LANE: f64 = 1.75;
    const SIDEWALK: f64 = 8.0;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut objects = Vec::new();
    let arms = [0.0f64, 90.0, 180.0, 270.0];

    for id in 0..p.n_vehicles as u64 {
        let heading_deg = arms[rng.random_range(0..4)];
        let h = heading_deg.to_radians();
        let (dir, right) = ([h.cos(), h.sin()], [h.sin(), -h.cos()]);
        let position = [
            -dir[0] * p.arm_length + right[0] * LANE,
            -dir[1] * p.arm_length + right[1] * LANE,
        ];
        let speed = rng.random_range(8.0..14.0);
        let spawn = rng.random_range(-30.0..p.eval_end);
        let segments = match rng.random_range(0..4) {
            // straight through
            0 | 1 => vec![Segment {
                duration: 2.0 * p.arm_length / speed,
                yaw_rate: 0.0,
                speed: None,
            }],
            turn => {
                let (radius, sign) = if turn == 2 {
                    (LANE + 6.0, 1.0)
                } else {
                    (6.0 - LANE, -1.0)
                };
                let yaw_rate = sign * speed / radius;
                vec![
                    Segment {
                        duration: (p.arm_length - 6.0) / speed,
                        yaw_rate: 0.0,
                        speed: None,
                    },
                    Segment {
                        duration: FRAC_PI_2 / yaw_rate.abs(),
                        yaw_rate,
                        speed: None,
                    },
                    Segment {
                        duration: p.arm_length / speed,
                        yaw_rate: 0.0,
                        speed: None,
                    },
                ]
            }
        };
        objects.push(ObjectScript {
            id,
            is_vru: false,
            spawn,
            position,
            speed,
            heading_deg,
            segments,
        });
    }

    for k in 0..p.n_pedestrians as u64 {
        let heading_deg = arms[rng.random_range(0..4)];
        let h = heading_deg.to_radians();
        let (dir, side) = (
            [h.cos(), h.sin()],
            if rng.random::<bool>() { 1.0 } else { -1.0 },
        );
        let normal = [h.sin() * side, -h.cos() * side];
        let along = rng.random_range(-0.6 * p.arm_length..0.2 * p.arm_length);
        let position = [
            dir[0] * along + normal[0] * SIDEWALK,
            dir[1] * along + normal[1] * SIDEWALK,
        ];
        let speed = rng.random_range(1.0..1.8);
        let mut segments = vec![Segment {
            duration: rng.random_range(10.0..60.0),
            yaw_rate: 0.0,
            speed: None,
        }];
        if rng.random::<bool>() {
            let yaw_rate = if rng.random::<bool>() { 0.5 } else { -0.5 };
            segments.push(Segment {
                duration: FRAC_PI_2 / 0.5,
                yaw_rate,
                speed: None,
            });
            segments.push(Segment {
                duration: 60.0,
                yaw_rate: 0.0,
                speed: None,
            });
        } else {
            segments.push(Segment {
                duration: 60.0,
                yaw_rate: 0.0,
                speed: Some(rng.random_range(0.0..1.5)),
            });
        }
        objects.push(ObjectScript {
            id: p.n_vehicles as u64 + k,
            is_vru: true,
            spawn: rng.random_range(-30.0..0.0),
            position,
            speed,
            heading_deg,
            segments,
        });
    }

    WorldScript {
        step: 0.1,
        eval_start: p.eval_start,
        eval_end: p.eval_end,
        sensor_range: default_range(),
        measurement_sigma: default_sigma(),
        mpr: p.mpr,
        equip_seed: p.seed,
        objects,
    }
}

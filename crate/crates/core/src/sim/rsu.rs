use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix5};
use rand::Rng;

use super::cpm::CommConfig;
use super::motion::{ct_transition, StateVec};
use super::ukf::ukf_predict;
use crate::error::Result;
use crate::frame::{GroundTruth, ScenarioFrame};
use crate::track::{SensorId, SensorInfo, Track};

const TIME_EPS: f64 = 1e-6;

/// One track inside a CPM.
#[derive(Debug, Clone, PartialEq)]
pub struct CpmTrack {
    pub local_id: u64,
    pub object_id: Option<u64>,
    pub is_vru: bool,
    /// Time the state refers to.
    pub timestamp: f64,
    pub state: StateVec,
    pub cov: Matrix5<f64>,
}

impl CpmTrack {
    fn is_well_formed(&self) -> bool {
        self.timestamp.is_finite()
            && self.state.iter().all(|v| v.is_finite())
            && self.cov.iter().all(|v| v.is_finite())
            && (self.cov - self.cov.transpose()).amax() <= 1e-9 * self.cov.amax().max(1.0)
            && self.cov.cholesky().is_some()
    }
}

/// Collective perception message.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpm {
    pub sender: SensorId,
    pub sender_position: [f64; 2],
    pub generated: f64,
    pub tracks: Vec<CpmTrack>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RsuStats {
    pub received: usize,
    pub lost: usize,
    pub malformed: usize,
}

#[derive(Debug, Clone)]
struct Buffered {
    track: CpmTrack,
    received: f64,
}

/// Fusion-center buffer: latest track per `(sender, local id)`.
#[derive(Debug, Clone)]
pub struct Rsu {
    config: CommConfig,
    sensor_range: Option<f64>,
    in_flight: Vec<(f64, Cpm)>,
    buffer: BTreeMap<(SensorId, u64), Buffered>,
    senders: BTreeMap<SensorId, [f64; 2]>,
    stats: RsuStats,
}

impl Rsu {
    pub fn new(config: CommConfig, sensor_range: Option<f64>) -> Self {
        Self {
            config,
            sensor_range,
            in_flight: Vec::new(),
            buffer: BTreeMap::new(),
            senders: BTreeMap::new(),
            stats: RsuStats::default(),
        }
    }

    pub fn stats(&self) -> RsuStats {
        self.stats
    }

    /// Applies channel loss, then queues the message for delivery after the latency.
    pub fn ingest<R: Rng + ?Sized>(&mut self, cpm: Cpm, now: f64, rng: &mut R) {
        if self.config.loss > 0.0 && rng.random::<f64>() < self.config.loss {
            self.stats.lost += 1;
            return;
        }
        self.in_flight.push((now + self.config.latency, cpm));
    }

    fn deliver(&mut self, now: f64) {
        let (arrived, pending): (Vec<_>, Vec<_>) = std::mem::take(&mut self.in_flight)
            .into_iter()
            .partition(|(at, _)| *at <= now + TIME_EPS);
        self.in_flight = pending;
        for (at, cpm) in arrived {
            self.stats.received += 1;
            self.senders.insert(cpm.sender, cpm.sender_position);
            for t in cpm.tracks {
                if !t.is_well_formed() {
                    self.stats.malformed += 1;
                    continue;
                }
                let key = (cpm.sender, t.local_id);
                let newer = self
                    .buffer
                    .get(&key)
                    .is_none_or(|b| t.timestamp >= b.track.timestamp);
                if newer {
                    self.buffer.insert(
                        key,
                        Buffered {
                            track: t,
                            received: at,
                        },
                    );
                }
            }
        }
    }

    /// Delivers due messages, expires old entries and emits every buffered
    /// track propagated to `now`.
    pub fn frame(&mut self, now: f64, truths: Vec<GroundTruth>) -> Result<ScenarioFrame> {
        self.deliver(now);
        let (window, staleness) = (self.config.window, self.config.staleness);
        self.buffer.retain(|_, b| {
            now - b.received < window - TIME_EPS && now - b.track.timestamp <= staleness + TIME_EPS
        });

        let mut tracks = Vec::with_capacity(self.buffer.len());
        for (&(sender, local_id), b) in &self.buffer {
            let t = &b.track;
            let dt = now - t.timestamp;
            let (state, cov) = if dt > TIME_EPS {
                let (_, cov) = ukf_predict(&t.state, &t.cov, dt)?;
                (ct_transition(&t.state, dt), cov)
            } else {
                (t.state, t.cov)
            };
            let track = match Track::new(
                sender,
                DVector::from_column_slice(state.as_slice()),
                DMatrix::from_column_slice(5, 5, cov.as_slice()),
            ) {
                Ok(track) => track,
                Err(_) => {
                    self.stats.malformed += 1;
                    continue;
                }
            };
            let mut track = track
                .with_timestamp(now)
                .with_local_id(local_id)
                .with_vru(t.is_vru);
            if let Some(o) = t.object_id {
                track = track.with_object(o);
            }
            tracks.push(track);
        }

        let mut sensors = Vec::new();
        for (&id, &position) in &self.senders {
            if tracks.iter().any(|t| t.sensor() == id) {
                let s = SensorInfo::new(id, position);
                sensors.push(match self.sensor_range {
                    Some(r) => s.with_range(r)?,
                    None => s,
                });
            }
        }
        Ok(ScenarioFrame {
            time: now,
            tracks,
            sensors,
            truths,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ct(local_id: u64, ts: f64, x: f64) -> CpmTrack {
        CpmTrack {
            local_id,
            object_id: Some(local_id),
            is_vru: false,
            timestamp: ts,
            state: StateVec::new(x, 0.0, 1.0, 0.0, 0.0),
            cov: Matrix5::identity(),
        }
    }

    fn cpm(sender: u32, at: f64, tracks: Vec<CpmTrack>) -> Cpm {
        Cpm {
            sender,
            sender_position: [0.0, 0.0],
            generated: at,
            tracks,
        }
    }

    #[test]
    fn total_loss_gives_empty_frames() {
        let mut rsu = Rsu::new(CommConfig::full().with_loss(1.0), Some(85.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        rsu.ingest(cpm(1, 1.0, vec![ct(1, 1.0, 0.0)]), 1.0, &mut rng);
        let f = rsu.frame(1.0, vec![]).unwrap();
        assert!(f.tracks.is_empty() && f.sensors.is_empty());
        assert_eq!(rsu.stats().lost, 1);
    }

    #[test]
    fn stale_tracks_are_dropped() {
        let mut rsu = Rsu::new(CommConfig::etsi(), None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        rsu.ingest(
            cpm(1, 10.0, vec![ct(1, 8.8, 0.0), ct(2, 9.5, 0.0)]),
            10.0,
            &mut rng,
        );
        let f = rsu.frame(10.0, vec![]).unwrap();
        assert_eq!(f.tracks.len(), 1);
        assert_eq!(f.tracks[0].local_id(), Some(2));
        // propagated by 0.5 s at 1 m/s
        assert!((f.tracks[0].state()[0] - 0.5).abs() < 1e-9);
        assert!(f.tracks[0].covariance()[(0, 0)] > 1.0);
    }

    #[test]
    fn full_mode_is_union_of_latest() {
        let mut rsu = Rsu::new(CommConfig::full(), Some(85.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        rsu.ingest(cpm(2, 1.0, vec![ct(1, 1.0, 3.0)]), 1.0, &mut rng);
        rsu.ingest(
            cpm(1, 1.0, vec![ct(1, 1.0, 0.0), ct(7, 1.0, 5.0)]),
            1.0,
            &mut rng,
        );
        let f = rsu.frame(1.0, vec![]).unwrap();
        let keys: Vec<(u32, u64)> = f
            .tracks
            .iter()
            .map(|t| (t.sensor(), t.local_id().unwrap()))
            .collect();
        assert_eq!(keys, vec![(1, 1), (1, 7), (2, 1)]);
        assert_eq!(
            f.sensors.iter().map(|s| s.id).collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert_eq!(f.sensors[0].range, Some(85.0));
        f.validate().unwrap();

        // next cycle: only what arrived within the last 0.1 s remains
        rsu.ingest(cpm(1, 1.1, vec![ct(1, 1.1, 0.1)]), 1.1, &mut rng);
        let f = rsu.frame(1.1, vec![]).unwrap();
        assert_eq!(f.tracks.len(), 1);
        assert!((f.tracks[0].state()[0] - 0.1).abs() < 1e-9);
        assert!(rsu.frame(1.2, vec![]).unwrap().tracks.is_empty());
    }

    #[test]
    fn latency_delays_delivery() {
        let mut rsu = Rsu::new(CommConfig::etsi().with_latency(0.2), None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        rsu.ingest(cpm(1, 1.0, vec![ct(1, 1.0, 0.0)]), 1.0, &mut rng);
        assert!(rsu.frame(1.1, vec![]).unwrap().tracks.is_empty());
        assert_eq!(rsu.frame(1.2, vec![]).unwrap().tracks.len(), 1);
    }

    #[test]
    fn malformed_tracks_are_counted() {
        let mut rsu = Rsu::new(CommConfig::full(), None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut bad = ct(1, 1.0, 0.0);
        bad.cov[(0, 0)] = -1.0;
        let mut nan = ct(2, 1.0, 0.0);
        nan.state[0] = f64::NAN;
        rsu.ingest(cpm(1, 1.0, vec![bad, nan, ct(3, 1.0, 0.0)]), 1.0, &mut rng);
        let f = rsu.frame(1.0, vec![]).unwrap();
        assert_eq!(f.tracks.len(), 1);
        assert_eq!(rsu.stats().malformed, 2);
    }
}

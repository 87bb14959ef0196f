use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix2x5, Matrix5, Matrix5x2, Vector2};

use super::cpm::SentSnapshot;
use super::motion::{ct_transition, process_noise, StateVec};
use super::sensing::Detection;
use crate::error::{Error, Result};

/// A local track is dropped once its object has gone undetected this long (s).
pub const INVALIDATE_AFTER: f64 = 0.4;

const N: usize = 5;
/// Prior yaw-rate standard deviation at track birth (rad/s).
const INIT_OMEGA_SD: f64 = 0.5;
const JITTER: f64 = 1e-9;
const JITTER_TRIES: usize = 3;
const TIME_EPS: f64 = 1e-6;

fn symmetrize(p: Matrix5<f64>) -> Matrix5<f64> {
    (p + p.transpose()) * 0.5
}

/// Lower Cholesky factor, retrying with growing diagonal jitter.
fn cholesky(p: &Matrix5<f64>) -> Result<Matrix5<f64>> {
    if let Some(c) = p.cholesky() {
        return Ok(c.l());
    }
    let mut jitter = JITTER;
    for _ in 0..JITTER_TRIES {
        if let Some(c) = (p + Matrix5::identity() * jitter).cholesky() {
            return Ok(c.l());
        }
        jitter *= 10.0;
    }
    Err(Error::Cholesky)
}

/// Unscented prediction with symmetric sigma points (alpha = 1, beta = 0,
/// kappa = 0: the central point carries zero weight, the others `1/(2n)`).
pub fn ukf_predict(x: &StateVec, p: &Matrix5<f64>, dt: f64) -> Result<(StateVec, Matrix5<f64>)> {
    let l = cholesky(p)? * (N as f64).sqrt();
    let w = 1.0 / (2 * N) as f64;
    let mut sigma = [StateVec::zeros(); 2 * N];
    for i in 0..N {
        sigma[i] = ct_transition(&(x + l.column(i)), dt);
        sigma[N + i] = ct_transition(&(x - l.column(i)), dt);
    }
    let mean: StateVec = sigma.iter().sum::<StateVec>() * w;
    let mut cov = process_noise(dt);
    for s in &sigma {
        let d = s - mean;
        cov += d * d.transpose() * w;
    }
    Ok((mean, symmetrize(cov)))
}

/// Linear position update in Joseph form.
pub fn ukf_update(
    x: &StateVec,
    p: &Matrix5<f64>,
    z: &Vector2<f64>,
    r: &Matrix2<f64>,
) -> Result<(StateVec, Matrix5<f64>)> {
    let h = Matrix2x5::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
    let s = h * p * h.transpose() + r;
    let s_inv = s.try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let k: Matrix5x2<f64> = p * h.transpose() * s_inv;
    let x = x + k * (z - h * x);
    let a = Matrix5::identity() - k * h;
    let p = a * p * a.transpose() + k * r * k.transpose();
    Ok((x, symmetrize(p)))
}

/// A sender-side UKF track.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTrack {
    /// Unique only within the owning sensor.
    pub id: u64,
    pub object_id: u64,
    pub is_vru: bool,
    pub state: StateVec,
    pub cov: Matrix5<f64>,
    /// Time the state refers to.
    pub time: f64,
    pub last_update: f64,
    pub last_sent: Option<f64>,
    pub sent: Option<SentSnapshot>,
}

impl LocalTrack {
    /// Position from the second measurement, velocity from the difference, zero yaw rate.
    pub fn from_measurements(
        id: u64,
        object_id: u64,
        is_vru: bool,
        (t1, z1): (f64, Vector2<f64>),
        (t2, z2): (f64, Vector2<f64>),
        r: &Matrix2<f64>,
    ) -> Result<Self> {
        let dt = t2 - t1;
        if !(dt > 0.0) {
            return Err(Error::Config(format!(
                "track initialisation needs increasing times, got {t1} and {t2}"
            )));
        }
        let v = (z2 - z1) / dt;
        let state = StateVec::new(z2[0], z2[1], v[0], v[1], 0.0);
        let mut cov = Matrix5::zeros();
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(r);
        cov.fixed_view_mut::<2, 2>(0, 2).copy_from(&(r / dt));
        cov.fixed_view_mut::<2, 2>(2, 0).copy_from(&(r / dt));
        cov.fixed_view_mut::<2, 2>(2, 2)
            .copy_from(&(r * (2.0 / (dt * dt))));
        cov[(4, 4)] = INIT_OMEGA_SD * INIT_OMEGA_SD;
        Ok(Self {
            id,
            object_id,
            is_vru,
            state,
            cov,
            time: t2,
            last_update: t2,
            last_sent: None,
            sent: None,
        })
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.state[0], self.state[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.state[2], self.state[3])
    }
}

/// Predicts by `dt` and, when a measurement is given, updates with it.
pub fn ukf_step(
    track: &LocalTrack,
    z: Option<&Vector2<f64>>,
    dt: f64,
    r: &Matrix2<f64>,
) -> Result<LocalTrack> {
    let (mut x, mut p) = if dt > 0.0 {
        ukf_predict(&track.state, &track.cov, dt)?
    } else {
        (track.state, track.cov)
    };
    let mut out = track.clone();
    out.time = track.time + dt;
    if let Some(z) = z {
        (x, p) = ukf_update(&x, &p, z, r)?;
        out.last_update = out.time;
    }
    out.state = x;
    out.cov = p;
    Ok(out)
}

/// Per-sensor track management with known measurement origin.
#[derive(Debug, Clone)]
pub struct Tracker {
    r: Matrix2<f64>,
    next_id: u64,
    tentative: BTreeMap<u64, (f64, Vector2<f64>)>,
    tracks: BTreeMap<u64, LocalTrack>,
}

impl Tracker {
    pub fn new(r: Matrix2<f64>) -> Self {
        Self {
            r,
            next_id: 1,
            tentative: BTreeMap::new(),
            tracks: BTreeMap::new(),
        }
    }

    /// Live tracks keyed by object id.
    pub fn tracks(&self) -> impl Iterator<Item = &LocalTrack> {
        self.tracks.values()
    }

    pub fn tracks_mut(&mut self) -> Vec<&mut LocalTrack> {
        self.tracks.values_mut().collect()
    }

    /// Advances every track to `now`, applies the detections, drops tracks
    /// unseen for [`INVALIDATE_AFTER`] and starts tracks on a second detection.
    pub fn step(
        &mut self,
        now: f64,
        detections: &[Detection],
        vru: impl Fn(u64) -> bool,
    ) -> Result<()> {
        let by_object: BTreeMap<u64, Vector2<f64>> =
            detections.iter().map(|d| (d.object_id, d.z)).collect();
        let mut keep = BTreeMap::new();
        for (obj, t) in std::mem::take(&mut self.tracks) {
            let z = by_object.get(&obj);
            let next = ukf_step(&t, z, now - t.time, &self.r)?;
            if now - next.last_update < INVALIDATE_AFTER - TIME_EPS {
                keep.insert(obj, next);
            }
        }
        self.tracks = keep;
        self.tentative
            .retain(|_, (t, _)| now - *t < INVALIDATE_AFTER - TIME_EPS);
        for (&obj, &z) in &by_object {
            if self.tracks.contains_key(&obj) {
                continue;
            }
            match self.tentative.remove(&obj) {
                Some((t1, z1)) if t1 < now - TIME_EPS => {
                    let t = LocalTrack::from_measurements(
                        self.next_id,
                        obj,
                        vru(obj),
                        (t1, z1),
                        (now, z),
                        &self.r,
                    )?;
                    self.next_id += 1;
                    self.tracks.insert(obj, t);
                }
                _ => {
                    self.tentative.insert(obj, (now, z));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn r() -> Matrix2<f64> {
        Matrix2::identity() * 4.0
    }

    fn det(obj: u64, x: f64, y: f64) -> Detection {
        Detection {
            object_id: obj,
            z: Vector2::new(x, y),
        }
    }

    #[test]
    fn init_from_two_measurements() {
        let t = LocalTrack::from_measurements(
            1,
            7,
            false,
            (1.0, Vector2::new(0.0, 0.0)),
            (1.1, Vector2::new(1.0, 0.5)),
            &r(),
        )
        .unwrap();
        assert!((t.velocity() - Vector2::new(10.0, 5.0)).norm() < 1e-9);
        assert_eq!(t.state[4], 0.0);
        assert_eq!(t.position(), Vector2::new(1.0, 0.5));
        assert!(t.cov.cholesky().is_some());
    }

    #[test]
    fn predict_grows_position_uncertainty() {
        let t = LocalTrack::from_measurements(
            1,
            0,
            false,
            (0.0, Vector2::zeros()),
            (0.1, Vector2::new(1.0, 0.0)),
            &r(),
        )
        .unwrap();
        let mut prev = t.cov.fixed_view::<2, 2>(0, 0).trace();
        let mut cur = t;
        for _ in 0..10 {
            cur = ukf_step(&cur, None, 0.1, &r()).unwrap();
            let tr = cur.cov.fixed_view::<2, 2>(0, 0).trace();
            assert!(tr >= prev);
            prev = tr;
        }
        assert_eq!(cur.last_update, 0.1);
    }

    #[test]
    fn stationary_object_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = |rng: &mut ChaCha8Rng| {
            let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            Vector2::new(2.0 * a, 2.0 * b)
        };
        let mut t = LocalTrack::from_measurements(
            1,
            0,
            false,
            (0.0, z(&mut rng)),
            (0.1, z(&mut rng)),
            &r(),
        )
        .unwrap();
        let mut traces = vec![t.cov.fixed_view::<2, 2>(0, 0).trace()];
        for _ in 0..60 {
            t = ukf_step(&t, Some(&z(&mut rng)), 0.1, &r()).unwrap();
            traces.push(t.cov.fixed_view::<2, 2>(0, 0).trace());
        }
        // decreasing while the prior dominates, then flat up to state-dependent wobble
        for w in traces[..25].windows(2) {
            assert!(w[1] < w[0], "{traces:?}");
        }
        let tail = &traces[traces.len() - 30..];
        let floor = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(tail.iter().all(|v| (v - floor).abs() < 0.02 * floor));
        assert!(floor < 2.0);
        assert!(t.position().norm() < 6.0);
    }

    #[test]
    fn jitter_recovers_semidefinite_covariance() {
        let mut p = Matrix5::identity();
        p[(4, 4)] = 0.0;
        assert!(ukf_predict(&StateVec::zeros(), &p, 0.1).is_ok());
        let bad = Matrix5::identity() * -1.0;
        assert!(matches!(
            ukf_predict(&StateVec::zeros(), &bad, 0.1),
            Err(Error::Cholesky)
        ));
    }

    #[test]
    fn propagation_is_consistent() {
        // the truth follows the same noisy turn model the filter assumes;
        // NEES of the propagated position must be chi-square(2)
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n_runs = 500;
        let mut nees_sum = 0.0;
        let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
        let noisy = |x: &StateVec, dt: f64, rng: &mut ChaCha8Rng| -> StateVec {
            let w = nalgebra::Vector3::new(
                5.0 * gauss(rng),
                5.0 * gauss(rng),
                0.08 * std::f64::consts::PI * gauss(rng),
            );
            ct_transition(x, dt) + crate::sim::noise_gain(dt) * w
        };
        for _ in 0..n_runs {
            let mut x = StateVec::new(
                0.0,
                0.0,
                8.0 + gauss(&mut rng),
                gauss(&mut rng),
                0.1 * gauss(&mut rng),
            );
            let meas = |x: &StateVec, rng: &mut ChaCha8Rng| {
                Vector2::new(x[0] + 2.0 * gauss(rng), x[1] + 2.0 * gauss(rng))
            };
            let z1 = meas(&x, &mut rng);
            x = noisy(&x, 0.1, &mut rng);
            let z2 = meas(&x, &mut rng);
            let mut t =
                LocalTrack::from_measurements(1, 0, false, (0.0, z1), (0.1, z2), &r()).unwrap();
            for _ in 0..40 {
                x = noisy(&x, 0.1, &mut rng);
                t = ukf_step(&t, Some(&meas(&x, &mut rng)), 0.1, &r()).unwrap();
            }
            let dt = 0.5;
            let truth = noisy(&x, dt, &mut rng);
            let (mean, cov) = ukf_predict(&t.state, &t.cov, dt).unwrap();
            let predicted = ct_transition(&t.state, dt);
            assert!((predicted.fixed_rows::<2>(0) - mean.fixed_rows::<2>(0)).norm() < 0.5);
            let e = truth.fixed_rows::<2>(0) - predicted.fixed_rows::<2>(0);
            let pc = cov.fixed_view::<2, 2>(0, 0).into_owned();
            nees_sum += (e.transpose() * pc.try_inverse().unwrap() * e)[0];
        }
        // sum of 500 chi2(2) draws is chi2(1000); two-sided 95% bounds
        assert!((913.3..1088.5).contains(&nees_sum), "NEES sum {nees_sum}");
    }

    #[test]
    fn tracker_lifecycle() {
        let mut tr = Tracker::new(r());
        let vru = |_| false;
        tr.step(0.0, &[det(5, 0.0, 0.0)], vru).unwrap();
        assert_eq!(tr.tracks().count(), 0, "tentative after one detection");
        tr.step(0.1, &[det(5, 0.1, 0.0)], vru).unwrap();
        let first = tr.tracks().next().unwrap().id;
        assert_eq!(first, 1);
        // 0.3 s unseen: still alive
        for k in 2..5 {
            tr.step(k as f64 * 0.1, &[], vru).unwrap();
        }
        assert_eq!(tr.tracks().count(), 1);
        tr.step(0.5, &[], vru).unwrap();
        assert_eq!(tr.tracks().count(), 0, "invalidated after 0.4 s");
        tr.step(0.6, &[det(5, 0.6, 0.0)], vru).unwrap();
        tr.step(0.7, &[det(5, 0.7, 0.0)], vru).unwrap();
        let t = tr.tracks().next().unwrap();
        assert_eq!(t.id, 2, "new local id on re-detection");
        assert_eq!(t.last_update, 0.7);
    }
}

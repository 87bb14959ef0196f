//! Greedy pairwise agglomeration under the sensor constraint, with and without
//! cluster-cluster merging.

use crate::association::{canonicalize, JointAssociation};
use crate::likelihood::Scene;

/// Sentinel for forbidden or exhausted pairs; larger than any admissible cost.
pub const D_MAX: f64 = 1e12;

/// Lower-triangular pairwise cost matrix with forbidden entries set to [`D_MAX`].
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseCostMatrix {
    n: usize,
    d: Vec<f64>,
    pub threshold: f64,
}

impl PairwiseCostMatrix {
    /// Entry `(i, j)` is admissible iff `j < i`, the sensors differ and the
    /// cost does not exceed `threshold`.
    pub fn build(scene: &Scene<'_>, threshold: f64) -> Self {
        let n = scene.n_tracks();
        let mut d = vec![D_MAX; n * n];
        for i in 0..n {
            for j in 0..i {
                if scene.sensor_of(i) == scene.sensor_of(j) {
                    continue;
                }
                let c = scene.pairwise_cost(i, j);
                if c <= threshold && c < D_MAX {
                    d[i * n + j] = c;
                }
            }
        }
        Self { n, d, threshold }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    fn set_max(&mut self, i: usize, j: usize) {
        self.d[i * self.n + j] = D_MAX;
    }

    /// First minimum in row-major order, if below [`D_MAX`].
    pub fn argmin(&self) -> Option<(usize, usize)> {
        let mut best = D_MAX;
        let mut at = None;
        for (k, &v) in self.d.iter().enumerate() {
            if v < best {
                best = v;
                at = Some((k / self.n, k % self.n));
            }
        }
        at
    }
}

/// Greedy association. See [`greedy_with_trace`] for the processed pair order.
pub fn greedy(scene: &Scene<'_>, threshold: f64, merge: bool) -> JointAssociation {
    greedy_with_trace(scene, threshold, merge).0
}

/// Greedy association plus the pairs `(i, j)` in the order they were processed.
///
/// Pairs are taken in ascending cost. Entries only ever get invalidated, so a
/// sorted pass that skips invalidated entries visits exactly the sequence of
/// repeated row-major argmins over the live matrix.
pub fn greedy_with_trace(
    scene: &Scene<'_>,
    threshold: f64,
    merge: bool,
) -> (JointAssociation, Vec<(usize, usize)>) {
    let n = scene.n_tracks();
    let mut d = PairwiseCostMatrix::build(scene, threshold);
    let mut order: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let c = d.get(i, j);
            (c < D_MAX).then_some((c, i, j))
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut theta: Vec<u32> = (1..=n as u32).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|t| vec![t]).collect();
    let sensors_of_cluster = |members: &Vec<usize>| -> Vec<usize> {
        members.iter().map(|&m| scene.sensor_of(m)).collect()
    };
    let mut trace = Vec::new();

    for (_, i, j) in order {
        if d.get(i, j) >= D_MAX {
            continue;
        }
        trace.push((i, j));
        let ci = theta[i] as usize - 1;
        let cj = theta[j] as usize - 1;
        let si = scene.sensor_of(i);
        let sj = scene.sensor_of(j);
        if members[ci].len() == 1
            && (members[cj].len() == 1 || !sensors_of_cluster(&members[cj]).contains(&si))
        {
            move_track(&mut theta, &mut members, i, cj);
        } else if members[cj].len() == 1 && !sensors_of_cluster(&members[ci]).contains(&sj) {
            move_track(&mut theta, &mut members, j, ci);
        } else if merge && ci != cj {
            let a = sensors_of_cluster(&members[ci]);
            let b = sensors_of_cluster(&members[cj]);
            if a.iter().all(|s| !b.contains(s)) {
                let moved = std::mem::take(&mut members[ci]);
                for &t in &moved {
                    theta[t] = cj as u32 + 1;
                }
                members[cj].extend(moved);
            }
        }
        for t in 0..n {
            if scene.sensor_of(t) == sj {
                d.set_max(i, t);
            }
            if scene.sensor_of(t) == si {
                d.set_max(t, j);
            }
        }
    }
    (canonicalize(&theta), trace)
}

fn move_track(theta: &mut [u32], members: &mut [Vec<usize>], t: usize, to: usize) {
    let from = theta[t] as usize - 1;
    members[from].retain(|&m| m != t);
    members[to].push(t);
    theta[t] = to as u32 + 1;
}

/// Reference implementation: repeated argmin over the live matrix.
#[cfg(test)]
pub(crate) fn greedy_by_argmin(scene: &Scene<'_>, threshold: f64, merge: bool) -> JointAssociation {
    let n = scene.n_tracks();
    let mut d = PairwiseCostMatrix::build(scene, threshold);
    let mut theta: Vec<u32> = (1..=n as u32).collect();
    let cluster =
        |theta: &[u32], c: u32| -> Vec<usize> { (0..n).filter(|&t| theta[t] == c).collect() };
    let sensors = |ts: &[usize]| -> Vec<usize> { ts.iter().map(|&t| scene.sensor_of(t)).collect() };
    while let Some((i, j)) = d.argmin() {
        let ci = cluster(&theta, theta[i]);
        let cj = cluster(&theta, theta[j]);
        let (si, sj) = (scene.sensor_of(i), scene.sensor_of(j));
        if ci.len() == 1 && (cj.len() == 1 || !sensors(&cj).contains(&si)) {
            theta[i] = theta[j];
        } else if cj.len() == 1 && !sensors(&ci).contains(&sj) {
            theta[j] = theta[i];
        } else if merge
            && theta[i] != theta[j]
            && sensors(&ci).iter().all(|s| !sensors(&cj).contains(s))
        {
            for t in ci {
                theta[t] = theta[j];
            }
        }
        for t in 0..n {
            if scene.sensor_of(t) == sj {
                d.set_max(i, t);
            }
            if scene.sensor_of(t) == si {
                d.set_max(t, j);
            }
        }
    }
    canonicalize(&theta)
}

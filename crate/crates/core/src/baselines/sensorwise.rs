//! Sequential optimal 2-D assignments, one sensor at a time.

use nalgebra::DMatrix;

use super::greedy::D_MAX;
use super::hungarian::hungarian;
use crate::association::{canonicalize, JointAssociation};
use crate::likelihood::Scene;

/// Sensor-wise association in ascending sensor-id order.
///
/// The first sensor's tracks seed singleton clusters. Each later sensor's tracks
/// are optimally matched against the track most recently added to every
/// cluster; a matched pair costing more than `threshold` opens a new cluster
/// instead.
pub fn sensorwise(scene: &Scene<'_>, threshold: f64) -> JointAssociation {
    let n = scene.n_tracks();
    let mut sensor_order: Vec<usize> = (0..scene.sensors().len()).collect();
    sensor_order.sort_by_key(|&s| scene.sensors()[s].id);

    // (members, most recently added track)
    let mut clusters: Vec<(Vec<usize>, usize)> = Vec::new();
    for s in sensor_order {
        let tracks: Vec<usize> = (0..n).filter(|&t| scene.sensor_of(t) == s).collect();
        if tracks.is_empty() {
            continue;
        }
        if clusters.is_empty() {
            clusters.extend(tracks.iter().map(|&t| (vec![t], t)));
            continue;
        }
        let cost = DMatrix::from_fn(tracks.len(), clusters.len(), |r, c| {
            let v = scene.pairwise_cost(tracks[r], clusters[c].1);
            if v.is_nan() {
                D_MAX
            } else {
                v.clamp(-D_MAX, D_MAX)
            }
        });
        let assignment = hungarian(&cost).expect("clamped costs are finite");
        let mut opened = Vec::new();
        for (r, &t) in tracks.iter().enumerate() {
            match assignment.row_to_col[r] {
                Some(c) if cost[(r, c)] <= threshold => {
                    clusters[c].0.push(t);
                    clusters[c].1 = t;
                }
                _ => opened.push((vec![t], t)),
            }
        }
        clusters.extend(opened);
    }

    let mut labels = vec![0u32; n];
    for (c, (members, _)) in clusters.iter().enumerate() {
        for &t in members {
            labels[t] = c as u32 + 1;
        }
    }
    canonicalize(&labels)
}

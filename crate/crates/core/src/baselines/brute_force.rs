//! Exact maximiser of the joint likelihood over all sensor-valid partitions.
//! Exponential; meant as a correctness oracle for small instances.

use std::collections::HashMap;

use crate::association::JointAssociation;
use crate::error::{Error, Result};
use crate::likelihood::Scene;

pub const DEFAULT_BRUTE_FORCE_CAP: usize = 10;

/// Best association and its log-likelihood.
///
/// Partitions are enumerated as restricted-growth strings in lexicographic
/// order, so ties resolve to the lexicographically smallest canonical
/// association.
pub fn brute_force_optimal(scene: &Scene<'_>, cap: usize) -> Result<(JointAssociation, f64)> {
    let n = scene.n_tracks();
    if n > cap || n > 63 {
        return Err(Error::TooManyTracks { n, cap });
    }
    if !scene.model().spatial.is_likelihood() {
        return Err(Error::Config(format!(
            "the exact optimizer needs a joint likelihood, not '{}'",
            scene.model().spatial.name()
        )));
    }
    let mut search = Search {
        scene,
        memo: HashMap::new(),
        labels: vec![0; n],
        masks: Vec::new(),
        best: None,
    };
    search.recurse(0);
    let (labels, lik) = search.best.unwrap_or((Vec::new(), 0.0));
    Ok((JointAssociation::from_raw(labels), lik))
}

struct Search<'s, 'a> {
    scene: &'s Scene<'a>,
    memo: HashMap<u64, f64>,
    labels: Vec<u32>,
    /// member bitmask and sensor list of each open cluster
    masks: Vec<(u64, Vec<usize>)>,
    best: Option<(Vec<u32>, f64)>,
}

impl Search<'_, '_> {
    fn recurse(&mut self, t: usize) {
        if t == self.labels.len() {
            let total: f64 = (0..self.masks.len())
                .map(|c| self.cluster_lik(self.masks[c].0))
                .sum();
            if self.best.as_ref().is_none_or(|(_, b)| total > *b) {
                self.best = Some((self.labels.clone(), total));
            }
            return;
        }
        let s = self.scene.sensor_of(t);
        for c in 0..self.masks.len() {
            if self.masks[c].1.contains(&s) {
                continue;
            }
            self.masks[c].0 |= 1 << t;
            self.masks[c].1.push(s);
            self.labels[t] = c as u32 + 1;
            self.recurse(t + 1);
            self.masks[c].1.pop();
            self.masks[c].0 &= !(1 << t);
        }
        self.masks.push((1 << t, vec![s]));
        self.labels[t] = self.masks.len() as u32;
        self.recurse(t + 1);
        self.masks.pop();
    }

    fn cluster_lik(&mut self, mask: u64) -> f64 {
        if let Some(&v) = self.memo.get(&mask) {
            return v;
        }
        let members: Vec<usize> = (0..64).filter(|b| mask & (1 << b) != 0).collect();
        let v = self.scene.log_cluster_lik(&members);
        self.memo.insert(mask, v);
        v
    }
}

/// Number of set partitions of the scene's tracks with no repeated sensor in a block.
pub fn count_valid_partitions(scene: &Scene<'_>) -> u64 {
    fn rec(scene: &Scene<'_>, t: usize, blocks: &mut Vec<Vec<usize>>) -> u64 {
        if t == scene.n_tracks() {
            return 1;
        }
        let s = scene.sensor_of(t);
        let mut total = 0;
        for b in 0..blocks.len() {
            if !blocks[b].contains(&s) {
                blocks[b].push(s);
                total += rec(scene, t + 1, blocks);
                blocks[b].pop();
            }
        }
        blocks.push(vec![s]);
        total += rec(scene, t + 1, blocks);
        blocks.pop();
        total
    }
    rec(scene, 0, &mut Vec::new())
}

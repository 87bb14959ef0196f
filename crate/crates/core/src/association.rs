//! Joint association vectors and clusters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::track::Track;

/// Maps each track (by position in the track list) to a 1-based cluster id.
///
/// Values produced by [`canonicalize`] number clusters consecutively in order
/// of first appearance, so two vectors describing the same partition compare
/// equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAssociation(Vec<u32>);

impl JointAssociation {
    /// All-singletons association `[1, 2, ..., n]`.
    pub fn singletons(n: usize) -> Self {
        Self((1..=n as u32).collect())
    }

    /// Wraps a raw label vector without canonicalising it.
    pub fn from_raw(labels: Vec<u32>) -> Self {
        Self(labels)
    }

    /// Builds the canonical association of a partition given as clusters.
    ///
    /// Tracks not covered by any cluster become singletons.
    pub fn from_clusters(n_tracks: usize, clusters: &[Cluster]) -> Self {
        let mut raw = vec![0u32; n_tracks];
        for (c, cluster) in clusters.iter().enumerate() {
            for &t in &cluster.members {
                raw[t] = c as u32 + 1;
            }
        }
        for (next, v) in (clusters.len() as u32 + 1..).zip(raw.iter_mut().filter(|v| **v == 0)) {
            *v = next;
        }
        canonicalize(&raw)
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        let mut seen: Vec<u32> = self.0.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn is_canonical(&self) -> bool {
        let mut next = 1;
        for &v in &self.0 {
            if v == next {
                next += 1;
            } else if v == 0 || v > next {
                return false;
            }
        }
        true
    }
}

/// Renumbers cluster ids consecutively from 1 in order of first appearance.
///
/// Entries are expected to be `>= 1`; an empty input yields an empty
/// association.
pub fn canonicalize(labels: &[u32]) -> JointAssociation {
    let mut map: HashMap<u32, u32> = HashMap::with_capacity(labels.len());
    let mut next = 1u32;
    let out = labels
        .iter()
        .map(|&l| {
            *map.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect();
    JointAssociation(out)
}

/// A set of track indices hypothesised to share one origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cluster {
    /// 0-based track indices in ascending order.
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Inverts an association into its clusters, ordered by cluster id.
///
/// Works for any labelling; cluster order follows ascending label.
pub fn clusters_of(assoc: &JointAssociation) -> Vec<Cluster> {
    let mut labels: Vec<u32> = assoc.0.clone();
    labels.sort_unstable();
    labels.dedup();
    let index: HashMap<u32, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut out = vec![
        Cluster {
            members: Vec::new()
        };
        labels.len()
    ];
    for (t, l) in assoc.0.iter().enumerate() {
        out[index[l]].members.push(t);
    }
    out
}

/// True iff all member tracks come from distinct sensors.
pub fn is_sensor_valid(cluster: &Cluster, tracks: &[Track]) -> bool {
    let mut sensors: Vec<_> = cluster
        .members
        .iter()
        .map(|&t| tracks[t].sensor())
        .collect();
    sensors.sort_unstable();
    sensors.windows(2).all(|w| w[0] != w[1])
}

/// True iff every cluster of the association is sensor-valid.
pub fn association_is_valid(assoc: &JointAssociation, tracks: &[Track]) -> bool {
    assoc.len() == tracks.len()
        && clusters_of(assoc)
            .iter()
            .all(|c| is_sensor_valid(c, tracks))
}

/// Association grouping tracks by their ground-truth object label.
///
/// Unlabelled tracks become singletons. The result may be sensor-invalid when a
/// sensor reports one object under several local ids.
pub fn ground_truth_association(tracks: &[Track]) -> JointAssociation {
    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut next = 1u32;
    let raw = tracks
        .iter()
        .map(|t| match t.object_id() {
            Some(o) => *ids.entry(o).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            }),
            None => {
                let id = next;
                next += 1;
                id
            }
        })
        .collect::<Vec<_>>();
    canonicalize(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(v: &[u32]) -> JointAssociation {
        JointAssociation::from_raw(v.to_vec())
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(&[3, 2, 3]).labels(), &[1, 2, 1]);
        assert_eq!(canonicalize(&[1, 2, 3]).labels(), &[1, 2, 3]);
        assert_eq!(canonicalize(&[7, 7, 1, 7]).labels(), &[1, 1, 2, 1]);
        assert!(canonicalize(&[]).is_empty());
    }

    #[test]
    fn clusters_of_examples() {
        let c = clusters_of(&labels(&[1, 2, 1]));
        assert_eq!(c, vec![Cluster::new(vec![0, 2]), Cluster::new(vec![1])]);
        assert_eq!(clusters_of(&labels(&[1])), vec![Cluster::new(vec![0])]);
        assert_eq!(
            clusters_of(&labels(&[1, 1, 2, 2])),
            vec![Cluster::new(vec![0, 1]), Cluster::new(vec![2, 3])]
        );
    }

    #[test]
    fn sensor_validity() {
        let t1 = Track::isotropic(1, [0.0, 0.0], 1.0).unwrap();
        let t2 = Track::isotropic(2, [0.0, 0.0], 1.0).unwrap();
        let t3 = Track::isotropic(1, [0.0, 0.0], 1.0).unwrap();
        let tracks = vec![t1, t2, t3];
        assert!(is_sensor_valid(&Cluster::new(vec![0, 1]), &tracks));
        assert!(!is_sensor_valid(&Cluster::new(vec![0, 2]), &tracks));
        assert!(is_sensor_valid(&Cluster::new(vec![2]), &tracks));
    }

    #[test]
    fn ground_truth_groups_by_object() {
        let mk = |s, o| Track::isotropic(s, [0.0, 0.0], 1.0).unwrap().with_object(o);
        let tracks = vec![
            mk(1, 5),
            mk(2, 6),
            mk(2, 5),
            Track::isotropic(3, [0.0, 0.0], 1.0).unwrap(),
        ];
        assert_eq!(ground_truth_association(&tracks).labels(), &[1, 2, 1, 3]);
    }

    proptest! {
        #[test]
        fn canonicalize_idempotent(v in prop::collection::vec(1u32..6, 0..12)) {
            let once = canonicalize(&v);
            prop_assert!(once.is_canonical());
            prop_assert_eq!(canonicalize(once.labels()), once);
        }

        #[test]
        fn canonicalize_ignores_relabelling(
            v in prop::collection::vec(1u32..6, 0..12),
            perm in Just((1u32..=5).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let relabelled: Vec<u32> = v.iter().map(|&l| perm[(l - 1) as usize] + 10).collect();
            prop_assert_eq!(canonicalize(&v), canonicalize(&relabelled));
        }

        #[test]
        fn clusters_round_trip(v in prop::collection::vec(1u32..6, 0..12)) {
            let a = canonicalize(&v);
            let clusters = clusters_of(&a);
            prop_assert_eq!(JointAssociation::from_clusters(a.len(), &clusters), a);
        }
    }
}

//! Track-to-track association by stochastic optimization.
//!
//! Starting from a valid association (all singletons by default), every sweep
//! visits each track once and samples one of four action families:
//!
//! * remain in the current cluster,
//! * split off into a new singleton,
//! * move into another cluster,
//! * merge the current cluster with another cluster.
//!
//! Each action is weighted by the ratio of the joint likelihood after the
//! action to the current one. Clusters untouched by an action cancel out of
//! that ratio, so only the one or two affected clusters are rated. After every
//! action the current association is recorded, which yields `N * N_T`
//! hypotheses per run.

mod hypotheses;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use hypotheses::{DistinctHypothesis, Hypothesis, HypothesisSet};

use crate::association::{canonicalize, JointAssociation};
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodModel, Scene};
use crate::track::{SensorInfo, Track};

/// Weights below this fraction of the largest one are dropped before sampling.
const RELATIVE_WEIGHT_FLOOR: f64 = 1e-300;

/// Seedable generator used for all sampling. One instance per run.
pub type SoRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Remain,
    Split,
    /// Move the track into the cluster with this (raw) id.
    Move(u32),
    /// Merge the track's cluster into the cluster with this (raw) id.
    Merge(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoConfig {
    pub sweeps: usize,
    /// Gating distance in meters; `f64::INFINITY` disables gating.
    pub gate: f64,
    pub seed: u64,
    pub likelihood: LikelihoodModel,
    /// Warm start; all singletons when `None`.
    #[serde(default)]
    pub initial: Option<JointAssociation>,
}

impl SoConfig {
    pub fn new(sweeps: usize, gate: f64, seed: u64, likelihood: LikelihoodModel) -> Self {
        Self {
            sweeps,
            gate,
            seed,
            likelihood,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::Config("SO needs at least one sweep".into()));
        }
        if !(self.gate > 0.0) {
            return Err(Error::Config(format!(
                "gate must be positive, got {}",
                self.gate
            )));
        }
        if !self.likelihood.spatial.is_likelihood() {
            return Err(Error::Config(format!(
                "SO needs a joint likelihood; '{}' is a pairwise score only",
                self.likelihood.spatial.name()
            )));
        }
        self.likelihood.detection.validate()
    }
}

/// Candidate actions for one track with their log likelihood ratios.
///
/// `log_weights[i]` is `log p(x | theta_a) - log p(x | theta)`; impossible
/// actions carry `-inf` and Remain carries exactly `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionWeights {
    pub actions: Vec<Action>,
    pub log_weights: Vec<f64>,
}

impl ActionWeights {
    /// Unnormalised weight `exp(log_weight)` of action `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.log_weights[i].exp()
    }

    /// Probabilities after max-subtraction and normalisation.
    pub fn probabilities(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = self
            .log_weights
            .iter()
            .map(|&l| {
                let v = (l - max).exp();
                if v < RELATIVE_WEIGHT_FLOOR {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }

    /// Draws an action by inverting the cumulative weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let p = self.probabilities();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            acc += pi;
            last = i;
            if u < acc {
                return self.actions[i];
            }
        }
        self.actions[last]
    }
}

#[derive(Debug, Clone)]
struct ClusterState {
    members: Vec<usize>,
    log_lik: f64,
    center: Vector2<f64>,
}

/// Mutable association state of one SO run with cached cluster statistics.
#[derive(Debug, Clone)]
pub struct SoState<'s, 'a> {
    scene: &'s Scene<'a>,
    labels: Vec<u32>,
    clusters: BTreeMap<u32, ClusterState>,
    next_id: u32,
    gate: f64,
    scratch: Vec<usize>,
    stamp: Vec<u64>,
    epoch: u64,
}

impl<'s, 'a> SoState<'s, 'a> {
    /// State starting from the given labels (any labelling; need not be canonical).
    pub fn new(scene: &'s Scene<'a>, initial: &JointAssociation, gate: f64) -> Result<Self> {
        if initial.len() != scene.n_tracks() {
            return Err(Error::Config(format!(
                "initial association has {} entries for {} tracks",
                initial.len(),
                scene.n_tracks()
            )));
        }
        let labels = initial.labels().to_vec();
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (t, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(t);
        }
        let mut clusters = BTreeMap::new();
        for (id, members) in groups {
            let state = rate(scene, members);
            if state.log_lik == f64::NEG_INFINITY {
                return Err(Error::Config(
                    "initial association is not sensor-valid".into(),
                ));
            }
            clusters.insert(id, state);
        }
        // fresh split ids start after N_T, or after the largest warm-start label
        let next_id = (scene.n_tracks() as u32).max(labels.iter().copied().max().unwrap_or(0)) + 1;
        Ok(Self {
            scene,
            labels,
            clusters,
            next_id,
            gate,
            scratch: Vec::new(),
            stamp: vec![0; scene.sensors().len()],
            epoch: 0,
        })
    }

    /// Raw (non-canonical) labels.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn association(&self) -> JointAssociation {
        canonicalize(&self.labels)
    }

    /// Sum of cached cluster log-likelihoods.
    pub fn log_joint_lik(&self) -> f64 {
        self.clusters.values().map(|c| c.log_lik).sum()
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Actions `[r, s, m_1.., M_1..]` for track `t` with their log ratios.
    pub fn action_weights(&mut self, t: usize) -> ActionWeights {
        let own_id = self.labels[t];
        let n = self.clusters.len();
        let mut actions = Vec::with_capacity(2 + 2 * n);
        let mut log_weights = Vec::with_capacity(2 + 2 * n);
        actions.push(Action::Remain);
        log_weights.push(0.0);

        let own = &self.clusters[&own_id];
        let own_lik = own.log_lik;
        let own_size = own.members.len();

        // likelihood of the source cluster once t has left it
        let rest_lik = if own_size > 1 {
            self.scratch.clear();
            self.scratch
                .extend(own.members.iter().copied().filter(|&m| m != t));
            self.scene.log_cluster_lik(&self.scratch)
        } else {
            0.0
        };

        actions.push(Action::Split);
        log_weights.push(if own_size > 1 {
            self.scene.log_cluster_lik(&[t]) + rest_lik - own_lik
        } else {
            f64::NEG_INFINITY
        });

        // sensors of the current cluster, for the merge disjointness test
        self.epoch += 1;
        let epoch = self.epoch;
        for &m in &self.clusters[&own_id].members {
            self.stamp[self.scene.sensor_of(m)] = epoch;
        }
        let t_sensor = self.scene.sensor_of(t);
        let x_t = self.scene.position(t);

        let mut merge_weights = Vec::with_capacity(n);
        let ids: Vec<u32> = self.clusters.keys().copied().collect();
        for &c in &ids {
            actions.push(Action::Move(c));
            let target = &self.clusters[&c];
            let gated = (target.center - x_t).norm() <= self.gate;
            if c == own_id || !gated {
                log_weights.push(f64::NEG_INFINITY);
                merge_weights.push(f64::NEG_INFINITY);
                continue;
            }
            let target_lik = target.log_lik;

            let conflict = target
                .members
                .iter()
                .any(|&m| self.scene.sensor_of(m) == t_sensor);
            log_weights.push(if conflict {
                f64::NEG_INFINITY
            } else {
                self.scratch.clear();
                self.scratch.extend_from_slice(&target.members);
                self.scratch.push(t);
                self.scene.log_cluster_lik(&self.scratch) + rest_lik - target_lik - own_lik
            });

            let overlap = target
                .members
                .iter()
                .any(|&m| self.stamp[self.scene.sensor_of(m)] == epoch);
            merge_weights.push(if overlap {
                f64::NEG_INFINITY
            } else {
                self.scratch.clear();
                self.scratch.extend_from_slice(&target.members);
                self.scratch
                    .extend_from_slice(&self.clusters[&own_id].members);
                self.scene.log_cluster_lik(&self.scratch) - target_lik - own_lik
            });
        }
        actions.extend(ids.iter().map(|&c| Action::Merge(c)));
        log_weights.extend(merge_weights);
        ActionWeights {
            actions,
            log_weights,
        }
    }

    /// Applies an action to track `t`. Emptied clusters are removed.
    pub fn apply(&mut self, t: usize, action: Action) {
        let own_id = self.labels[t];
        match action {
            Action::Remain => {}
            Action::Split => {
                let id = self.next_id;
                self.next_id += 1;
                self.detach(t, own_id);
                self.labels[t] = id;
                self.clusters.insert(id, rate(self.scene, vec![t]));
            }
            Action::Move(c) => {
                if c == own_id {
                    return;
                }
                self.detach(t, own_id);
                self.labels[t] = c;
                let mut members = self.clusters[&c].members.clone();
                members.push(t);
                self.clusters.insert(c, rate(self.scene, members));
            }
            Action::Merge(c) => {
                if c == own_id {
                    return;
                }
                let moved = self.clusters.remove(&own_id).expect("own cluster").members;
                for &m in &moved {
                    self.labels[m] = c;
                }
                let mut members = self.clusters[&c].members.clone();
                members.extend(moved);
                self.clusters.insert(c, rate(self.scene, members));
            }
        }
    }

    fn detach(&mut self, t: usize, id: u32) {
        let mut members = self.clusters.remove(&id).expect("cluster of track").members;
        members.retain(|&m| m != t);
        if !members.is_empty() {
            self.clusters.insert(id, rate(self.scene, members));
        }
    }
}

fn rate(scene: &Scene<'_>, members: Vec<usize>) -> ClusterState {
    let stat = scene.cluster_stat(&members);
    ClusterState {
        members,
        log_lik: stat.log_lik,
        center: stat.fused_mean,
    }
}

/// Runs `config.sweeps` sweeps and records every intermediate association.
pub fn run(tracks: &[Track], sensors: &[SensorInfo], config: &SoConfig) -> Result<HypothesisSet> {
    config.validate()?;
    if tracks.is_empty() {
        return Ok(HypothesisSet::default());
    }
    let scene = Scene::new(tracks, sensors, &config.likelihood)?;
    run_scene(&scene, config)
}

/// Same as [`run`] on an already bound scene.
pub fn run_scene(scene: &Scene<'_>, config: &SoConfig) -> Result<HypothesisSet> {
    config.validate()?;
    let n = scene.n_tracks();
    if n == 0 {
        return Ok(HypothesisSet::default());
    }
    let initial = config
        .initial
        .clone()
        .unwrap_or_else(|| JointAssociation::singletons(n));
    let mut state = SoState::new(scene, &initial, config.gate)?;
    let mut rng = SoRng::seed_from_u64(config.seed);

    let mut samples = Vec::with_capacity(config.sweeps * n);
    let mut current = Arc::new(state.association());
    for _ in 0..config.sweeps {
        for t in 0..n {
            let weights = state.action_weights(t);
            let action = weights.sample(&mut rng);
            if action != Action::Remain {
                state.apply(t, action);
                current = Arc::new(state.association());
            }
            samples.push(Hypothesis {
                association: Arc::clone(&current),
                log_lik: state.log_joint_lik(),
                index: samples.len(),
            });
        }
    }
    Ok(HypothesisSet::new(samples))
}

#[cfg(test)]
mod tests;

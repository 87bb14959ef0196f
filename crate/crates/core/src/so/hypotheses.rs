use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::association::JointAssociation;
use crate::error::{Error, Result};

/// One recorded sample of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub association: Arc<JointAssociation>,
    pub log_lik: f64,
    /// Position in the sampling sequence (0-based).
    pub index: usize,
}

/// A canonical association with its best likelihood and how often it was visited.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinctHypothesis {
    pub association: Arc<JointAssociation>,
    pub log_lik: f64,
    pub first_index: usize,
    pub visits: usize,
}

/// All samples of one run, in sampling order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HypothesisSet {
    samples: Vec<Hypothesis>,
}

impl HypothesisSet {
    pub fn new(samples: Vec<Hypothesis>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Hypothesis] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Highest-likelihood sample; ties go to the earliest.
    pub fn best(&self) -> Result<(&JointAssociation, f64)> {
        self.best_within(self.samples.len())
    }

    /// Best sample among the first `n` samples.
    pub fn best_within(&self, n: usize) -> Result<(&JointAssociation, f64)> {
        let mut best: Option<&Hypothesis> = None;
        for h in self.samples.iter().take(n) {
            if best.is_none_or(|b| h.log_lik > b.log_lik) {
                best = Some(h);
            }
        }
        best.map(|h| (h.association.as_ref(), h.log_lik))
            .ok_or(Error::Empty("hypothesis set"))
    }

    /// Distinct associations among the first `n` samples, by descending
    /// likelihood (ties by first visit).
    pub fn distinct_within(&self, n: usize) -> Vec<DistinctHypothesis> {
        let mut index: HashMap<&JointAssociation, usize> = HashMap::new();
        let mut out: Vec<DistinctHypothesis> = Vec::new();
        for h in self.samples.iter().take(n) {
            match index.get(h.association.as_ref()) {
                Some(&i) => {
                    let d = &mut out[i];
                    d.visits += 1;
                    if h.log_lik > d.log_lik {
                        d.log_lik = h.log_lik;
                    }
                }
                None => {
                    index.insert(h.association.as_ref(), out.len());
                    out.push(DistinctHypothesis {
                        association: Arc::clone(&h.association),
                        log_lik: h.log_lik,
                        first_index: h.index,
                        visits: 1,
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            b.log_lik
                .total_cmp(&a.log_lik)
                .then(a.first_index.cmp(&b.first_index))
        });
        out
    }

    pub fn distinct(&self) -> Vec<DistinctHypothesis> {
        self.distinct_within(self.samples.len())
    }

    /// Up to `k` distinct associations by descending likelihood.
    pub fn top_k(&self, k: usize) -> Vec<DistinctHypothesis> {
        self.top_k_within(k, self.samples.len())
    }

    pub fn top_k_within(&self, k: usize, n: usize) -> Vec<DistinctHypothesis> {
        let mut d = self.distinct_within(n);
        d.truncate(k);
        d
    }

    /// Most visited association (ties by likelihood, then first visit).
    pub fn modal(&self) -> Option<DistinctHypothesis> {
        self.distinct().into_iter().max_by(|a, b| {
            a.visits
                .cmp(&b.visits)
                .then(a.log_lik.total_cmp(&b.log_lik))
                .then(b.first_index.cmp(&a.first_index))
        })
    }

    /// JSON export: `[{"association":[..],"log_lik":..,"index":..}, ...]`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.samples)?)
    }
}

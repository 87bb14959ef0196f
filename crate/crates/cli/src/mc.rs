//! Monte Carlo sweeps and the likelihood ablation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use t2ta::evaluation::GospaParams;
use t2ta::likelihood::{DetectionModel, SpatialKind};
use t2ta::sim::{gen_mc_frame, McConfig};
use t2ta::{Error, ScenarioFrame};

use crate::algorithms::{run_algorithm, AlgorithmKind, AlgorithmParams};
use crate::scoring::{log_lik, score, top_k_band, MeanStderr};
use crate::Failure;

/// Seed offset separating the sampler's stream from the scene generator's.
pub(crate) const SAMPLER_STREAM: u64 = 0x5EED_0000_0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McScenario {
    Small,
    Big,
}

impl McScenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Small => "mc_small",
            Self::Big => "mc_big",
        }
    }

    pub fn config(self, sigma: f64, p_d: f64, seed: u64) -> McConfig {
        match self {
            Self::Small => McConfig::small(sigma, p_d, seed),
            Self::Big => McConfig::big(sigma, p_d, seed),
        }
    }

    pub fn default_sweeps(self) -> usize {
        match self {
            Self::Small => 100,
            Self::Big => 200,
        }
    }

    pub fn default_top_k(self) -> usize {
        match self {
            Self::Small => 5,
            Self::Big => 10,
        }
    }
}

impl std::str::FromStr for McScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "small" | "mc_small" => Ok(Self::Small),
            "big" | "mc_big" => Ok(Self::Big),
            other => Err(Error::Config(format!(
                "unknown Monte Carlo scenario '{other}'"
            ))),
        }
    }
}

/// A Monte Carlo experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSpec {
    pub scenario: McScenario,
    pub sigma: f64,
    pub p_ds: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmKind>,
    /// Likelihood kinds to evaluate; every algorithm runs under each valid kind.
    pub spatial: Vec<SpatialKind>,
    pub sweeps: usize,
    /// SO gating distance; `6 sigma` by default.
    pub gate: f64,
    /// `d_t` for the likelihood-based pairwise costs.
    pub threshold: f64,
    /// `d_t` for the Euclidean pairwise cost.
    pub euclidean_threshold: f64,
    pub top_k: usize,
    pub oracle_cap: usize,
    pub gospa: GospaParams,
}

impl McSpec {
    /// Default bundle: N = 100 / 200 sweeps, `d_g = 6 sigma`, `d_t = 15`, GOSPA `c = 10, p = 1`.
    pub fn new(scenario: McScenario, sigma: f64, p_ds: Vec<f64>, trials: usize, seed: u64) -> Self {
        Self {
            scenario,
            sigma,
            p_ds,
            trials,
            seed,
            algorithms: vec![
                AlgorithmKind::So,
                AlgorithmKind::GreedyMerge,
                AlgorithmKind::GreedyNoMerge,
                AlgorithmKind::Sensorwise,
                AlgorithmKind::Oracle,
            ],
            spatial: vec![SpatialKind::Proposed],
            sweeps: scenario.default_sweeps(),
            gate: 6.0 * sigma,
            threshold: 15.0,
            euclidean_threshold: 10.0,
            top_k: scenario.default_top_k(),
            oracle_cap: t2ta::baselines::DEFAULT_BRUTE_FORCE_CAP,
            gospa: GospaParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.p_ds.is_empty() || self.p_ds.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::Config(
                "detection probabilities must lie in (0, 1]".into(),
            ));
        }
        if self.spatial.is_empty() {
            return Err(Error::Config(
                "at least one likelihood kind is required".into(),
            ));
        }
        for &a in &self.algorithms {
            for &s in &self.spatial {
                a.check_spatial(s)?;
            }
        }
        self.gospa.validate()?;
        self.scenario
            .config(self.sigma, self.p_ds[0], self.seed)
            .validate()
    }

    pub(crate) fn params(&self, spatial: SpatialKind, p_d: f64) -> AlgorithmParams {
        let threshold = if spatial == SpatialKind::Euclidean {
            self.euclidean_threshold
        } else {
            self.threshold
        };
        let mut p = AlgorithmParams::new(
            spatial,
            DetectionModel::fixed(p_d),
            self.sweeps,
            self.gate,
            threshold,
        );
        p.oracle_cap = self.oracle_cap;
        p
    }
}

/// One (frame, algorithm, likelihood kind) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub scenario: String,
    pub p_d: f64,
    pub sigma: f64,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    pub likelihood: String,
    pub params: String,
    pub n_tracks: usize,
    pub n_objects: usize,
    pub total: f64,
    pub localization: f64,
    pub missed: usize,
    #[serde(rename = "false")]
    pub false_: usize,
    /// Log joint likelihood of the result under the row's likelihood kind.
    pub log_lik: Option<f64>,
    pub topk_min: Option<f64>,
    pub topk_mean: Option<f64>,
    pub topk_max: Option<f64>,
}

/// Where the scenes come from.
#[derive(Debug, Clone)]
pub enum FrameSource {
    Generate,
    /// Pre-recorded frames; each frame is one trial for every `p_d`.
    Frames(Vec<ScenarioFrame>),
}

pub struct McOutput {
    pub rows: Vec<McRow>,
    pub failures: Vec<Failure>,
    pub frames: Vec<ScenarioFrame>,
}

/// Runs every algorithm under every likelihood kind on every `(p_d, trial)`
/// scene. A ground-truth row is always included. The brute-force oracle only
/// runs when the scene has at most `oracle_cap` tracks.
pub fn run_mc_experiment(spec: &McSpec, source: &FrameSource) -> Result<McOutput, Error> {
    spec.validate()?;
    let n_trials = match source {
        FrameSource::Generate => spec.trials,
        FrameSource::Frames(f) => f.len(),
    };
    let mut algorithms = vec![AlgorithmKind::GroundTruth];
    algorithms.extend(
        spec.algorithms
            .iter()
            .copied()
            .filter(|a| *a != AlgorithmKind::GroundTruth),
    );

    let tasks: Vec<(usize, usize)> = (0..spec.p_ds.len())
        .flat_map(|i| (0..n_trials).map(move |t| (i, t)))
        .collect();
    type TaskResult = Result<(ScenarioFrame, Vec<McRow>, Vec<Failure>), Error>;
    let results: Vec<TaskResult> = tasks
        .par_iter()
        .map(|&(pi, trial)| {
            let p_d = spec.p_ds[pi];
            let seed = spec.seed + trial as u64;
            let frame = match source {
                FrameSource::Generate => {
                    gen_mc_frame(&spec.scenario.config(spec.sigma, p_d, seed))?
                }
                FrameSource::Frames(f) => f[trial].clone(),
            };
            let (rows, failures) = trial_rows(spec, &algorithms, &frame, p_d, trial, seed);
            Ok((frame, rows, failures))
        })
        .collect();

    let mut out = McOutput {
        rows: Vec::new(),
        failures: Vec::new(),
        frames: Vec::new(),
    };
    for r in results {
        let (frame, rows, failures) = r?;
        out.frames.push(frame);
        out.rows.extend(rows);
        out.failures.extend(failures);
    }
    Ok(out)
}

fn trial_rows(
    spec: &McSpec,
    algorithms: &[AlgorithmKind],
    frame: &ScenarioFrame,
    p_d: f64,
    trial: usize,
    seed: u64,
) -> (Vec<McRow>, Vec<Failure>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &spatial in &spec.spatial {
        for &algo in algorithms {
            if algo.check_spatial(spatial).is_err() {
                continue;
            }
            if algo == AlgorithmKind::Oracle && frame.tracks.len() > spec.oracle_cap {
                continue;
            }
            let params = spec.params(spatial, p_d);
            match mc_row(spec, frame, algo, &params, p_d, trial, seed) {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(Failure::new(spec.scenario.name(), seed, algo.name(), &e)),
            }
        }
    }
    (rows, failures)
}

fn mc_row(
    spec: &McSpec,
    frame: &ScenarioFrame,
    algo: AlgorithmKind,
    params: &AlgorithmParams,
    p_d: f64,
    trial: usize,
    seed: u64,
) -> Result<McRow, Error> {
    let outcome = run_algorithm(algo, frame, params, seed ^ SAMPLER_STREAM)?;
    let g = score(frame, &outcome.association, &spec.gospa)?;
    let band = match &outcome.hypotheses {
        Some(h) => top_k_band(frame, h, spec.top_k, &spec.gospa)?,
        None => None,
    };
    Ok(McRow {
        scenario: spec.scenario.name().into(),
        p_d,
        sigma: spec.sigma,
        trial,
        seed,
        algorithm: algo.name().into(),
        likelihood: params.spatial.name().into(),
        params: params.describe(algo),
        n_tracks: frame.tracks.len(),
        n_objects: frame.truths.len(),
        total: g.total,
        localization: g.localization,
        missed: g.n_missed,
        false_: g.n_false,
        log_lik: log_lik(
            frame,
            &outcome.association,
            params.detection,
            params.spatial,
        )?,
        topk_min: band.map(|b| b.0),
        topk_mean: band.map(|b| b.1),
        topk_max: band.map(|b| b.2),
    })
}

/// Mean GOSPA per (p_d, algorithm, likelihood kind).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummaryRow {
    pub scenario: String,
    pub p_d: f64,
    pub algorithm: String,
    pub likelihood: String,
    pub mean_gospa: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub fn summarize_mc(rows: &[McRow]) -> Vec<McSummaryRow> {
    let mut groups: BTreeMap<(String, u64, String, String), Vec<f64>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (
            r.scenario.clone(),
            r.p_d.to_bits(),
            r.likelihood.clone(),
            r.algorithm.clone(),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.total);
    }
    order
        .into_iter()
        .map(|key| {
            let m = MeanStderr::of(&groups[&key]);
            McSummaryRow {
                scenario: key.0,
                p_d: f64::from_bits(key.1),
                algorithm: key.3,
                likelihood: key.2,
                mean_gospa: m.mean,
                stderr: m.stderr,
                trials: m.n,
            }
        })
        .collect()
}

/// Mean GOSPA of `algorithm` under `likelihood` at `p_d`, if present.
pub fn mean_of(
    summary: &[McSummaryRow],
    p_d: f64,
    algorithm: AlgorithmKind,
    likelihood: SpatialKind,
) -> Option<f64> {
    summary
        .iter()
        .find(|s| {
            s.p_d == p_d && s.algorithm == algorithm.name() && s.likelihood == likelihood.name()
        })
        .map(|s| s.mean_gospa)
}

/// Every valid (algorithm, likelihood kind) pair of the ablation grid.
pub fn ablation_grid(
    algorithms: &[AlgorithmKind],
    kinds: &[SpatialKind],
) -> Vec<(AlgorithmKind, SpatialKind)> {
    kinds
        .iter()
        .flat_map(|&k| algorithms.iter().map(move |&a| (a, k)))
        .filter(|(a, k)| a.check_spatial(*k).is_ok())
        .collect()
}

/// Likelihood ablation: the same scenes scored under each requested
/// (algorithm, likelihood kind) pair. Invalid pairs are configuration errors.
pub fn run_likelihood_ablation(
    spec: &McSpec,
    grid: &[(AlgorithmKind, SpatialKind)],
    source: &FrameSource,
) -> Result<McOutput, Error> {
    for (a, k) in grid {
        a.check_spatial(*k)?;
    }
    let mut kinds: Vec<SpatialKind> = Vec::new();
    for (_, k) in grid {
        if !kinds.contains(k) {
            kinds.push(*k);
        }
    }
    let mut algorithms: Vec<AlgorithmKind> = Vec::new();
    for (a, _) in grid {
        if !algorithms.contains(a) {
            algorithms.push(*a);
        }
    }
    // run each kind separately so that SO is not combined with a pairwise score
    let mut out = McOutput {
        rows: Vec::new(),
        failures: Vec::new(),
        frames: Vec::new(),
    };
    for kind in kinds {
        let mut s = spec.clone();
        s.spatial = vec![kind];
        s.algorithms = algorithms
            .iter()
            .copied()
            .filter(|a| grid.contains(&(*a, kind)))
            .collect();
        let part = run_mc_experiment(&s, source)?;
        out.rows.extend(part.rows);
        out.failures.extend(part.failures);
        if out.frames.is_empty() {
            out.frames = part.frames;
        }
    }
    Ok(out)
}

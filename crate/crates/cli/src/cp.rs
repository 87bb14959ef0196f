//! Collective perception experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use t2ta::evaluation::GospaParams;
use t2ta::likelihood::{DetectionModel, SpatialKind};
use t2ta::sim::{
    intersection_script, run_cp_scenario, CommConfig, CommMode, IntersectionParams, PayloadStats,
    WorldScript,
};
use t2ta::{Error, ScenarioFrame};

use crate::algorithms::{run_algorithm, AlgorithmKind, AlgorithmParams};
use crate::mc::SAMPLER_STREAM;
use crate::scoring::{score, MeanStderr};
use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WorldSource {
    /// Built-in intersection; its `mpr` is replaced per run.
    Intersection(IntersectionParams),
    /// User script; its `mpr` is replaced per run.
    Script(WorldScript),
}

impl WorldSource {
    pub fn script(&self, mpr: f64) -> WorldScript {
        match self {
            Self::Intersection(p) => intersection_script(&IntersectionParams { mpr, ..*p }),
            Self::Script(s) => WorldScript { mpr, ..s.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpSpec {
    pub world: WorldSource,
    pub modes: Vec<CommMode>,
    pub mprs: Vec<f64>,
    pub seed: u64,
    pub loss: f64,
    pub latency: f64,
    pub algorithms: Vec<AlgorithmKind>,
    pub sweeps: usize,
    pub gate: f64,
    pub threshold: f64,
    pub rho: f64,
    pub gospa: GospaParams,
}

impl CpSpec {
    /// Default bundle: N = 50 sweeps, `d_g = 15 m`, `d_t = 20`, `rho = 1/4`.
    pub fn new(world: WorldSource, modes: Vec<CommMode>, mprs: Vec<f64>, seed: u64) -> Self {
        Self {
            world,
            modes,
            mprs,
            seed,
            loss: 0.0,
            latency: 0.0,
            algorithms: vec![
                AlgorithmKind::SoDs,
                AlgorithmKind::SoC,
                AlgorithmKind::GreedyMerge,
                AlgorithmKind::GreedyNoMerge,
                AlgorithmKind::Sensorwise,
            ],
            sweeps: 50,
            gate: 15.0,
            threshold: 20.0,
            rho: 0.25,
            gospa: GospaParams::default(),
        }
    }

    pub fn comm(&self, mode: CommMode) -> CommConfig {
        CommConfig::for_mode(mode)
            .with_loss(self.loss)
            .with_latency(self.latency)
    }

    fn params(&self) -> AlgorithmParams {
        let mut p = AlgorithmParams::new(
            SpatialKind::Proposed,
            DetectionModel::collective_perception_default(),
            self.sweeps,
            self.gate,
            self.threshold,
        );
        p.rho = self.rho;
        p
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.modes.is_empty() || self.mprs.is_empty() {
            return Err(Error::Config(
                "at least one mode and one MPR are required".into(),
            ));
        }
        if self.mprs.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Config("MPR values must lie in [0, 1]".into()));
        }
        if self.sweeps == 0 {
            return Err(Error::Config("SO needs at least one sweep".into()));
        }
        self.gospa.validate()?;
        for &m in &self.modes {
            self.comm(m).validate()?;
        }
        Ok(())
    }
}

/// Per-object GOSPA of one algorithm on one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFrameRow {
    pub mode: String,
    pub mpr: f64,
    pub frame: usize,
    pub time: f64,
    pub algorithm: String,
    pub n_tracks: usize,
    pub n_sensors: usize,
    pub n_objects: usize,
    pub total: f64,
    pub localization: f64,
    pub missed: usize,
    #[serde(rename = "false")]
    pub false_: usize,
    pub gospa_per_object: f64,
}

/// Frame-averaged results of one (mode, MPR, algorithm) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpRow {
    pub scenario: String,
    pub mode: String,
    pub mpr: f64,
    pub seed: u64,
    pub algorithm: String,
    pub params: String,
    pub frames: usize,
    pub mean_gospa_per_object: f64,
    pub stderr: f64,
    pub mean_tracks: f64,
    pub mean_sensors: f64,
    pub mean_objects: f64,
    pub track_payloads: usize,
    pub cpms: usize,
}

pub struct CpOutput {
    pub rows: Vec<CpRow>,
    pub frame_rows: Vec<CpFrameRow>,
    pub failures: Vec<Failure>,
    /// Generated frames and payload statistics per (mode, MPR).
    pub runs: Vec<(CommMode, f64, Vec<ScenarioFrame>, PayloadStats)>,
}

/// Simulates each (mode, MPR) world and scores every algorithm per frame.
pub fn run_cp_experiment(spec: &CpSpec) -> Result<CpOutput, Error> {
    spec.validate()?;
    let mut out = CpOutput {
        rows: Vec::new(),
        frame_rows: Vec::new(),
        failures: Vec::new(),
        runs: Vec::new(),
    };
    for &mode in &spec.modes {
        for &mpr in &spec.mprs {
            let run = run_cp_scenario(&spec.world.script(mpr), &spec.comm(mode), spec.seed)?;
            let (rows, frame_rows, failures) =
                score_frames(spec, mode, mpr, &run.frames, &run.payload);
            out.rows.extend(rows);
            out.frame_rows.extend(frame_rows);
            out.failures.extend(failures);
            out.runs.push((mode, mpr, run.frames, run.payload));
        }
    }
    Ok(out)
}

/// Scores pre-recorded frames as one (mode, MPR) group.
pub fn score_cp_frames(
    spec: &CpSpec,
    mode: CommMode,
    mpr: f64,
    frames: &[ScenarioFrame],
) -> CpOutput {
    let (rows, frame_rows, failures) =
        score_frames(spec, mode, mpr, frames, &PayloadStats::default());
    CpOutput {
        rows,
        frame_rows,
        failures,
        runs: Vec::new(),
    }
}

fn score_frames(
    spec: &CpSpec,
    mode: CommMode,
    mpr: f64,
    frames: &[ScenarioFrame],
    payload: &PayloadStats,
) -> (Vec<CpRow>, Vec<CpFrameRow>, Vec<Failure>) {
    let params = spec.params();
    let mut algorithms = vec![AlgorithmKind::GroundTruth];
    algorithms.extend(
        spec.algorithms
            .iter()
            .copied()
            .filter(|a| *a != AlgorithmKind::GroundTruth),
    );

    let per_frame: Vec<(Vec<CpFrameRow>, Vec<Failure>)> = frames
        .par_iter()
        .enumerate()
        .map(|(k, frame)| {
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            let seed = (spec.seed + k as u64) ^ SAMPLER_STREAM;
            for &algo in &algorithms {
                let result = run_algorithm(algo, frame, &params, seed)
                    .and_then(|o| score(frame, &o.association, &spec.gospa));
                match result {
                    Ok(g) => rows.push(CpFrameRow {
                        mode: mode.name().into(),
                        mpr,
                        frame: k,
                        time: frame.time,
                        algorithm: algo.name().into(),
                        n_tracks: frame.tracks.len(),
                        n_sensors: frame.sensors.len(),
                        n_objects: frame.truths.len(),
                        total: g.total,
                        localization: g.localization,
                        missed: g.n_missed,
                        false_: g.n_false,
                        gospa_per_object: g.per_object(frame.truths.len()),
                    }),
                    Err(e) => failures.push(Failure::new(
                        &format!("cp_{}_mpr{mpr}_frame{k}", mode.name()),
                        spec.seed,
                        algo.name(),
                        &e,
                    )),
                }
            }
            (rows, failures)
        })
        .collect();

    let mut frame_rows = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in per_frame {
        frame_rows.extend(r);
        failures.extend(f);
    }
    let mean = |v: Vec<f64>| MeanStderr::of(&v).mean;
    let rows = algorithms
        .iter()
        .map(|&algo| {
            let mine: Vec<&CpFrameRow> = frame_rows
                .iter()
                .filter(|r| r.algorithm == algo.name())
                .collect();
            let g = MeanStderr::of(&mine.iter().map(|r| r.gospa_per_object).collect::<Vec<_>>());
            CpRow {
                scenario: "cp".into(),
                mode: mode.name().into(),
                mpr,
                seed: spec.seed,
                algorithm: algo.name().into(),
                params: params.describe(algo),
                frames: g.n,
                mean_gospa_per_object: g.mean,
                stderr: g.stderr,
                mean_tracks: mean(mine.iter().map(|r| r.n_tracks as f64).collect()),
                mean_sensors: mean(mine.iter().map(|r| r.n_sensors as f64).collect()),
                mean_objects: mean(mine.iter().map(|r| r.n_objects as f64).collect()),
                track_payloads: payload.track_payloads,
                cpms: payload.cpms,
            }
        })
        .collect();
    (rows, frame_rows, failures)
}

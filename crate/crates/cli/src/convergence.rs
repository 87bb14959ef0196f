//! Relative GOSPA of SO as a function of the number of sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use t2ta::sim::gen_mc_frame;
use t2ta::Error;

use crate::algorithms::{run_algorithm, AlgorithmKind};
use crate::mc::{McSpec, SAMPLER_STREAM};
use crate::scoring::{score, MeanStderr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scenario: String,
    pub p_d: f64,
    pub sigma: f64,
    pub sweeps: usize,
    pub algorithm: String,
    pub params: String,
    pub mean_relative_gospa: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// GOSPA relative to the ground-truth association's GOSPA.
fn relative(value: f64, truth: f64) -> f64 {
    if truth > 0.0 {
        value / truth
    } else if value == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// For each trial a single SO run of `max(sweep_grid)` sweeps is made; the
/// value at `N` is the best hypothesis among its first `N` sweeps. Pairwise
/// baselines do not depend on `N` and are repeated on every grid row.
pub fn run_convergence(spec: &McSpec, sweep_grid: &[usize]) -> Result<Vec<ConvergenceRow>, Error> {
    spec.validate()?;
    if sweep_grid.is_empty() || sweep_grid.contains(&0) {
        return Err(Error::Config(
            "sweep grid must be non-empty and positive".into(),
        ));
    }
    let p_d = *spec.p_ds.first().ok_or(Error::Config(
        "one detection probability is required".into(),
    ))?;
    let max_sweeps = *sweep_grid.iter().max().unwrap_or(&1);
    let baselines: Vec<AlgorithmKind> = spec
        .algorithms
        .iter()
        .copied()
        .filter(|a| a.is_pairwise())
        .collect();
    let mut params_so = spec.clone();
    params_so.sweeps = max_sweeps;

    // per trial: (SO relative per grid point, baseline relatives)
    type TrialResult = Result<(Vec<f64>, Vec<f64>), Error>;
    let per_trial: Vec<TrialResult> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = spec.seed + trial as u64;
            let frame = gen_mc_frame(&spec.scenario.config(spec.sigma, p_d, seed))?;
            let spatial = spec.spatial[0];
            let params = params_so.params(spatial, p_d);
            let truth = score(
                &frame,
                &run_algorithm(AlgorithmKind::GroundTruth, &frame, &params, 0)?.association,
                &spec.gospa,
            )?
            .total;
            let so = run_algorithm(AlgorithmKind::So, &frame, &params, seed ^ SAMPLER_STREAM)?;
            let h = so.hypotheses.expect("SO returns hypotheses");
            let n_tracks = frame.tracks.len();
            let so_rel = sweep_grid
                .iter()
                .map(|&n| {
                    if n_tracks == 0 {
                        return Ok(1.0);
                    }
                    let (a, _) = h.best_within(n * n_tracks)?;
                    Ok(relative(score(&frame, a, &spec.gospa)?.total, truth))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let base_rel = baselines
                .iter()
                .map(|&b| {
                    let a = run_algorithm(b, &frame, &params, 0)?.association;
                    Ok(relative(score(&frame, &a, &spec.gospa)?.total, truth))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Ok((so_rel, base_rel))
        })
        .collect();
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?;

    let params = spec.params(spec.spatial[0], p_d);
    let row = |sweeps, algo: AlgorithmKind, values: Vec<f64>| {
        let m = MeanStderr::of(&values);
        ConvergenceRow {
            scenario: spec.scenario.name().into(),
            p_d,
            sigma: spec.sigma,
            sweeps,
            algorithm: algo.name().into(),
            params: if algo.is_so() {
                format!("dg={}", spec.gate)
            } else {
                params.describe(algo)
            },
            mean_relative_gospa: m.mean,
            stderr: m.stderr,
            trials: m.n,
        }
    };
    let mut rows = Vec::new();
    for (gi, &n) in sweep_grid.iter().enumerate() {
        rows.push(row(
            n,
            AlgorithmKind::GroundTruth,
            vec![1.0; per_trial.len()],
        ));
        rows.push(row(
            n,
            AlgorithmKind::So,
            per_trial.iter().map(|t| t.0[gi]).collect(),
        ));
        for (bi, &b) in baselines.iter().enumerate() {
            rows.push(row(n, b, per_trial.iter().map(|t| t.1[bi]).collect()));
        }
    }
    Ok(rows)
}

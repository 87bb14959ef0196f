use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use t2ta::evaluation::GospaParams;
use t2ta::frame::{read_frames, write_frames};
use t2ta::likelihood::SpatialKind;
use t2ta::sim::{CommMode, IntersectionParams, WorldScript};
use t2ta::ScenarioFrame;
use t2ta_cli::output::{sibling, write_csv, write_sidecar};
use t2ta_cli::*;

#[derive(Parser)]
#[command(
    name = "t2ta",
    version,
    about = "Track-to-track association experiments"
)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "T2TA_WORKERS", global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Monte Carlo sweep over detection probabilities.
    Mc(McArgs),
    /// Collective perception scenario runs.
    Cp(CpArgs),
    /// Relative GOSPA of SO against the number of sweeps.
    Converge(ConvergeArgs),
    /// Compare likelihood kinds across algorithms.
    Ablate(AblateArgs),
    /// Agreement of SO and greedy with the brute-force optimum.
    OracleCheck(OracleArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Output CSV; a JSON sidecar is written next to it.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// GOSPA cutoff distance.
    #[arg(long, default_value_t = 10.0)]
    gospa_c: f64,
    /// GOSPA exponent.
    #[arg(long, default_value_t = 1.0)]
    gospa_p: f64,
}

impl Common {
    fn gospa(&self) -> anyhow::Result<GospaParams> {
        Ok(GospaParams::new(self.gospa_c, self.gospa_p)?)
    }
}

#[derive(Args, Clone)]
struct McGrid {
    /// small (30 m, 8 objects, 5 sensors) or big (50 m, 20 objects, 12 sensors).
    #[arg(long, default_value = "small")]
    scenario: McScenario,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(
        long = "p-d",
        value_delimiter = ',',
        default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
    )]
    p_d: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// SO sweeps; 100 (small) or 200 (big) by default.
    #[arg(long)]
    sweeps: Option<usize>,
    /// SO gating distance; 6 sigma by default.
    #[arg(long)]
    gate: Option<f64>,
    /// Pairwise threshold d_t for likelihood costs.
    #[arg(long, default_value_t = 15.0)]
    threshold: f64,
    /// Pairwise threshold d_t for the Euclidean cost.
    #[arg(long, default_value_t = 10.0)]
    euclidean_threshold: f64,
    /// Hypotheses in the SO top-k band; 5 (small) or 10 (big) by default.
    #[arg(long)]
    top_k: Option<usize>,
    /// Largest scene the brute-force oracle is run on.
    #[arg(long, default_value_t = t2ta::baselines::DEFAULT_BRUTE_FORCE_CAP)]
    oracle_cap: usize,
    /// Score frames from a JSON-lines file instead of generating them.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Write the scored frames as JSON lines.
    #[arg(long)]
    dump_frames: Option<PathBuf>,
}

impl McGrid {
    fn spec(&self, common: &Common) -> anyhow::Result<McSpec> {
        let mut spec = McSpec::new(
            self.scenario,
            self.sigma,
            self.p_d.clone(),
            self.trials,
            common.seed,
        );
        if let Some(n) = self.sweeps {
            spec.sweeps = n;
        }
        if let Some(g) = self.gate {
            spec.gate = g;
        }
        if let Some(k) = self.top_k {
            spec.top_k = k;
        }
        spec.threshold = self.threshold;
        spec.euclidean_threshold = self.euclidean_threshold;
        spec.oracle_cap = self.oracle_cap;
        spec.gospa = common.gospa()?;
        Ok(spec)
    }

    fn source(&self) -> anyhow::Result<FrameSource> {
        Ok(match &self.frames {
            Some(p) => FrameSource::Frames(load_frames(p)?),
            None => FrameSource::Generate,
        })
    }
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: McGrid,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "so,greedy_merge,greedy_no_merge,sensorwise,oracle"
    )]
    algorithms: Vec<AlgorithmKind>,
    #[arg(long, default_value = "proposed")]
    likelihood: SpatialKind,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: McGrid,
    /// Algorithms; every listed algorithm must accept every listed kind.
    /// Without this flag the full valid grid is used.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<AlgorithmKind>>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "proposed,generalized,euclidean"
    )]
    kinds: Vec<SpatialKind>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "big")]
    scenario: McScenario,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long = "p-d", default_value_t = 0.8)]
    p_d: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,2,5,10,20,50,100,200,400"
    )]
    grid: Vec<usize>,
    #[arg(long)]
    gate: Option<f64>,
    #[arg(long, default_value_t = 15.0)]
    threshold: f64,
}

#[derive(Args)]
struct CpArgs {
    #[command(flatten)]
    common: Common,
    /// World script (TOML); the built-in intersection otherwise.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Write the built-in intersection script and exit.
    #[arg(long)]
    dump_script: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "full,etsi")]
    modes: Vec<CommMode>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
    mpr: Vec<f64>,
    /// Per-CPM loss probability (1 - PDR).
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    #[arg(long, default_value_t = 0.0)]
    latency: f64,
    #[arg(long, default_value_t = 50)]
    sweeps: usize,
    #[arg(long, default_value_t = 15.0)]
    gate: f64,
    #[arg(long, default_value_t = 20.0)]
    threshold: f64,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "so_ds,so_c,greedy_merge,greedy_no_merge,sensorwise"
    )]
    algorithms: Vec<AlgorithmKind>,
    #[arg(long, default_value_t = 60)]
    n_vehicles: usize,
    #[arg(long, default_value_t = 30)]
    n_pedestrians: usize,
    /// Seed of the built-in intersection layout.
    #[arg(long, default_value_t = 1)]
    world_seed: u64,
    #[arg(long, default_value_t = 15.0)]
    eval_start: f64,
    #[arg(long, default_value_t = 45.0)]
    eval_end: f64,
    /// Score frames from a JSON-lines file (grouped under the first mode and MPR).
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Write the simulated frames as JSON lines (one file per mode and MPR).
    #[arg(long)]
    dump_frames: Option<PathBuf>,
    /// Also write per-frame rows to this CSV.
    #[arg(long)]
    per_frame: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 500)]
    sweeps: usize,
}

fn load_frames(path: &Path) -> anyhow::Result<Vec<ScenarioFrame>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_frames(BufReader::new(f))?)
}

fn dump_frames(path: &Path, frames: &[ScenarioFrame]) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_frames(BufWriter::new(f), frames)?;
    Ok(())
}

fn announce<C: serde::Serialize>(verb: &str, config: &C) -> anyhow::Result<()> {
    eprintln!("t2ta {verb}: {}", serde_json::to_string(config)?);
    Ok(())
}

fn report(failures: &[Failure]) -> anyhow::Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    for f in failures {
        eprintln!(
            "failed: scenario={} seed={} algorithm={}: {}",
            f.scenario, f.seed, f.algorithm, f.error
        );
    }
    bail!("{} run(s) failed", failures.len())
}

fn finish_mc(
    verb: &str,
    common: &Common,
    grid: &McGrid,
    spec: &McSpec,
    out: McOutput,
    start: Instant,
) -> anyhow::Result<()> {
    write_csv(&common.out, &out.rows)?;
    let summary = summarize_mc(&out.rows);
    write_csv(&sibling(&common.out, "summary.csv"), &summary)?;
    if let Some(p) = &grid.dump_frames {
        dump_frames(p, &out.frames)?;
    }
    write_sidecar(
        &sibling(&common.out, "json"),
        verb,
        spec,
        start.elapsed(),
        out.rows.len(),
        &out.failures,
        None,
    )?;
    report(&out.failures)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()?;
    }
    let start = Instant::now();
    match cli.verb {
        Verb::Mc(a) => {
            let mut spec = a.grid.spec(&a.common)?;
            spec.algorithms = a.algorithms.clone();
            spec.spatial = vec![a.likelihood];
            spec.validate()?;
            announce("mc", &spec)?;
            let out = run_mc_experiment(&spec, &a.grid.source()?)?;
            finish_mc("mc", &a.common, &a.grid, &spec, out, start)
        }
        Verb::Ablate(a) => {
            let spec = a.grid.spec(&a.common)?;
            let grid = match &a.algorithms {
                Some(algos) => {
                    let pairs: Vec<_> = a
                        .kinds
                        .iter()
                        .flat_map(|&k| algos.iter().map(move |&x| (x, k)))
                        .collect();
                    for (x, k) in &pairs {
                        x.check_spatial(*k)?;
                    }
                    pairs
                }
                None => ablation_grid(
                    &[
                        AlgorithmKind::So,
                        AlgorithmKind::GreedyMerge,
                        AlgorithmKind::GreedyNoMerge,
                        AlgorithmKind::Sensorwise,
                    ],
                    &a.kinds,
                ),
            };
            announce("ablate", &spec)?;
            let out = run_likelihood_ablation(&spec, &grid, &a.grid.source()?)?;
            finish_mc("ablate", &a.common, &a.grid, &spec, out, start)
        }
        Verb::Converge(a) => {
            let mut spec = McSpec::new(a.scenario, a.sigma, vec![a.p_d], a.trials, a.common.seed);
            spec.algorithms = vec![
                AlgorithmKind::So,
                AlgorithmKind::GreedyMerge,
                AlgorithmKind::GreedyNoMerge,
                AlgorithmKind::Sensorwise,
            ];
            if let Some(g) = a.gate {
                spec.gate = g;
            }
            spec.threshold = a.threshold;
            spec.gospa = a.common.gospa()?;
            announce("converge", &spec)?;
            let rows = run_convergence(&spec, &a.grid)?;
            write_csv(&a.common.out, &rows)?;
            write_sidecar(
                &sibling(&a.common.out, "json"),
                "converge",
                &spec,
                start.elapsed(),
                rows.len(),
                &[],
                None,
            )
        }
        Verb::Cp(a) => run_cp(a, start),
        Verb::OracleCheck(a) => {
            let mut spec = OracleSpec::new(a.instances, a.common.seed);
            spec.sweeps = a.sweeps;
            announce("oracle-check", &spec)?;
            let rows = oracle_check(&spec)?;
            let summary = OracleSummary::of(&rows);
            eprintln!(
                "SO optimal in {}/{} instances, greedy (merge) in {}",
                summary.so_optimal, summary.instances, summary.greedy_merge_optimal
            );
            write_csv(&a.common.out, &rows)?;
            let extra = Some(serde_json::to_value(summary)?);
            write_sidecar(
                &sibling(&a.common.out, "json"),
                "oracle-check",
                &spec,
                start.elapsed(),
                rows.len(),
                &[],
                extra,
            )
        }
    }
}

fn run_cp(a: CpArgs, start: Instant) -> anyhow::Result<()> {
    let params = IntersectionParams {
        n_vehicles: a.n_vehicles,
        n_pedestrians: a.n_pedestrians,
        seed: a.world_seed,
        eval_start: a.eval_start,
        eval_end: a.eval_end,
        ..IntersectionParams::default()
    };
    if let Some(p) = &a.dump_script {
        std::fs::write(p, t2ta::sim::intersection_script(&params).to_toml_string()?)?;
        return Ok(());
    }
    let world = match &a.script {
        Some(p) => WorldSource::Script(WorldScript::load(p)?),
        None => WorldSource::Intersection(params),
    };
    let mut spec = CpSpec::new(world, a.modes.clone(), a.mpr.clone(), a.common.seed);
    spec.loss = a.loss;
    spec.latency = a.latency;
    spec.sweeps = a.sweeps;
    spec.gate = a.gate;
    spec.threshold = a.threshold;
    spec.algorithms = a.algorithms.clone();
    spec.gospa = a.common.gospa()?;
    spec.validate()?;
    announce("cp", &spec)?;

    let out = match &a.frames {
        Some(p) => score_cp_frames(&spec, spec.modes[0], spec.mprs[0], &load_frames(p)?),
        None => run_cp_experiment(&spec)?,
    };
    write_csv(&a.common.out, &out.rows)?;
    if let Some(p) = &a.per_frame {
        write_csv(p, &out.frame_rows)?;
    }
    if let Some(p) = &a.dump_frames {
        for (mode, mpr, frames, _) in &out.runs {
            dump_frames(
                &sibling(p, &format!("{}_mpr{mpr}.jsonl", mode.name())),
                frames,
            )?;
        }
    }
    let payloads: Vec<_> = out
        .runs
        .iter()
        .map(|(mode, mpr, _, p)| serde_json::json!({ "mode": mode.name(), "mpr": mpr, "payload": p }))
        .collect();
    write_sidecar(
        &sibling(&a.common.out, "json"),
        "cp",
        &spec,
        start.elapsed(),
        out.rows.len(),
        &out.failures,
        Some(serde_json::Value::Array(payloads)),
    )?;
    report(&out.failures)
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or invalid config,
//! 3 estimator failure. Errors go to stderr as one JSON object.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    estimate_cv, mse_curve, run_cv_sweep, simulate_cv, simulate_track, tracking_replications,
};
use crate::config::{ConfigError, Scenario};
use crate::geom::sample_field;
use crate::observe::write_snapshot_csv;
use crate::rng::{Component, SeedStream};
use crate::sim::{accumulate, observe_all, simulate_truth};
use crate::svm::Method;
use crate::track::write_track_csv;

#[derive(Debug, Parser)]
#[command(
    name = "bintrack",
    version,
    about = "Velocity estimation and tracking from binary range-rate sensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write sign reports, counters and ground truth as CSV.
    Simulate(CommonArgs),
    /// Batch velocity estimate of a constant-velocity run, as JSON.
    EstimateCv(CommonArgs),
    /// Run the online tracker and write the track log.
    Track(CommonArgs),
    /// Monte Carlo sweep, written as an MSE table.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, env = "BT_SEED")]
    seed: Option<u64>,
    /// Output directory (default: the scenario's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// svm2d, svm3d, svm2p or ppr (default: the scenario's estimator.method).
    #[arg(long)]
    estimator: Option<Method>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Replications per sweep value.
    #[arg(long)]
    reps: Option<usize>,
}

enum Failure {
    Io(io::Error),
    Config(ConfigError),
    Estimator(crate::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn report(&self) -> (i32, serde_json::Value) {
        match self {
            Failure::Io(e) => (1, json!({"error": "io", "message": e.to_string()})),
            Failure::Config(e) => (
                2,
                json!({"error": "invalid_config", "field": e.field, "message": e.message}),
            ),
            Failure::Estimator(e) => (
                3,
                json!({"error": "estimator_failure", "message": e.to_string()}),
            ),
        }
    }
}

struct Run {
    scenario: Scenario,
    seed: u64,
    out: PathBuf,
    method: Method,
}

impl Run {
    fn load(args: &CommonArgs) -> Result<Self, Failure> {
        let text = fs::read_to_string(&args.config).map_err(|e| {
            Failure::Config(ConfigError {
                field: String::new(),
                message: format!("{}: {e}", args.config.display()),
            })
        })?;
        let scenario = Scenario::parse(&text).map_err(Failure::Config)?;
        let seed = args.seed.unwrap_or(scenario.config.seed);
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&scenario.config.output.dir));
        let method = args.estimator.unwrap_or(scenario.config.estimator.method);
        Ok(Self {
            scenario,
            seed,
            out,
            method,
        })
    }

    fn comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.scenario.hash, self.seed)
    }

    /// Writes `body` under the output directory, prefixed by the comment line.
    fn write(&self, name: &str, body: &[u8]) -> Result<(), Failure> {
        fs::create_dir_all(&self.out)?;
        let mut data = self.comment().into_bytes();
        data.extend_from_slice(body);
        write_atomic(&self.out.join(name), &data)?;
        Ok(())
    }
}

fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, data)?;
    fs::rename(tmp, path)
}

fn simulate(args: &CommonArgs) -> Result<(), Failure> {
    let run = Run::load(args)?;
    let s = &run.scenario;
    let stream = SeedStream::new(run.seed);
    let n = s.config.field.n;
    let field = sample_field(n, s.bounds, s.config.field.seed.unwrap_or(run.seed))
        .map_err(Failure::Estimator)?;
    let obs = &s.config.observation;
    let truth = simulate_truth(
        &s.model,
        obs.period,
        s.samples,
        &mut stream.rng(Component::Walk),
    )
    .map_err(Failure::Estimator)?;
    let snaps = observe_all(
        &field,
        &truth,
        obs.keep_probability,
        &mut stream.rng(Component::Flip),
    )
    .map_err(Failure::Estimator)?;
    let counters = accumulate(n, &snaps).map_err(Failure::Estimator)?;

    let mut signs = b"time,sensor_index,x,y,sign\n".to_vec();
    for snap in &snaps {
        write_snapshot_csv(&mut signs, &field, snap)?;
    }
    let mut counts = b"sensor_index,x,y,count\n".to_vec();
    for (i, (p, c)) in field.sensors().iter().zip(counters.counts()).enumerate() {
        writeln!(counts, "{i},{},{},{c}", p.x, p.y)?;
    }
    let mut tr = b"t,x,y,vx,vy\n".to_vec();
    for t in &truth {
        writeln!(
            tr,
            "{},{},{},{},{}",
            t.time, t.position.x, t.position.y, t.velocity.x, t.velocity.y
        )?;
    }
    run.write("signs.csv", &signs)?;
    run.write("counters.csv", &counts)?;
    run.write("truth.csv", &tr)?;
    Ok(())
}

#[derive(Serialize)]
struct EstimateRecord {
    method: Method,
    direction: [f64; 2],
    heading_deg: f64,
    speed: f64,
    velocity: [f64; 2],
    flags: crate::analysis::EstimateFlags,
    truth_velocity: [f64; 2],
    truth_speed: f64,
    n_sensors: usize,
    samples: usize,
    period: f64,
    seed: u64,
    config_hash: String,
}

fn estimate(args: &CommonArgs) -> Result<(), Failure> {
    let run = Run::load(args)?;
    let s = &run.scenario;
    let exp = s.cv_experiment(run.method);
    let sim = simulate_cv(&exp, s.config.field.n, SeedStream::new(run.seed))
        .map_err(Failure::Estimator)?;
    let (est, flags) = estimate_cv(
        &sim.field,
        &sim.snapshots,
        &sim.counters,
        exp.period,
        &exp.estimator,
    )
    .map_err(Failure::Estimator)?;
    let v = est.velocity();
    let truth = sim.truth[0].velocity;
    let record = EstimateRecord {
        method: est.method,
        direction: [est.direction.x, est.direction.y],
        heading_deg: est.direction.angle().to_degrees(),
        speed: est.speed,
        velocity: [v.x, v.y],
        flags,
        truth_velocity: [truth.x, truth.y],
        truth_speed: truth.norm(),
        n_sensors: sim.field.len(),
        samples: sim.truth.len(),
        period: exp.period,
        seed: run.seed,
        config_hash: s.hash.clone(),
    };
    let mut text = serde_json::to_string_pretty(&record).map_err(io::Error::from)?;
    text.push('\n');
    fs::create_dir_all(&run.out)?;
    write_atomic(&run.out.join("estimate.json"), text.as_bytes())?;
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn track(args: &CommonArgs) -> Result<(), Failure> {
    let run = Run::load(args)?;
    let exp = run.scenario.track_experiment();
    let result = simulate_track(&exp, SeedStream::new(run.seed)).map_err(Failure::Estimator)?;
    let mut body = Vec::new();
    write_track_csv(&mut body, &result, false)?;
    run.write("track.csv", &body)
}

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let run = Run::load(&args.common)?;
    let s = &run.scenario;
    let reps = args.reps.unwrap_or(s.config.bench.reps);
    if reps == 0 {
        return Err(Failure::Config(ConfigError {
            field: "reps".into(),
            message: "must be at least 1".into(),
        }));
    }
    let mut body =
        b"sweep_value,mse_position,mse_velocity,mse_direction,reps_ok,reps_failed\n".to_vec();
    if s.is_tracking() {
        let exp = s.track_experiment();
        let runs = tracking_replications(&exp, reps, run.seed).map_err(Failure::Estimator)?;
        let curve = mse_curve(&runs, exp.period, run.seed).map_err(Failure::Estimator)?;
        for k in 0..curve.times.len() {
            writeln!(
                body,
                "{},{},{},{},{},{}",
                curve.times[k],
                curve.mse_position[k],
                curve.mse_velocity[k],
                curve.mse_direction[k],
                curve.reps_ok,
                curve.reps_failed
            )?;
        }
    } else {
        let counts = if s.config.bench.sensor_counts.is_empty() {
            vec![s.config.field.n]
        } else {
            s.config.bench.sensor_counts.clone()
        };
        let exp = s.cv_experiment(run.method);
        let sweep = run_cv_sweep(&exp, &counts, reps, run.seed).map_err(Failure::Estimator)?;
        for p in &sweep {
            writeln!(
                body,
                "{},,{},{},{},{}",
                p.sweep_value,
                fmt_opt(p.mse_speed()),
                fmt_opt(p.mse_direction()),
                p.reps_ok(),
                p.reps_failed
            )?;
        }
    }
    run.write("mse.csv", &body)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = json!({"error": "usage", "message": e.to_string().trim()});
            eprintln!("{msg}");
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::EstimateCv(a) => estimate(a),
        Command::Track(a) => track(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let (code, msg) = f.report();
            eprintln!("{msg}");
            code
        }
    }
}

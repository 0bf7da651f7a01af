//! Indistinguishability checks and the Monte Carlo MSE harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{sample_field, Rect, SensorField, TargetState, TrajectoryModel, Vec2};
use crate::observe::{snapshot, CounterField, SignReport};
use crate::ppr::{angular_error, fit_direction, fit_speed, Kernel, KernelConfig, DEFAULT_GRID};
use crate::rng::{Component, SeedStream};
use crate::sim::{accumulate, observe_all, simulate_truth};
use crate::svm::{
    labeled_snapshot, snapshot_direction, stairwise_plane_svm, two_period_velocity, Margin, Method,
    VelocityEstimate,
};
use crate::track::{run_tracker, TrackRun, TrackerConfig};

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndistinguishabilityReport {
    pub indistinguishable: bool,
    pub max_violation: f64,
    /// Worst normalized cross product of the two velocities.
    pub collinearity: f64,
    /// Worst `max(0, -cos)` between the velocities (1 when either is zero
    /// and the other is not).
    pub positivity: f64,
    /// Worst `|<x - y, v_x / |v_x|>|`, relative to the position scale.
    pub orthogonality: f64,
}

fn condition_violations(a: &TargetState, b: &TargetState) -> (f64, f64, f64) {
    let (va, vb) = (a.velocity, b.velocity);
    let (na, nb) = (va.norm(), vb.norm());
    let scale = 1f64.max(a.position.norm()).max(b.position.norm());
    if na == 0.0 || nb == 0.0 {
        let mismatch = if na == nb { 0.0 } else { 1.0 };
        return (mismatch, mismatch, 0.0);
    }
    let collinearity = va.cross(vb).abs() / (na * nb);
    let positivity = (-va.dot(vb) / (na * nb)).max(0.0);
    let positivity = if va.dot(vb) > 0.0 {
        positivity
    } else {
        positivity.max(1.0)
    };
    let orthogonality = (a.position - b.position).dot(va).abs() / (na * scale);
    (collinearity, positivity, orthogonality)
}

/// Checks `dy = lambda dx` with `lambda > 0` and `<x - y, dx> = 0` at every
/// grid time.
pub fn indistinguishable(
    a: &TrajectoryModel,
    b: &TrajectoryModel,
    times: &[f64],
    tol: f64,
) -> Result<IndistinguishabilityReport> {
    if a.is_stochastic() || b.is_stochastic() {
        return Err(Error::StochasticModel);
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("time grid is empty".into()));
    }
    let mut report = IndistinguishabilityReport {
        indistinguishable: false,
        max_violation: 0.0,
        collinearity: 0.0,
        positivity: 0.0,
        orthogonality: 0.0,
    };
    for &t in times {
        let (c, p, o) = condition_violations(&a.state_at(t)?, &b.state_at(t)?);
        report.collinearity = report.collinearity.max(c);
        report.positivity = report.positivity.max(p);
        report.orthogonality = report.orthogonality.max(o);
    }
    report.max_violation = report
        .collinearity
        .max(report.positivity)
        .max(report.orthogonality);
    report.indistinguishable = report.max_violation <= tol;
    Ok(report)
}

/// True iff every sensor reports the same sign for both trajectories at
/// every grid time.
pub fn sign_sequence_oracle(
    a: &TrajectoryModel,
    b: &TrajectoryModel,
    field: &SensorField,
    times: &[f64],
) -> Result<bool> {
    if a.is_stochastic() || b.is_stochastic() {
        return Err(Error::StochasticModel);
    }
    for &t in times {
        let sa = snapshot(field, &a.state_at(t)?)?;
        let sb = snapshot(field, &b.state_at(t)?)?;
        if sa.iter().zip(&sb).any(|(x, y)| x.sign != y.sign) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub margin: Margin,
    pub kernel: Kernel,
    /// `None`: field diagonal over `sqrt(N)`.
    pub bandwidth: Option<f64>,
    pub grid: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Ppr,
            margin: Margin::default(),
            kernel: Kernel::Gaussian,
            bandwidth: None,
            grid: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateFlags {
    pub soft_margin_fallback: bool,
    pub unconverged: bool,
    pub unidentifiable: bool,
    pub max_slack: f64,
}

/// Batch velocity estimate from a full run of snapshots.
///
/// `svm2p` pairs the first and last snapshots; `svm2d` takes its heading
/// from the middle snapshot alone and its speed from the same pair.
pub fn estimate_cv(
    field: &SensorField,
    snapshots: &[Vec<SignReport>],
    counters: &CounterField,
    period: f64,
    cfg: &EstimatorConfig,
) -> Result<(VelocityEstimate, EstimateFlags)> {
    let mut flags = EstimateFlags::default();
    let two_period = |flags: &mut EstimateFlags| -> Result<VelocityEstimate> {
        if snapshots.len() < 2 {
            return Err(Error::InvalidInput("two snapshots are required".into()));
        }
        let first = labeled_snapshot(field, &snapshots[0]);
        let last = labeled_snapshot(field, &snapshots[snapshots.len() - 1]);
        let dt = (snapshots.len() - 1) as f64 * period;
        let (_, est, f) = two_period_velocity(&first, &last, dt, cfg.margin)?;
        flags.soft_margin_fallback = f.soft_margin_fallback;
        flags.unconverged |= f.unconverged;
        flags.max_slack = flags.max_slack.max(f.max_slack);
        Ok(est)
    };
    let estimate = match cfg.method {
        Method::Svm2Period => two_period(&mut flags)?,
        Method::Svm2d => {
            let mid = labeled_snapshot(field, &snapshots[snapshots.len() / 2]);
            let (direction, f) = snapshot_direction(&mid, cfg.margin)?;
            flags.unconverged = f.unconverged;
            flags.max_slack = f.max_slack;
            let speed = two_period(&mut flags)?.speed;
            VelocityEstimate {
                direction,
                speed,
                method: Method::Svm2d,
            }
        }
        Method::Svm3d => {
            let (est, f) = stairwise_plane_svm(field, counters, period, cfg.margin)?;
            flags.unconverged = f.unconverged;
            flags.max_slack = f.max_slack;
            est
        }
        Method::Ppr => {
            let kcfg = match cfg.bandwidth {
                Some(h) => KernelConfig::new(h, cfg.kernel)?,
                None => KernelConfig {
                    kernel: cfg.kernel,
                    ..KernelConfig::default_for(field)
                },
            };
            let dir = fit_direction(field, counters, &kcfg, cfg.grid)?;
            let speed = fit_speed(field, counters, dir.direction, period)?;
            flags.unidentifiable = speed.unidentifiable;
            VelocityEstimate {
                direction: dir.direction,
                speed: speed.speed,
                method: Method::Ppr,
            }
        }
    };
    Ok((estimate, flags))
}

/// Constant-velocity batch experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CvExperiment {
    pub bounds: Rect,
    pub model: TrajectoryModel,
    pub period: f64,
    pub samples: usize,
    pub keep_probability: f64,
    pub estimator: EstimatorConfig,
    /// Fixed sensor layout seed; `None` draws a fresh layout per replication.
    pub field_seed: Option<u64>,
}

/// Everything one replication produces.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRun {
    pub field: SensorField,
    pub truth: Vec<TargetState>,
    pub snapshots: Vec<Vec<SignReport>>,
    pub counters: CounterField,
}

pub fn simulate_cv(exp: &CvExperiment, n_sensors: usize, stream: SeedStream) -> Result<CvRun> {
    let field = match exp.field_seed {
        Some(s) => sample_field(n_sensors, exp.bounds, s)?,
        None => sample_field(n_sensors, exp.bounds, stream.seed())?,
    };
    let truth = simulate_truth(
        &exp.model,
        exp.period,
        exp.samples,
        &mut stream.rng(Component::Walk),
    )?;
    let snapshots = observe_all(
        &field,
        &truth,
        exp.keep_probability,
        &mut stream.rng(Component::Flip),
    )?;
    let counters = accumulate(field.len(), &snapshots)?;
    Ok(CvRun {
        field,
        truth,
        snapshots,
        counters,
    })
}

/// Per sensor count: errors of the successful replications in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    /// Radians, folded to `[0, pi]`.
    pub direction_errors: Vec<f64>,
    /// m/s, signed.
    pub speed_errors: Vec<f64>,
    pub reps_failed: usize,
}

fn mean_sq(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SweepPoint {
    pub fn reps_ok(&self) -> usize {
        self.direction_errors.len()
    }

    pub fn mse_direction(&self) -> f64 {
        mean_sq(&self.direction_errors)
    }

    pub fn mse_speed(&self) -> f64 {
        mean_sq(&self.speed_errors)
    }

    pub fn median_direction_error(&self) -> f64 {
        median(&self.direction_errors)
    }

    pub fn median_abs_speed_error(&self) -> f64 {
        let abs: Vec<f64> = self.speed_errors.iter().map(|e| e.abs()).collect();
        median(&abs)
    }
}

/// Sweep over sensor counts; replication `r` uses the same derived seed for
/// every count. Estimator failures are counted and excluded.
pub fn run_cv_sweep(
    exp: &CvExperiment,
    sensor_counts: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let base = SeedStream::new(seed);
    sensor_counts
        .iter()
        .map(|&n| {
            let mut point = SweepPoint {
                sweep_value: n as f64,
                direction_errors: Vec::with_capacity(reps),
                speed_errors: Vec::with_capacity(reps),
                reps_failed: 0,
            };
            for r in 0..reps {
                let run = simulate_cv(exp, n, base.replication(r as u64))?;
                let truth_v = run.truth[0].velocity;
                match estimate_cv(
                    &run.field,
                    &run.snapshots,
                    &run.counters,
                    exp.period,
                    &exp.estimator,
                ) {
                    Ok((est, _)) => {
                        point
                            .direction_errors
                            .push(angular_error(est.direction, truth_v));
                        point.speed_errors.push(est.speed - truth_v.norm());
                    }
                    Err(_) => point.reps_failed += 1,
                }
            }
            Ok(point)
        })
        .collect()
}

/// Online tracking experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackExperiment {
    pub n_sensors: usize,
    pub bounds: Rect,
    pub model: TrajectoryModel,
    pub period: f64,
    pub samples: usize,
    pub keep_probability: f64,
    pub tracker: TrackerConfig,
    pub field_seed: Option<u64>,
}

pub fn simulate_track(exp: &TrackExperiment, stream: SeedStream) -> Result<TrackRun> {
    let field = match exp.field_seed {
        Some(s) => sample_field(exp.n_sensors, exp.bounds, s)?,
        None => sample_field(exp.n_sensors, exp.bounds, stream.seed())?,
    };
    let truth = simulate_truth(
        &exp.model,
        exp.period,
        exp.samples,
        &mut stream.rng(Component::Walk),
    )?;
    let snapshots = observe_all(
        &field,
        &truth,
        exp.keep_probability,
        &mut stream.rng(Component::Flip),
    )?;
    run_tracker(
        &field,
        truth,
        &snapshots,
        exp.tracker,
        &mut stream.rng(Component::Init),
    )
}

/// Per-step estimated velocity: heading times the latest `lambda` per
/// period (the window mean when `lambda` was skipped, zero before any).
pub fn velocity_estimates(run: &TrackRun, period: f64) -> Vec<Vec2> {
    let mut last = 0.0;
    run.state
        .history
        .iter()
        .enumerate()
        .map(|(k, r)| {
            if k > 0 && !r.flags.lambda_skipped {
                last = r.lambda;
            }
            r.direction * (last / period)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub times: Vec<f64>,
    /// m^2
    pub mse_position: Vec<f64>,
    /// (m/s)^2
    pub mse_velocity: Vec<f64>,
    /// rad^2
    pub mse_direction: Vec<f64>,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub seed: u64,
}

/// Per-step MSE across replications (failed ones excluded).
pub fn mse_curve(runs: &[Result<TrackRun>], period: f64, seed: u64) -> Result<MseCurve> {
    let ok: Vec<&TrackRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let first = ok
        .first()
        .ok_or_else(|| Error::InvalidInput("every replication failed".into()))?;
    let steps = first.truth.len();
    let mut curve = MseCurve {
        times: first.truth.iter().map(|t| t.time).collect(),
        mse_position: vec![0.0; steps],
        mse_velocity: vec![0.0; steps],
        mse_direction: vec![0.0; steps],
        reps_ok: ok.len(),
        reps_failed: runs.len() - ok.len(),
        seed,
    };
    for run in &ok {
        let vel = velocity_estimates(run, period);
        for (k, (truth, rec)) in run.truth.iter().zip(&run.state.history).enumerate() {
            curve.mse_position[k] += (rec.position - truth.position).norm_sq();
            curve.mse_velocity[k] += (vel[k] - truth.velocity).norm_sq();
            curve.mse_direction[k] += angular_error(rec.direction, truth.velocity).powi(2);
        }
    }
    let n = ok.len() as f64;
    for v in curve
        .mse_position
        .iter_mut()
        .chain(&mut curve.mse_velocity)
        .chain(&mut curve.mse_direction)
    {
        *v /= n;
    }
    Ok(curve)
}

/// Runs `reps` seeded replications in index order.
pub fn tracking_replications(
    exp: &TrackExperiment,
    reps: usize,
    seed: u64,
) -> Result<Vec<Result<TrackRun>>> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let base = SeedStream::new(seed);
    Ok((0..reps)
        .map(|r| simulate_track(exp, base.replication(r as u64)))
        .collect())
}

pub fn run_tracking_mc(exp: &TrackExperiment, reps: usize, seed: u64) -> Result<MseCurve> {
    let runs = tracking_replications(exp, reps, seed)?;
    mse_curve(&runs, exp.period, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Leg;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn grid() -> Vec<f64> {
        (0..=20).map(|k| k as f64 * 0.5).collect()
    }

    #[test]
    fn perpendicular_translation_is_indistinguishable() {
        let vel = v(1., 2.);
        let a = TrajectoryModel::constant_velocity(v(10., 10.), vel).unwrap();
        let b = TrajectoryModel::constant_velocity(v(10., 10.) + vel.perp() * 3.0, vel).unwrap();
        let r = indistinguishable(&a, &b, &grid(), DEFAULT_TOL).unwrap();
        assert!(r.indistinguishable, "{r:?}");
        let same = indistinguishable(&a, &a, &grid(), DEFAULT_TOL).unwrap();
        assert!(same.indistinguishable);
        assert_eq!(same.max_violation, 0.0);
    }

    #[test]
    fn doubled_speed_is_distinguishable_by_both_checks() {
        let a = TrajectoryModel::constant_velocity(v(20., 20.), v(1., 2.)).unwrap();
        let b = TrajectoryModel::constant_velocity(v(20., 20.), v(2., 4.)).unwrap();
        assert!(
            !indistinguishable(&a, &b, &grid(), DEFAULT_TOL)
                .unwrap()
                .indistinguishable
        );
        let field = sample_field(500, Rect::square(100.0).unwrap(), 9).unwrap();
        assert!(!sign_sequence_oracle(&a, &b, &field, &grid()).unwrap());
    }

    #[test]
    fn maneuver_time_mismatch_is_distinguishable() {
        let legs = |t1: f64| {
            vec![
                Leg {
                    velocity: v(1., 0.),
                    end_time: t1,
                },
                Leg {
                    velocity: v(0., 1.),
                    end_time: 20.0,
                },
            ]
        };
        let a = TrajectoryModel::multi_leg(v(40., 50.), legs(5.0)).unwrap();
        let b = TrajectoryModel::multi_leg(v(40., 55.), legs(6.0)).unwrap();
        let times = grid();
        assert!(
            !indistinguishable(&a, &b, &times, DEFAULT_TOL)
                .unwrap()
                .indistinguishable
        );
        let field = sample_field(500, Rect::square(100.0).unwrap(), 4).unwrap();
        assert!(!sign_sequence_oracle(&a, &b, &field, &times).unwrap());
    }

    #[test]
    fn random_walk_is_rejected() {
        let w = crate::geom::RandomWalk::constant_velocity(v(0., 0.), v(1., 0.), 0.1, 0.1, 1.0)
            .unwrap();
        let a = TrajectoryModel::GaussianRandomWalk(w);
        let b = TrajectoryModel::constant_velocity(v(0., 0.), v(1., 0.)).unwrap();
        assert_eq!(
            indistinguishable(&a, &b, &[0.0], 1e-6).unwrap_err(),
            Error::StochasticModel
        );
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}

//! Online tracker.
//!
//! Each period the heading is re-estimated from the snapshot by a soft-margin
//! SVM. The position is then moved along the previous heading by `lambda` so
//! that it projects onto the middle of the feasible slab, and, when `lambda`
//! departs from its recent mean, moved across the current heading by `theta`
//! so that the along-track displacement matches that mean. Every `theta` is
//! fed back to all earlier positions (retrodiction).

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{SensorField, TargetState, Vec2};
use crate::observe::{feasible_slab, FeasibleSlab, Sign, SignReport};
use crate::svm::{labeled_snapshot, snapshot_direction, Margin};

pub const EPS_PAR: f64 = 1e-3;
pub const DEFAULT_WINDOW: usize = 5;
pub const SIGMA_MIN: f64 = 0.1;
pub const MAX_INIT_DRAWS: usize = 100_000;

/// Which point of the slab the position is projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VsMode {
    #[default]
    Midpoint,
    Lower,
    Upper,
}

impl VsMode {
    /// Falls back to the finite bound when the slab is open on one side.
    pub fn target(self, slab: &FeasibleSlab) -> Option<f64> {
        let v = match self {
            VsMode::Midpoint if slab.is_unbounded() => return None,
            VsMode::Midpoint => slab.midpoint(),
            VsMode::Lower => slab.lower,
            VsMode::Upper => slab.upper,
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub window: usize,
    pub sigma_min: f64,
    pub vs_mode: VsMode,
    pub margin: Margin,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            sigma_min: SIGMA_MIN,
            vs_mode: VsMode::Midpoint,
            margin: Margin::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidInput(format!(
                "window must be >= 2, got {}",
                self.window
            )));
        }
        if !(self.sigma_min >= 0.0 && self.sigma_min.is_finite()) {
            return Err(Error::InvalidInput("sigma_min must be non-negative".into()));
        }
        Ok(())
    }
}

/// Last `k` values of `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityWindow {
    k: usize,
    values: VecDeque<f64>,
}

impl VelocityWindow {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("window must be >= 2, got {k}")));
        }
        Ok(Self {
            k,
            values: VecDeque::with_capacity(k),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn push(&mut self, lambda: f64) {
        if self.values.len() == self.k {
            self.values.pop_front();
        }
        self.values.push_back(lambda);
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.k
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
    }

    /// Population standard deviation.
    pub fn std(&self) -> Option<f64> {
        let m = self.mean()?;
        let var =
            self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64;
        Some(var.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepFlags {
    /// Initial position drawn over the whole field.
    pub init_fallback: bool,
    /// One-class snapshot: heading carried over.
    pub direction_kept: bool,
    /// Consecutive headings nearly orthogonal, or open slab: no `lambda`.
    pub lambda_skipped: bool,
    /// Window not yet full: no `theta`.
    pub warmup: bool,
    /// SVM did not reach the KKT tolerance.
    pub unconverged: bool,
}

impl StepFlags {
    pub fn any(&self) -> bool {
        self.init_fallback
            || self.direction_kept
            || self.lambda_skipped
            || self.warmup
            || self.unconverged
    }
}

impl fmt::Display for StepFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = [
            (self.init_fallback, "init_fallback"),
            (self.direction_kept, "direction_kept"),
            (self.lambda_skipped, "lambda_skipped"),
            (self.warmup, "warmup"),
            (self.unconverged, "unconverged"),
        ];
        let set: Vec<&str> = names
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        if set.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&set.join("|"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    pub position: Vec2,
    pub direction: Vec2,
    pub lambda: f64,
    pub theta: f64,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub position: Vec2,
    pub direction: Vec2,
    pub speed_history: Vec<f64>,
    pub history: Vec<StepRecord>,
    window: VelocityWindow,
    retro: Vec<Vec2>,
    config: TrackerConfig,
}

impl TrackState {
    pub fn window(&self) -> &VelocityWindow {
        &self.window
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Retrodicted track, maintained incrementally.
    pub fn retrodicted(&self) -> &[Vec2] {
        &self.retro
    }
}

fn has_both_signs(reports: &[SignReport]) -> bool {
    reports.iter().any(|r| r.sign == Sign::Plus) && reports.iter().any(|r| r.sign == Sign::Minus)
}

/// Unit heading from one snapshot, pointing towards the `Plus` sensors.
/// Returns `None` for a one-class snapshot.
pub fn estimate_direction_step(
    field: &SensorField,
    reports: &[SignReport],
    margin: Margin,
) -> Result<Option<(Vec2, bool)>> {
    if !has_both_signs(reports) {
        return Ok(None);
    }
    let points = labeled_snapshot(field, reports);
    let (dir, flags) = snapshot_direction(&points, margin)?;
    Ok(Some((dir, flags.unconverged)))
}

fn sample_in_slab<R: Rng + ?Sized>(
    field: &SensorField,
    slab: &FeasibleSlab,
    rng: &mut R,
) -> Option<Vec2> {
    (0..MAX_INIT_DRAWS)
        .map(|_| field.bounds().sample(rng))
        .find(|p| slab.contains(p.dot(slab.direction)))
}

/// Initial state from the first snapshot: heading from the SVM, position
/// uniform over the slab within the field bounds.
pub fn init_track<R: Rng + ?Sized>(
    field: &SensorField,
    reports: &[SignReport],
    time: f64,
    config: TrackerConfig,
    rng: &mut R,
) -> Result<TrackState> {
    config.validate()?;
    let mut flags = StepFlags::default();
    let (direction, position) = match estimate_direction_step(field, reports, config.margin)? {
        Some((dir, unconverged)) => {
            flags.unconverged = unconverged;
            let slab = feasible_slab(field, reports, dir)?;
            match sample_in_slab(field, &slab, rng) {
                Some(p) => (dir, p),
                None => {
                    flags.init_fallback = true;
                    (dir, field.bounds().sample(rng))
                }
            }
        }
        None => {
            flags.init_fallback = true;
            flags.direction_kept = true;
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            (Vec2::from_angle(angle), field.bounds().sample(rng))
        }
    };
    let record = StepRecord {
        time,
        position,
        direction,
        lambda: 0.0,
        theta: 0.0,
        flags,
    };
    Ok(TrackState {
        position,
        direction,
        speed_history: Vec::new(),
        history: vec![record],
        window: VelocityWindow::new(config.window)?,
        retro: vec![position],
        config,
    })
}

/// Along-track correction. Returns `None` when consecutive headings are
/// within [`EPS_PAR`] of orthogonal.
pub fn lambda_correct(
    previous: Vec2,
    prev_dir: Vec2,
    dir: Vec2,
    vs_moy: f64,
) -> Option<(f64, Vec2)> {
    let c = dir.dot(prev_dir);
    if c.abs() <= EPS_PAR {
        return None;
    }
    let lambda = (vs_moy - dir.dot(previous)) / c;
    Some((lambda, previous + prev_dir * lambda))
}

/// Cross-track correction. `mean` and `sigma` describe the window of
/// previous `lambda` values; `None` means the window is still filling.
pub fn theta_correct(
    corrected: Vec2,
    lambda: f64,
    dir: Vec2,
    prev_dir: Vec2,
    window: Option<(f64, f64)>,
) -> (f64, Vec2) {
    let Some((m, sigma)) = window else {
        return (0.0, corrected);
    };
    let perp = dir.perp();
    let c = perp.dot(prev_dir);
    if (lambda >= m - sigma && lambda <= m + sigma) || c.abs() <= EPS_PAR {
        return (0.0, corrected);
    }
    let theta = (m - lambda) / c;
    (theta, corrected + perp * theta)
}

/// Direct retrodiction: `z_j = x_j + sum_{i > j} theta_i perp(v_i)`.
pub fn retrodict(history: &[StepRecord]) -> Vec<Vec2> {
    let mut out = vec![Vec2::ZERO; history.len()];
    let mut shift = Vec2::ZERO;
    for j in (0..history.len()).rev() {
        out[j] = history[j].position + shift;
        shift += history[j].direction.perp() * history[j].theta;
    }
    out
}

/// One period: heading, `lambda`, window check, `theta`, retrodiction.
pub fn track_step(
    state: &mut TrackState,
    field: &SensorField,
    reports: &[SignReport],
    time: f64,
) -> Result<StepRecord> {
    let mut flags = StepFlags::default();
    let prev_dir = state.direction;
    let previous = state.position;
    let dir = match estimate_direction_step(field, reports, state.config.margin)? {
        Some((d, unconverged)) => {
            flags.unconverged = unconverged;
            d
        }
        None => {
            flags.direction_kept = true;
            prev_dir
        }
    };

    let slab = feasible_slab(field, reports, dir)?;
    let lambda_step = state
        .config
        .vs_mode
        .target(&slab)
        .and_then(|vs| lambda_correct(previous, prev_dir, dir, vs));

    let (lambda, theta, position) = match lambda_step {
        None => {
            flags.lambda_skipped = true;
            (0.0, 0.0, previous)
        }
        Some((lambda, corrected)) => {
            let window = if state.window.is_full() {
                let m = state.window.mean().unwrap_or(lambda);
                let s = state
                    .window
                    .std()
                    .unwrap_or(0.0)
                    .max(state.config.sigma_min);
                Some((m, s))
            } else {
                flags.warmup = true;
                None
            };
            let (theta, fin) = theta_correct(corrected, lambda, dir, prev_dir, window);
            state.window.push(lambda);
            state.speed_history.push(lambda);
            (lambda, theta, fin)
        }
    };

    if theta != 0.0 {
        let shift = dir.perp() * theta;
        for z in &mut state.retro {
            *z += shift;
        }
    }
    state.retro.push(position);
    state.position = position;
    state.direction = dir;
    let record = StepRecord {
        time,
        position,
        direction: dir,
        lambda,
        theta,
        flags,
    };
    state.history.push(record);
    Ok(record)
}

/// Tracker output alongside ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRun {
    pub truth: Vec<TargetState>,
    pub state: TrackState,
}

impl TrackRun {
    pub fn position_errors(&self) -> Vec<f64> {
        self.truth
            .iter()
            .zip(&self.state.history)
            .map(|(t, r)| (r.position - t.position).norm())
            .collect()
    }
}

/// Runs the tracker over a sequence of snapshots.
pub fn run_tracker<R: Rng + ?Sized>(
    field: &SensorField,
    truth: Vec<TargetState>,
    snapshots: &[Vec<SignReport>],
    config: TrackerConfig,
    rng: &mut R,
) -> Result<TrackRun> {
    if snapshots.is_empty() || snapshots.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: snapshots.len(),
        });
    }
    let mut state = init_track(field, &snapshots[0], truth[0].time, config, rng)?;
    for (snap, t) in snapshots.iter().zip(&truth).skip(1) {
        track_step(&mut state, field, snap, t.time)?;
    }
    Ok(TrackRun { truth, state })
}

/// Track log: one row per period.
pub fn write_track_csv<W: Write>(
    out: &mut W,
    run: &TrackRun,
    period_index: bool,
) -> io::Result<()> {
    writeln!(
        out,
        "t,true_x,true_y,est_x,est_y,retro_x,retro_y,lambda,theta,dir_x,dir_y,flags"
    )?;
    let retro = run.state.retrodicted();
    for (k, (truth, rec)) in run.truth.iter().zip(&run.state.history).enumerate() {
        let t = if period_index { k as f64 } else { rec.time };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            t,
            truth.position.x,
            truth.position.y,
            rec.position.x,
            rec.position.y,
            retro[k].x,
            retro[k].y,
            rec.lambda,
            rec.theta,
            rec.direction.x,
            rec.direction.y,
            rec.flags
        )?;
    }
    Ok(())
}

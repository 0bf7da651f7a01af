//! Linear support vector machine in dual form, solved from scratch.
//!
//! The dual `max W(Λ) = -½ ΛᵀDΛ + Λᵀ1` with `D_ij = y_i y_j <x_i, x_j>`,
//! `0 <= Λ <= C` and one equality constraint `Σ_{i∈g} Λ_i y_i = 0` per offset
//! group `g` is maximised by pairwise coordinate ascent: each step picks the
//! maximal-violating pair inside one group (second-order working-set
//! selection) and solves the two-variable subproblem exactly, which keeps the
//! equality constraints satisfied and never decreases `W`.
//!
//! A single group is the ordinary SVM. Two groups give the two-period
//! problem with a shared normal and one offset per snapshot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{SensorField, Vec2};
use crate::observe::{CounterField, Sign, SignReport};

/// Max KKT violation accepted as converged.
pub const EPS_KKT: f64 = 1e-6;
/// Multipliers above this are support vectors.
pub const EPS_SV: f64 = 1e-9;
/// Default soft-margin box bound.
pub const DEFAULT_C: f64 = 10.0;
/// Iteration cap, in sweeps over the data.
pub const MAX_SWEEPS: usize = 10_000;
/// Hard-margin runs whose multiplier sum exceeds this are declared
/// infeasible (the dual is unbounded on non-separable data).
const HARD_MARGIN_DIVERGENCE: f64 = 1e10;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint<const D: usize> {
    pub position: [f64; D],
    pub label: Sign,
}

impl LabeledPoint<2> {
    pub fn planar(p: Vec2, label: Sign) -> Self {
        Self {
            position: [p.x, p.y],
            label,
        }
    }
}

/// Box bound on the multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Margin {
    Hard,
    Soft(f64),
}

impl Margin {
    fn bound(self) -> f64 {
        match self {
            Margin::Hard => f64::INFINITY,
            Margin::Soft(c) => c,
        }
    }
}

impl Default for Margin {
    fn default() -> Self {
        Margin::Soft(DEFAULT_C)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub multipliers: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Hard margin only: the multipliers grew without bound.
    pub diverged: bool,
    pub margin: Margin,
    groups: Vec<usize>,
}

impl DualSolution {
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverOptions {
    /// Record `W` after every pair update (test instrumentation).
    pub trace_objective: bool,
}

fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate<const D: usize>(
    points: &[LabeledPoint<D>],
    groups: &[usize],
    margin: Margin,
) -> Result<usize> {
    if points.len() != groups.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            got: groups.len(),
        });
    }
    if let Margin::Soft(c) = margin {
        if !(c > 0.0) || c.is_nan() {
            return Err(Error::InvalidInput(format!(
                "box bound C must be positive, got {c}"
            )));
        }
    }
    if points
        .iter()
        .any(|p| p.position.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite("labeled point"));
    }
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    for g in 0..n_groups {
        let mut plus = false;
        let mut minus = false;
        for (p, _) in points.iter().zip(groups).filter(|(_, &pg)| pg == g) {
            match p.label {
                Sign::Plus => plus = true,
                Sign::Minus => minus = true,
            }
        }
        if !(plus && minus) {
            return Err(Error::OneClass);
        }
    }
    Ok(n_groups)
}

/// Single-offset dual.
pub fn solve_dual<const D: usize>(
    points: &[LabeledPoint<D>],
    margin: Margin,
) -> Result<DualSolution> {
    solve_dual_grouped(points, &vec![0; points.len()], margin)
}

pub fn solve_dual_grouped<const D: usize>(
    points: &[LabeledPoint<D>],
    groups: &[usize],
    margin: Margin,
) -> Result<DualSolution> {
    solve_dual_traced(points, groups, margin, SolverOptions::default()).map(|(s, _)| s)
}

/// Solver entry point; returns the objective trace when requested.
pub fn solve_dual_traced<const D: usize>(
    points: &[LabeledPoint<D>],
    groups: &[usize],
    margin: Margin,
    opts: SolverOptions,
) -> Result<(DualSolution, Vec<f64>)> {
    let n_groups = validate(points, groups, margin)?;
    let n = points.len();
    let c = margin.bound();
    let y: Vec<f64> = points.iter().map(|p| p.label.as_f64()).collect();
    let x: Vec<[f64; D]> = points.iter().map(|p| p.position).collect();
    let kdiag: Vec<f64> = x.iter().map(|xi| dot(xi, xi)).collect();

    let mut alpha = vec![0.0; n];
    let mut w = [0.0; D];
    // gradient of f = -W: G_i = y_i <w, x_i> - 1
    let mut grad = vec![-1.0; n];
    let mut alpha_sum = 0.0;
    let mut trace = Vec::new();

    let max_iter = MAX_SWEEPS.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = false;
    let mut max_violation = f64::INFINITY;

    // Shrinking: variables stuck at a bound are dropped from the working
    // set and restored (with fresh gradients) before convergence is declared.
    let mut active: Vec<usize> = (0..n).collect();
    let shrink_every = n.clamp(1, 1000);
    let mut since_shrink = 0;
    let mut restored_early = false;

    while iterations < max_iter {
        if since_shrink >= shrink_every {
            since_shrink = 0;
            shrink(&mut active, &alpha, &grad, &y, groups, n_groups, c);
        }
        // working set: best pair over all groups
        let mut best: Option<(usize, usize, f64)> = None;
        max_violation = 0.0;
        for g in 0..n_groups {
            let Some((i, j, viol, gain)) =
                select_pair(&active, &alpha, &grad, &y, &x, &kdiag, groups, g, c)
            else {
                continue;
            };
            max_violation = f64::max(max_violation, viol);
            if viol > EPS_KKT && best.is_none_or(|(_, _, bg)| gain > bg) {
                best = Some((i, j, gain));
            }
        }
        let near = !restored_early && max_violation <= 10.0 * EPS_KKT;
        if near {
            restored_early = true;
        }
        if best.is_none() || (near && active.len() < n) {
            if active.len() < n {
                active = (0..n).collect();
                for t in 0..n {
                    grad[t] = y[t] * dot(&w, &x[t]) - 1.0;
                }
                since_shrink = 0;
                continue;
            }
        }
        let Some((i, j, _)) = best else {
            converged = true;
            break;
        };
        iterations += 1;
        since_shrink += 1;

        let kij = dot(&x[i], &x[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ai, aj) = pair_update(
            alpha[i], alpha[j], y[i], y[j], grad[i], grad[j], kdiag[i], kdiag[j], kij, c,
        );
        alpha[i] = ai;
        alpha[j] = aj;
        let di = (ai - old_i) * y[i];
        let dj = (aj - old_j) * y[j];
        for d in 0..D {
            w[d] += di * x[i][d] + dj * x[j][d];
        }
        for &t in &active {
            grad[t] = y[t] * dot(&w, &x[t]) - 1.0;
        }
        alpha_sum += (ai - old_i) + (aj - old_j);
        if opts.trace_objective {
            trace.push(alpha_sum - 0.5 * dot(&w, &w));
        }
        if margin == Margin::Hard && alpha_sum > HARD_MARGIN_DIVERGENCE {
            diverged = true;
            break;
        }
    }
    if !converged {
        // report the violation over every variable
        for t in 0..n {
            grad[t] = y[t] * dot(&w, &x[t]) - 1.0;
        }
        let all: Vec<usize> = (0..n).collect();
        max_violation = (0..n_groups)
            .filter_map(|g| select_pair(&all, &alpha, &grad, &y, &x, &kdiag, groups, g, c))
            .map(|(_, _, v, _)| v)
            .fold(0.0, f64::max);
    }

    let objective = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
    let support_indices = (0..n).filter(|&i| alpha[i] > EPS_SV).collect();
    Ok((
        DualSolution {
            multipliers: alpha,
            support_indices,
            objective,
            max_violation,
            iterations,
            converged,
            diverged,
            margin,
            groups: groups.to_vec(),
        },
        trace,
    ))
}

/// Drops bounded variables whose gradient keeps them at their bound
/// (the usual SMO shrinking test, per offset group).
fn shrink(
    active: &mut Vec<usize>,
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    groups: &[usize],
    n_groups: usize,
    c: f64,
) {
    let mut up = vec![f64::NEG_INFINITY; n_groups];
    let mut low = vec![f64::NEG_INFINITY; n_groups];
    for &t in active.iter() {
        let g = groups[t];
        if in_up(alpha[t], y[t], c) {
            up[g] = up[g].max(-y[t] * grad[t]);
        }
        if in_low(alpha[t], y[t], c) {
            low[g] = low[g].max(y[t] * grad[t]);
        }
    }
    active.retain(|&t| {
        let g = groups[t];
        let (a, yt, gt) = (alpha[t], y[t], grad[t]);
        let at_upper = c.is_finite() && a >= c;
        let at_lower = a <= 0.0;
        if at_upper {
            if yt > 0.0 {
                -gt <= up[g]
            } else {
                -gt <= low[g]
            }
        } else if at_lower {
            if yt > 0.0 {
                gt <= low[g]
            } else {
                gt <= up[g]
            }
        } else {
            true
        }
    });
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y < 0.0 && a < c) || (y > 0.0 && a > 0.0)
}

/// Second-order working-set selection inside group `g`.
/// Returns `(i, j, violation, predicted gain)`.
#[allow(clippy::too_many_arguments)]
fn select_pair<const D: usize>(
    active: &[usize],
    alpha: &[f64],
    grad: &[f64],
    y: &[f64],
    x: &[[f64; D]],
    kdiag: &[f64],
    groups: &[usize],
    g: usize,
    c: f64,
) -> Option<(usize, usize, f64, f64)> {
    let mut gmax = f64::NEG_INFINITY;
    let mut i_sel = None;
    let mut gmin = f64::INFINITY;
    for &t in active {
        if groups[t] != g {
            continue;
        }
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > gmax {
            gmax = v;
            i_sel = Some(t);
        }
        if in_low(alpha[t], y[t], c) && v < gmin {
            gmin = v;
        }
    }
    let i = i_sel?;
    if !gmin.is_finite() {
        return None;
    }
    let violation = gmax - gmin;
    let mut best_j = None;
    let mut best_obj = f64::INFINITY;
    for &t in active {
        if groups[t] != g || !in_low(alpha[t], y[t], c) {
            continue;
        }
        let b = gmax + y[t] * grad[t];
        if b > 0.0 {
            let a = kdiag[i] + kdiag[t] - 2.0 * dot(&x[i], &x[t]);
            let a = if a > 0.0 { a } else { TAU };
            let obj = -(b * b) / a;
            if obj < best_obj {
                best_obj = obj;
                best_j = Some(t);
            }
        }
    }
    best_j.map(|j| (i, j, violation, -best_obj))
}

/// Exact clipped optimum of the two-variable subproblem.
#[allow(clippy::too_many_arguments)]
fn pair_update(
    ai: f64,
    aj: f64,
    yi: f64,
    yj: f64,
    gi: f64,
    gj: f64,
    kii: f64,
    kjj: f64,
    kij: f64,
    c: f64,
) -> (f64, f64) {
    let (mut ai, mut aj) = (ai, aj);
    let qij = yi * yj * kij;
    if yi != yj {
        let quad = kii + kjj + 2.0 * qij;
        let quad = if quad > 0.0 { quad } else { TAU };
        let delta = (-gi - gj) / quad;
        let diff = ai - aj;
        ai += delta;
        aj += delta;
        if diff > 0.0 {
            if aj < 0.0 {
                aj = 0.0;
                ai = diff;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = -diff;
        }
        if c.is_finite() {
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        }
    } else {
        let quad = kii + kjj - 2.0 * qij;
        let quad = if quad > 0.0 { quad } else { TAU };
        let delta = (gi - gj) / quad;
        let sum = ai + aj;
        ai -= delta;
        aj += delta;
        if c.is_finite() && sum > c {
            if ai > c {
                ai = c;
                aj = sum - c;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if c.is_finite() && sum > c {
            if aj > c {
                aj = c;
                ai = sum - c;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
    }
    (ai, aj)
}

/// Hyperplane `<w, x> + b = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSeparator<const D: usize> {
    pub w: [f64; D],
    pub b: f64,
}

impl<const D: usize> LinearSeparator<D> {
    pub fn norm(&self) -> f64 {
        dot(&self.w, &self.w).sqrt()
    }

    /// Distance from the plane to the nearest canonical support point.
    pub fn margin(&self) -> f64 {
        1.0 / self.norm()
    }

    pub fn decision(&self, x: &[f64; D]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

/// `w = Σ Λ_i y_i x_i` and one offset per group.
///
/// Each offset averages `y_i - <w, x_i>` over the group's free support
/// vectors (`0 < Λ_i < C`). A group without free support vectors takes the
/// midpoint of its feasible offset interval.
pub fn recover_separator<const D: usize>(
    points: &[LabeledPoint<D>],
    dual: &DualSolution,
) -> Result<([f64; D], Vec<f64>)> {
    if points.len() != dual.multipliers.len() {
        return Err(Error::LengthMismatch {
            expected: dual.multipliers.len(),
            got: points.len(),
        });
    }
    if dual.support_indices.is_empty() {
        return Err(Error::NoSupportVectors);
    }
    let c = dual.margin.bound();
    let mut w = [0.0; D];
    for (p, &a) in points.iter().zip(&dual.multipliers) {
        let ay = a * p.label.as_f64();
        for d in 0..D {
            w[d] += ay * p.position[d];
        }
    }
    if dot(&w, &w) == 0.0 {
        return Err(Error::NoSupportVectors);
    }
    let n_groups = dual.groups.iter().max().map_or(0, |g| g + 1);
    let mut offsets = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        let mut free_sum = 0.0;
        let mut free_n = 0usize;
        let mut lb = f64::NEG_INFINITY;
        let mut ub = f64::INFINITY;
        for (t, p) in points
            .iter()
            .enumerate()
            .filter(|(t, _)| dual.groups[*t] == g)
        {
            let a = dual.multipliers[t];
            let y = p.label.as_f64();
            // b = y - <w, x> on free vectors; bounds from the KKT conditions otherwise
            let r = y - dot(&w, &p.position);
            let at_upper = c.is_finite() && a >= c - EPS_SV * c.max(1.0);
            if a > EPS_SV && !at_upper {
                free_sum += r;
                free_n += 1;
            } else if at_upper != (y > 0.0) {
                // Λ = 0 on a positive point or Λ = C on a negative one: b >= r
                lb = lb.max(r);
            } else {
                ub = ub.min(r);
            }
        }
        let b = if free_n > 0 {
            free_sum / free_n as f64
        } else if lb.is_finite() && ub.is_finite() {
            0.5 * (lb + ub)
        } else if lb.is_finite() {
            lb
        } else {
            ub
        };
        offsets.push(b);
    }
    Ok((w, offsets))
}

pub fn separator_from_dual<const D: usize>(
    points: &[LabeledPoint<D>],
    dual: &DualSolution,
) -> Result<LinearSeparator<D>> {
    let (w, b) = recover_separator(points, dual)?;
    Ok(LinearSeparator { w, b: b[0] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "svm2d")]
    Svm2d,
    #[serde(rename = "svm3d")]
    Svm3d,
    #[serde(rename = "svm2p")]
    Svm2Period,
    #[serde(rename = "ppr")]
    Ppr,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Svm2d,
        Method::Svm3d,
        Method::Svm2Period,
        Method::Ppr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Svm2d => "svm2d",
            Method::Svm3d => "svm3d",
            Method::Svm2Period => "svm2p",
            Method::Ppr => "ppr",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown estimator {s:?}; expected svm2d, svm3d, svm2p or ppr"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityEstimate {
    pub direction: Vec2,
    /// m/s
    pub speed: f64,
    pub method: Method,
}

impl VelocityEstimate {
    pub fn velocity(&self) -> Vec2 {
        self.direction * self.speed
    }
}

/// Shared normal, one offset per snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPeriodSeparator {
    pub w: Vec2,
    pub b1: f64,
    pub b2: f64,
}

impl TwoPeriodSeparator {
    /// Distance between the two parallel separating lines.
    pub fn plane_distance(&self) -> f64 {
        (self.b1 - self.b2).abs() / self.w.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SvmFlags {
    pub soft_margin_fallback: bool,
    pub unconverged: bool,
    /// Largest hinge slack `max(0, 1 - y(<w,x> + b))` over the data.
    pub max_slack: f64,
}

/// Labeled sensor positions for one snapshot.
pub fn labeled_snapshot(field: &SensorField, reports: &[SignReport]) -> Vec<LabeledPoint<2>> {
    reports
        .iter()
        .map(|r| LabeledPoint::planar(field.sensors()[r.sensor_index], r.sign))
        .collect()
}

/// Unit separating normal for one snapshot, pointing from the `Minus` class
/// towards the `Plus` class.
pub fn snapshot_direction(points: &[LabeledPoint<2>], margin: Margin) -> Result<(Vec2, SvmFlags)> {
    let dual = solve_dual(points, margin)?;
    let sep = separator_from_dual(points, &dual)?;
    let w = Vec2::new(sep.w[0], sep.w[1]);
    let dir = w.normalized().ok_or(Error::NoSupportVectors)?;
    let flags = SvmFlags {
        soft_margin_fallback: false,
        unconverged: !dual.converged,
        max_slack: max_slack(points, &[0; 0], &sep.w, &[sep.b]),
    };
    Ok((dir, flags))
}

fn max_slack<const D: usize>(
    points: &[LabeledPoint<D>],
    groups: &[usize],
    w: &[f64; D],
    b: &[f64],
) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let g = groups.get(t).copied().unwrap_or(0);
            (1.0 - p.label.as_f64() * (dot(w, &p.position) + b[g])).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Joint direction and speed from two snapshots `dt` seconds apart.
///
/// Solves the shared-normal problem with hard margins; if the snapshots do
/// not admit one (label noise, maneuver) the soft margin `fallback` is used
/// and flagged.
pub fn two_period_velocity(
    snap1: &[LabeledPoint<2>],
    snap2: &[LabeledPoint<2>],
    dt: f64,
    fallback: Margin,
) -> Result<(TwoPeriodSeparator, VelocityEstimate, SvmFlags)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "period gap must be positive, got {dt}"
        )));
    }
    let mut points = snap1.to_vec();
    points.extend_from_slice(snap2);
    let groups: Vec<usize> = std::iter::repeat_n(0, snap1.len())
        .chain(std::iter::repeat_n(1, snap2.len()))
        .collect();

    let mut flags = SvmFlags::default();
    let mut dual = solve_dual_grouped(&points, &groups, Margin::Hard)?;
    if !dual.converged {
        flags.soft_margin_fallback = true;
        dual = solve_dual_grouped(&points, &groups, fallback)?;
    }
    flags.unconverged = !dual.converged;
    let (w, b) = recover_separator(&points, &dual)?;
    flags.max_slack = max_slack(&points, &groups, &w, &b);
    let sep = TwoPeriodSeparator {
        w: Vec2::new(w[0], w[1]),
        b1: b[0],
        b2: b[1],
    };
    let direction = sep.w.normalized().ok_or(Error::NoSupportVectors)?;
    let speed = sep.plane_distance() / dt;
    Ok((
        sep,
        VelocityEstimate {
            direction,
            speed,
            method: Method::Svm2Period,
        },
        flags,
    ))
}

/// Velocity plane fitted as a 3D separator between `(x, y, c_i)` (negative)
/// and `(x, y, c_i + 1)` (positive).
///
/// Sensors at the lowest and highest observed counter level are left out
/// when at least three levels are present: those levels hold the saturated
/// counters (never or always approached), which are flat rather than on the
/// plane. Dropping whole levels keeps the fit invariant to counter offsets.
pub fn stairwise_plane_svm(
    field: &SensorField,
    counters: &CounterField,
    period: f64,
    margin: Margin,
) -> Result<(VelocityEstimate, SvmFlags)> {
    if counters.len() != field.len() {
        return Err(Error::LengthMismatch {
            expected: field.len(),
            got: counters.len(),
        });
    }
    if counters.periods_elapsed() < 2 {
        return Err(Error::InvalidInput(
            "stairwise fit needs at least two periods".into(),
        ));
    }
    if counters.is_constant() {
        return Err(Error::ConstantCounters);
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "period must be positive, got {period}"
        )));
    }
    let counts = counters.counts();
    let lo = *counts.iter().min().unwrap_or(&0);
    let hi = *counts.iter().max().unwrap_or(&0);
    let mut levels: Vec<u32> = counts.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let trim = levels.len() >= 3;
    // counts measured from the lowest kept level; the shift lands in b
    let base = if trim { levels[1] } else { lo } as f64;
    let mut points = Vec::with_capacity(2 * counts.len());
    for (s, &c) in field.sensors().iter().zip(counts) {
        if trim && (c == lo || c == hi) {
            continue;
        }
        let c = c as f64 - base;
        points.push(LabeledPoint {
            position: [s.x, s.y, c],
            label: Sign::Minus,
        });
        points.push(LabeledPoint {
            position: [s.x, s.y, c + 1.0],
            label: Sign::Plus,
        });
    }
    let dual = solve_dual(&points, margin)?;
    let sep = separator_from_dual(&points, &dual)?;
    let [wx, wy, wc] = sep.w;
    let wxy = Vec2::new(wx, wy);
    let norm_xy = wxy.norm();
    // counts grow along -w_xy / w_c
    let direction = (wxy * (-wc.signum()))
        .normalized()
        .ok_or(Error::ConstantCounters)?;
    let speed = wc.abs() / (norm_xy * period);
    let flags = SvmFlags {
        soft_margin_fallback: false,
        unconverged: !dual.converged,
        max_slack: max_slack(&points, &[], &sep.w, &[sep.b]),
    };
    Ok((
        VelocityEstimate {
            direction,
            speed,
            method: Method::Svm3d,
        },
        flags,
    ))
}

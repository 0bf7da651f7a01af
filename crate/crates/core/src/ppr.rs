//! Projection pursuit estimate of the velocity plane.
//!
//! The counter field `Y_i` is regressed on the sensor projections `<X_i, θ>`
//! for candidate unit directions `θ`. For each direction the profile is
//! smoothed with a Nadaraya-Watson estimator, forced non-decreasing with a
//! running maximum, and scored by its squared residual; the best direction is
//! the heading. The speed then comes from fitting a stair template (steps of
//! one count every `v` meters) along that heading.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{SensorField, Vec2};
use crate::observe::CounterField;

pub const EPS_DEN: f64 = 1e-30;
pub const EPS_TIE: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 360;
const GAUSS_CUTOFF: f64 = 6.0;
const GOLDEN_ITERS: usize = 40;
const SPEED_GRID: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    fn weight(self, z: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * z * z).exp(),
            Kernel::Epanechnikov => (1.0 - z * z).max(0.0),
        }
    }

    /// Support radius in bandwidths (truncation for the Gaussian).
    fn radius(self) -> f64 {
        match self {
            Kernel::Gaussian => GAUSS_CUTOFF,
            Kernel::Epanechnikov => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub kernel: Kernel,
}

impl KernelConfig {
    pub fn new(bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth, kernel })
    }

    /// Gaussian kernel, `h = diagonal / sqrt(N)`.
    pub fn default_for(field: &SensorField) -> Self {
        Self {
            bandwidth: field.bounds().diagonal() / (field.len() as f64).sqrt(),
            kernel: Kernel::Gaussian,
        }
    }
}

/// Nadaraya-Watson estimate at `u`.
pub fn kernel_smooth(
    projections: &[f64],
    counts: &[f64],
    u: f64,
    cfg: &KernelConfig,
) -> Result<f64> {
    if projections.len() != counts.len() {
        return Err(Error::LengthMismatch {
            expected: projections.len(),
            got: counts.len(),
        });
    }
    if projections.is_empty() {
        return Err(Error::NoLocalMass);
    }
    // Gaussian weights are shifted by the nearest point so far-away
    // evaluations do not underflow; the ratio is unchanged.
    let shift = match cfg.kernel {
        Kernel::Gaussian => projections
            .iter()
            .map(|&x| ((x - u) / cfg.bandwidth).powi(2))
            .fold(f64::INFINITY, f64::min),
        Kernel::Epanechnikov => 0.0,
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in projections.iter().zip(counts) {
        let z = (x - u) / cfg.bandwidth;
        let k = match cfg.kernel {
            Kernel::Gaussian => (-0.5 * (z * z - shift)).exp(),
            Kernel::Epanechnikov => cfg.kernel.weight(z),
        };
        num += k * y;
        den += k;
    }
    if den <= EPS_DEN {
        return Err(Error::NoLocalMass);
    }
    Ok(num / den)
}

/// Running maximum.
pub fn monotone_envelope(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut current = f64::NEG_INFINITY;
    for &v in values {
        current = current.max(v);
        out.push(current);
    }
    out
}

/// Kernel estimates at every sorted projection, using only the points within
/// the kernel radius. `xs` must be sorted ascending.
fn smooth_sorted(xs: &[f64], ys: &[f64], cfg: &KernelConfig) -> Option<Vec<f64>> {
    let reach = cfg.kernel.radius() * cfg.bandwidth;
    let inv_h = 1.0 / cfg.bandwidth;
    let n = xs.len();
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..n {
        let u = xs[i];
        while xs[lo] < u - reach {
            lo += 1;
        }
        while hi < n && xs[hi] <= u + reach {
            hi += 1;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for j in lo..hi {
            let k = cfg.kernel.weight((xs[j] - u) * inv_h);
            num += k * ys[j];
            den += k;
        }
        if den <= EPS_DEN {
            return None;
        }
        out.push(num / den);
    }
    Some(out)
}

/// Squared residual of the monotone smoothed profile along `dir`.
pub fn direction_residual(
    positions: &[Vec2],
    counts: &[f64],
    dir: Vec2,
    cfg: &KernelConfig,
) -> Result<f64> {
    let mut order: Vec<(f64, f64)> = positions
        .iter()
        .zip(counts)
        .map(|(p, &c)| (p.dot(dir), c))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = order.iter().map(|o| o.0).collect();
    let ys: Vec<f64> = order.iter().map(|o| o.1).collect();
    let smoothed = smooth_sorted(&xs, &ys, cfg).ok_or(Error::NoLocalMass)?;
    let envelope = monotone_envelope(&smoothed);
    Ok(envelope
        .iter()
        .zip(&ys)
        .map(|(n, y)| (n - y) * (n - y))
        .sum())
}

/// Index set of residuals within the tie tolerance of the minimum, resolved
/// to one angle by circular mean. Antipodal ties (zero resultant) fall back
/// to the arithmetic mean of the tied angles.
pub fn resolve_ties(angles: &[f64], residuals: &[f64]) -> f64 {
    let best = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = EPS_TIE * best.abs().max(1.0);
    let tied: Vec<f64> = angles
        .iter()
        .zip(residuals)
        .filter(|(_, &r)| r - best <= tol)
        .map(|(&a, _)| a)
        .collect();
    let (s, c) = tied
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    if s.hypot(c) > 1e-9 * tied.len() as f64 {
        s.atan2(c).rem_euclid(TAU)
    } else {
        tied.iter().sum::<f64>() / tied.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionFit {
    pub direction: Vec2,
    pub residual: f64,
}

fn check_counters(field: &SensorField, counters: &CounterField) -> Result<()> {
    if counters.len() != field.len() {
        return Err(Error::LengthMismatch {
            expected: field.len(),
            got: counters.len(),
        });
    }
    if counters.is_constant() {
        return Err(Error::ConstantCounters);
    }
    Ok(())
}

/// Heading from a grid search over `grid` directions, then a golden-section
/// refinement within one grid cell of the winner.
pub fn fit_direction(
    field: &SensorField,
    counters: &CounterField,
    cfg: &KernelConfig,
    grid: usize,
) -> Result<DirectionFit> {
    check_counters(field, counters)?;
    if grid < 8 {
        return Err(Error::InvalidInput(format!(
            "direction grid must be >= 8, got {grid}"
        )));
    }
    let ys = counters.as_f64();
    let pos = field.sensors();
    let score = |a: f64| direction_residual(pos, &ys, Vec2::from_angle(a), cfg);

    let step = TAU / grid as f64;
    let angles: Vec<f64> = (0..grid).map(|k| k as f64 * step).collect();
    let residuals = angles
        .iter()
        .map(|&a| score(a))
        .collect::<Result<Vec<f64>>>()?;
    let mut best_angle = resolve_ties(&angles, &residuals);
    let mut best = score(best_angle)?;

    // golden section on [a - step, a + step]
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (best_angle - step, best_angle + step);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = score(x1)?;
    let mut f2 = score(x2)?;
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = score(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = score(x2)?;
        }
    }
    let (cand, fc) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if fc < best {
        best_angle = cand;
        best = fc;
    }
    Ok(DirectionFit {
        direction: Vec2::from_angle(best_angle.rem_euclid(TAU)),
        residual: best,
    })
}

/// Stair template: 0 up to `offset`, then one more count every `step`
/// meters, saturating at `max_count`.
pub fn stair_template(u: f64, offset: f64, step: f64, max_count: u32) -> f64 {
    if u <= offset {
        0.0
    } else {
        ((u - offset) / step).ceil().min(max_count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedFit {
    /// m/s
    pub speed: f64,
    /// Step width in meters per period.
    pub step: f64,
    pub offset: f64,
    pub residual: f64,
    /// Fewer than three counter levels: only a bound on the step is visible.
    pub unidentifiable: bool,
}

/// Two-stage grid search of the stair template along `heading`.
pub fn fit_speed(
    field: &SensorField,
    counters: &CounterField,
    heading: Vec2,
    period: f64,
) -> Result<SpeedFit> {
    check_counters(field, counters)?;
    let heading = heading
        .normalized()
        .ok_or_else(|| Error::InvalidInput("heading must be nonzero".into()))?;
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "period must be positive, got {period}"
        )));
    }
    let periods = counters.periods_elapsed();
    let proj: Vec<f64> = field.sensors().iter().map(|s| s.dot(heading)).collect();
    let ys = counters.as_f64();
    let pmin = proj.iter().copied().fold(f64::INFINITY, f64::min);
    let pmax = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = pmax - pmin;
    if !(range > 0.0) {
        return Err(Error::DegenerateProjection);
    }
    let v_min = range / (periods.max(1) as f64 * 50.0);
    let v_max = range;

    let residual = |c0: f64, v: f64| -> f64 {
        proj.iter()
            .zip(&ys)
            .map(|(&u, &y)| {
                let d = stair_template(u, c0, v, periods) - y;
                d * d
            })
            .sum()
    };
    let search = |c_lo: f64, c_hi: f64, vs: &[f64]| -> (f64, f64, f64, usize, usize) {
        let mut best = (f64::INFINITY, 0.0, 0.0, 0, 0);
        for (k, &v) in vs.iter().enumerate() {
            for m in 0..SPEED_GRID {
                let c0 = c_lo + (c_hi - c_lo) * m as f64 / (SPEED_GRID - 1) as f64;
                let r = residual(c0, v);
                if r < best.0 {
                    best = (r, c0, v, m, k);
                }
            }
        }
        best
    };

    // coarse: log-spaced steps
    let ratio = (v_max / v_min).ln();
    let coarse_v: Vec<f64> = (0..SPEED_GRID)
        .map(|k| v_min * (ratio * k as f64 / (SPEED_GRID - 1) as f64).exp())
        .collect();
    let (_, c0, _, _, k) = search(pmin, pmax, &coarse_v);
    let dc = range / (SPEED_GRID - 1) as f64;
    let v_lo = coarse_v[k.saturating_sub(1)];
    let v_hi = coarse_v[(k + 1).min(SPEED_GRID - 1)];
    let fine_v: Vec<f64> = (0..SPEED_GRID)
        .map(|m| v_lo + (v_hi - v_lo) * m as f64 / (SPEED_GRID - 1) as f64)
        .collect();
    let (r, c0, v, _, _) = search(c0 - dc, c0 + dc, &fine_v);

    let mut levels: Vec<u32> = counters.counts().to_vec();
    levels.sort_unstable();
    levels.dedup();
    Ok(SpeedFit {
        speed: v / period,
        step: v,
        offset: c0,
        residual: r,
        unidentifiable: levels.len() < 3,
    })
}

/// Heading and speed by projection pursuit.
pub fn ppr_velocity(
    field: &SensorField,
    counters: &CounterField,
    cfg: &KernelConfig,
    grid: usize,
    period: f64,
) -> Result<(crate::svm::VelocityEstimate, SpeedFit)> {
    let dir = fit_direction(field, counters, cfg, grid)?;
    let speed = fit_speed(field, counters, dir.direction, period)?;
    Ok((
        crate::svm::VelocityEstimate {
            direction: dir.direction,
            speed: speed.speed,
            method: crate::svm::Method::Ppr,
        },
        speed,
    ))
}

/// Folds an angle difference into `[0, pi]`.
pub fn angular_error(estimate: Vec2, truth: Vec2) -> f64 {
    let d = (estimate.angle() - truth.angle()).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

//! Binary range-rate reports, per-sensor counters and the geometric
//! diagnostics derived from one snapshot.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{SensorField, TargetState, Vec2};
use crate::hull::ConvexHull;

/// `Plus`: range to the target strictly decreasing. `Minus`: otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub sensor_index: usize,
    pub time: f64,
    pub sign: Sign,
}

/// Sign of the range rate: `Plus` iff `<x - s, v> < 0`. An exact zero is
/// reported as `Minus` since the range is not strictly decreasing.
pub fn sign_at(sensor: Vec2, target: &TargetState) -> Result<Sign> {
    if target.velocity == Vec2::ZERO {
        return Err(Error::ZeroVelocity);
    }
    target.velocity.check_finite("target velocity")?;
    target.position.check_finite("target position")?;
    let rate = (target.position - sensor).dot(target.velocity);
    Ok(if rate < 0.0 { Sign::Plus } else { Sign::Minus })
}

/// One report per sensor, in field order.
pub fn snapshot(field: &SensorField, target: &TargetState) -> Result<Vec<SignReport>> {
    field
        .sensors()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            Ok(SignReport {
                sensor_index: i,
                time: target.time,
                sign: sign_at(s, target)?,
            })
        })
        .collect()
}

/// Keeps each sign with probability `p`, flips it otherwise.
pub fn apply_flip_noise<R: Rng + ?Sized>(
    reports: &[SignReport],
    p: f64,
    rng: &mut R,
) -> Result<Vec<SignReport>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(reports
        .iter()
        .map(|r| {
            // always draw so the stream position does not depend on p
            let keep = rng.gen::<f64>() < p;
            SignReport {
                sign: if keep { r.sign } else { r.sign.flipped() },
                ..*r
            }
        })
        .collect())
}

/// Cumulative number of `Plus` periods per sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterField {
    counts: Vec<u32>,
    periods_elapsed: u32,
}

impl CounterField {
    pub fn new(n_sensors: usize) -> Self {
        Self {
            counts: vec![0; n_sensors],
            periods_elapsed: 0,
        }
    }

    /// Build from explicit counts; every count must be `<= periods_elapsed`.
    pub fn from_counts(counts: Vec<u32>, periods_elapsed: u32) -> Result<Self> {
        if let Some(&c) = counts.iter().find(|&&c| c > periods_elapsed) {
            return Err(Error::InvalidInput(format!(
                "count {c} exceeds periods elapsed {periods_elapsed}"
            )));
        }
        Ok(Self {
            counts,
            periods_elapsed,
        })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn periods_elapsed(&self) -> u32 {
        self.periods_elapsed
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.counts.windows(2).all(|w| w[0] == w[1])
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn update(&self, reports: &[SignReport]) -> Result<CounterField> {
        if reports.len() != self.counts.len() {
            return Err(Error::LengthMismatch {
                expected: self.counts.len(),
                got: reports.len(),
            });
        }
        let mut counts = self.counts.clone();
        for r in reports {
            let slot = counts.get_mut(r.sensor_index).ok_or_else(|| {
                Error::InvalidInput(format!("sensor index {} out of range", r.sensor_index))
            })?;
            if r.sign == Sign::Plus {
                *slot += 1;
            }
        }
        Ok(CounterField {
            counts,
            periods_elapsed: self.periods_elapsed + 1,
        })
    }
}

pub fn update_counters(counters: &CounterField, reports: &[SignReport]) -> Result<CounterField> {
    counters.update(reports)
}

/// Strip `lower < <p, direction> < upper` bracketing the target along a
/// direction. A missing class leaves the corresponding bound infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSlab {
    pub direction: Vec2,
    pub lower: f64,
    pub upper: f64,
}

impl FeasibleSlab {
    pub fn is_unbounded(&self) -> bool {
        self.lower.is_infinite() || self.upper.is_infinite()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, projection: f64) -> bool {
        self.lower < projection && projection < self.upper
    }
}

/// `lower` = max projection over `Minus` sensors, `upper` = min projection
/// over `Plus` sensors.
pub fn feasible_slab(
    field: &SensorField,
    reports: &[SignReport],
    direction: Vec2,
) -> Result<FeasibleSlab> {
    let dir = direction
        .normalized()
        .ok_or_else(|| Error::InvalidInput("slab direction must be nonzero".into()))?;
    let sensors = field.sensors();
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for r in reports {
        let s = sensors.get(r.sensor_index).ok_or_else(|| {
            Error::InvalidInput(format!("sensor index {} out of range", r.sensor_index))
        })?;
        let proj = s.dot(dir);
        match r.sign {
            Sign::Minus => lower = lower.max(proj),
            Sign::Plus => upper = upper.min(proj),
        }
    }
    Ok(FeasibleSlab {
        direction: dir,
        lower,
        upper,
    })
}

/// Sensor positions split by reported sign: `(plus, minus)`.
pub fn split_by_sign(field: &SensorField, reports: &[SignReport]) -> (Vec<Vec2>, Vec<Vec2>) {
    let sensors = field.sensors();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for r in reports {
        match r.sign {
            Sign::Plus => plus.push(sensors[r.sensor_index]),
            Sign::Minus => minus.push(sensors[r.sensor_index]),
        }
    }
    (plus, minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separability {
    pub hulls_disjoint: bool,
    /// `None` when no target position was supplied.
    pub target_excluded: Option<bool>,
}

/// Hull disjointness of the two report classes, and whether the target lies
/// outside both hulls.
pub fn separability_check(
    field: &SensorField,
    reports: &[SignReport],
    target: Option<Vec2>,
) -> Separability {
    let (plus, minus) = split_by_sign(field, reports);
    let hp = ConvexHull::new(&plus);
    let hm = ConvexHull::new(&minus);
    Separability {
        hulls_disjoint: !hp.intersects(&hm),
        target_excluded: target.map(|t| !hp.contains(t) && !hm.contains(t)),
    }
}

/// Debug dump: `time,sensor_index,x,y,sign`.
pub fn write_snapshot_csv<W: Write>(
    out: &mut W,
    field: &SensorField,
    reports: &[SignReport],
) -> io::Result<()> {
    for r in reports {
        let s = field.sensors()[r.sensor_index];
        writeln!(
            out,
            "{},{},{},{},{}",
            r.time,
            r.sensor_index,
            s.x,
            s.y,
            r.sign.value()
        )?;
    }
    Ok(())
}

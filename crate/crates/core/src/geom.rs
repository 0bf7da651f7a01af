//! Planar geometry, sensor fields and target motion models.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Component, SeedStream};

/// A point or vector in the plane, in meters (or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector in the same direction, `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn check_finite(self, what: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(what))
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Absolute angle between two directions, in `[0, pi]`.
pub fn angle_between(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).atan2(a.dot(b)).abs()
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self> {
        min.check_finite("bounds")?;
        max.check_finite("bounds")?;
        if !(max.x > min.x && max.y > min.y) {
            return Err(Error::DegenerateBounds);
        }
        Ok(Self { min, max })
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(Vec2::ZERO, Vec2::new(side, side))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        Vec2::new(
            rng.gen_range(self.min.x..self.max.x),
            rng.gen_range(self.min.y..self.max.y),
        )
    }
}

/// Fixed sensor layout. Sensor indices are stable for the life of the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorField {
    sensors: Vec<Vec2>,
    bounds: Rect,
}

impl SensorField {
    pub fn new(sensors: Vec<Vec2>, bounds: Rect) -> Result<Self> {
        if sensors.len() < 3 {
            return Err(Error::TooFewSensors(sensors.len()));
        }
        for s in &sensors {
            s.check_finite("sensor position")?;
            if !bounds.contains(*s) {
                return Err(Error::InvalidInput(format!(
                    "sensor ({}, {}) outside bounds",
                    s.x, s.y
                )));
            }
        }
        Ok(Self { sensors, bounds })
    }

    /// `n` positions drawn i.i.d. uniformly over `bounds`.
    pub fn sample<R: Rng + ?Sized>(n: usize, bounds: Rect, rng: &mut R) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewSensors(n));
        }
        let sensors = (0..n).map(|_| bounds.sample(rng)).collect();
        Ok(Self { sensors, bounds })
    }

    pub fn sensors(&self) -> &[Vec2] {
        &self.sensors
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }
}

/// Uniform field from the `Field` component of `seed`.
pub fn sample_field(n: usize, bounds: Rect, seed: u64) -> Result<SensorField> {
    let mut rng = SeedStream::new(seed).rng(Component::Field);
    SensorField::sample(n, bounds, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub time: f64,
}

impl TargetState {
    fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub velocity: Vec2,
    pub end_time: f64,
}

/// Linear-Gaussian Markov motion on the state `[x, y, vx, vy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    pub x0: Vec2,
    pub v0: Vec2,
    pub transition: Matrix4<f64>,
    pub covariance: Matrix4<f64>,
    pub period: f64,
    noise_factor: Matrix4<f64>,
}

impl RandomWalk {
    pub fn new(
        x0: Vec2,
        v0: Vec2,
        transition: Matrix4<f64>,
        covariance: Matrix4<f64>,
        period: f64,
    ) -> Result<Self> {
        x0.check_finite("x0")?;
        v0.check_finite("v0")?;
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "period must be positive, got {period}"
            )));
        }
        if transition
            .iter()
            .chain(covariance.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("random walk matrices"));
        }
        let noise_factor = psd_factor(&covariance)?;
        Ok(Self {
            x0,
            v0,
            transition,
            covariance,
            period,
            noise_factor,
        })
    }

    /// Constant-velocity transition over one period with diagonal noise.
    pub fn constant_velocity(
        x0: Vec2,
        v0: Vec2,
        position_var: f64,
        velocity_var: f64,
        period: f64,
    ) -> Result<Self> {
        let f = cv_transition(period);
        let q = Matrix4::from_diagonal(&Vector4::new(
            position_var,
            position_var,
            velocity_var,
            velocity_var,
        ));
        Self::new(x0, v0, f, q, period)
    }

    pub fn initial_state(&self) -> TargetState {
        TargetState {
            position: self.x0,
            velocity: self.v0,
            time: 0.0,
        }
    }
}

/// Transition matrix of noiseless constant-velocity kinematics over `dt`.
pub fn cv_transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

/// `L` with `L Lᵀ = Q` for symmetric PSD `Q`, via the eigendecomposition so
/// that singular (including zero) covariances are admitted.
fn psd_factor(q: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let scale = q.amax().max(1.0);
    if (q - q.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPsd);
    }
    let eig = SymmetricEigen::new(*q);
    if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
        return Err(Error::NotPsd);
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix4::from_diagonal(&sqrt))
}

/// One draw from `N(F s, Q)`, time advanced by one period.
pub fn step_random_walk<R: Rng + ?Sized>(
    state: &TargetState,
    walk: &RandomWalk,
    rng: &mut R,
) -> Result<TargetState> {
    state.position.check_finite("state position")?;
    state.velocity.check_finite("state velocity")?;
    let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let next = walk.transition * state.as_vector() + walk.noise_factor * z;
    Ok(TargetState {
        position: Vec2::new(next[0], next[1]),
        velocity: Vec2::new(next[2], next[3]),
        time: state.time + walk.period,
    })
}

/// The four target motion laws.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryModel {
    ConstantVelocity {
        x0: Vec2,
        v: Vec2,
    },
    MultiLeg {
        x0: Vec2,
        legs: Vec<Leg>,
    },
    /// `x(t) = x0 + t v0 + t² a0`; note there is no ½ on the quadratic term.
    ConstantAcceleration {
        x0: Vec2,
        v0: Vec2,
        a0: Vec2,
    },
    GaussianRandomWalk(RandomWalk),
}

impl TrajectoryModel {
    pub fn constant_velocity(x0: Vec2, v: Vec2) -> Result<Self> {
        let m = TrajectoryModel::ConstantVelocity { x0, v };
        m.validate()?;
        Ok(m)
    }

    pub fn multi_leg(x0: Vec2, legs: Vec<Leg>) -> Result<Self> {
        let m = TrajectoryModel::MultiLeg { x0, legs };
        m.validate()?;
        Ok(m)
    }

    pub fn constant_acceleration(x0: Vec2, v0: Vec2, a0: Vec2) -> Result<Self> {
        let m = TrajectoryModel::ConstantAcceleration { x0, v0, a0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrajectoryModel::ConstantVelocity { x0, v } => {
                x0.check_finite("x0")?;
                v.check_finite("v")?;
                if *v == Vec2::ZERO {
                    return Err(Error::ZeroVelocity);
                }
            }
            TrajectoryModel::MultiLeg { x0, legs } => {
                x0.check_finite("x0")?;
                if legs.is_empty() {
                    return Err(Error::InvalidInput(
                        "multi-leg model needs at least one leg".into(),
                    ));
                }
                let mut prev = 0.0;
                for leg in legs {
                    leg.velocity.check_finite("leg velocity")?;
                    if !(leg.end_time.is_finite() && leg.end_time > prev) {
                        return Err(Error::InvalidInput(
                            "leg end times must be positive and strictly increasing".into(),
                        ));
                    }
                    prev = leg.end_time;
                }
            }
            TrajectoryModel::ConstantAcceleration { x0, v0, a0 } => {
                x0.check_finite("x0")?;
                v0.check_finite("v0")?;
                a0.check_finite("a0")?;
            }
            TrajectoryModel::GaussianRandomWalk(_) => {}
        }
        Ok(())
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, TrajectoryModel::GaussianRandomWalk(_))
    }

    /// Closed-form state at time `t` for the deterministic models.
    pub fn state_at(&self, t: f64) -> Result<TargetState> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "time must be finite and >= 0, got {t}"
            )));
        }
        let (position, velocity) = match self {
            TrajectoryModel::ConstantVelocity { x0, v } => (*x0 + *v * t, *v),
            TrajectoryModel::MultiLeg { x0, legs } => {
                let mut pos = *x0;
                let mut start = 0.0;
                let mut vel = legs[legs.len() - 1].velocity;
                let mut done = false;
                for leg in legs {
                    // right-continuous: at t == end_time the next leg applies
                    if t < leg.end_time {
                        pos += leg.velocity * (t - start);
                        vel = leg.velocity;
                        done = true;
                        break;
                    }
                    pos += leg.velocity * (leg.end_time - start);
                    start = leg.end_time;
                }
                if !done {
                    // the final leg extends past its end time
                    let last = legs[legs.len() - 1];
                    pos += last.velocity * (t - start);
                }
                (pos, vel)
            }
            TrajectoryModel::ConstantAcceleration { x0, v0, a0 } => {
                (*x0 + *v0 * t + *a0 * (t * t), *v0 + *a0 * (2.0 * t))
            }
            TrajectoryModel::GaussianRandomWalk(_) => return Err(Error::StochasticModel),
        };
        Ok(TargetState {
            position,
            velocity,
            time: t,
        })
    }
}

pub fn trajectory_state(model: &TrajectoryModel, t: f64) -> Result<TargetState> {
    model.state_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> Rect {
        Rect::square(1.0).unwrap()
    }

    #[test]
    fn field_sampling_is_deterministic_and_contained() {
        let a = sample_field(3, unit(), 7).unwrap();
        let b = sample_field(3, unit(), 7).unwrap();
        assert_eq!(a, b);
        assert!(a.sensors().iter().all(|s| unit().contains(*s)));
    }

    #[test]
    fn field_mean_matches_uniform_moments() {
        let bounds = Rect::square(300.0).unwrap();
        let f = sample_field(100, bounds, 11).unwrap();
        let n = f.len() as f64;
        let mean = f.sensors().iter().fold(Vec2::ZERO, |acc, s| acc + *s) * (1.0 / n);
        // uniform on [0, 300]: sd = 300 / sqrt(12); mean of n draws: sd / sqrt(n)
        let se = 300.0 / 12f64.sqrt() / n.sqrt();
        assert!((mean.x - 150.0).abs() < 3.0 * se);
        assert!((mean.y - 150.0).abs() < 3.0 * se);
    }

    #[test]
    fn too_few_sensors_and_degenerate_bounds() {
        assert_eq!(sample_field(2, unit(), 1), Err(Error::TooFewSensors(2)));
        assert_eq!(
            Rect::new(Vec2::ZERO, Vec2::new(0.0, 1.0)),
            Err(Error::DegenerateBounds)
        );
    }

    #[test]
    fn closed_form_states() {
        let cv = TrajectoryModel::constant_velocity(Vec2::ZERO, Vec2::new(1.0, 2.0)).unwrap();
        let s = cv.state_at(3.0).unwrap();
        assert_eq!(s.position, Vec2::new(3.0, 6.0));
        assert_eq!(s.velocity, Vec2::new(1.0, 2.0));

        let acc = TrajectoryModel::constant_acceleration(
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        )
        .unwrap();
        let s = acc.state_at(2.0).unwrap();
        assert_eq!(s.position, Vec2::new(2.0, 4.0));
        // velocity is the time derivative of the position law
        assert_eq!(s.velocity, Vec2::new(1.0, 4.0));

        let legs = vec![
            Leg {
                velocity: Vec2::new(1.0, 0.0),
                end_time: 5.0,
            },
            Leg {
                velocity: Vec2::new(0.0, 1.0),
                end_time: 10.0,
            },
        ];
        let ml = TrajectoryModel::multi_leg(Vec2::ZERO, legs).unwrap();
        let s = ml.state_at(7.0).unwrap();
        assert_eq!(s.position, Vec2::new(5.0, 2.0));
        assert_eq!(s.velocity, Vec2::new(0.0, 1.0));
        // right-continuous at the maneuver epoch
        assert_eq!(ml.state_at(5.0).unwrap().velocity, Vec2::new(0.0, 1.0));
    }

    #[test]
    fn multileg_rejects_unordered_epochs() {
        let legs = vec![
            Leg {
                velocity: Vec2::new(1.0, 0.0),
                end_time: 5.0,
            },
            Leg {
                velocity: Vec2::new(0.0, 1.0),
                end_time: 5.0,
            },
        ];
        assert!(TrajectoryModel::multi_leg(Vec2::ZERO, legs).is_err());
        assert_eq!(
            TrajectoryModel::constant_velocity(Vec2::ZERO, Vec2::ZERO),
            Err(Error::ZeroVelocity)
        );
    }

    #[test]
    fn random_walk_rejected_by_closed_form() {
        let w =
            RandomWalk::constant_velocity(Vec2::ZERO, Vec2::new(1.0, 1.0), 0.0, 0.0, 1.0).unwrap();
        let m = TrajectoryModel::GaussianRandomWalk(w);
        assert_eq!(m.state_at(1.0), Err(Error::StochasticModel));
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let mut q = Matrix4::zeros();
        q[(0, 0)] = -1.0;
        let r = RandomWalk::new(Vec2::ZERO, Vec2::ZERO, Matrix4::identity(), q, 1.0);
        assert_eq!(r.unwrap_err(), Error::NotPsd);
        let mut q = Matrix4::zeros();
        q[(0, 1)] = 1.0;
        let r = RandomWalk::new(Vec2::ZERO, Vec2::ZERO, Matrix4::identity(), q, 1.0);
        assert_eq!(r.unwrap_err(), Error::NotPsd);
    }

    #[test]
    fn zero_noise_walks_are_deterministic() {
        let mut rng = SeedStream::new(1).rng(Component::Walk);
        let start = TargetState {
            position: Vec2::new(3.0, 4.0),
            velocity: Vec2::new(1.0, -2.0),
            time: 0.0,
        };
        let ident = RandomWalk::new(
            start.position,
            start.velocity,
            Matrix4::identity(),
            Matrix4::zeros(),
            1.0,
        )
        .unwrap();
        let s = step_random_walk(&start, &ident, &mut rng).unwrap();
        assert_eq!(s.position, start.position);
        assert_eq!(s.velocity, start.velocity);
        assert_eq!(s.time, 1.0);

        let cv =
            RandomWalk::constant_velocity(start.position, start.velocity, 0.0, 0.0, 1.0).unwrap();
        let s = step_random_walk(&start, &cv, &mut rng).unwrap();
        assert_eq!(s.position, Vec2::new(4.0, 2.0));
        assert_eq!(s.velocity, start.velocity);
    }

    #[test]
    fn innovation_covariance_matches_q() {
        let walk =
            RandomWalk::constant_velocity(Vec2::ZERO, Vec2::new(1.0, 1.0), 1.0, 0.01, 1.0).unwrap();
        let mut rng = SeedStream::new(99).rng(Component::Walk);
        let n = 10_000;
        let mut state = walk.initial_state();
        let mut innovations = Vec::with_capacity(n);
        for _ in 0..n {
            let next = step_random_walk(&state, &walk, &mut rng).unwrap();
            let predicted = walk.transition * state.as_vector();
            innovations.push(next.as_vector() - predicted);
            state = next;
        }
        let mean = innovations.iter().fold(Vector4::zeros(), |a, v| a + v) / n as f64;
        let cov = innovations
            .iter()
            .map(|v| (v - mean) * (v - mean).transpose())
            .fold(Matrix4::zeros(), |a, m| a + m)
            / (n - 1) as f64;
        for i in 0..4 {
            let q = walk.covariance[(i, i)];
            assert!(
                (cov[(i, i)] - q).abs() < 0.1 * q,
                "var {i}: {} vs {q}",
                cov[(i, i)]
            );
        }
        // off-diagonals near zero relative to the diagonal scale
        assert_abs_diff_eq!(cov[(0, 1)], 0.0, epsilon = 0.05);
    }

    #[test]
    fn cv_displacement_is_exact() {
        let v = Vec2::new(0.3, -1.7);
        let cv = TrajectoryModel::constant_velocity(Vec2::new(5.0, 5.0), v).unwrap();
        for &(t, s) in &[(0.0, 1.0), (2.0, 4.0), (10.0, 0.5)] {
            let a = cv.state_at(t).unwrap().position;
            let b = cv.state_at(t + s).unwrap().position;
            assert_abs_diff_eq!((b - a).x, s * v.x, epsilon = 1e-12);
            assert_abs_diff_eq!((b - a).y, s * v.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_leg_matches_constant_velocity() {
        let v = Vec2::new(2.0, 1.0);
        let cv = TrajectoryModel::constant_velocity(Vec2::new(1.0, 1.0), v).unwrap();
        let ml = TrajectoryModel::multi_leg(
            Vec2::new(1.0, 1.0),
            vec![Leg {
                velocity: v,
                end_time: 20.0,
            }],
        )
        .unwrap();
        for i in 0..20 {
            let t = i as f64 * 0.9;
            assert_eq!(cv.state_at(t).unwrap(), ml.state_at(t).unwrap());
        }
    }
}

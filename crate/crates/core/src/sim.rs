//! Ground truth, snapshots and counters for a sampled scenario.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{step_random_walk, SensorField, TargetState, TrajectoryModel};
use crate::observe::{apply_flip_noise, CounterField, SignReport};

/// Target states at `t_k = k * period`, `k = 0..samples`. Random walks are
/// stepped with their own period, which must equal `period`.
pub fn simulate_truth<R: Rng + ?Sized>(
    model: &TrajectoryModel,
    period: f64,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<TargetState>> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "period must be positive, got {period}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidInput(
            "at least one sample is required".into(),
        ));
    }
    match model {
        TrajectoryModel::GaussianRandomWalk(walk) => {
            if (walk.period - period).abs() > 1e-12 * period {
                return Err(Error::InvalidInput(format!(
                    "random walk period {} differs from sampling period {period}",
                    walk.period
                )));
            }
            let mut out = Vec::with_capacity(samples);
            out.push(walk.initial_state());
            while out.len() < samples {
                let next = step_random_walk(out.last().expect("non-empty"), walk, rng)?;
                out.push(next);
            }
            Ok(out)
        }
        _ => (0..samples)
            .map(|k| model.state_at(k as f64 * period))
            .collect(),
    }
}

/// One snapshot per truth state. With `keep_probability < 1` each report is
/// flipped independently.
pub fn observe_all<R: Rng + ?Sized>(
    field: &SensorField,
    truth: &[TargetState],
    keep_probability: f64,
    rng: &mut R,
) -> Result<Vec<Vec<SignReport>>> {
    truth
        .iter()
        .map(|t| {
            let reports = crate::observe::snapshot(field, t)?;
            if keep_probability < 1.0 {
                apply_flip_noise(&reports, keep_probability, rng)
            } else {
                Ok(reports)
            }
        })
        .collect()
}

pub fn accumulate(n_sensors: usize, snapshots: &[Vec<SignReport>]) -> Result<CounterField> {
    snapshots
        .iter()
        .try_fold(CounterField::new(n_sensors), |c, s| c.update(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{RandomWalk, Rect, Vec2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_truth_is_sampled_on_the_grid() {
        let m = TrajectoryModel::constant_velocity(Vec2::new(0., 0.), Vec2::new(1., 2.)).unwrap();
        let t = simulate_truth(&m, 0.5, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t[2].position, Vec2::new(1.0, 2.0));
        assert_eq!(t[2].time, 1.0);
    }

    #[test]
    fn walk_period_must_match() {
        let w = RandomWalk::constant_velocity(Vec2::ZERO, Vec2::new(1., 0.), 0., 0., 1.0).unwrap();
        let m = TrajectoryModel::GaussianRandomWalk(w);
        assert!(simulate_truth(&m, 2.0, 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let t = simulate_truth(&m, 1.0, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t[3].position, Vec2::new(3., 0.));
    }

    #[test]
    fn counters_count_plus_reports() {
        let field = crate::geom::sample_field(30, Rect::square(10.0).unwrap(), 2).unwrap();
        let m = TrajectoryModel::constant_velocity(Vec2::new(0., 5.), Vec2::new(1., 0.)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truth = simulate_truth(&m, 1.0, 10, &mut rng).unwrap();
        let snaps = observe_all(&field, &truth, 1.0, &mut rng).unwrap();
        let c = accumulate(field.len(), &snaps).unwrap();
        assert_eq!(c.periods_elapsed(), 10);
        for (s, &n) in field.sensors().iter().zip(c.counts()) {
            // plus while the target is strictly behind the sensor
            let expect = (0..10).filter(|&k| (k as f64) < s.x).count() as u32;
            assert_eq!(n, expect);
        }
    }
}

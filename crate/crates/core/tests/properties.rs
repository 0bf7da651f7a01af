mod common;

use std::f64::consts::TAU;

use bintrack::analysis::{indistinguishable, sign_sequence_oracle, DEFAULT_TOL};
use bintrack::geom::{sample_field, Rect, SensorField, TrajectoryModel, Vec2};
use bintrack::observe::{feasible_slab, separability_check, snapshot, CounterField, Sign};
use bintrack::ppr::{angular_error, fit_direction, Kernel, KernelConfig};
use bintrack::sim::{accumulate, observe_all, simulate_truth};
use bintrack::svm::{
    labeled_snapshot, separator_from_dual, solve_dual, stairwise_plane_svm, two_period_velocity,
    LabeledPoint, Margin,
};
use bintrack::track::{retrodict, run_tracker, StepFlags, StepRecord, TrackerConfig, EPS_PAR};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn square(side: f64) -> Rect {
    Rect::square(side).unwrap()
}

fn heading() -> impl Strategy<Value = Vec2> {
    (0.0..TAU).prop_map(Vec2::from_angle)
}

fn model() -> impl Strategy<Value = TrajectoryModel> {
    let x0 = (20.0..80.0f64, 20.0..80.0f64).prop_map(|(x, y)| Vec2::new(x, y));
    prop_oneof![
        (x0.clone(), heading(), 0.3..3.0f64)
            .prop_map(|(x, d, s)| TrajectoryModel::constant_velocity(x, d * s).unwrap()),
        (x0, heading(), 0.3..3.0f64, heading(), 0.01..0.2f64).prop_map(|(x, d, s, a, m)| {
            TrajectoryModel::constant_acceleration(x, d * s, a * m).unwrap()
        }),
    ]
}

fn labeled(points: &[(f64, f64, bool)]) -> Vec<LabeledPoint<2>> {
    points
        .iter()
        .map(|&(x, y, plus)| LabeledPoint {
            position: [x, y],
            label: if plus { Sign::Plus } else { Sign::Minus },
        })
        .collect()
}

fn small_problem() -> impl Strategy<Value = Vec<(f64, f64, bool)>> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64, any::<bool>()), 2..=6)
        .prop_filter("two classes", |v| {
            v.iter().any(|p| p.2) && v.iter().any(|p| !p.2)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noiseless_snapshots_are_separable(m in model(), n in 10usize..200, t in 0.0..15.0f64, seed in any::<u64>()) {
        let field = sample_field(n, square(100.0), seed).unwrap();
        let state = m.state_at(t).unwrap();
        let reports = snapshot(&field, &state).unwrap();
        let check = separability_check(&field, &reports, Some(state.position));
        prop_assert!(check.hulls_disjoint);
        prop_assert_eq!(check.target_excluded, Some(true));
    }

    #[test]
    fn slab_contains_true_projection(m in model(), seed in any::<u64>()) {
        let field = sample_field(80, square(100.0), seed).unwrap();
        for k in 0..20 {
            let s = m.state_at(k as f64).unwrap();
            let reports = snapshot(&field, &s).unwrap();
            let slab = feasible_slab(&field, &reports, s.velocity).unwrap();
            prop_assert!(slab.contains(s.position.dot(slab.direction)));
        }
    }

    #[test]
    fn counters_never_exceed_periods(m in model(), keep in 0.5..1.0f64, seed in any::<u64>()) {
        let field = sample_field(50, square(100.0), seed).unwrap();
        let truth = simulate_truth(&m, 1.0, 25, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let snaps = observe_all(&field, &truth, keep, &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        let counters = accumulate(field.len(), &snaps).unwrap();
        prop_assert!(counters.counts().iter().all(|&c| c <= counters.periods_elapsed()));
    }

    #[test]
    fn identical_inputs_identical_signs(m in model(), t in 0.0..15.0f64, seed in any::<u64>()) {
        let field = sample_field(60, square(100.0), seed).unwrap();
        let s = m.state_at(t).unwrap();
        prop_assert_eq!(snapshot(&field, &s).unwrap(), snapshot(&field, &s).unwrap());
    }

    #[test]
    fn dual_matches_exhaustive_oracle(pts in small_problem(), c in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let points = labeled(&pts);
        let dual = solve_dual(&points, Margin::Soft(c)).unwrap();
        let oracle = common::brute_force_dual(&points, c);
        prop_assert!((dual.objective - oracle).abs() <= 1e-4, "{} vs {}", dual.objective, oracle);
        let eq: f64 = dual.multipliers.iter().zip(&points).map(|(a, p)| a * p.label.as_f64()).sum();
        prop_assert!(eq.abs() <= 1e-8);
        prop_assert!(dual.multipliers.iter().all(|&a| (0.0..=c).contains(&a)));
    }

    #[test]
    fn hard_margin_meets_constraints(
        plus in prop::collection::vec((0.5..4.0f64, -4.0..4.0f64), 1..8),
        minus in prop::collection::vec((-4.0..-0.5f64, -4.0..4.0f64), 1..8),
        angle in 0.0..TAU,
    ) {
        let rot = |(x, y): (f64, f64)| Vec2::new(x, y).rotate(angle);
        let mut points: Vec<LabeledPoint<2>> =
            plus.into_iter().map(|p| LabeledPoint::planar(rot(p), Sign::Plus)).collect();
        points.extend(minus.into_iter().map(|p| LabeledPoint::planar(rot(p), Sign::Minus)));
        let dual = solve_dual(&points, Margin::Hard).unwrap();
        prop_assert!(dual.converged);
        let sep = separator_from_dual(&points, &dual).unwrap();
        for p in &points {
            prop_assert!(p.label.as_f64() * sep.decision(&p.position) >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn two_period_is_rotation_equivariant(d in heading(), speed in 0.5..2.0f64, angle in 0.0..TAU, seed in any::<u64>()) {
        let field = sample_field(60, Rect::new(Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)).unwrap(), seed).unwrap();
        let m = TrajectoryModel::constant_velocity(d * -10.0, d * speed).unwrap();
        let s1 = m.state_at(0.0).unwrap();
        let s2 = m.state_at(5.0).unwrap();
        let a = labeled_snapshot(&field, &snapshot(&field, &s1).unwrap());
        let b = labeled_snapshot(&field, &snapshot(&field, &s2).unwrap());
        let rotate = |pts: &[LabeledPoint<2>]| -> Vec<LabeledPoint<2>> {
            pts.iter().map(|p| LabeledPoint::planar(Vec2::new(p.position[0], p.position[1]).rotate(angle), p.label)).collect()
        };
        let (_, e, _) = two_period_velocity(&a, &b, 5.0, Margin::default()).unwrap();
        let (_, r, _) = two_period_velocity(&rotate(&a), &rotate(&b), 5.0, Margin::default()).unwrap();
        prop_assert!((e.direction.rotate(angle) - r.direction).norm() < 1e-4);
        prop_assert!((e.speed - r.speed).abs() < 1e-4 * e.speed.max(1.0));
    }

    #[test]
    fn indistinguishability_agrees_with_sign_oracle(d in heading(), speed in 0.5..2.0f64, alpha in -20.0..20.0f64, scale in 1.5..3.0f64) {
        let field = sample_field(500, square(100.0), 17).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let a = TrajectoryModel::constant_velocity(Vec2::new(50.0, 50.0) - d * 15.0, d * speed).unwrap();
        let translated = TrajectoryModel::constant_velocity(Vec2::new(50.0, 50.0) - d * 15.0 + d.perp() * alpha, d * speed).unwrap();
        let faster = TrajectoryModel::constant_velocity(Vec2::new(50.0, 50.0) - d * 15.0, d * (speed * scale)).unwrap();
        for b in [translated, faster] {
            let report = indistinguishable(&a, &b, &times, DEFAULT_TOL).unwrap();
            let oracle = sign_sequence_oracle(&a, &b, &field, &times).unwrap();
            prop_assert_eq!(report.indistinguishable, oracle);
        }
    }
}

fn stair_counters(field: &SensorField, heading: Vec2, step: f64, periods: u32) -> CounterField {
    let counts = field
        .sensors()
        .iter()
        .map(|s| {
            ((s.dot(heading) + 60.0) / step)
                .ceil()
                .clamp(0.0, periods as f64) as u32
        })
        .collect();
    CounterField::from_counts(counts, periods).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stairwise_plane_ignores_counter_offsets(d in heading(), seed in any::<u64>()) {
        let field = sample_field(80, Rect::new(Vec2::new(-50.0, -50.0), Vec2::new(50.0, 50.0)).unwrap(), seed).unwrap();
        let base = stair_counters(&field, d, 6.0, 25);
        let shifted = CounterField::from_counts(base.counts().iter().map(|c| c + 5).collect(), 30).unwrap();
        let (a, _) = stairwise_plane_svm(&field, &base, 1.0, Margin::default()).unwrap();
        let (b, _) = stairwise_plane_svm(&field, &shifted, 1.0, Margin::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn direction_fit_rotates_with_the_field(d in heading(), angle in 0.0..TAU, seed in any::<u64>()) {
        // sensors inside a disc so every rotation stays within the bounds
        let bounds = Rect::new(Vec2::new(-60.0, -60.0), Vec2::new(60.0, 60.0)).unwrap();
        let raw = sample_field(400, bounds, seed).unwrap();
        let disc: Vec<Vec2> = raw.sensors().iter().copied().filter(|s| s.norm() < 59.0).collect();
        let field = SensorField::new(disc.clone(), bounds).unwrap();
        let turned = SensorField::new(disc.iter().map(|s| s.rotate(angle)).collect(), bounds).unwrap();
        let counters = stair_counters(&field, d, 8.0, 15);
        let cfg = KernelConfig::new(6.0, Kernel::Gaussian).unwrap();
        let a = fit_direction(&field, &counters, &cfg, 360).unwrap().direction;
        let b = fit_direction(&turned, &counters, &cfg, 360).unwrap().direction;
        prop_assert!(angular_error(b, a.rotate(angle)) <= 1f64.to_radians(), "{a:?} {b:?}");
    }

    #[test]
    fn tracker_correction_invariants(seed in any::<u64>(), d in heading()) {
        let field = sample_field(70, square(300.0), seed).unwrap();
        let m = TrajectoryModel::constant_velocity(Vec2::new(150.0, 150.0) - d * 30.0, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = simulate_truth(&m, 1.0, 30, &mut rng).unwrap();
        let snaps = observe_all(&field, &truth, 1.0, &mut rng).unwrap();
        let config = TrackerConfig::default();
        let run = run_tracker(&field, truth, &snaps, config, &mut rng).unwrap();
        let hist = &run.state.history;
        let mut lambdas: Vec<f64> = Vec::new();
        for k in 1..hist.len() {
            let (prev, rec) = (&hist[k - 1], &hist[k]);
            prop_assert!((rec.direction.norm() - 1.0).abs() < 1e-12);
            if rec.flags.lambda_skipped {
                prop_assert_eq!(rec.position, prev.position);
                continue;
            }
            let corrected = prev.position + prev.direction * rec.lambda;
            let slab = feasible_slab(&field, &snaps[k], rec.direction).unwrap();
            prop_assert!(slab.contains(corrected.dot(rec.direction)));
            if rec.theta != 0.0 {
                let w = &lambdas[lambdas.len() - config.window..];
                let m = w.iter().sum::<f64>() / w.len() as f64;
                let sd = (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
                let sigma = sd.max(config.sigma_min);
                prop_assert!(rec.lambda < m - sigma || rec.lambda > m + sigma);
                prop_assert!(rec.direction.perp().dot(prev.direction).abs() > EPS_PAR);
            }
            lambdas.push(rec.lambda);
        }
    }

    #[test]
    fn retrodiction_offsets_depend_only_on_later_corrections(
        steps in prop::collection::vec((heading(), -5.0..5.0f64, -3.0..3.0f64), 2..30),
        j in 0usize..30,
        noise in prop::collection::vec(-3.0..3.0f64, 30),
    ) {
        let j = j % steps.len();
        let history: Vec<StepRecord> = steps
            .iter()
            .enumerate()
            .map(|(k, &(dir, x, theta))| StepRecord {
                time: k as f64,
                position: Vec2::new(x, -x),
                direction: dir,
                lambda: 0.0,
                theta,
                flags: StepFlags::default(),
            })
            .collect();
        let mut altered = history.clone();
        for (k, rec) in altered.iter_mut().enumerate().take(j + 1) {
            rec.theta = noise[k];
            rec.position += Vec2::new(noise[k], 1.0);
        }
        let a = retrodict(&history);
        let b = retrodict(&altered);
        let offset_a = a[j] - history[j].position;
        let offset_b = b[j] - altered[j].position;
        prop_assert!((offset_a - offset_b).norm() < 1e-9);
        let last = history.len() - 1;
        prop_assert_eq!(a[last], history[last].position);
    }
}

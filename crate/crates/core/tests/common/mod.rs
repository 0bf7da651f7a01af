#![allow(dead_code)]

use bintrack::svm::LabeledPoint;
use nalgebra::{DMatrix, DVector};

/// `sum(a) - 1/2 sum_ij a_i a_j y_i y_j <x_i, x_j>`, computed directly.
pub fn dual_objective<const D: usize>(points: &[LabeledPoint<D>], alpha: &[f64]) -> f64 {
    let mut quad = 0.0;
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            let k: f64 = (0..D).map(|d| p.position[d] * q.position[d]).sum();
            quad += alpha[i] * alpha[j] * p.label.as_f64() * q.label.as_f64() * k;
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Exhaustive active-set search for the box- and equality-constrained dual.
///
/// Each variable is at 0, at `c`, or free; the free ones solve the
/// stationarity system together with `sum y a = 0`. The best feasible
/// candidate is the optimum, since some optimal vertex has a nonsingular
/// system. `c = INFINITY` drops the upper bound.
pub fn brute_force_dual<const D: usize>(points: &[LabeledPoint<D>], c: f64) -> f64 {
    let n = points.len();
    let y: Vec<f64> = points.iter().map(|p| p.label.as_f64()).collect();
    let q = DMatrix::from_fn(n, n, |i, j| {
        y[i] * y[j]
            * (0..D)
                .map(|d| points[i].position[d] * points[j].position[d])
                .sum::<f64>()
    });
    let states = if c.is_finite() { 3usize } else { 2 };
    let mut best = f64::NEG_INFINITY;
    for code in 0..states.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % states) as u8;
            rest /= states;
        }
        // 0 = lower bound, 1 = free, 2 = upper bound
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha: Vec<f64> = state
            .iter()
            .map(|&s| if s == 2 { c } else { 0.0 })
            .collect();
        let m = free.len();
        if m > 0 {
            let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..n)
                    .filter(|&j| state[j] == 2)
                    .map(|j| q[(i, j)] * c)
                    .sum();
                rhs[r] = 1.0 - fixed;
            }
            rhs[m] = -(0..n)
                .filter(|&j| state[j] == 2)
                .map(|j| y[j] * c)
                .sum::<f64>();
            let lu = a.lu();
            if lu.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(sol) = lu.solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let eq: f64 = alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        let in_box = alpha.iter().all(|&a| a >= -1e-10 && a <= c + 1e-10);
        if in_box && eq.abs() < 1e-8 {
            let clipped: Vec<f64> = alpha.iter().map(|a| a.clamp(0.0, c)).collect();
            best = best.max(dual_objective(points, &clipped));
        }
    }
    best
}

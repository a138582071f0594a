//! Shared oracles for the integration tests: independent brute-force and
//! analytic routes the implementation is checked against.

#![allow(dead_code)]

use rand::Rng;

use dp_screen::domain::{Dataset, L1Constraint, Matrix};

/// Random dataset with `||x_i||_inf <= 1` rows and `|y_i| <= lambda`
/// targets, suitable for the private pipelines.
pub fn random_bounded_dataset<R: Rng>(n: usize, d: usize, lambda: f64, rng: &mut R) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-lambda..=lambda)).collect();
    Dataset::new(Matrix::from_rows(rows).unwrap(), y).unwrap()
}

/// Brute-force Wolfe gap: maximize `(Xw - Xz)^T grad f(Xw)` over all 2d
/// signed vertices `z = ±lambda e_j` directly, without the closed form.
pub fn brute_force_wolfe_gap(data: &Dataset, w: &[f64], lambda: f64) -> f64 {
    let u = data.x().matvec(w);
    let n = data.n() as f64;
    let g: Vec<f64> = u
        .iter()
        .zip(data.y())
        .map(|(ui, yi)| (ui - yi) / n)
        .collect();
    let mut best = f64::NEG_INFINITY;
    for j in 0..data.d() {
        for sign in [-1.0, 1.0] {
            // (u - X z)^T g with z = sign * lambda * e_j.
            let value: f64 = (0..data.n())
                .map(|i| (u[i] - sign * lambda * data.x().get(i, j)) * g[i])
                .sum();
            best = best.max(value);
        }
    }
    best
}

/// Brute-force linear minimization over the 2d signed vertices: returns
/// the minimal inner product `<vertex, gradient>`.
pub fn brute_force_lmo_value(gradient: &[f64], lambda: f64) -> f64 {
    let mut best = f64::INFINITY;
    for &g in gradient {
        best = best.min(lambda * g).min(-lambda * g);
    }
    best
}

/// `f(u) = (1/2n) ||u - y||^2` evaluated directly.
pub fn objective_at(u: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    u.iter()
        .zip(y)
        .map(|(ui, yi)| (ui - yi) * (ui - yi))
        .sum::<f64>()
        / (2.0 * n)
}

/// Central finite differences of `f(u)` at `u`.
pub fn finite_difference_gradient(u: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len());
    let mut probe = u.to_vec();
    for i in 0..u.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = objective_at(&probe, y);
        probe[i] = orig - h;
        let minus = objective_at(&probe, y);
        probe[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

/// Exact mean nonzero count of the uniform-selection model by
/// exhaustive enumeration of all d^(2T) equally likely outcome
/// sequences. Only viable for tiny `d` and `t`.
pub fn enumerate_uniform_model_mean(d: usize, t: usize) -> f64 {
    let outcomes = (d as u128).pow(2 * t as u32);
    assert!(outcomes <= 100_000_000, "enumeration too large");
    let mut total: f64 = 0.0;
    let mut choices = vec![0usize; 2 * t];
    loop {
        let mut nonzero = vec![false; d];
        for step in 0..t {
            nonzero[choices[2 * step]] = true;
            nonzero[choices[2 * step + 1]] = false;
        }
        total += nonzero.iter().filter(|b| **b).count() as f64;
        // Odometer increment over the d^(2T) choice tuples.
        let mut k = 0;
        loop {
            if k == choices.len() {
                return total / outcomes as f64;
            }
            choices[k] += 1;
            if choices[k] < d {
                break;
            }
            choices[k] = 0;
            k += 1;
        }
    }
}

/// Standard normal CDF via an Abramowitz-Stegun rational approximation
/// of erf (max absolute error ~1.5e-7, far below the KS tolerances it
/// backs).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Feasible point of the lambda ball with a dense random direction.
pub fn random_feasible_point<R: Rng>(d: usize, lambda: f64, rng: &mut R) -> Vec<f64> {
    let c = L1Constraint::new(lambda).unwrap();
    dp_screen::domain::random_l1_point(d, &c, rng)
}

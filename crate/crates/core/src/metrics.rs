//! Evaluation metrics: support confusion, sparsity, mean squared error,
//! basis-expressivity regression, the exact sign test, and the
//! uniform-selection model of one-per-iteration screening.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{support_of, Dataset};
use crate::error::{Error, Result};

/// Support-recovery confusion counts and rates. "Positive" means a
/// nonzero coefficient in the estimate; the reference support defines
/// ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportConfusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub tpr: f64,
    pub fpr: f64,
    /// `tp / (tp + (fp + fn)/2)`, 0 when the denominator vanishes.
    pub f1: f64,
}

/// Confusion of the exact-zero support of `est_w` against a reference
/// support.
pub fn support_confusion(est_w: &[f64], ref_support: &BTreeSet<usize>) -> Result<SupportConfusion> {
    let d = est_w.len();
    if let Some(&max) = ref_support.iter().next_back() {
        if max >= d {
            return Err(Error::invalid(
                "ref_support",
                format!("index {max} out of range for {d} coordinates"),
            ));
        }
    }
    let est: BTreeSet<usize> = support_of(est_w).into_iter().collect();
    let tp = est.intersection(ref_support).count();
    let fp = est.len() - tp;
    let fn_ = ref_support.len() - tp;
    let tn = d - tp - fp - fn_;
    let tpr = if ref_support.is_empty() {
        0.0
    } else {
        tp as f64 / ref_support.len() as f64
    };
    let negatives = d - ref_support.len();
    let fpr = if negatives == 0 {
        0.0
    } else {
        fp as f64 / negatives as f64
    };
    let denom = tp as f64 + 0.5 * (fp + fn_) as f64;
    let f1 = if denom == 0.0 { 0.0 } else { tp as f64 / denom };
    Ok(SupportConfusion {
        tp,
        fp,
        fn_,
        tn,
        tpr,
        fpr,
        f1,
    })
}

/// Fraction of exactly-zero coordinates.
pub fn sparsity(w: &[f64]) -> f64 {
    assert!(!w.is_empty(), "sparsity of an empty vector");
    w.iter().filter(|v| **v == 0.0).count() as f64 / w.len() as f64
}

/// `(1/n) ||y - Xw||^2`.
pub fn mse(data: &Dataset, w: &[f64]) -> Result<f64> {
    if w.len() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "weight length {} for {} columns",
            w.len(),
            data.d()
        )));
    }
    let u = data.x().matvec(w);
    Ok(mse_of_prediction(&u, data.y()))
}

pub(crate) fn mse_of_prediction(u: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    u.iter()
        .zip(y)
        .map(|(ui, yi)| (yi - ui) * (yi - ui))
        .sum::<f64>()
        / n
}

/// Ordinary least squares with intercept of `targets` on `predictors`,
/// solved via the normal equations with partial pivoting. Dependent
/// columns get zero coefficients; the fitted values (and hence R^2) are
/// unaffected by which minimizer is picked.
fn ols_r2(data: &Dataset, predictors: &[usize], target: usize) -> f64 {
    let n = data.n();
    let k = predictors.len() + 1; // intercept first
                                  // Gram matrix and right-hand side.
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    let col = |j: usize, i: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            data.x().get(i, predictors[j - 1])
        }
    };
    for i in 0..n {
        let yi = data.x().get(i, target);
        for a in 0..k {
            let va = col(a, i);
            rhs[a] += va * yi;
            for b in a..k {
                gram[a * k + b] += va * col(b, i);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[a * k + b] = gram[b * k + a];
        }
    }
    let beta = solve_symmetric(&mut gram, &mut rhs, k);

    let mut ss_res = 0.0;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..n {
        let yi = data.x().get(i, target);
        let mut fit = 0.0;
        for a in 0..k {
            fit += beta[a] * col(a, i);
        }
        ss_res += (yi - fit) * (yi - fit);
        sum += yi;
        sum_sq += yi * yi;
    }
    let ss_tot = sum_sq - sum * sum / n as f64;
    if ss_tot <= 0.0 {
        // Constant target: perfectly fit by the intercept.
        return if ss_res <= 1e-12 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Solve `A x = b` for symmetric positive semidefinite `A` by Gaussian
/// elimination with partial pivoting; near-zero pivots zero their
/// coefficient (a basic least-squares solution).
fn solve_symmetric(a: &mut [f64], b: &mut [f64], k: usize) -> Vec<f64> {
    let scale = a
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = scale * 1e-12 * k as f64;
    let mut perm: Vec<usize> = (0..k).collect();
    for col in 0..k {
        // Pivot on the largest remaining diagonal-ish entry in this column.
        let pivot_row = (col..k)
            .max_by(|&r, &s| {
                a[perm[r] * k + col]
                    .abs()
                    .partial_cmp(&a[perm[s] * k + col].abs())
                    .unwrap()
            })
            .unwrap();
        perm.swap(col, pivot_row);
        let p = a[perm[col] * k + col];
        if p.abs() <= tol {
            continue;
        }
        for r in (col + 1)..k {
            let factor = a[perm[r] * k + col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..k {
                a[perm[r] * k + c] -= factor * a[perm[col] * k + c];
            }
            b[perm[r]] -= factor * b[perm[col]];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let p = a[perm[col] * k + col];
        if p.abs() <= tol {
            x[col] = 0.0;
            continue;
        }
        let mut v = b[perm[col]];
        for c in (col + 1)..k {
            v -= a[perm[col] * k + c] * x[c];
        }
        x[col] = v / p;
    }
    x
}

/// Mean R^2 of per-target OLS regressions (with intercept) from the
/// chosen feature columns onto each target feature column. Measures how
/// well the chosen features span the ones that were missed.
pub fn r2_basis(
    data: &Dataset,
    chosen: &BTreeSet<usize>,
    targets: &BTreeSet<usize>,
) -> Result<f64> {
    if chosen.is_empty() {
        return Err(Error::EmptyInput("chosen feature set"));
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput("target feature set"));
    }
    if chosen.intersection(targets).next().is_some() {
        return Err(Error::invalid(
            "targets",
            "chosen and target feature sets must be disjoint",
        ));
    }
    for &j in chosen.iter().chain(targets.iter()) {
        if j >= data.d() {
            return Err(Error::invalid(
                "feature index",
                format!("{j} out of range for {} columns", data.d()),
            ));
        }
    }
    let predictors: Vec<usize> = chosen.iter().copied().collect();
    let total: f64 = targets.iter().map(|&t| ols_r2(data, &predictors, t)).sum();
    Ok(total / targets.len() as f64)
}

/// Outcome of the exact two-sided sign test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub p_value: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Exact two-sided binomial sign test on the signs of paired
/// differences. Zeros are dropped; if nothing remains the test is
/// undefined and reports `p = 1`.
pub fn sign_test(diffs: &[f64]) -> Result<SignTest> {
    if diffs.is_empty() {
        return Err(Error::EmptyInput("sign test differences"));
    }
    let positives = diffs.iter().filter(|v| **v > 0.0).count();
    let negatives = diffs.iter().filter(|v| **v < 0.0).count();
    let m = positives + negatives;
    if m == 0 {
        return Ok(SignTest {
            p_value: 1.0,
            positives,
            negatives,
        });
    }
    let k = positives.min(negatives);
    // p = min(1, 2 P[Bin(m, 1/2) <= k]), computed in log space.
    let mut tail = 0.0f64;
    for i in 0..=k {
        tail += (ln_choose(m, i) - m as f64 * std::f64::consts::LN_2).exp();
    }
    Ok(SignTest {
        p_value: (2.0 * tail).min(1.0),
        positives,
        negatives,
    })
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Closed-form expected number of nonzero coordinates after `t`
/// iterations of the uniform-selection model (one uniformly chosen
/// coordinate updated, then one uniformly chosen coordinate screened,
/// per iteration):
///
/// ```text
/// a^T (1 - a^T) + sum_{i=1}^{T} a^(T-i) (1 - (1/d)^(T-i)),   a = (d-1)/d
/// ```
///
/// Its limits are `d (d-1)^2 / ((d-1) d + 1)` as `T -> inf` and `T - 1`
/// as `d -> inf`. The formula is an approximation of the model; see
/// [`mc_uniform_support`] for the simulation it is compared against.
pub fn expected_nonzeros_closed_form(d: usize, t: usize) -> f64 {
    assert!(d >= 1 && t >= 1, "d and t must be >= 1");
    let df = d as f64;
    let a = (df - 1.0) / df;
    let b = 1.0 / df;
    let a_t = a.powi(t as i32);
    let first = a_t * (1.0 - a_t);
    let mut sum = 0.0;
    for i in 1..=t {
        let e = (t - i) as i32;
        sum += a.powi(e) * (1.0 - b.powi(e));
    }
    first + sum
}

/// Simulate the uniform-selection model: every iteration one uniformly
/// chosen coordinate becomes nonzero, then one uniformly chosen
/// coordinate is zeroed (update before screen). Returns the empirical
/// mean nonzero count after `t` iterations and its standard error.
pub fn mc_uniform_support<R: Rng>(d: usize, t: usize, trials: usize, rng: &mut R) -> (f64, f64) {
    assert!(d >= 1 && t >= 1 && trials >= 1);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut nonzero = vec![false; d];
    for _ in 0..trials {
        nonzero.fill(false);
        let mut count = 0usize;
        for _ in 0..t {
            let up = rng.random_range(0..d);
            if !nonzero[up] {
                nonzero[up] = true;
                count += 1;
            }
            let down = rng.random_range(0..d);
            if nonzero[down] {
                nonzero[down] = false;
                count -= 1;
            }
        }
        sum += count as f64;
        sum_sq += (count * count) as f64;
    }
    let mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
    let stderr = (var / trials as f64).sqrt();
    (mean, stderr)
}

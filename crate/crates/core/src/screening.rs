//! Screening scores, the Wolfe gap, their sensitivity bounds, and the two
//! private screening updates.
//!
//! Everything here works with the objective `f(u) = (1/2n) ||u - y||^2`
//! evaluated at `u = Xw`, whose gradient with respect to `u` is
//! `(1/n)(u - y)` and which is both `1/n`-smooth and `1/n`-strongly
//! convex. The screening score of coordinate `i` at a feasible `w` is
//!
//! ```text
//! s_i = |x_(i)^T g| + (Xw)^T g + L (||x_(i)||_2 + ||Xw||_2) sqrt(G/mu)
//! ```
//!
//! with `g` the residual gradient, `L = mu = 1/n`, and `G` the Wolfe gap.
//! A negative score certifies that coordinate `i` is zero at the optimum,
//! so both private updates zero coordinates whose (noisy) score falls
//! below zero, using strict `< 0` comparison.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{dot, l1_norm, l2_norm, Dataset, L1Constraint};
use crate::error::{Error, Result};
use crate::mechanisms::{report_noisy_min, sample_gaussian, MechanismKind, NoiseSchedule};

/// Screening scores for every coordinate, plus the quantities they were
/// built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningScores {
    pub s: Vec<f64>,
    pub wolfe_gap: f64,
    pub smoothness_l: f64,
    pub strong_convexity_mu: f64,
}

/// Add/remove sensitivity of the screening scores under the bounds
/// `||x_i||_inf <= 1`, `|y_i| <= lambda`, `||w||_1 <= lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBounds {
    /// Sensitivity of a single coordinate's score.
    pub coord: f64,
    /// L2 sensitivity of releasing the full score vector: `coord * sqrt(d)`.
    pub vector_l2: f64,
}

/// `(1/n)(Xw - y)`: the gradient of `f(u) = (1/2n)||u - y||^2` at `u = Xw`.
pub fn residual_gradient(data: &Dataset, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "weight length {} for {} columns",
            w.len(),
            data.d()
        )));
    }
    let u = data.x().matvec(w);
    Ok(residual_gradient_at(data, &u))
}

/// Residual gradient evaluated at a precomputed `u = Xw`.
pub(crate) fn residual_gradient_at(data: &Dataset, u: &[f64]) -> Vec<f64> {
    let inv_n = 1.0 / data.n() as f64;
    u.iter()
        .zip(data.y())
        .map(|(ui, yi)| inv_n * (ui - yi))
        .collect()
}

/// Everything one iteration of the optimizer and the screening rule need:
/// `u = Xw`, the residual gradient `g`, and the weight-space gradient
/// `grad_w = X^T g`.
pub(crate) struct GradientParts {
    pub u: Vec<f64>,
    pub grad_w: Vec<f64>,
    /// `(Xw)^T g`
    pub u_dot_g: f64,
    /// `||Xw||_2`
    pub u_norm: f64,
}

pub(crate) fn gradient_parts(data: &Dataset, w: &[f64]) -> GradientParts {
    let u = data.x().matvec(w);
    let g = residual_gradient_at(data, &u);
    let grad_w = data.x().tr_matvec(&g);
    let u_dot_g = dot(&u, &g);
    let u_norm = l2_norm(&u);
    GradientParts {
        u,
        grad_w,
        u_dot_g,
        u_norm,
    }
}

fn check_feasible(w: &[f64], c: &L1Constraint) -> Result<()> {
    let norm = l1_norm(w);
    if norm > c.lambda() * (1.0 + 1e-9) {
        return Err(Error::Infeasible {
            norm,
            lambda: c.lambda(),
        });
    }
    Ok(())
}

/// Wolfe gap `max_{z in C} (Xw - Xz)^T grad f(Xw)` over the lambda-scaled
/// L1 ball. The maximum over the ball is attained at a signed vertex, so
/// the closed form is
///
/// ```text
/// G(w) = (Xw)^T g + lambda * max_j |x_(j)^T g|
/// ```
///
/// Analytically `G(w) >= 0` for feasible `w` (take `z = w`); the result
/// is clamped at zero to absorb float rounding.
pub fn wolfe_gap(data: &Dataset, w: &[f64], c: &L1Constraint) -> Result<f64> {
    if w.len() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "weight length {} for {} columns",
            w.len(),
            data.d()
        )));
    }
    check_feasible(w, c)?;
    let parts = gradient_parts(data, w);
    Ok(wolfe_gap_from_parts(&parts, c))
}

pub(crate) fn wolfe_gap_from_parts(parts: &GradientParts, c: &L1Constraint) -> f64 {
    let max_corr = parts.grad_w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (parts.u_dot_g + c.lambda() * max_corr).max(0.0)
}

/// Screening scores for all `d` coordinates at a feasible `w`.
pub fn screening_scores(data: &Dataset, w: &[f64], c: &L1Constraint) -> Result<ScreeningScores> {
    if w.len() != data.d() {
        return Err(Error::ShapeMismatch(format!(
            "weight length {} for {} columns",
            w.len(),
            data.d()
        )));
    }
    check_feasible(w, c)?;
    let parts = gradient_parts(data, w);
    Ok(scores_from_parts(data, &parts, c))
}

pub(crate) fn scores_from_parts(
    data: &Dataset,
    parts: &GradientParts,
    c: &L1Constraint,
) -> ScreeningScores {
    let n = data.n() as f64;
    let l = 1.0 / n;
    let mu = 1.0 / n;
    let gap = wolfe_gap_from_parts(parts, c);
    // sqrt(G/mu) with G clamped nonnegative by construction.
    let root = (gap / mu).sqrt();
    let s = (0..data.d())
        .map(|i| {
            parts.grad_w[i].abs() + parts.u_dot_g + l * (data.column_norm(i) + parts.u_norm) * root
        })
        .collect();
    ScreeningScores {
        s,
        wolfe_gap: gap,
        smoothness_l: l,
        strong_convexity_mu: mu,
    }
}

/// Add/remove sensitivity of one screening score,
///
/// ```text
/// Delta = 2 lambda / n + 2 lambda^2 / n + 2 lambda (1 + lambda) / n
/// ```
///
/// (the three terms bound the correlation, alignment, and gap parts of
/// the score respectively), and `Delta * sqrt(d)` for the full vector.
pub fn score_sensitivities(c: &L1Constraint, n: usize, d: usize) -> SensitivityBounds {
    let lambda = c.lambda();
    let n = n as f64;
    let coord = 2.0 * lambda / n + 2.0 * lambda * lambda / n + 2.0 * lambda * (1.0 + lambda) / n;
    SensitivityBounds {
        coord,
        vector_l2: coord * (d as f64).sqrt(),
    }
}

/// Gaussian screening update: add iid `N(0, sigma2)` noise to every score
/// and zero every coordinate whose noisy score is negative. A zero
/// variance adds no noise and consumes no randomness. The support never
/// grows.
pub fn adp_screen_update<R: Rng>(
    w: &[f64],
    scores: &ScreeningScores,
    sigma2: f64,
    rng: &mut R,
) -> Vec<f64> {
    assert_eq!(w.len(), scores.s.len(), "weights and scores disagree");
    let mut out = w.to_vec();
    for (j, &s) in scores.s.iter().enumerate() {
        let noisy = if sigma2 == 0.0 {
            s
        } else {
            s + sample_gaussian(sigma2, rng).expect("positive variance")
        };
        if noisy < 0.0 {
            out[j] = 0.0;
        }
    }
    out
}

/// Report-noisy-min screening update: select one coordinate by noisy
/// minimum of the scores and zero it if the selected noisy score is
/// negative. At most one coordinate changes, and only to zero.
pub fn rnm_screen_update<R: Rng>(
    w: &[f64],
    scores: &ScreeningScores,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Vec<f64> {
    assert_eq!(w.len(), scores.s.len(), "weights and scores disagree");
    assert_eq!(
        schedule.mechanism,
        MechanismKind::Laplace,
        "report-noisy-min needs a Laplace schedule"
    );
    let (j, noisy) =
        report_noisy_min(&scores.s, schedule.scale_or_sigma2, rng).expect("scores are nonempty");
    let mut out = w.to_vec();
    if noisy < 0.0 {
        out[j] = 0.0;
    }
    out
}

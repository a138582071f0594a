//! Differential-privacy noise primitives and composition arithmetic.
//!
//! Calibration follows the standard mechanisms: Laplace noise scaled to
//! L1 sensitivity, Gaussian noise with `sigma^2 = 2 s^2 ln(1.25/delta) /
//! eps^2` scaled to L2 sensitivity, advanced composition for repeated
//! applications, and basic composition for combining the optimizer and
//! screening budgets. All logarithms are natural.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which noise distribution a schedule uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismKind {
    Laplace,
    Gaussian,
}

/// Per-iteration privacy parameters with the calibrated noise magnitude:
/// the Laplace scale `b` for [`MechanismKind::Laplace`], the Gaussian
/// variance `sigma^2` for [`MechanismKind::Gaussian`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub eps_iter: f64,
    pub delta_iter: f64,
    pub scale_or_sigma2: f64,
    pub mechanism: MechanismKind,
}

/// One draw from Laplace(0, scale) via the inverse CDF of a uniform draw.
pub fn sample_laplace<R: Rng>(scale: f64, rng: &mut R) -> Result<f64> {
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::invalid("scale", format!("must be > 0, got {scale}")));
    }
    let u: f64 = rng.random::<f64>() - 0.5;
    // F^{-1}(p) = -b * sgn(p - 1/2) * ln(1 - 2|p - 1/2|); the argument is
    // clamped away from 0 so a draw of exactly u = 0.5 stays finite.
    let t = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    Ok(-scale * u.signum() * t.ln())
}

/// One draw from N(0, sigma2).
pub fn sample_gaussian<R: Rng>(sigma2: f64, rng: &mut R) -> Result<f64> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::invalid(
            "sigma2",
            format!("must be > 0, got {sigma2}"),
        ));
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(z * sigma2.sqrt())
}

/// Gaussian-mechanism variance `2 s^2 ln(1.25/delta) / eps^2` for an
/// L2-sensitivity-`s` release. Zero sensitivity needs no noise.
pub fn gaussian_sigma2(sensitivity: f64, eps: f64, delta: f64) -> Result<f64> {
    if sensitivity < 0.0 {
        return Err(Error::invalid(
            "sensitivity",
            format!("must be >= 0, got {sensitivity}"),
        ));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
    }
    if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::invalid(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    Ok(2.0 * sensitivity * sensitivity * (1.25 / delta).ln() / (eps * eps))
}

/// Schedule for screening all `d` coordinates at `l` chosen iterations
/// with the Gaussian mechanism under advanced composition:
///
/// ```text
/// delta_iter = delta2 / (l + 1)
/// eps_iter   = eps2 / (2 sqrt(2 l ln(1/delta_iter)))
/// sigma^2    = 2 Delta2^2 ln(1.25/delta_iter) / eps_iter^2
/// ```
///
/// where `Delta2` is the L2 sensitivity of the full score vector.
pub fn adp_schedule(
    eps2: f64,
    delta2: f64,
    l: usize,
    vector_l2_sensitivity: f64,
) -> Result<NoiseSchedule> {
    if l == 0 {
        return Err(Error::invalid("l", "must be >= 1"));
    }
    if eps2.is_nan() || eps2 <= 0.0 {
        return Err(Error::invalid("eps2", format!("must be > 0, got {eps2}")));
    }
    if delta2.is_nan() || delta2 <= 0.0 || delta2 > 1.0 {
        return Err(Error::invalid(
            "delta2",
            format!("must lie in (0, 1], got {delta2}"),
        ));
    }
    let delta_iter = delta2 / (l as f64 + 1.0);
    let eps_iter = eps2 / (2.0 * (2.0 * l as f64 * (1.0 / delta_iter).ln()).sqrt());
    let sigma2 = gaussian_sigma2(vector_l2_sensitivity, eps_iter, delta_iter)?;
    Ok(NoiseSchedule {
        eps_iter,
        delta_iter,
        scale_or_sigma2: sigma2,
        mechanism: MechanismKind::Gaussian,
    })
}

/// Schedule for report-noisy-min screening once per iteration over `T`
/// iterations under advanced composition for pure DP:
///
/// ```text
/// eps_iter = eps2 / sqrt(8 T ln(1/delta2))
/// scale    = Delta / eps_iter
/// ```
///
/// where `Delta` is the sensitivity of one screening score.
pub fn rnm_schedule(
    eps2: f64,
    delta2: f64,
    t_total: usize,
    coord_sensitivity: f64,
) -> Result<NoiseSchedule> {
    if t_total == 0 {
        return Err(Error::invalid("t_total", "must be >= 1"));
    }
    if eps2.is_nan() || eps2 <= 0.0 {
        return Err(Error::invalid("eps2", format!("must be > 0, got {eps2}")));
    }
    if delta2.is_nan() || delta2 <= 0.0 || delta2 > 1.0 {
        return Err(Error::invalid(
            "delta2",
            format!("must lie in (0, 1], got {delta2}"),
        ));
    }
    if coord_sensitivity.is_nan() || coord_sensitivity < 0.0 {
        return Err(Error::invalid(
            "coord_sensitivity",
            format!("must be >= 0, got {coord_sensitivity}"),
        ));
    }
    let eps_iter = eps2 / (8.0 * t_total as f64 * (1.0 / delta2).ln()).sqrt();
    Ok(NoiseSchedule {
        eps_iter,
        delta_iter: 0.0,
        scale_or_sigma2: coord_sensitivity / eps_iter,
        mechanism: MechanismKind::Laplace,
    })
}

/// Add iid Laplace(noise_scale) noise to every score and return the index
/// of the smallest noisy value together with that value. A zero scale adds
/// no noise (and consumes no randomness); ties break to the lowest index.
pub fn report_noisy_min<R: Rng>(
    scores: &[f64],
    noise_scale: f64,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("report_noisy_min scores"));
    }
    if noise_scale < 0.0 {
        return Err(Error::invalid(
            "noise_scale",
            format!("must be >= 0, got {noise_scale}"),
        ));
    }
    let mut best_idx = 0usize;
    let mut best = f64::INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        let noisy = if noise_scale == 0.0 {
            s
        } else {
            s + sample_laplace(noise_scale, rng)?
        };
        if noisy < best {
            best = noisy;
            best_idx = i;
        }
    }
    Ok((best_idx, best))
}

/// Basic composition: sequential `(eps_a, delta_a)` and `(eps_b, delta_b)`
/// mechanisms are jointly `(eps_a + eps_b, delta_a + delta_b)` private.
pub fn compose_basic(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

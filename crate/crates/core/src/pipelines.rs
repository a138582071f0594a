//! Full training loops: private Frank-Wolfe with aggressive
//! (all-coordinates, Gaussian) or weak (one-coordinate, report-noisy-min)
//! screening, the nonprivate baselines, and the post-hoc selection
//! baselines used for comparisons.
//!
//! Every iteration performs the optimizer step first and screens second;
//! screened coordinates keep participating in later optimizer steps (no
//! masking), so an incorrectly screened coordinate can become nonzero
//! again. Support is tracked with an exact-zero test: coordinates only
//! ever become zero by screening (or stay zero under a convex
//! combination), never by rounding.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{random_l1_point, Dataset, L1Constraint, ModelState, PrivacyBudget};
use crate::error::{Error, Result};
use crate::fw::{convex_step, dp_fw_noise_scale, FwStepConfig, StepRule};
use crate::mechanisms::{adp_schedule, report_noisy_min, rnm_schedule, sample_gaussian};
use crate::metrics::mse_of_prediction;
use crate::rng::RngStream;
use crate::screening::{
    gradient_parts, score_sensitivities, scores_from_parts, wolfe_gap_from_parts,
};

/// Which training loop to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Private optimizer + Gaussian screening of all coordinates at the
    /// chosen iterations.
    AdpScreen,
    /// Private optimizer + report-noisy-min screening of one coordinate
    /// per iteration.
    RnmScreen,
    NonprivateFw,
    NonprivateFwWithScreening,
    /// Private optimizer with no screening at all.
    DpFwPlain,
}

/// Initial iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// A random point of the lambda-ball.
    RandomBall,
    /// The zero vector.
    Zero,
}

/// Which iterations screen. Iterations are numbered `1..=T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenPlan {
    None,
    Every,
    /// Iterations `k, 2k, 3k, ...`.
    EveryKth(usize),
    /// Only iteration `T`.
    Last,
    Iterations(BTreeSet<usize>),
}

impl ScreenPlan {
    pub fn contains(&self, t: usize, t_total: usize) -> bool {
        match self {
            ScreenPlan::None => false,
            ScreenPlan::Every => true,
            ScreenPlan::EveryKth(k) => *k > 0 && t.is_multiple_of(*k),
            ScreenPlan::Last => t == t_total,
            ScreenPlan::Iterations(set) => set.contains(&t),
        }
    }

    /// Number of screening iterations in a `T`-iteration run.
    pub fn count(&self, t_total: usize) -> usize {
        match self {
            ScreenPlan::None => 0,
            ScreenPlan::Every => t_total,
            ScreenPlan::EveryKth(k) => {
                if *k == 0 {
                    0
                } else {
                    t_total / k
                }
            }
            ScreenPlan::Last => 1,
            ScreenPlan::Iterations(set) => set.len(),
        }
    }

    fn validate(&self, t_total: usize) -> Result<()> {
        match self {
            ScreenPlan::EveryKth(0) => Err(Error::invalid(
                "screen plan",
                "every-kth stride must be >= 1",
            )),
            ScreenPlan::Iterations(set) => {
                if let Some(&bad) = set.iter().find(|&&t| t == 0 || t > t_total) {
                    return Err(Error::invalid(
                        "screen plan",
                        format!("iteration {bad} outside 1..={t_total}"),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Everything one trial needs. Identical configs (including `seed` and
/// `trial_id`) reproduce bit-identical results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub algorithm: Algorithm,
    pub budget: PrivacyBudget,
    pub constraint: L1Constraint,
    pub t_total: usize,
    pub screen_iterations: ScreenPlan,
    pub init: InitKind,
    pub seed: u64,
    pub trial_id: u64,
    /// See [`FwStepConfig::lipschitz_l1`].
    pub lipschitz_l1: Option<f64>,
    /// Test hook: force the optimizer's per-vertex noise scale.
    pub fw_noise_override: Option<f64>,
    /// Test hook: force the screening noise magnitude (Laplace scale or
    /// Gaussian variance depending on the algorithm).
    pub screen_noise_override: Option<f64>,
    /// Require `|y_i| <= lambda` at validation time. The reference
    /// overscreening experiments run with this off because their targets
    /// slightly exceed the constraint radius.
    pub enforce_target_bound: bool,
}

impl TrialConfig {
    pub fn new(
        algorithm: Algorithm,
        budget: PrivacyBudget,
        constraint: L1Constraint,
        t_total: usize,
        seed: u64,
    ) -> Self {
        TrialConfig {
            algorithm,
            budget,
            constraint,
            t_total,
            screen_iterations: ScreenPlan::Every,
            init: InitKind::RandomBall,
            seed,
            trial_id: 0,
            lipschitz_l1: Some(1.0),
            fw_noise_override: None,
            screen_noise_override: None,
            enforce_target_bound: true,
        }
    }

    fn fw_config(&self) -> Result<FwStepConfig> {
        let mut cfg = FwStepConfig::new(self.t_total, self.budget.eps1, self.budget.delta1)?;
        cfg.step_rule = StepRule::Classic;
        cfg.noise_override = self.fw_noise_override;
        cfg.lipschitz_l1 = self.lipschitz_l1;
        Ok(cfg)
    }
}

/// Per-iteration nonzero counts split by a reference support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSplitTrace {
    /// Nonzero coordinates inside the reference support, per iteration.
    pub in_reference: Vec<usize>,
    /// Nonzero coordinates outside it, per iteration.
    pub out_of_reference: Vec<usize>,
}

/// Outcome of one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub final_w: Vec<f64>,
    pub support: Vec<usize>,
    pub mse_history: Vec<f64>,
    pub support_size_history: Vec<usize>,
    pub wolfe_gap_history: Vec<f64>,
    /// Present when a reference support was supplied to the runner.
    pub split_history: Option<SupportSplitTrace>,
    pub config_echo: TrialConfig,
    pub elapsed_seconds: f64,
}

// Each trial derives its noise channels from (seed, trial_id) so trials
// can run in parallel in any order.
const STREAMS_PER_TRIAL: u64 = 4;
const CHANNEL_INIT: u64 = 0;
const CHANNEL_FW: u64 = 1;
const CHANNEL_SCREEN: u64 = 2;

fn channel_rng(cfg: &TrialConfig, channel: u64) -> ChaCha8Rng {
    RngStream::new(cfg.seed, cfg.trial_id * STREAMS_PER_TRIAL + channel).rng()
}

enum ScreenMode {
    Off,
    /// Gaussian noise of the given variance on every score; all
    /// coordinates with negative noisy scores are zeroed.
    GaussianAll {
        sigma2: f64,
    },
    /// Laplace report-noisy-min with the given scale; the selected
    /// coordinate is zeroed when its noisy score is negative.
    NoisyMin {
        scale: f64,
    },
}

fn require_private_dataset(data: &Dataset, cfg: &TrialConfig) -> Result<()> {
    let bounds = data.bounds().ok_or_else(|| {
        Error::invalid(
            "dataset",
            "private pipelines need a dataset validated with validate_dataset",
        )
    })?;
    if cfg.enforce_target_bound && bounds.max_abs_target > cfg.constraint.lambda() {
        return Err(Error::TargetBoundViolation {
            row: 0,
            value: bounds.max_abs_target,
            lambda: cfg.constraint.lambda(),
        });
    }
    Ok(())
}

/// Run one trial of `cfg.algorithm`, recording per-iteration traces. A
/// reference support, when given, additionally records the per-iteration
/// split of the nonzero count into reference / non-reference coordinates.
pub fn run_trial_with_reference(
    data: &Dataset,
    cfg: &TrialConfig,
    reference: Option<&BTreeSet<usize>>,
) -> Result<TrialResult> {
    if cfg.t_total == 0 {
        return Err(Error::invalid("t_total", "must be >= 1"));
    }
    cfg.screen_iterations.validate(cfg.t_total)?;
    let private = matches!(
        cfg.algorithm,
        Algorithm::AdpScreen | Algorithm::RnmScreen | Algorithm::DpFwPlain
    );
    if private {
        require_private_dataset(data, cfg)?;
    }

    let c = cfg.constraint;
    let d = data.d();
    let (eps2, delta2) = cfg.budget.screening();

    // Resolve the screening mechanism and which iterations it fires on.
    let (mode, plan) = match cfg.algorithm {
        Algorithm::NonprivateFw | Algorithm::DpFwPlain => (ScreenMode::Off, ScreenPlan::None),
        Algorithm::NonprivateFwWithScreening => (
            ScreenMode::GaussianAll { sigma2: 0.0 },
            cfg.screen_iterations.clone(),
        ),
        Algorithm::AdpScreen => {
            let l = cfg.screen_iterations.count(cfg.t_total);
            if l == 0 {
                (ScreenMode::Off, ScreenPlan::None)
            } else {
                let sigma2 = match cfg.screen_noise_override {
                    Some(v) => v,
                    None => {
                        let delta2_vec = score_sensitivities(&c, data.n(), d).vector_l2;
                        adp_schedule(eps2, delta2, l, delta2_vec)?.scale_or_sigma2
                    }
                };
                (
                    ScreenMode::GaussianAll { sigma2 },
                    cfg.screen_iterations.clone(),
                )
            }
        }
        Algorithm::RnmScreen => {
            let scale = match cfg.screen_noise_override {
                Some(v) => v,
                None => {
                    let coord = score_sensitivities(&c, data.n(), d).coord;
                    rnm_schedule(eps2, delta2, cfg.t_total, coord)?.scale_or_sigma2
                }
            };
            (ScreenMode::NoisyMin { scale }, ScreenPlan::Every)
        }
    };

    let fw_cfg = cfg.fw_config()?;
    let fw_noise_scale = match cfg.algorithm {
        Algorithm::NonprivateFw | Algorithm::NonprivateFwWithScreening => 0.0,
        _ => cfg
            .fw_noise_override
            .unwrap_or_else(|| dp_fw_noise_scale(&c, data.n(), &fw_cfg)),
    };

    let start = Instant::now();
    let mut init_rng = channel_rng(cfg, CHANNEL_INIT);
    let mut fw_rng = channel_rng(cfg, CHANNEL_FW);
    let mut screen_rng = channel_rng(cfg, CHANNEL_SCREEN);

    let mut w = match cfg.init {
        InitKind::Zero => vec![0.0; d],
        InitKind::RandomBall => random_l1_point(d, &c, &mut init_rng),
    };
    let mut parts = gradient_parts(data, &w);

    let mut mse_history = Vec::with_capacity(cfg.t_total);
    let mut support_size_history = Vec::with_capacity(cfg.t_total);
    let mut wolfe_gap_history = Vec::with_capacity(cfg.t_total);
    let mut split = reference.map(|_| SupportSplitTrace {
        in_reference: Vec::with_capacity(cfg.t_total),
        out_of_reference: Vec::with_capacity(cfg.t_total),
    });

    for t in 1..=cfg.t_total {
        // Optimizer step. The loop counts iterations from 1, so the
        // first step uses gamma_1 = 2/3 and the initial point is damped
        // rather than erased (a gamma of 1 would make the random-ball
        // initialization a no-op).
        let (j, sign) =
            crate::fw::noisy_vertex_min(&parts.grad_w, c.lambda(), fw_noise_scale, &mut fw_rng);
        let gamma = fw_cfg.step_rule.gamma(t);
        w = convex_step(&w, j, sign, c.lambda(), gamma);
        parts = gradient_parts(data, &w);

        // Screening step.
        if plan.contains(t, cfg.t_total) {
            let scores = scores_from_parts(data, &parts, &c);
            let changed = match mode {
                ScreenMode::Off => false,
                ScreenMode::GaussianAll { sigma2 } => {
                    let mut any = false;
                    for (wj, &s) in w.iter_mut().zip(&scores.s) {
                        let noisy = if sigma2 == 0.0 {
                            s
                        } else {
                            s + sample_gaussian(sigma2, &mut screen_rng).expect("sigma2 > 0")
                        };
                        if noisy < 0.0 && *wj != 0.0 {
                            *wj = 0.0;
                            any = true;
                        }
                    }
                    any
                }
                ScreenMode::NoisyMin { scale } => {
                    let (idx, noisy) = report_noisy_min(&scores.s, scale, &mut screen_rng)
                        .expect("scores nonempty");
                    if noisy < 0.0 && w[idx] != 0.0 {
                        w[idx] = 0.0;
                        true
                    } else {
                        false
                    }
                }
            };
            if changed {
                parts = gradient_parts(data, &w);
            }
        }

        debug_assert!(
            crate::domain::l1_norm(&w) <= c.lambda() * (1.0 + 1e-9),
            "iterate left the feasible ball"
        );

        // End-of-iteration traces.
        mse_history.push(mse_of_prediction(&parts.u, data.y()));
        wolfe_gap_history.push(wolfe_gap_from_parts(&parts, &c));
        let nonzero = w.iter().filter(|v| **v != 0.0).count();
        support_size_history.push(nonzero);
        if let (Some(split), Some(reference)) = (split.as_mut(), reference) {
            let in_ref = w
                .iter()
                .enumerate()
                .filter(|(jj, v)| **v != 0.0 && reference.contains(jj))
                .count();
            split.in_reference.push(in_ref);
            split.out_of_reference.push(nonzero - in_ref);
        }
    }

    let state = ModelState::from_weights(w);
    debug_assert!(state.check_feasible(&c).is_ok());
    Ok(TrialResult {
        support: state.support(),
        final_w: state.w,
        mse_history,
        support_size_history,
        wolfe_gap_history,
        split_history: split,
        config_echo: cfg.clone(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Run one trial without a reference support.
pub fn run_trial(data: &Dataset, cfg: &TrialConfig) -> Result<TrialResult> {
    run_trial_with_reference(data, cfg, None)
}

/// Private optimizer with Gaussian all-coordinate screening.
pub fn run_adp_screen(data: &Dataset, cfg: &TrialConfig) -> Result<TrialResult> {
    if cfg.algorithm != Algorithm::AdpScreen {
        return Err(Error::invalid("algorithm", "config is not adp-screen"));
    }
    run_trial(data, cfg)
}

/// Private optimizer with report-noisy-min screening.
pub fn run_rnm_screen(data: &Dataset, cfg: &TrialConfig) -> Result<TrialResult> {
    if cfg.algorithm != Algorithm::RnmScreen {
        return Err(Error::invalid("algorithm", "config is not rnm-screen"));
    }
    run_trial(data, cfg)
}

/// Nonprivate Frank-Wolfe, optionally with the noiseless screening rule
/// applied at the given iterations.
pub fn run_nonprivate(
    data: &Dataset,
    cfg: &TrialConfig,
    with_screening: bool,
    screen_iterations: ScreenPlan,
) -> Result<TrialResult> {
    let mut cfg = cfg.clone();
    cfg.algorithm = if with_screening {
        Algorithm::NonprivateFwWithScreening
    } else {
        Algorithm::NonprivateFw
    };
    cfg.screen_iterations = screen_iterations;
    run_trial(data, &cfg)
}

/// Run `n_trials` independent trials in parallel. Trial `i` gets
/// `trial_id = base.trial_id + i`; results come back ordered by trial.
pub fn run_many(
    data: &Dataset,
    base: &TrialConfig,
    n_trials: usize,
    reference: Option<&BTreeSet<usize>>,
) -> Result<Vec<TrialResult>> {
    (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut cfg = base.clone();
            cfg.trial_id = base.trial_id + i as u64;
            run_trial_with_reference(data, &cfg, reference)
        })
        .collect()
}

/// Keep only the `k` largest-magnitude coordinates (ties break to the
/// lowest index), zeroing the rest.
pub fn oracle_k_clip(w: &[f64], k: usize) -> Result<Vec<f64>> {
    if k > w.len() {
        return Err(Error::invalid(
            "k",
            format!("{k} exceeds the {}-dimensional weight vector", w.len()),
        ));
    }
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap().then(a.cmp(&b)));
    let mut out = vec![0.0; w.len()];
    for &j in order.iter().take(k) {
        out[j] = w[j];
    }
    Ok(out)
}

/// Indices of the `k` columns with the largest L1 norm (ties break to
/// the lowest index), in increasing index order.
pub fn preselect_k_features(data: &Dataset, k: usize) -> Result<Vec<usize>> {
    if k > data.d() {
        return Err(Error::invalid(
            "k",
            format!("{k} exceeds the {} available features", data.d()),
        ));
    }
    let norms = data.x().column_l1_norms();
    let mut order: Vec<usize> = (0..data.d()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.into_iter().take(k).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Nonprivate Frank-Wolfe restricted to the `k` highest-L1-norm
/// features, embedded back into the full coordinate space.
pub fn run_preselect_fw(data: &Dataset, cfg: &TrialConfig, k: usize) -> Result<TrialResult> {
    let chosen = preselect_k_features(data, k)?;
    let sub = select_columns(data, &chosen)?;
    let mut sub_cfg = cfg.clone();
    sub_cfg.algorithm = Algorithm::NonprivateFw;
    let sub_result = run_trial(&sub, &sub_cfg)?;
    let mut final_w = vec![0.0; data.d()];
    for (local, &global) in chosen.iter().enumerate() {
        final_w[global] = sub_result.final_w[local];
    }
    let support: Vec<usize> = final_w
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(TrialResult {
        final_w,
        support,
        config_echo: cfg.clone(),
        ..sub_result
    })
}

fn select_columns(data: &Dataset, cols: &[usize]) -> Result<Dataset> {
    let rows: Vec<Vec<f64>> = (0..data.n())
        .map(|i| cols.iter().map(|&j| data.x().get(i, j)).collect())
        .collect();
    Dataset::new(crate::domain::Matrix::from_rows(rows)?, data.y().to_vec())
}

/// The uniform-selection diagnostic: replace both the optimizer's vertex
/// choice and the screening choice by uniform draws, keeping the
/// update-then-screen iteration order. Returns the nonzero count after
/// each iteration.
pub fn run_uniform_ablation<R: Rng>(d: usize, t_total: usize, rng: &mut R) -> Vec<usize> {
    assert!(d >= 1 && t_total >= 1);
    let mut nonzero = vec![false; d];
    let mut count = 0usize;
    let mut history = Vec::with_capacity(t_total);
    for _ in 0..t_total {
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
        history.push(count);
    }
    history
}

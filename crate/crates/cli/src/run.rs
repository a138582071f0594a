//! `run`: execute repeated trials of one pipeline on a dataset and
//! persist results.
//!
//! Flags override config-file values; the effective configuration is
//! echoed both into `run_config.json` and into every record of the
//! JSON-lines results file.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use dp_screen::data::{
    load_csv, scale_linf, scale_target_to_bound, yeo_johnson_fit_dataset, TargetColumn,
};
use dp_screen::domain::{validate_dataset, Dataset, L1Constraint, PrivacyBudget};
use dp_screen::pipelines::{
    oracle_k_clip, run_many, run_preselect_fw, Algorithm, InitKind, ScreenPlan, TrialConfig,
    TrialResult,
};

use crate::records::{summary_csv, write_jsonl, TrialRecord};
use crate::synth::SynthMeta;

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Input dataset CSV (features plus one target column).
    #[arg(long)]
    pub data: PathBuf,
    /// Target column name, or index (negative counts from the end).
    #[arg(long, default_value = "y")]
    pub target: String,
    /// The CSV has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Metadata sidecar of `synth` (provides the reference support).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// JSON file with a reference support (an array of indices, or an
    /// object with a `true_support` field).
    #[arg(long)]
    pub ref_support: Option<PathBuf>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Iterations per trial (T).
    #[arg(long = "iters", alias = "t", alias = "T")]
    pub t_total: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Screening iterations: every | none | last | every:K | list:1,5,9.
    #[arg(long)]
    pub screen: Option<String>,
    /// Initial iterate: random-ball | zero.
    #[arg(long)]
    pub init: Option<String>,
    /// Assumed L1-Lipschitz constant of the per-example loss for the
    /// optimizer's noise calibration; "conservative" uses the worst-case
    /// bound implied by the data constraints.
    #[arg(long)]
    pub fw_lipschitz: Option<String>,
    /// Apply a fitted Yeo-Johnson transform to every feature column and
    /// the target before scaling.
    #[arg(long)]
    pub yeo_johnson: bool,
    /// Rescale the target so max|y| = lambda when it exceeds lambda.
    #[arg(long)]
    pub scale_y_to_lambda: bool,
    /// Rescale the target to an explicit bound instead (the
    /// no-transform ablations use 1.0).
    #[arg(long, conflicts_with = "scale_y_to_lambda")]
    pub scale_y: Option<f64>,
    /// Skip the |y| <= lambda validation check.
    #[arg(long)]
    pub no_target_bound: bool,
    /// After each trial, also record an oracle clip of the final weights
    /// to the K largest magnitudes (kept in `oracle_k.jsonl`).
    #[arg(long)]
    pub oracle_k: Option<usize>,
    /// Run nonprivate Frank-Wolfe on the K highest-L1-norm features
    /// instead of the full feature set.
    #[arg(long)]
    pub preselect_k: Option<usize>,
    /// Worker threads for trial parallelism (default: env
    /// DP_SCREEN_WORKERS, then all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record per-iteration traces in the results file: on | off.
    #[arg(long)]
    pub traces: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// The resolved configuration, echoed into `run_config.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveRunConfig {
    pub algo: String,
    pub eps1: f64,
    pub delta1: f64,
    pub eps2: f64,
    pub delta2: f64,
    pub lambda: f64,
    pub t_total: usize,
    pub trials: usize,
    pub seed: u64,
    pub screen: String,
    pub init: String,
    pub fw_lipschitz: String,
    pub yeo_johnson: bool,
    /// Bound the target was rescaled to, when requested.
    pub scale_y_bound: Option<f64>,
    pub no_target_bound: bool,
    pub oracle_k: Option<usize>,
    pub preselect_k: Option<usize>,
    pub traces: bool,
    pub data: String,
    pub target: String,
}

/// Values a config file may provide; flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRunConfig {
    pub algo: Option<String>,
    pub eps1: Option<f64>,
    pub delta1: Option<f64>,
    pub eps2: Option<f64>,
    pub delta2: Option<f64>,
    pub lambda: Option<f64>,
    pub t_total: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub screen: Option<String>,
    pub init: Option<String>,
    pub fw_lipschitz: Option<String>,
    pub yeo_johnson: Option<bool>,
    pub scale_y_to_lambda: Option<bool>,
    pub scale_y: Option<f64>,
    pub no_target_bound: Option<bool>,
    pub oracle_k: Option<usize>,
    pub preselect_k: Option<usize>,
    pub traces: Option<bool>,
}

fn parse_algorithm(name: &str) -> Result<Algorithm> {
    Ok(match name {
        "adp-screen" => Algorithm::AdpScreen,
        "rnm-screen" => Algorithm::RnmScreen,
        "nonprivate-fw" => Algorithm::NonprivateFw,
        "nonprivate-fw-screen" | "nonprivate-fw-with-screening" => {
            Algorithm::NonprivateFwWithScreening
        }
        "dp-fw-plain" | "dp-fw" => Algorithm::DpFwPlain,
        other => bail!(
            "unknown algorithm {other:?}; expected one of adp-screen, rnm-screen, \
             nonprivate-fw, nonprivate-fw-screen, dp-fw-plain"
        ),
    })
}

pub fn parse_screen_plan(text: &str) -> Result<ScreenPlan> {
    Ok(match text {
        "every" => ScreenPlan::Every,
        "none" => ScreenPlan::None,
        "last" => ScreenPlan::Last,
        other => {
            if let Some(k) = other.strip_prefix("every:") {
                ScreenPlan::EveryKth(k.parse().context("parsing every:K stride")?)
            } else if let Some(list) = other.strip_prefix("list:") {
                let set: BTreeSet<usize> = list
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse().context("parsing screen iteration list"))
                    .collect::<Result<_>>()?;
                ScreenPlan::Iterations(set)
            } else {
                bail!("unknown screen plan {other:?}");
            }
        }
    })
}

fn parse_init(text: &str) -> Result<InitKind> {
    Ok(match text {
        "random-ball" | "random" => InitKind::RandomBall,
        "zero" => InitKind::Zero,
        other => bail!("unknown init {other:?}; expected random-ball or zero"),
    })
}

fn parse_lipschitz(text: &str) -> Result<Option<f64>> {
    if text == "conservative" {
        return Ok(None);
    }
    let v: f64 = text
        .parse()
        .context("parsing --fw-lipschitz (a number or \"conservative\")")?;
    if v.is_nan() || v <= 0.0 {
        bail!("--fw-lipschitz must be positive");
    }
    Ok(Some(v))
}

fn load_reference(args: &RunArgs) -> Result<Option<BTreeSet<usize>>> {
    if let Some(path) = &args.ref_support {
        let text = fs::read_to_string(path)?;
        let parsed: serde_json::Value = serde_json::from_str(&text)?;
        let arr = match &parsed {
            serde_json::Value::Array(a) => a.clone(),
            serde_json::Value::Object(o) => o
                .get("true_support")
                .and_then(|v| v.as_array())
                .cloned()
                .context("reference file object needs a true_support array")?,
            _ => bail!("reference support file must be an array or an object"),
        };
        let set = arr
            .iter()
            .map(|v| {
                v.as_u64()
                    .map(|u| u as usize)
                    .context("reference support entries must be indices")
            })
            .collect::<Result<_>>()?;
        return Ok(Some(set));
    }
    if let Some(path) = &args.meta {
        let meta: SynthMeta = serde_json::from_str(&fs::read_to_string(path)?)?;
        return Ok(Some(meta.true_support.into_iter().collect()));
    }
    Ok(None)
}

/// What preprocessing did to the data, echoed next to the results for
/// provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessReport {
    /// Fitted transform parameters, when the transform was requested.
    pub yeo_johnson: Option<dp_screen::data::YeoJohnsonParams>,
    /// Multiplier applied to the whole design matrix (1.0 when it was
    /// already bounded).
    pub x_scale: f64,
    /// Multiplier applied to the target (1.0 when no rescaling was
    /// requested or needed).
    pub y_scale: f64,
}

/// Preprocess: optional Yeo-Johnson on all columns and the target, then
/// global L-infinity scaling, then optional target rescaling to lambda.
fn preprocess(
    mut dataset: Dataset,
    yeo_johnson: bool,
    scale_y_bound: Option<f64>,
) -> Result<(Dataset, PreprocessReport)> {
    let mut report = PreprocessReport {
        yeo_johnson: None,
        x_scale: 1.0,
        y_scale: 1.0,
    };
    if yeo_johnson {
        let (transformed, params) = yeo_johnson_fit_dataset(&dataset, true)?;
        for (j, fit) in params.features.iter().enumerate() {
            if fit.degenerate {
                eprintln!("warning: feature column {j} is constant; leaving it untransformed");
            }
        }
        if params.target.is_some_and(|fit| fit.degenerate) {
            eprintln!("warning: target column is constant; leaving it untransformed");
        }
        dataset = transformed;
        report.yeo_johnson = Some(params);
    }
    let max_abs = dataset.x().max_abs();
    if max_abs > 1.0 {
        report.x_scale = 1.0 / max_abs;
    }
    dataset = scale_linf(dataset);
    if let Some(bound) = scale_y_bound {
        let (scaled, factor) = scale_target_to_bound(dataset, bound);
        if factor != 1.0 {
            eprintln!("note: target rescaled by {factor} to satisfy |y| <= {bound}");
        }
        report.y_scale = factor;
        dataset = scaled;
    }
    Ok((dataset, report))
}

pub fn run(args: RunArgs) -> Result<()> {
    let file_cfg: FileRunConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing config file {}", path.display()))?,
        None => FileRunConfig::default(),
    };

    macro_rules! resolve {
        ($flag:expr, $file:expr, $default:expr) => {
            $flag.clone().or($file.clone()).unwrap_or($default)
        };
        ($flag:expr, $file:expr) => {
            $flag
                .clone()
                .or($file.clone())
                .context(concat!("missing required option ", stringify!($flag)))?
        };
    }

    let lambda = resolve!(args.lambda, file_cfg.lambda);
    let effective = EffectiveRunConfig {
        algo: resolve!(args.algo, file_cfg.algo, "rnm-screen".to_string()),
        eps1: resolve!(args.eps1, file_cfg.eps1),
        delta1: resolve!(args.delta1, file_cfg.delta1),
        eps2: resolve!(args.eps2, file_cfg.eps2),
        delta2: resolve!(args.delta2, file_cfg.delta2),
        lambda,
        t_total: resolve!(args.t_total, file_cfg.t_total),
        trials: resolve!(args.trials, file_cfg.trials, 1),
        seed: resolve!(args.seed, file_cfg.seed, 0),
        screen: resolve!(args.screen, file_cfg.screen, "every".to_string()),
        init: resolve!(args.init, file_cfg.init, "random-ball".to_string()),
        fw_lipschitz: resolve!(args.fw_lipschitz, file_cfg.fw_lipschitz, "1".to_string()),
        yeo_johnson: args.yeo_johnson || file_cfg.yeo_johnson.unwrap_or(false),
        scale_y_bound: args.scale_y.or(file_cfg.scale_y).or_else(|| {
            (args.scale_y_to_lambda || file_cfg.scale_y_to_lambda.unwrap_or(false))
                .then_some(lambda)
        }),
        no_target_bound: args.no_target_bound || file_cfg.no_target_bound.unwrap_or(false),
        oracle_k: args.oracle_k.or(file_cfg.oracle_k),
        preselect_k: args.preselect_k.or(file_cfg.preselect_k),
        traces: match &args.traces {
            Some(t) => match t.as_str() {
                "on" => true,
                "off" => false,
                other => bail!("--traces must be on or off, got {other:?}"),
            },
            None => file_cfg.traces.unwrap_or(false),
        },
        data: args.data.display().to_string(),
        target: args.target.clone(),
    };
    if effective.trials == 0 {
        bail!("--trials must be >= 1");
    }

    // Load and preprocess the dataset, then validate the bounds the
    // private pipelines rely on.
    let target = match effective.target.parse::<i64>() {
        Ok(idx) => TargetColumn::Index(idx),
        Err(_) => TargetColumn::Name(effective.target.clone()),
    };
    let mut algorithm = parse_algorithm(&effective.algo)?;
    // An explicit screening plan together with the plain nonprivate
    // optimizer means "nonprivate with screening"; honoring it beats
    // silently ignoring the flag.
    if algorithm == Algorithm::NonprivateFw
        && (args.screen.is_some() || file_cfg.screen.is_some())
        && !matches!(parse_screen_plan(&effective.screen)?, ScreenPlan::None)
    {
        eprintln!("note: --screen with nonprivate-fw enables the noiseless screening rule");
        algorithm = Algorithm::NonprivateFwWithScreening;
    }
    let private = matches!(
        algorithm,
        Algorithm::AdpScreen | Algorithm::RnmScreen | Algorithm::DpFwPlain
    );

    let loaded = load_csv(&args.data, &target, !args.no_header)?;
    let constraint = L1Constraint::new(effective.lambda)?;
    let (dataset, preprocess_report) = preprocess(
        loaded.dataset,
        effective.yeo_johnson,
        effective.scale_y_bound,
    )?;
    // Only the private pipelines rely on the |y| <= lambda bound.
    let require_bound = private && !effective.no_target_bound;
    let dataset = validate_dataset(dataset, constraint, require_bound)?;

    let reference = load_reference(&args)?;
    let budget = PrivacyBudget::new(
        effective.eps1,
        effective.delta1,
        effective.eps2,
        effective.delta2,
    )?;
    let mut cfg = TrialConfig::new(
        algorithm,
        budget,
        constraint,
        effective.t_total,
        effective.seed,
    );
    cfg.screen_iterations = parse_screen_plan(&effective.screen)?;
    cfg.init = parse_init(&effective.init)?;
    cfg.lipschitz_l1 = parse_lipschitz(&effective.fw_lipschitz)?;
    cfg.enforce_target_bound = !effective.no_target_bound;

    let workers = args
        .workers
        .or_else(|| {
            std::env::var("DP_SCREEN_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);

    let results = run_trials(&dataset, &cfg, &effective, reference.as_ref(), workers)?;

    fs::create_dir_all(&args.out)?;
    fs::write(
        args.out.join("run_config.json"),
        serde_json::to_string_pretty(&effective)? + "\n",
    )?;
    fs::write(
        args.out.join("preprocessing.json"),
        serde_json::to_string_pretty(&preprocess_report)? + "\n",
    )?;

    let mut records = Vec::with_capacity(results.len());
    for r in &results {
        records.push(TrialRecord::from_result(
            r,
            &dataset,
            reference.as_ref(),
            effective.traces,
        )?);
    }
    write_jsonl(&args.out.join("results.jsonl"), &records)?;
    fs::write(args.out.join("summary.csv"), summary_csv(&records))?;

    // Oracle clip baseline: post-hoc truncation of each trial's weights.
    // The clipped model's error replaces the trial's trace so the
    // record's final_mse describes the clipped weights.
    if let Some(k) = effective.oracle_k {
        let mut clipped = Vec::with_capacity(results.len());
        for r in &results {
            let w = oracle_k_clip(&r.final_w, k)?;
            let mut alt = r.clone();
            alt.mse_history = vec![dp_screen::metrics::mse(&dataset, &w)?];
            alt.support = dp_screen::domain::support_of(&w);
            alt.final_w = w;
            clipped.push(TrialRecord::from_result(
                &alt,
                &dataset,
                reference.as_ref(),
                false,
            )?);
        }
        write_jsonl(&args.out.join("oracle_k.jsonl"), &clipped)?;
        fs::write(args.out.join("oracle_k_summary.csv"), summary_csv(&clipped))?;
    }

    println!(
        "wrote {} trials to {}",
        records.len(),
        args.out.join("results.jsonl").display()
    );
    for line in summary_csv(&records).lines() {
        println!("{line}");
    }
    Ok(())
}

fn run_trials(
    dataset: &Dataset,
    cfg: &TrialConfig,
    effective: &EffectiveRunConfig,
    reference: Option<&BTreeSet<usize>>,
    workers: usize,
) -> Result<Vec<TrialResult>> {
    let body = || -> Result<Vec<TrialResult>> {
        if let Some(k) = effective.preselect_k {
            // One deterministic trial per trial id; preselection is
            // nonprivate Frank-Wolfe on a fixed feature subset.
            (0..effective.trials)
                .map(|i| {
                    let mut one = cfg.clone();
                    one.trial_id = i as u64;
                    Ok(run_preselect_fw(dataset, &one, k)?)
                })
                .collect()
        } else {
            Ok(run_many(dataset, cfg, effective.trials, reference)?)
        }
    };
    if workers == 0 {
        body()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .context("building worker pool")?;
        pool.install(body)
    }
}

//! On-disk record formats: JSON-lines trial records, CSV summaries, and
//! CSV plot data.
//!
//! Records are self-describing (every record echoes the configuration it
//! was produced under) and deterministic: rerunning an experiment with
//! the same config and seed produces byte-identical files. Wall-clock
//! times are deliberately kept out of the records for that reason.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use dp_screen::metrics::{sparsity, support_confusion};
use dp_screen::pipelines::{TrialConfig, TrialResult};

/// Metric block of one trial. Confusion rates are present only when a
/// reference support was available.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricBlock {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub f1: Option<f64>,
    /// Fraction of exactly-zero coordinates.
    pub sparsity: f64,
    /// Complementary fraction of nonzero coordinates.
    pub nonzero_fraction: f64,
    pub final_mse: f64,
    /// Mean R^2 of regressing the missed reference features on the
    /// chosen ones; present when a reference support was available and
    /// both sets were nonempty.
    pub r2_basis: Option<f64>,
}

/// Optional per-iteration traces.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceBlock {
    pub mse: Vec<f64>,
    pub support_size: Vec<usize>,
    pub wolfe_gap: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_in_reference: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_out_of_reference: Option<Vec<usize>>,
}

/// One line of the JSON-lines results file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub seed: u64,
    pub algorithm: String,
    pub eps1: f64,
    pub delta1: f64,
    pub eps2: f64,
    pub delta2: f64,
    pub lambda: f64,
    pub t_total: usize,
    pub d: usize,
    pub n: usize,
    pub final_support: Vec<usize>,
    pub metrics: MetricBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<TraceBlock>,
    pub config: TrialConfig,
}

impl TrialRecord {
    pub fn from_result(
        result: &TrialResult,
        data: &dp_screen::domain::Dataset,
        reference: Option<&BTreeSet<usize>>,
        with_traces: bool,
    ) -> Result<Self> {
        let cfg = &result.config_echo;
        let confusion = reference
            .map(|r| support_confusion(&result.final_w, r))
            .transpose()?;
        let r2 = match reference {
            Some(reference) => r2_vs_reference(data, &result.final_w, reference)?,
            None => None,
        };
        let frac_zero = sparsity(&result.final_w);
        let final_mse = *result
            .mse_history
            .last()
            .context("trial recorded no iterations")?;
        let traces = with_traces.then(|| TraceBlock {
            mse: result.mse_history.clone(),
            support_size: result.support_size_history.clone(),
            wolfe_gap: result.wolfe_gap_history.clone(),
            support_in_reference: result
                .split_history
                .as_ref()
                .map(|s| s.in_reference.clone()),
            support_out_of_reference: result
                .split_history
                .as_ref()
                .map(|s| s.out_of_reference.clone()),
        });
        Ok(TrialRecord {
            trial_id: cfg.trial_id,
            seed: cfg.seed,
            algorithm: algorithm_name(cfg),
            eps1: cfg.budget.eps1,
            delta1: cfg.budget.delta1,
            eps2: cfg.budget.eps2,
            delta2: cfg.budget.delta2,
            lambda: cfg.constraint.lambda(),
            t_total: cfg.t_total,
            d: data.d(),
            n: data.n(),
            final_support: result.support.clone(),
            metrics: MetricBlock {
                tpr: confusion.map(|c| c.tpr),
                fpr: confusion.map(|c| c.fpr),
                f1: confusion.map(|c| c.f1),
                sparsity: frac_zero,
                nonzero_fraction: 1.0 - frac_zero,
                final_mse,
                r2_basis: r2,
            },
            traces,
            config: cfg.clone(),
        })
    }
}

/// Mean R^2 of regressing the reference features the estimate missed on
/// the features it kept. `None` when either set is empty.
pub fn r2_vs_reference(
    data: &dp_screen::domain::Dataset,
    final_w: &[f64],
    reference: &BTreeSet<usize>,
) -> Result<Option<f64>> {
    let chosen: BTreeSet<usize> = dp_screen::domain::support_of(final_w).into_iter().collect();
    let missed: BTreeSet<usize> = reference.difference(&chosen).copied().collect();
    if chosen.is_empty() || missed.is_empty() {
        return Ok(None);
    }
    Ok(Some(dp_screen::metrics::r2_basis(data, &chosen, &missed)?))
}

pub fn algorithm_name(cfg: &TrialConfig) -> String {
    serde_json::to_value(cfg.algorithm)
        .expect("algorithm serializes")
        .as_str()
        .expect("algorithm serializes to a string")
        .to_string()
}

/// Write records as JSON lines, ordered by trial id.
pub fn write_jsonl(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).context("parsing results record"))
        .collect()
}

type MetricGetter = Box<dyn Fn(&TrialRecord) -> Option<f64>>;

/// Named columns summarized as mean and sample standard deviation.
pub fn summary_csv(records: &[TrialRecord]) -> String {
    let columns: [(&str, MetricGetter); 7] = [
        ("tpr", Box::new(|r| r.metrics.tpr)),
        ("fpr", Box::new(|r| r.metrics.fpr)),
        ("f1", Box::new(|r| r.metrics.f1)),
        ("sparsity", Box::new(|r| Some(r.metrics.sparsity))),
        (
            "nonzero_fraction",
            Box::new(|r| Some(r.metrics.nonzero_fraction)),
        ),
        ("final_mse", Box::new(|r| Some(r.metrics.final_mse))),
        ("r2_basis", Box::new(|r| r.metrics.r2_basis)),
    ];
    let mut out = String::from("metric,count,mean,std\n");
    for (name, get) in &columns {
        let values: Vec<f64> = records.iter().filter_map(get).collect();
        if values.is_empty() {
            let _ = writeln!(out, "{name},0,,");
            continue;
        }
        let (mean, std) = mean_std(&values);
        let _ = writeln!(out, "{name},{},{mean},{std}", values.len());
    }
    out
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Tidy per-iteration MSE plot data.
pub fn plot_mse_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("trial_id,iteration,mse\n");
    for r in records {
        if let Some(traces) = &r.traces {
            for (i, v) in traces.mse.iter().enumerate() {
                let _ = writeln!(out, "{},{},{v}", r.trial_id, i + 1);
            }
        }
    }
    out
}

/// Tidy per-iteration support plot data, split by the reference support
/// when the run recorded the split.
pub fn plot_support_csv(records: &[TrialRecord]) -> String {
    let mut out =
        String::from("trial_id,iteration,nonzero,in_reference,out_of_reference,wolfe_gap\n");
    for r in records {
        if let Some(traces) = &r.traces {
            for i in 0..traces.support_size.len() {
                let in_ref = traces
                    .support_in_reference
                    .as_ref()
                    .map(|v| v[i].to_string())
                    .unwrap_or_default();
                let out_ref = traces
                    .support_out_of_reference
                    .as_ref()
                    .map(|v| v[i].to_string())
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.trial_id,
                    i + 1,
                    traces.support_size[i],
                    in_ref,
                    out_ref,
                    traces.wolfe_gap[i]
                );
            }
        }
    }
    out
}

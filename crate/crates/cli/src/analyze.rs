//! `analyze`: recompute metrics against a reference support, run sign
//! tests between two results files, and emit tidy CSV plot data.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use dp_screen::metrics::{sign_test, support_confusion};

use crate::records::{mean_std, plot_mse_csv, plot_support_csv, read_jsonl, TrialRecord};
use crate::synth::SynthMeta;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// JSON-lines results file to analyze.
    #[arg(long)]
    pub results: PathBuf,
    /// Second results file; paired sign tests compare `results`
    /// against it trial by trial.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Reference support (JSON array, object with `true_support`, or a
    /// synth metadata file). Confusion metrics are recomputed against it.
    #[arg(long)]
    pub ref_support: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn load_reference(path: &PathBuf) -> Result<BTreeSet<usize>> {
    let text = fs::read_to_string(path)?;
    if let Ok(meta) = serde_json::from_str::<SynthMeta>(&text) {
        return Ok(meta.true_support.into_iter().collect());
    }
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let arr = match &value {
        serde_json::Value::Array(a) => a.clone(),
        serde_json::Value::Object(o) => {
            o.get("true_support")
                .and_then(|v| v.as_array())
                .cloned()
                .context("reference file object needs a true_support array")?
        }
        _ => bail!("reference support file must be an array or an object"),
    };
    arr.iter()
        .map(|v| {
            v.as_u64()
                .map(|u| u as usize)
                .context("reference support entries must be indices")
        })
        .collect()
}

/// Confusion metrics of a record, recomputed from its stored support.
fn recompute_confusion(
    record: &TrialRecord,
    reference: &BTreeSet<usize>,
) -> Result<(f64, f64, f64)> {
    let mut w = vec![0.0; record.d];
    for &j in &record.final_support {
        if j >= record.d {
            bail!("record support index {j} out of range for d = {}", record.d);
        }
        w[j] = 1.0;
    }
    let c = support_confusion(&w, reference)?;
    Ok((c.tpr, c.fpr, c.f1))
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let records = read_jsonl(&args.results)?;
    if records.is_empty() {
        bail!("no records in {}", args.results.display());
    }
    let reference = args.ref_support.as_ref().map(load_reference).transpose()?;
    fs::create_dir_all(&args.out)?;

    // Per-trial metric table, recomputing confusion when a reference is
    // available here.
    let mut table = String::from(
        "trial_id,algorithm,tpr,fpr,f1,sparsity,nonzero_fraction,final_mse,r2_basis\n",
    );
    let mut metric_columns: [(&str, Vec<f64>); 4] = [
        ("f1", Vec::new()),
        ("final_mse", Vec::new()),
        ("sparsity", Vec::new()),
        ("tpr", Vec::new()),
    ];
    for r in &records {
        let (tpr, fpr, f1) = match (&reference, r.metrics.tpr) {
            (Some(reference), _) => {
                let (tpr, fpr, f1) = recompute_confusion(r, reference)?;
                (Some(tpr), Some(fpr), Some(f1))
            }
            (None, _) => (r.metrics.tpr, r.metrics.fpr, r.metrics.f1),
        };
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            r.trial_id,
            r.algorithm,
            fmt(tpr),
            fmt(fpr),
            fmt(f1),
            r.metrics.sparsity,
            r.metrics.nonzero_fraction,
            r.metrics.final_mse,
            fmt(r.metrics.r2_basis),
        );
        if let Some(f1) = f1 {
            metric_columns[0].1.push(f1);
        }
        metric_columns[1].1.push(r.metrics.final_mse);
        metric_columns[2].1.push(r.metrics.sparsity);
        if let Some(tpr) = tpr {
            metric_columns[3].1.push(tpr);
        }
    }
    fs::write(args.out.join("per_trial_metrics.csv"), &table)?;

    let mut summary = String::from("metric,count,mean,std\n");
    for (name, values) in &metric_columns {
        if values.is_empty() {
            let _ = writeln!(summary, "{name},0,,");
        } else {
            let (mean, std) = mean_std(values);
            let _ = writeln!(summary, "{name},{},{mean},{std}", values.len());
        }
    }
    fs::write(args.out.join("summary.csv"), &summary)?;

    // Paired sign tests against the baseline file.
    if let Some(baseline_path) = &args.baseline {
        let baseline = read_jsonl(baseline_path)?;
        let pairs = records.len().min(baseline.len());
        if pairs == 0 {
            bail!("baseline file {} has no records", baseline_path.display());
        }
        let mut out = String::from("metric,pairs,positives,negatives,p_value\n");
        let diff_of = |get: &dyn Fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
            (0..pairs)
                .filter_map(|i| Some(get(&records[i])? - get(&baseline[i])?))
                .collect()
        };
        type Getter = Box<dyn Fn(&TrialRecord) -> Option<f64>>;
        let metrics: [(&str, Getter); 3] = [
            ("f1", Box::new(|r: &TrialRecord| r.metrics.f1)),
            (
                "final_mse",
                Box::new(|r: &TrialRecord| Some(r.metrics.final_mse)),
            ),
            (
                "sparsity",
                Box::new(|r: &TrialRecord| Some(r.metrics.sparsity)),
            ),
        ];
        for (name, get) in &metrics {
            let diffs = diff_of(get.as_ref());
            if diffs.is_empty() {
                let _ = writeln!(out, "{name},0,,,");
                continue;
            }
            let t = sign_test(&diffs)?;
            if t.positives + t.negatives == 0 {
                eprintln!("warning: all {name} differences are zero; sign test is undefined");
            }
            let _ = writeln!(
                out,
                "{name},{},{},{},{}",
                diffs.len(),
                t.positives,
                t.negatives,
                t.p_value
            );
        }
        fs::write(args.out.join("sign_tests.csv"), &out)?;
    }

    // Plot data from traces, when the run recorded them.
    if records.iter().any(|r| r.traces.is_some()) {
        fs::write(args.out.join("plot_mse.csv"), plot_mse_csv(&records))?;
        fs::write(
            args.out.join("plot_support.csv"),
            plot_support_csv(&records),
        )?;
    }

    println!("analysis written to {}", args.out.display());
    Ok(())
}

//! Shared fixtures and independent oracles for the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeSet;

use dp_screen::data::{
    gen_synthetic, load_csv, scale_linf, scale_target_to_bound, write_csv, yeo_johnson_apply,
    yeo_johnson_fit, SyntheticSpec, TargetColumn,
};
use dp_screen::domain::{validate_dataset, Dataset, L1Constraint, Matrix, PrivacyBudget};
use dp_screen::metrics::{sign_test, sparsity, support_confusion};
use dp_screen::pipelines::{
    oracle_k_clip, preselect_k_features, run_many, Algorithm, TrialConfig, TrialResult,
};
use rand::Rng;

/// The fixed 3000x600 synthetic dataset with 35 positive and 35 negative
/// planted weights, validated for lambda = 50 private runs.
pub fn reference_dataset(correlated: bool) -> (Dataset, BTreeSet<usize>) {
    let (raw, true_w) = gen_synthetic(&SyntheticSpec {
        n: 3000,
        d: 600,
        n_pos: 35,
        n_neg: 35,
        correlated,
        rho: if correlated { 0.5 } else { 0.0 },
        seed: 1234,
    })
    .unwrap();
    let c = L1Constraint::new(50.0).unwrap();
    let data = validate_dataset(raw, c, true).unwrap();
    let reference = true_w
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect();
    (data, reference)
}

pub fn reference_support() -> BTreeSet<usize> {
    (0..70).collect()
}

pub fn random_bounded_dataset<R: Rng>(n: usize, d: usize, lambda: f64, rng: &mut R) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-lambda..=lambda)).collect();
    Dataset::new(Matrix::from_rows(rows).unwrap(), y).unwrap()
}

/// The add/remove neighbor with the row count held fixed: the victim row
/// and its target are zeroed, which contributes nothing to any of the
/// screening quantities.
pub fn zero_row_neighbor(data: &Dataset, victim: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..data.n())
        .map(|i| {
            if i == victim {
                vec![0.0; data.d()]
            } else {
                data.x().row(i).to_vec()
            }
        })
        .collect();
    let mut y = data.y().to_vec();
    y[victim] = 0.0;
    Dataset::new(Matrix::from_rows(rows).unwrap(), y).unwrap()
}

/// Brute-force Wolfe gap over all 2d signed vertices, written without
/// the closed form.
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
            let value: f64 = (0..data.n())
                .map(|i| (u[i] - sign * lambda * data.x().get(i, j)) * g[i])
                .sum();
            best = best.max(value);
        }
    }
    best
}

/// Exact mean nonzero count of the uniform-selection model by exhaustive
/// enumeration over all d^(2T) outcome sequences.
pub fn enumerate_uniform_model_mean(d: usize, t: usize) -> f64 {
    let outcomes = (d as u64).pow(2 * t as u32);
    let mut total = 0.0f64;
    for code in 0..outcomes {
        let mut rest = code;
        let mut nonzero = vec![false; d];
        for _ in 0..t {
            let up = (rest % d as u64) as usize;
            rest /= d as u64;
            let down = (rest % d as u64) as usize;
            rest /= d as u64;
            nonzero[up] = true;
            nonzero[down] = false;
        }
        total += nonzero.iter().filter(|b| **b).count() as f64;
    }
    total / outcomes as f64
}

/// Trial-averaged support metrics in the reference tables' terms.
pub struct TableMeans {
    pub tpr: f64,
    pub fpr: f64,
    pub f1: f64,
    pub sparsity: f64,
    pub nonzero_fraction: f64,
}

pub fn table_means(results: &[TrialResult], reference: &BTreeSet<usize>) -> TableMeans {
    let k = results.len() as f64;
    let mut means = TableMeans {
        tpr: 0.0,
        fpr: 0.0,
        f1: 0.0,
        sparsity: 0.0,
        nonzero_fraction: 0.0,
    };
    for r in results {
        let c = support_confusion(&r.final_w, reference).unwrap();
        means.tpr += c.tpr / k;
        means.fpr += c.fpr / k;
        means.f1 += c.f1 / k;
        let frac_zero = sparsity(&r.final_w);
        means.sparsity += frac_zero / k;
        means.nonzero_fraction += (1.0 - frac_zero) / k;
    }
    means
}

// ---------------------------------------------------------------------
// Criterion 9: the full chain with independently recomputed metrics.
// ---------------------------------------------------------------------

/// Confusion rates recomputed from plain index sets, written without the
/// metrics module.
fn local_confusion(support: &[usize], reference: &BTreeSet<usize>, d: usize) -> (f64, f64, f64) {
    let est: BTreeSet<usize> = support.iter().copied().collect();
    let tp = est.iter().filter(|j| reference.contains(j)).count() as f64;
    let fp = est.len() as f64 - tp;
    let fn_ = reference.len() as f64 - tp;
    let tpr = if reference.is_empty() {
        0.0
    } else {
        tp / reference.len() as f64
    };
    let negatives = d as f64 - reference.len() as f64;
    let fpr = if negatives == 0.0 {
        0.0
    } else {
        fp / negatives
    };
    let denom = tp + 0.5 * (fp + fn_);
    let f1 = if denom == 0.0 { 0.0 } else { tp / denom };
    (tpr, fpr, f1)
}

fn local_mse(data: &Dataset, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..data.n() {
        let mut pred = 0.0;
        for j in 0..data.d() {
            pred += data.x().get(i, j) * w[j];
        }
        let r = data.y()[i] - pred;
        total += r * r;
    }
    total / data.n() as f64
}

/// Test-local OLS R^2 via a plain Cholesky-free Gauss-Jordan solve on
/// the normal equations with a small ridge fallback for singular
/// blocks. Independent of the library's solver.
fn local_r2(data: &Dataset, predictors: &[usize], target: usize) -> f64 {
    let n = data.n();
    let k = predictors.len() + 1;
    let col = |a: usize, i: usize| -> f64 {
        if a == 0 {
            1.0
        } else {
            data.x().get(i, predictors[a - 1])
        }
    };
    let mut m = vec![vec![0.0f64; k + 1]; k];
    for i in 0..n {
        let yi = data.x().get(i, target);
        for a in 0..k {
            for b in 0..k {
                m[a][b] += col(a, i) * col(b, i);
            }
            m[a][k] += col(a, i) * yi;
        }
    }
    // Gauss-Jordan with partial pivoting; tiny pivots zero the column.
    let mut order: Vec<usize> = (0..k).collect();
    for c in 0..k {
        let piv = (c..k)
            .max_by(|&a, &b| {
                m[order[a]][c]
                    .abs()
                    .partial_cmp(&m[order[b]][c].abs())
                    .unwrap()
            })
            .unwrap();
        order.swap(c, piv);
        let p = m[order[c]][c];
        if p.abs() < 1e-10 {
            continue;
        }
        for r in 0..k {
            if r == c {
                continue;
            }
            let f = m[order[r]][c] / p;
            for cc in 0..=k {
                m[order[r]][cc] -= f * m[order[c]][cc];
            }
        }
    }
    let mut beta = vec![0.0; k];
    for c in 0..k {
        let p = m[order[c]][c];
        beta[c] = if p.abs() < 1e-10 {
            0.0
        } else {
            m[order[c]][k] / p
        };
    }
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
        return if ss_res <= 1e-12 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

fn local_sign_test_p(diffs: &[f64]) -> f64 {
    let pos = diffs.iter().filter(|v| **v > 0.0).count();
    let neg = diffs.iter().filter(|v| **v < 0.0).count();
    let m = pos + neg;
    if m == 0 {
        return 1.0;
    }
    let k = pos.min(neg);
    let mut tail = 0.0f64;
    for i in 0..=k {
        let mut c = 1.0f64;
        for j in 0..i {
            c = c * (m - j) as f64 / (j + 1) as f64;
        }
        tail += c / 2f64.powi(m as i32);
    }
    (2.0 * tail).min(1.0)
}

/// Drive the chain CSV -> Yeo-Johnson -> scaling -> training -> post-hoc
/// clip/preselect -> metrics, and check every produced quantity against
/// the local recomputations above.
pub fn run_pipeline_chain_check() {
    const TOL: f64 = 1e-10;
    let dir = tempfile::tempdir().unwrap();

    // A held-in synthetic CSV with a skewed target so the transform has
    // something to do.
    let (plain, true_w) = gen_synthetic(&SyntheticSpec {
        n: 150,
        d: 20,
        n_pos: 3,
        n_neg: 2,
        correlated: true,
        rho: 0.5,
        seed: 91,
    })
    .unwrap();
    let reference: BTreeSet<usize> = true_w
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect();
    let names: Vec<String> = (0..plain.d()).map(|j| format!("f{j}")).collect();
    let csv_path = dir.path().join("chain.csv");
    write_csv(&csv_path, &plain, &names, "y").unwrap();

    // Load and preprocess.
    let loaded = load_csv(&csv_path, &TargetColumn::Name("y".into()), true).unwrap();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for j in 0..loaded.dataset.d() {
        let col: Vec<f64> = (0..loaded.dataset.n())
            .map(|i| loaded.dataset.x().get(i, j))
            .collect();
        let fit = yeo_johnson_fit(&col).unwrap();
        columns.push(yeo_johnson_apply(&col, fit.lambda));
    }
    let rows: Vec<Vec<f64>> = (0..loaded.dataset.n())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let yj_fit = yeo_johnson_fit(loaded.dataset.y()).unwrap();
    let y = yeo_johnson_apply(loaded.dataset.y(), yj_fit.lambda);
    let transformed = Dataset::new(Matrix::from_rows(rows).unwrap(), y).unwrap();

    let lambda = 6.0;
    let c = L1Constraint::new(lambda).unwrap();
    let scaled = scale_linf(transformed);
    let (scaled, _) = scale_target_to_bound(scaled, lambda);
    let data = validate_dataset(scaled, c, true).unwrap();

    // Train.
    let budget = PrivacyBudget::new(4.9, 1.0 / 4000.0, 0.1, 1.0 / 12000.0).unwrap();
    let cfg = TrialConfig::new(Algorithm::RnmScreen, budget, c, 80, 919);
    let results = run_many(&data, &cfg, 3, Some(&reference)).unwrap();

    let k_clip = 5usize;
    let mut rnm_f1 = Vec::new();
    let mut clip_f1 = Vec::new();
    for r in &results {
        // Reported metric block.
        let conf = support_confusion(&r.final_w, &reference).unwrap();
        let frac_zero = sparsity(&r.final_w);
        let final_mse = *r.mse_history.last().unwrap();
        let chosen: BTreeSet<usize> = r.support.iter().copied().collect();
        let missed: BTreeSet<usize> = reference.difference(&chosen).copied().collect();

        // Independent recomputation of each column analogue.
        let (tpr, fpr, f1) = local_confusion(&r.support, &reference, data.d());
        assert!((conf.tpr - tpr).abs() <= TOL, "tpr {} vs {tpr}", conf.tpr);
        assert!((conf.fpr - fpr).abs() <= TOL, "fpr {} vs {fpr}", conf.fpr);
        assert!((conf.f1 - f1).abs() <= TOL, "f1 {} vs {f1}", conf.f1);
        let zeros = r.final_w.iter().filter(|v| **v == 0.0).count() as f64;
        assert!((frac_zero - zeros / data.d() as f64).abs() <= TOL);
        let mse_local = local_mse(&data, &r.final_w);
        assert!(
            (final_mse - mse_local).abs() <= TOL * mse_local.max(1.0),
            "mse {final_mse} vs {mse_local}"
        );
        if !chosen.is_empty() && !missed.is_empty() {
            let reported = dp_screen::metrics::r2_basis(&data, &chosen, &missed).unwrap();
            let predictors: Vec<usize> = chosen.iter().copied().collect();
            let local: f64 = missed
                .iter()
                .map(|&t| local_r2(&data, &predictors, t))
                .sum::<f64>()
                / missed.len() as f64;
            assert!(
                (reported - local).abs() <= TOL,
                "r2 {reported} vs local {local}"
            );
        }
        rnm_f1.push(conf.f1);

        // Post-hoc baselines on the same trial.
        let clipped = oracle_k_clip(&r.final_w, k_clip).unwrap();
        let clipped_support: Vec<usize> = clipped
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect();
        assert!(clipped_support.len() <= k_clip);
        let clip_conf = support_confusion(&clipped, &reference).unwrap();
        let (_, _, f1_local) = local_confusion(&clipped_support, &reference, data.d());
        assert!((clip_conf.f1 - f1_local).abs() <= TOL);
        clip_f1.push(clip_conf.f1);
    }

    // Preselection baseline: top-k column L1 norms, recomputed locally.
    let chosen = preselect_k_features(&data, 6).unwrap();
    let mut norms: Vec<(usize, f64)> = (0..data.d())
        .map(|j| {
            let norm: f64 = (0..data.n()).map(|i| data.x().get(i, j).abs()).sum();
            (j, norm)
        })
        .collect();
    norms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut expected: Vec<usize> = norms.into_iter().take(6).map(|(j, _)| j).collect();
    expected.sort_unstable();
    assert_eq!(
        chosen, expected,
        "preselection disagrees with local ranking"
    );

    // Sign test between the trained and clipped supports.
    let diffs: Vec<f64> = rnm_f1.iter().zip(&clip_f1).map(|(a, b)| a - b).collect();
    let reported = sign_test(&diffs).unwrap();
    let local_p = local_sign_test_p(&diffs);
    assert!(
        (reported.p_value - local_p).abs() <= TOL,
        "sign test {} vs {local_p}",
        reported.p_value
    );
}

/// Drive the same chain through the binary (synth -> run with transform
/// and clip -> analyze) and verify the emitted analysis columns against
/// local recomputation from the records.
pub fn run_binary_chain_check(bin: &str) {
    const TOL: f64 = 1e-10;
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let status = std::process::Command::new(bin)
        .args([
            "synth", "--n", "150", "--d", "20", "--pos", "3", "--neg", "2",
        ])
        .args(["--correlated", "--rho", "0.5", "--seed", "91", "--out"])
        .arg(&data_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let run_dir = dir.path().join("run");
    let status = std::process::Command::new(bin)
        .args(["run", "--data"])
        .arg(data_dir.join("data.csv"))
        .arg("--meta")
        .arg(data_dir.join("meta.json"))
        .args([
            "--algo",
            "rnm-screen",
            "--eps1",
            "4.9",
            "--delta1",
            "0.00025",
            "--eps2",
            "0.1",
            "--delta2",
            "0.0000833",
            "--lambda",
            "6",
            "--iters",
            "80",
            "--trials",
            "3",
            "--seed",
            "919",
            "--yeo-johnson",
            "--scale-y-to-lambda",
            "--oracle-k",
            "5",
            "--traces",
            "on",
            "--out",
        ])
        .arg(&run_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let analysis_dir = dir.path().join("analysis");
    let status = std::process::Command::new(bin)
        .args(["analyze", "--results"])
        .arg(run_dir.join("results.jsonl"))
        .arg("--baseline")
        .arg(run_dir.join("oracle_k.jsonl"))
        .arg("--ref-support")
        .arg(data_dir.join("meta.json"))
        .arg("--out")
        .arg(&analysis_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir.join("meta.json")).unwrap())
            .unwrap();
    let reference: BTreeSet<usize> = meta["true_support"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();

    let parse_records = |path: &std::path::Path| -> Vec<serde_json::Value> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    };
    let records = parse_records(&run_dir.join("results.jsonl"));
    let clipped = parse_records(&run_dir.join("oracle_k.jsonl"));

    // Recompute the analysis table rows from the records.
    let table = std::fs::read_to_string(analysis_dir.join("per_trial_metrics.csv")).unwrap();
    let mut rows = table.lines();
    rows.next(); // header
    for (row, record) in rows.zip(&records) {
        let cells: Vec<&str> = row.split(',').collect();
        let support: Vec<usize> = record["final_support"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        let d = record["d"].as_u64().unwrap() as usize;
        let (tpr, fpr, f1) = local_confusion(&support, &reference, d);
        assert!((cells[2].parse::<f64>().unwrap() - tpr).abs() <= TOL);
        assert!((cells[3].parse::<f64>().unwrap() - fpr).abs() <= TOL);
        assert!((cells[4].parse::<f64>().unwrap() - f1).abs() <= TOL);
        let sparsity_local = 1.0 - support.len() as f64 / d as f64;
        assert!((cells[5].parse::<f64>().unwrap() - sparsity_local).abs() <= TOL);
        // Trace cardinality: one row per iteration per trial.
        let t_total = record["t_total"].as_u64().unwrap() as usize;
        let mse_trace = record["traces"]["mse"].as_array().unwrap();
        assert_eq!(mse_trace.len(), t_total);
    }

    // Sign-test column against local binomial arithmetic on paired F1s.
    let f1_of = |rec: &serde_json::Value| -> f64 {
        let support: Vec<usize> = rec["final_support"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap() as usize)
            .collect();
        let d = rec["d"].as_u64().unwrap() as usize;
        local_confusion(&support, &reference, d).2
    };
    let diffs: Vec<f64> = records
        .iter()
        .zip(&clipped)
        .map(|(a, b)| f1_of(a) - f1_of(b))
        .collect();
    let expected_p = local_sign_test_p(&diffs);
    let sign_table = std::fs::read_to_string(analysis_dir.join("sign_tests.csv")).unwrap();
    let f1_row = sign_table
        .lines()
        .find(|l| l.starts_with("f1,"))
        .expect("f1 sign-test row");
    let reported_p: f64 = f1_row.split(',').nth(4).unwrap().parse().unwrap();
    // The analyze command computes F1 diffs from the recorded metric
    // block, which matches the locally recomputed confusion.
    assert!(
        (reported_p - expected_p).abs() <= TOL,
        "sign test p {reported_p} vs local {expected_p}"
    );
}

//! Dataset generation, ingestion, and preprocessing.
//!
//! The synthetic generator draws rows from a standard normal (optionally
//! with AR(1) correlation across features), rescales the design matrix by
//! a single global scalar so every row satisfies `||x_i||_inf <= 1`, and
//! produces targets from a planted sparse weight vector so `y = X w*`
//! holds exactly.
//!
//! CSV ingestion accepts plain numeric comma-separated files (optional
//! single header row, decimal-point floats, no quoting, UTF-8). Callers
//! chain [`scale_linf`], the Yeo-Johnson transform, and
//! [`crate::domain::validate_dataset`] as needed.

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Parameters of the planted-support synthetic regression problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Number of `+1` entries in the true weight vector.
    pub n_pos: usize,
    /// Number of `-1` entries in the true weight vector.
    pub n_neg: usize,
    pub correlated: bool,
    /// AR(1) decay of the feature covariance `Sigma_ij = rho^|i-j|`.
    pub rho: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::invalid("synthetic spec", "n and d must be >= 1"));
        }
        if self.n_pos + self.n_neg > self.d {
            return Err(Error::invalid(
                "synthetic spec",
                format!(
                    "{} + {} planted weights exceed {} features",
                    self.n_pos, self.n_neg, self.d
                ),
            ));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(
                "rho",
                format!("must lie in [0, 1), got {}", self.rho),
            ));
        }
        Ok(())
    }
}

/// Generate a synthetic dataset and its true weight vector. The true
/// support occupies the first `n_pos + n_neg` coordinates (`+1`s first).
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>)> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed, 0).rng();
    let mut data = Vec::with_capacity(spec.n * spec.d);
    let decay = (1.0 - spec.rho * spec.rho).sqrt();
    for _ in 0..spec.n {
        let mut prev = 0.0f64;
        for j in 0..spec.d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = if spec.correlated && j > 0 {
                spec.rho * prev + decay * z
            } else {
                z
            };
            data.push(v);
            prev = v;
        }
    }
    let x = Matrix::from_vec(spec.n, spec.d, data)?;
    let mut dataset = Dataset::with_parts(x, vec![0.0; spec.n]);
    dataset = scale_linf(dataset);

    let mut true_w = vec![0.0; spec.d];
    for item in true_w.iter_mut().take(spec.n_pos) {
        *item = 1.0;
    }
    for item in true_w
        .iter_mut()
        .take(spec.n_pos + spec.n_neg)
        .skip(spec.n_pos)
    {
        *item = -1.0;
    }
    let y = dataset.x().matvec(&true_w);
    dataset.replace_y(y);
    Ok((dataset, true_w))
}

/// Divide the whole design matrix by its largest absolute entry, leaving
/// `y` untouched. No-op when the matrix is already bounded by 1 (or all
/// zero), so the operation is idempotent.
pub fn scale_linf(data: Dataset) -> Dataset {
    let max = data.x().max_abs();
    if max <= 1.0 || max == 0.0 {
        return data;
    }
    let mut out = data;
    let mut x = out.x().clone();
    x.scale_in_place(1.0 / max);
    out.replace_x(x);
    out
}

/// Rescale the target so `max |y_i| <= bound`, returning the dataset and
/// the multiplier applied (1.0 when no rescaling was needed).
pub fn scale_target_to_bound(data: Dataset, bound: f64) -> (Dataset, f64) {
    let max = data.y().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max <= bound || max == 0.0 {
        return (data, 1.0);
    }
    let factor = bound / max;
    let mut out = data;
    let y = out.y().iter().map(|v| v * factor).collect();
    out.replace_y(y);
    (out, factor)
}

/// Fitted Yeo-Johnson power parameter for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YeoJohnsonFit {
    pub lambda: f64,
    /// Set when the profile likelihood was degenerate (constant column)
    /// and the identity transform was used instead.
    pub degenerate: bool,
}

/// Fitted transform parameters for a whole dataset: one entry per
/// feature column, optionally one for the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YeoJohnsonParams {
    pub features: Vec<YeoJohnsonFit>,
    pub target: Option<YeoJohnsonFit>,
}

/// Fit the transform on every feature column (and the target when
/// `include_target`), then apply it, returning the transformed dataset
/// with the fitted parameters.
pub fn yeo_johnson_fit_dataset(
    data: &Dataset,
    include_target: bool,
) -> Result<(Dataset, YeoJohnsonParams)> {
    let mut features = Vec::with_capacity(data.d());
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(data.d());
    for j in 0..data.d() {
        let col: Vec<f64> = (0..data.n()).map(|i| data.x().get(i, j)).collect();
        let fit = yeo_johnson_fit(&col)?;
        columns.push(yeo_johnson_apply(&col, fit.lambda));
        features.push(fit);
    }
    let rows: Vec<Vec<f64>> = (0..data.n())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let (y, target) = if include_target {
        let fit = yeo_johnson_fit(data.y())?;
        (yeo_johnson_apply(data.y(), fit.lambda), Some(fit))
    } else {
        (data.y().to_vec(), None)
    };
    let out = Dataset::new(Matrix::from_rows(rows)?, y)?;
    Ok((out, YeoJohnsonParams { features, target }))
}

/// The Yeo-Johnson transform of a single value:
///
/// ```text
/// y >= 0:  ((y+1)^l - 1) / l          (l != 0),   ln(y+1)   (l == 0)
/// y <  0:  -((1-y)^(2-l) - 1) / (2-l) (l != 2),  -ln(1-y)   (l == 2)
/// ```
pub fn yeo_johnson_value(y: f64, lambda: f64) -> f64 {
    if y >= 0.0 {
        if lambda == 0.0 {
            (y + 1.0).ln()
        } else {
            ((y + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if lambda == 2.0 {
        -(1.0 - y).ln()
    } else {
        -((1.0 - y).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Apply the transform elementwise.
pub fn yeo_johnson_apply(column: &[f64], lambda: f64) -> Vec<f64> {
    column
        .iter()
        .map(|&v| yeo_johnson_value(v, lambda))
        .collect()
}

/// Profile log-likelihood of the transform parameter under a Gaussian
/// model for the transformed column:
///
/// ```text
/// llf(l) = -(n/2) ln(var(psi(y, l))) + (l - 1) sum_i sgn(y_i) ln(1 + |y_i|)
/// ```
pub fn yeo_johnson_log_likelihood(column: &[f64], lambda: f64) -> f64 {
    let n = column.len() as f64;
    let transformed = yeo_johnson_apply(column, lambda);
    let mean = transformed.iter().sum::<f64>() / n;
    let var = transformed
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    if var <= 0.0 || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = column
        .iter()
        .map(|&v| v.signum() * (1.0 + v.abs()).ln())
        .sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

const YJ_SEARCH_LO: f64 = -5.0;
const YJ_SEARCH_HI: f64 = 5.0;
const YJ_SEARCH_TOL: f64 = 1e-4;

/// Fit the transform parameter by golden-section maximization of the
/// profile log-likelihood over `[-5, 5]`. A constant column has a
/// degenerate likelihood; it gets the identity transform (`lambda = 1`)
/// with the `degenerate` flag set.
pub fn yeo_johnson_fit(column: &[f64]) -> Result<YeoJohnsonFit> {
    if column.is_empty() {
        return Err(Error::EmptyInput("yeo-johnson column"));
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("yeo-johnson column"));
    }
    let first = column[0];
    if column.iter().all(|&v| v == first) {
        return Ok(YeoJohnsonFit {
            lambda: 1.0,
            degenerate: true,
        });
    }
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (YJ_SEARCH_LO, YJ_SEARCH_HI);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = yeo_johnson_log_likelihood(column, a);
    let mut fb = yeo_johnson_log_likelihood(column, b);
    while hi - lo > YJ_SEARCH_TOL {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = yeo_johnson_log_likelihood(column, b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = yeo_johnson_log_likelihood(column, a);
        }
    }
    let lambda = 0.5 * (lo + hi);
    if !yeo_johnson_log_likelihood(column, lambda).is_finite() {
        return Ok(YeoJohnsonFit {
            lambda: 1.0,
            degenerate: true,
        });
    }
    Ok(YeoJohnsonFit {
        lambda,
        degenerate: false,
    })
}

/// How the target column of a CSV file is addressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TargetColumn {
    Name(String),
    /// Zero-based; negative counts from the end (`-1` is the last
    /// column).
    Index(i64),
}

/// A loaded CSV dataset plus its column names (synthesized as `c0..` when
/// the file has no header).
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

/// Load a numeric CSV file into an unvalidated [`Dataset`]. Parse errors
/// report the 1-based file row and the column name.
pub fn load_csv(path: &Path, target: &TargetColumn, has_header: bool) -> Result<LoadedCsv> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .peekable();

    let header: Vec<String> = if has_header {
        match lines.next() {
            Some(h) => h.split(',').map(|c| c.trim().to_string()).collect(),
            None => return Err(Error::EmptyInput("csv file")),
        }
    } else {
        let width = lines
            .peek()
            .ok_or(Error::EmptyInput("csv file"))?
            .split(',')
            .count();
        (0..width).map(|j| format!("c{j}")).collect()
    };

    let ncols = header.len();
    let target_idx = match target {
        TargetColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingTargetColumn(name.clone()))?,
        TargetColumn::Index(i) => {
            let idx = if *i < 0 { ncols as i64 + i } else { *i };
            if idx < 0 || idx >= ncols as i64 {
                return Err(Error::MissingTargetColumn(format!("index {i}")));
            }
            idx as usize
        }
    };
    if ncols < 2 {
        return Err(Error::invalid(
            "csv",
            "need at least one feature column besides the target",
        ));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let header_offset = if has_header { 1 } else { 0 };
    for (line_no, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != ncols {
            return Err(Error::ShapeMismatch(format!(
                "row {} has {} cells, expected {}",
                line_no + 1 + header_offset,
                cells.len(),
                ncols
            )));
        }
        let mut row = Vec::with_capacity(ncols - 1);
        for (j, cell) in cells.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                row: line_no + 1 + header_offset,
                column: header[j].clone(),
                message: format!("cannot parse {:?} as a number", cell.trim()),
            })?;
            if j == target_idx {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("csv data rows"));
    }

    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let x = Matrix::from_rows(rows)?;
    Ok(LoadedCsv {
        dataset: Dataset::new(x, y)?,
        feature_names,
        target_name: header[target_idx].clone(),
    })
}

/// Write a dataset as CSV with features first and the target last.
pub fn write_csv(
    path: &Path,
    data: &Dataset,
    feature_names: &[String],
    target_name: &str,
) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str(&feature_names.join(","));
    out.push(',');
    out.push_str(target_name);
    out.push('\n');
    for i in 0..data.n() {
        for v in data.x().row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", data.y()[i]);
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_dataset, L1Constraint};
    use std::io::Write;

    #[test]
    fn synthetic_shapes_and_exact_targets() {
        let spec = SyntheticSpec {
            n: 50,
            d: 20,
            n_pos: 3,
            n_neg: 2,
            correlated: false,
            rho: 0.0,
            seed: 1,
        };
        let (data, true_w) = gen_synthetic(&spec).unwrap();
        assert_eq!((data.n(), data.d()), (50, 20));
        assert_eq!(true_w.iter().filter(|v| **v != 0.0).count(), 5);
        assert_eq!(&true_w[..3], &[1.0, 1.0, 1.0]);
        assert_eq!(&true_w[3..5], &[-1.0, -1.0]);
        // y = X w* exactly (same matvec both times).
        assert_eq!(data.x().matvec(&true_w), data.y().to_vec());
        // The global scaling bounds every entry.
        assert!(data.x().max_abs() <= 1.0);
    }

    #[test]
    fn synthetic_zero_support_gives_zero_targets() {
        let spec = SyntheticSpec {
            n: 10,
            d: 4,
            n_pos: 0,
            n_neg: 0,
            correlated: false,
            rho: 0.0,
            seed: 2,
        };
        let (data, _) = gen_synthetic(&spec).unwrap();
        assert!(data.y().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n: 20,
            d: 8,
            n_pos: 2,
            n_neg: 2,
            correlated: true,
            rho: 0.5,
            seed: 77,
        };
        let (a, wa) = gen_synthetic(&spec).unwrap();
        let (b, wb) = gen_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(wa, wb);
    }

    #[test]
    fn synthetic_rejects_oversized_support() {
        let spec = SyntheticSpec {
            n: 5,
            d: 3,
            n_pos: 2,
            n_neg: 2,
            correlated: false,
            rho: 0.0,
            seed: 0,
        };
        assert!(gen_synthetic(&spec).is_err());
    }

    #[test]
    fn scale_linf_examples() {
        let d = Dataset::new(Matrix::from_rows(vec![vec![2.0, -4.0]]).unwrap(), vec![1.0]).unwrap();
        let s = scale_linf(d);
        assert_eq!(s.x().row(0), &[0.5, -1.0]);
        assert_eq!(s.y(), &[1.0]);
        // Idempotent on bounded data.
        let again = scale_linf(s.clone());
        assert_eq!(again, s);
        // All-zero matrix is left alone.
        let z = Dataset::new(Matrix::from_rows(vec![vec![0.0]]).unwrap(), vec![0.0]).unwrap();
        assert_eq!(scale_linf(z.clone()), z);
    }

    #[test]
    fn scaled_dataset_always_validates() {
        let spec = SyntheticSpec {
            n: 30,
            d: 10,
            n_pos: 1,
            n_neg: 1,
            correlated: false,
            rho: 0.0,
            seed: 5,
        };
        let (data, _) = gen_synthetic(&spec).unwrap();
        let c = L1Constraint::new(100.0).unwrap();
        assert!(validate_dataset(data, c, false).is_ok());
    }

    #[test]
    fn yeo_johnson_identity_at_lambda_one() {
        let col = [-2.5, -0.1, 0.0, 0.3, 4.0];
        let out = yeo_johnson_apply(&col, 1.0);
        for (a, b) in col.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn yeo_johnson_log_branches() {
        let e = std::f64::consts::E;
        assert!((yeo_johnson_value(e - 1.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((yeo_johnson_value(-(e - 1.0), 2.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn yeo_johnson_fit_constant_column_degenerates() {
        let fit = yeo_johnson_fit(&[3.0; 10]).unwrap();
        assert_eq!(fit.lambda, 1.0);
        assert!(fit.degenerate);
    }

    #[test]
    fn yeo_johnson_fit_rejects_non_finite() {
        assert!(yeo_johnson_fit(&[1.0, f64::NAN]).is_err());
        assert!(yeo_johnson_fit(&[]).is_err());
    }

    #[test]
    fn yeo_johnson_dataset_fit_transforms_all_columns() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let z = (i as f64 * 0.41).sin() * 2.0;
                vec![z.exp() - 1.0, z]
            })
            .collect();
        let y: Vec<f64> = (0..60).map(|i| (i as f64 * 0.17).cos()).collect();
        let data = Dataset::new(Matrix::from_rows(rows).unwrap(), y).unwrap();
        let (out, params) = yeo_johnson_fit_dataset(&data, true).unwrap();
        assert_eq!(params.features.len(), 2);
        let target = params.target.unwrap();
        assert!(!target.degenerate);
        // Each transformed column matches a direct per-column apply.
        for (j, fit) in params.features.iter().enumerate() {
            let col: Vec<f64> = (0..data.n()).map(|i| data.x().get(i, j)).collect();
            let expected = yeo_johnson_apply(&col, fit.lambda);
            for i in 0..data.n() {
                assert_eq!(out.x().get(i, j), expected[i]);
            }
        }
        // Without the flag the target is untouched.
        let (out2, params2) = yeo_johnson_fit_dataset(&data, false).unwrap();
        assert!(params2.target.is_none());
        assert_eq!(out2.y(), data.y());
    }

    #[test]
    fn yeo_johnson_fit_stays_in_search_interval() {
        let col: Vec<f64> = (0..200).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let fit = yeo_johnson_fit(&col).unwrap();
        assert!(fit.lambda >= -5.0 && fit.lambda <= 5.0);
    }

    fn write_temp(content: &str) -> std::path::PathBuf {
        let mut path = std::env::temp_dir();
        path.push(format!(
            "dp-screen-csv-test-{}-{}.csv",
            std::process::id(),
            content.len()
        ));
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn load_csv_with_header_by_name_and_index() {
        let path = write_temp("a,b,y\n1,2,3\n4,5,6\n");
        let by_name = load_csv(&path, &TargetColumn::Name("y".into()), true).unwrap();
        assert_eq!((by_name.dataset.n(), by_name.dataset.d()), (2, 2));
        assert_eq!(by_name.dataset.y(), &[3.0, 6.0]);
        let by_index = load_csv(&path, &TargetColumn::Index(-1), true).unwrap();
        assert_eq!(by_index.dataset, by_name.dataset);
        fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_reports_bad_cell_position() {
        let path = write_temp("a,b,y\n1,2,3\n1,abc,3\n");
        match load_csv(&path, &TargetColumn::Name("y".into()), true) {
            Err(Error::CsvParse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_missing_target() {
        let path = write_temp("a,b\n1,2\n");
        assert!(matches!(
            load_csv(&path, &TargetColumn::Name("z".into()), true),
            Err(Error::MissingTargetColumn(_))
        ));
        fs::remove_file(path).ok();
    }
}

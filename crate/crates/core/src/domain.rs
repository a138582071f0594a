//! Core data types shared by the optimizer, the screening rules, and the
//! experiment pipelines.
//!
//! The private pipelines require `||x_i||_inf <= 1` for every row of the
//! design matrix and, when a constraint radius `lambda` is active,
//! `|y_i| <= lambda` for every target entry. [`validate_dataset`] checks
//! these bounds once up front; everything downstream assumes them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance absorbed into the row L-infinity check, so that datasets
/// produced by a floating-point scaling step still validate.
pub const LINF_TOLERANCE: f64 = 1e-12;

/// Dense row-major matrix. Desk-scale experiments (thousands by hundreds)
/// fit comfortably in memory, so no sparse or out-of-core storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix rows"));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::EmptyInput("matrix columns"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries cannot fill a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput("matrix dimensions"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub(crate) fn scale_in_place(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// `X w` for a weight vector of length `cols`.
    pub fn matvec(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), w)).collect()
    }

    /// `X^T r` for a residual-space vector of length `rows`.
    pub fn tr_matvec(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (o, &x) in out.iter_mut().zip(row) {
                *o += ri * x;
            }
        }
        out
    }

    /// Euclidean norm of each column.
    pub fn column_l2_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &x) in sq.iter_mut().zip(self.row(i)) {
                *s += x * x;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// L1 norm of each column.
    pub fn column_l1_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &x) in out.iter_mut().zip(self.row(i)) {
                *s += x.abs();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Radius of the feasible L1 ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Constraint {
    lambda: f64,
}

impl L1Constraint {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::invalid(
                "lambda",
                format!("must be finite and > 0, got {lambda}"),
            ));
        }
        Ok(L1Constraint { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether `w` lies in the ball, up to a relative float tolerance.
    pub fn contains(&self, w: &[f64]) -> bool {
        l1_norm(w) <= self.lambda * (1.0 + 1e-9)
    }
}

/// Privacy budget split between the optimizer `(eps1, delta1)` and the
/// screening mechanism `(eps2, delta2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub eps1: f64,
    pub delta1: f64,
    pub eps2: f64,
    pub delta2: f64,
}

impl PrivacyBudget {
    pub fn new(eps1: f64, delta1: f64, eps2: f64, delta2: f64) -> Result<Self> {
        for (name, eps) in [("eps1", eps1), ("eps2", eps2)] {
            if !eps.is_finite() || eps <= 0.0 {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {eps}"),
                ));
            }
        }
        for (name, delta) in [("delta1", delta1), ("delta2", delta2)] {
            if delta.is_nan() || delta <= 0.0 || delta > 1.0 {
                return Err(Error::invalid(
                    name,
                    format!("must lie in (0, 1], got {delta}"),
                ));
            }
        }
        Ok(PrivacyBudget {
            eps1,
            delta1,
            eps2,
            delta2,
        })
    }

    /// The optimizer's share of the budget.
    pub fn optimizer(&self) -> (f64, f64) {
        (self.eps1, self.delta1)
    }

    /// The screening mechanism's share of the budget.
    pub fn screening(&self) -> (f64, f64) {
        (self.eps2, self.delta2)
    }
}

/// Bound metadata recorded by [`validate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundMeta {
    /// Largest row L-infinity norm observed.
    pub max_row_linf: f64,
    /// Largest |y_i| observed.
    pub max_abs_target: f64,
    /// Radius against which the target bound was checked, if it was.
    pub target_bound: Option<f64>,
}

/// A design matrix with its target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    /// Cached per-column L2 norms (used by every screening-score
    /// evaluation).
    col_norms: Vec<f64>,
    /// Present once the dataset has passed validation.
    bounds: Option<BoundMeta>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for {} rows",
                y.len(),
                x.rows()
            )));
        }
        let col_norms = x.column_l2_norms();
        Ok(Dataset {
            x,
            y,
            col_norms,
            bounds: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        self.col_norms[j]
    }

    pub fn bounds(&self) -> Option<&BoundMeta> {
        self.bounds.as_ref()
    }

    pub(crate) fn with_parts(x: Matrix, y: Vec<f64>) -> Self {
        let col_norms = x.column_l2_norms();
        Dataset {
            x,
            y,
            col_norms,
            bounds: None,
        }
    }

    pub(crate) fn replace_x(&mut self, x: Matrix) {
        self.col_norms = x.column_l2_norms();
        self.x = x;
        self.bounds = None;
    }

    pub(crate) fn replace_y(&mut self, y: Vec<f64>) {
        debug_assert_eq!(y.len(), self.x.rows());
        self.y = y;
        self.bounds = None;
    }
}

/// Check the bounds required by the private pipelines and record them.
///
/// Every row must satisfy `||x_i||_inf <= 1` (plus [`LINF_TOLERANCE`]),
/// and when `require_target_bound` is set, every target must satisfy
/// `|y_i| <= lambda`. Validation is idempotent: revalidating a validated
/// dataset returns an identical value.
pub fn validate_dataset(
    raw: Dataset,
    c: L1Constraint,
    require_target_bound: bool,
) -> Result<Dataset> {
    let mut max_row_linf = 0.0f64;
    for i in 0..raw.n() {
        let norm = raw.x.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm > 1.0 + LINF_TOLERANCE {
            return Err(Error::RowBoundViolation {
                row: i,
                norm,
                tol: LINF_TOLERANCE,
            });
        }
        max_row_linf = max_row_linf.max(norm);
    }
    let mut max_abs_target = 0.0f64;
    for (i, &v) in raw.y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite("target vector"));
        }
        if require_target_bound && v.abs() > c.lambda() {
            return Err(Error::TargetBoundViolation {
                row: i,
                value: v.abs(),
                lambda: c.lambda(),
            });
        }
        max_abs_target = max_abs_target.max(v.abs());
    }
    let mut out = raw;
    out.bounds = Some(BoundMeta {
        max_row_linf,
        max_abs_target,
        target_bound: require_target_bound.then(|| c.lambda()),
    });
    Ok(out)
}

/// State of one optimization trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub w: Vec<f64>,
    pub iteration: usize,
    pub mse_history: Vec<f64>,
    pub support_history: Vec<usize>,
}

impl ModelState {
    pub fn zeros(d: usize) -> Self {
        ModelState {
            w: vec![0.0; d],
            iteration: 0,
            mse_history: Vec::new(),
            support_history: Vec::new(),
        }
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        ModelState {
            w,
            iteration: 0,
            mse_history: Vec::new(),
            support_history: Vec::new(),
        }
    }

    /// Indices of exactly-nonzero coordinates. Coordinates are only ever
    /// set to literal zero by screening or moved by convex combination,
    /// so exact comparison is the intended support test.
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.w)
    }

    pub fn check_feasible(&self, c: &L1Constraint) -> Result<()> {
        let norm = l1_norm(&self.w);
        if norm > c.lambda() * (1.0 + 1e-9) {
            return Err(Error::Infeasible {
                norm,
                lambda: c.lambda(),
            });
        }
        Ok(())
    }
}

/// Indices of exactly-nonzero entries.
pub fn support_of(w: &[f64]) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Draw a point of the lambda-ball: each coordinate iid uniform on
/// [-1, 1], rescaled to L1 norm `lambda * u` with `u` uniform on [0, 1].
/// The resulting point always satisfies `||w||_1 <= lambda`.
pub fn random_l1_point<R: Rng>(d: usize, c: &L1Constraint, rng: &mut R) -> Vec<f64> {
    assert!(d >= 1, "dimension must be at least 1");
    let mut w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let norm = l1_norm(&w);
    if norm == 0.0 {
        return w;
    }
    let u: f64 = rng.random();
    let factor = c.lambda() * u / norm;
    for v in &mut w {
        *v *= factor;
    }
    w
}

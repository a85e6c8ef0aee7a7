//! Cubic B-spline smooth terms with quantile knots and a difference penalty.
//!
//! The raw basis is reparameterized through an orthogonal null-space basis of
//! its column sums, so every column of the returned design block sums to zero
//! over the data (a centered smooth) and the penalized system stays
//! identifiable next to an intercept.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::GamError;

pub fn default_lambda_grid() -> Vec<f64> {
    (0..41).map(|i| 10f64.powf(-4.0 + 0.2 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothTermSpec {
    pub covariate: String,
    pub basis_size: usize,
    pub degree: usize,
    /// Order of the coefficient difference penalty.
    pub penalty_order: usize,
    pub lambda_grid: Vec<f64>,
}

impl SmoothTermSpec {
    pub fn new(covariate: impl Into<String>) -> Self {
        Self {
            covariate: covariate.into(),
            basis_size: 10,
            degree: 3,
            penalty_order: 2,
            lambda_grid: default_lambda_grid(),
        }
    }

    pub fn validate(&self) -> Result<(), GamError> {
        if self.basis_size < self.degree + 2 {
            return Err(GamError::InvalidSpec(format!(
                "basis size {} below degree + 2 for '{}'",
                self.basis_size, self.covariate
            )));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GamError::InvalidSpec(format!(
                "lambda grid for '{}' must be nonempty and strictly increasing",
                self.covariate
            )));
        }
        Ok(())
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    knots: Vec<f64>,
    lo: f64,
    hi: f64,
    /// Orthonormal basis (raw size × raw size − 1) of the sum-to-zero subspace.
    constraint: DMatrix<f64>,
    penalty_order: usize,
    pub warnings: Vec<String>,
}

impl BSplineBasis {
    /// Number of raw (unconstrained) basis functions.
    pub fn raw_size(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Number of columns of the constrained design block.
    pub fn size(&self) -> usize {
        self.raw_size() - 1
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn find_span(&self, x: f64) -> usize {
        let last = self.raw_size() - 1;
        if x >= self.knots[last + 1] {
            return last;
        }
        let (mut low, mut high) = (self.degree, last + 1);
        let mut mid = (low + high) / 2;
        while x < self.knots[mid] || x >= self.knots[mid + 1] {
            if x < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
            mid = (low + high) / 2;
        }
        mid
    }

    /// Raw basis values at `x`; points outside the knot range are clamped.
    pub fn raw_row(&self, x: f64) -> Vec<f64> {
        let x = x.clamp(self.lo, self.hi);
        let p = self.degree;
        let span = self.find_span(x);
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        let mut row = vec![0.0; self.raw_size()];
        row[span - p..=span].copy_from_slice(&n);
        row
    }

    pub fn raw_design(&self, xs: &[f64]) -> DMatrix<f64> {
        let k = self.raw_size();
        let mut m = DMatrix::zeros(xs.len(), k);
        for (i, &x) in xs.iter().enumerate() {
            for (j, v) in self.raw_row(x).into_iter().enumerate() {
                if v != 0.0 {
                    m[(i, j)] = v;
                }
            }
        }
        m
    }

    /// Constrained design block evaluated at `xs`.
    pub fn design(&self, xs: &[f64]) -> DMatrix<f64> {
        self.raw_design(xs) * &self.constraint
    }

    /// Difference penalty on the raw coefficients, projected onto the constraint.
    pub fn penalty(&self) -> DMatrix<f64> {
        let k = self.raw_size();
        let mut d = DMatrix::<f64>::identity(k, k);
        for _ in 0..self.penalty_order {
            let rows = d.nrows() - 1;
            let mut next = DMatrix::zeros(rows, k);
            for r in 0..rows {
                let diff = d.row(r + 1) - d.row(r);
                next.set_row(r, &diff);
            }
            d = next;
        }
        let raw = d.transpose() * d;
        self.constraint.transpose() * raw * &self.constraint
    }

    /// Evaluate the smooth `f(x) = design(x) · coefficients`.
    pub fn evaluate(&self, xs: &[f64], coefficients: &[f64]) -> Vec<f64> {
        let beta = nalgebra::DVector::from_column_slice(coefficients);
        (self.design(xs) * beta).iter().copied().collect()
    }
}

/// Build the smooth basis for covariate values `x`.
///
/// Interior knots sit at equally spaced quantiles of `x`; duplicate quantiles
/// (heavily tied data) are merged, which lowers the basis size.
pub fn bspline_basis(x: &[f64], spec: &SmoothTermSpec) -> Result<BSplineBasis, GamError> {
    spec.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GamError::InvalidSpec(format!(
            "non-finite value in covariate '{}'",
            spec.covariate
        )));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        _ => return Err(GamError::DegenerateCovariate(spec.covariate.clone())),
    };
    let p = spec.degree;
    let wanted = spec.basis_size - p - 1;
    let tol = 1e-10 * (hi - lo);
    let mut interior: Vec<f64> = Vec::with_capacity(wanted);
    for j in 1..=wanted {
        let q = quantile(&sorted, j as f64 / (wanted + 1) as f64);
        let last = interior.last().copied().unwrap_or(lo);
        if q - last > tol && hi - q > tol {
            interior.push(q);
        }
    }
    let mut warnings = Vec::new();
    if interior.len() < wanted {
        warnings.push(format!(
            "'{}': only {} distinct interior knots, basis size reduced from {} to {}",
            spec.covariate,
            interior.len(),
            spec.basis_size,
            interior.len() + p + 1
        ));
    }
    let mut knots = vec![lo; p + 1];
    knots.extend(&interior);
    knots.extend(std::iter::repeat_n(hi, p + 1));

    let mut basis = BSplineBasis {
        degree: p,
        knots,
        lo,
        hi,
        constraint: DMatrix::zeros(0, 0),
        penalty_order: spec.penalty_order,
        warnings,
    };
    let raw = basis.raw_design(x);
    let sums: Vec<f64> = raw.column_iter().map(|c| c.sum()).collect();
    basis.constraint = sum_to_zero_basis(&sums);
    Ok(basis)
}

/// Householder reflection mapping `c` onto the first axis; its remaining
/// columns span the orthogonal complement of `c`.
fn sum_to_zero_basis(c: &[f64]) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = c.to_vec();
    v[0] += if c[0] >= 0.0 { norm } else { -norm };
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut h = DMatrix::<f64>::identity(k, k);
    for i in 0..k {
        for j in 0..k {
            h[(i, j)] -= 2.0 * v[i] * v[j] / vtv;
        }
    }
    h.columns(1, k - 1).into_owned()
}

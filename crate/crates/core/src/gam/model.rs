//! Model frames and the log-response additive model fit.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::{bspline_basis, default_lambda_grid, BSplineBasis, SmoothTermSpec};
use super::penalized::{select_lambdas, DesignBlock, FitResult, PenalizedProblem, TermKind};
use super::GamError;

/// Points per sampled partial-effect curve.
pub const PARTIAL_EFFECT_POINTS: usize = 200;

const MIN_ROWS: usize = 10;

/// Column-oriented data for one fit. Every column has `n` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Frame {
    n: usize,
    numeric: BTreeMap<String, Vec<f64>>,
    factors: BTreeMap<String, Vec<String>>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn with_numeric(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self, GamError> {
        let name = name.into();
        if values.len() != self.n {
            return Err(GamError::DimensionMismatch(format!(
                "column '{name}' has {} values, frame has {}",
                values.len(),
                self.n
            )));
        }
        self.numeric.insert(name, values);
        Ok(self)
    }

    pub fn with_factor(mut self, name: impl Into<String>, levels: Vec<String>) -> Result<Self, GamError> {
        let name = name.into();
        if levels.len() != self.n {
            return Err(GamError::DimensionMismatch(format!(
                "factor '{name}' has {} values, frame has {}",
                levels.len(),
                self.n
            )));
        }
        self.factors.insert(name, levels);
        Ok(self)
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], GamError> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| GamError::MissingColumn(name.to_string()))
    }

    pub fn factor(&self, name: &str) -> Result<&[String], GamError> {
        self.factors
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| GamError::MissingColumn(name.to_string()))
    }

    /// Rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            n: idx.len(),
            numeric: self
                .numeric
                .iter()
                .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i]).collect()))
                .collect(),
            factors: self
                .factors
                .iter()
                .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i].clone()).collect()))
                .collect(),
        }
    }
}

/// `ln(response) ~ 1 + Σ s(covariate) + Σ re(factor)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub response: String,
    pub smooth_terms: Vec<SmoothTermSpec>,
    pub random_intercepts: Vec<String>,
    /// Lambda grid shared by the random-intercept blocks.
    pub ridge_grid: Vec<f64>,
}

impl ModelSpec {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            response: response.into(),
            smooth_terms: Vec::new(),
            random_intercepts: Vec::new(),
            ridge_grid: default_lambda_grid(),
        }
    }

    pub fn smooth(mut self, covariate: impl Into<String>) -> Self {
        self.smooth_terms.push(SmoothTermSpec::new(covariate));
        self
    }

    pub fn random_intercept(mut self, factor: impl Into<String>) -> Self {
        self.random_intercepts.push(factor.into());
        self
    }
}

pub fn smooth_label(covariate: &str) -> String {
    format!("s({covariate})")
}

pub fn ridge_label(factor: &str) -> String {
    format!("re({factor})")
}

#[derive(Debug, Clone)]
pub struct FittedSmooth {
    pub term: String,
    pub basis: BSplineBasis,
}

#[derive(Debug, Clone)]
pub struct ModelFit {
    pub fit: FitResult,
    pub smooths: Vec<FittedSmooth>,
}

impl ModelFit {
    pub fn aic(&self) -> f64 {
        self.fit.aic
    }

    /// Fitted centered effect of one smooth term on `n_points` evenly spaced
    /// covariate values spanning the data range. The effect averages to zero
    /// over the fitted rows.
    pub fn partial_effect(&self, term: &str, n_points: usize) -> Option<Vec<(f64, f64)>> {
        let smooth = self.smooths.iter().find(|s| s.term == term)?;
        let coefs = self.fit.block_coefficients(term)?;
        let (lo, hi) = smooth.basis.range();
        let xs: Vec<f64> = match n_points {
            0 => Vec::new(),
            1 => vec![lo],
            n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        };
        let ys = smooth.basis.evaluate(&xs, coefs);
        Some(xs.into_iter().zip(ys).collect())
    }
}

fn dummy_block(levels: &[String]) -> (Vec<String>, DMatrix<f64>) {
    let mut distinct: Vec<String> = levels.to_vec();
    distinct.sort();
    distinct.dedup();
    let m = DMatrix::from_fn(levels.len(), distinct.len(), |i, j| {
        if levels[i] == distinct[j] {
            1.0
        } else {
            0.0
        }
    });
    (distinct, m)
}

/// Fit `spec` to `frame`: rows with a nonpositive or non-finite response are
/// dropped, each penalized block's lambda is chosen by GCV, then the model is
/// refit at the chosen lambdas.
pub fn fit_model(spec: &ModelSpec, frame: &Frame) -> Result<ModelFit, GamError> {
    let y = frame.numeric(&spec.response)?;
    let keep: Vec<usize> = (0..frame.len()).filter(|&i| y[i].is_finite() && y[i] > 0.0).collect();
    let n_dropped = frame.len() - keep.len();
    if keep.len() < MIN_ROWS {
        return Err(GamError::TooFewRows {
            needed: MIN_ROWS,
            found: keep.len(),
        });
    }
    let data = if n_dropped > 0 {
        frame.select(&keep)
    } else {
        frame.clone()
    };
    let n = data.len();
    let z: Vec<f64> = data.numeric(&spec.response)?.iter().map(|v| v.ln()).collect();

    let mut blocks = vec![DesignBlock::intercept(n)];
    let mut grids = Vec::new();
    let mut smooths = Vec::new();
    let mut warnings = Vec::new();
    for term in &spec.smooth_terms {
        let x = data.numeric(&term.covariate)?;
        let basis = bspline_basis(x, term)?;
        warnings.extend(basis.warnings.iter().cloned());
        let label = smooth_label(&term.covariate);
        blocks.push(DesignBlock {
            name: label.clone(),
            kind: TermKind::Smooth,
            columns: basis.design(x),
            penalty: Some(basis.penalty()),
        });
        grids.push(term.lambda_grid.clone());
        smooths.push(FittedSmooth { term: label, basis });
    }
    for factor in &spec.random_intercepts {
        let (_, columns) = dummy_block(data.factor(factor)?);
        blocks.push(DesignBlock::ridge(ridge_label(factor), columns));
        grids.push(spec.ridge_grid.clone());
    }

    let problem = PenalizedProblem::new(&blocks, &z)?;
    let selection = select_lambdas(&problem, &grids)?;
    let mut fit = problem.fit(&selection.lambdas)?;
    fit.n_dropped = n_dropped;
    fit.gcv_trace = selection.gcv_trace;
    if n_dropped > 0 {
        warnings.push(format!("{n_dropped} rows with nonpositive response dropped"));
    }
    warnings.append(&mut fit.warnings);
    fit.warnings = warnings;
    Ok(ModelFit { fit, smooths })
}

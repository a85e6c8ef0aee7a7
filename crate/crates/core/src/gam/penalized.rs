//! Penalized least squares over column blocks, with GCV smoothing selection.
//!
//! Each penalty is rescaled to the Frobenius norm of its block's cross-product
//! so that one lambda grid means the same thing for every term.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::GamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermKind {
    Intercept,
    Smooth,
    RandomIntercept,
    Parametric,
}

/// A group of design columns sharing one (optional) quadratic penalty.
#[derive(Debug, Clone)]
pub struct DesignBlock {
    pub name: String,
    pub kind: TermKind,
    pub columns: DMatrix<f64>,
    pub penalty: Option<DMatrix<f64>>,
}

impl DesignBlock {
    pub fn intercept(n: usize) -> Self {
        Self {
            name: "(intercept)".into(),
            kind: TermKind::Intercept,
            columns: DMatrix::from_element(n, 1, 1.0),
            penalty: None,
        }
    }

    pub fn ridge(name: impl Into<String>, columns: DMatrix<f64>) -> Self {
        let p = columns.ncols();
        Self {
            name: name.into(),
            kind: TermKind::RandomIntercept,
            columns,
            penalty: Some(DMatrix::identity(p, p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEdf {
    pub term: String,
    pub edf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaChoice {
    pub term: String,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub lambdas: Vec<LambdaChoice>,
    pub edf_total: f64,
    pub edf_per_term: Vec<TermEdf>,
    pub rss: f64,
    pub n_used: usize,
    pub n_dropped: usize,
    /// `n·ln(rss/n) + 2·(edf + 1)`; negative infinity when the fit is exact.
    pub aic: f64,
    pub gcv: f64,
    pub gcv_trace: Vec<f64>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub fitted: Vec<f64>,
    #[serde(skip)]
    pub(crate) block_ranges: Vec<(String, usize, usize)>,
}

impl FitResult {
    pub fn term_edf(&self, term: &str) -> Option<f64> {
        self.edf_per_term.iter().find(|t| t.term == term).map(|t| t.edf)
    }

    /// Coefficients belonging to one block.
    pub fn block_coefficients(&self, term: &str) -> Option<&[f64]> {
        self.block_ranges
            .iter()
            .find(|(name, _, _)| name == term)
            .map(|(_, start, len)| &self.coefficients[*start..*start + len])
    }
}

pub fn gaussian_aic(n: usize, rss: f64, edf: f64) -> f64 {
    let n = n as f64;
    n * (rss / n).ln() + 2.0 * (edf + 1.0)
}

struct BlockMeta {
    name: String,
    start: usize,
    len: usize,
    penalty: Option<DMatrix<f64>>,
}

/// Cached cross-products for repeated solves at different lambdas.
pub struct PenalizedProblem {
    blocks: Vec<BlockMeta>,
    x: DMatrix<f64>,
    z: DVector<f64>,
    xtx: DMatrix<f64>,
    xtz: DVector<f64>,
    ztz: f64,
}

struct Solution {
    beta: DVector<f64>,
    edf_diag: Vec<f64>,
    rss: f64,
}

impl PenalizedProblem {
    pub fn new(blocks: &[DesignBlock], z: &[f64]) -> Result<Self, GamError> {
        let n = z.len();
        if blocks.is_empty() {
            return Err(GamError::InvalidSpec("no design blocks".into()));
        }
        if let Some(b) = blocks.iter().find(|b| b.columns.nrows() != n) {
            return Err(GamError::DimensionMismatch(format!(
                "block '{}' has {} rows, response has {n}",
                b.name,
                b.columns.nrows()
            )));
        }
        let p: usize = blocks.iter().map(|b| b.columns.ncols()).sum();
        let mut x = DMatrix::zeros(n, p);
        let mut metas = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for b in blocks {
            let len = b.columns.ncols();
            x.columns_mut(start, len).copy_from(&b.columns);
            let penalty = match &b.penalty {
                Some(s) if s.nrows() != len || s.ncols() != len => {
                    return Err(GamError::DimensionMismatch(format!(
                        "penalty for '{}' is {}x{}, block has {len} columns",
                        b.name,
                        s.nrows(),
                        s.ncols()
                    )))
                }
                Some(s) => {
                    let cross = b.columns.tr_mul(&b.columns);
                    let s_norm = s.norm();
                    let scale = if s_norm > 0.0 && cross.norm() > 0.0 {
                        cross.norm() / s_norm
                    } else {
                        1.0
                    };
                    Some(s * scale)
                }
                None => None,
            };
            metas.push(BlockMeta {
                name: b.name.clone(),
                start,
                len,
                penalty,
            });
            start += len;
        }
        let z = DVector::from_column_slice(z);
        let xtx = x.tr_mul(&x);
        let xtz = x.tr_mul(&z);
        let ztz = z.dot(&z);
        Ok(Self {
            blocks: metas,
            x,
            z,
            xtx,
            xtz,
            ztz,
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    /// Names of the penalized blocks, in lambda order.
    pub fn penalized_terms(&self) -> Vec<String> {
        self.blocks
            .iter()
            .filter(|b| b.penalty.is_some())
            .map(|b| b.name.clone())
            .collect()
    }

    fn penalized_system(&self, lambdas: &[f64]) -> Result<DMatrix<f64>, GamError> {
        let n_pen = self.blocks.iter().filter(|b| b.penalty.is_some()).count();
        if lambdas.len() != n_pen {
            return Err(GamError::DimensionMismatch(format!(
                "{} lambdas for {n_pen} penalized blocks",
                lambdas.len()
            )));
        }
        let mut a = self.xtx.clone();
        let penalized = self.blocks.iter().filter_map(|b| b.penalty.as_ref().map(|s| (b, s)));
        for ((b, s), &lambda) in penalized.zip(lambdas) {
            let mut view = a.view_mut((b.start, b.start), (b.len, b.len));
            view += s * lambda;
        }
        Ok(a)
    }

    fn factor(&self, a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, GamError> {
        let diag: Vec<f64> = a.diagonal().iter().copied().collect();
        let chol = Cholesky::new(a)
            .ok_or_else(|| GamError::SingularSystem("penalized normal matrix is not positive definite".into()))?;
        // squared pivot over diagonal: the share of each column not explained
        // by the columns before it
        let l = chol.l_dirty();
        for (i, d) in diag.iter().enumerate() {
            let share = l[(i, i)] * l[(i, i)] / d;
            if share.is_nan() || share <= 1e-12 {
                return Err(GamError::SingularSystem(format!(
                    "column {i} is numerically dependent on earlier columns (pivot share {share:e})"
                )));
            }
        }
        Ok(chol)
    }

    fn solve(&self, lambdas: &[f64]) -> Result<Solution, GamError> {
        let chol = self.factor(self.penalized_system(lambdas)?)?;
        let beta = chol.solve(&self.xtz);
        let influence = chol.solve(&self.xtx);
        let edf_diag = influence.diagonal().iter().copied().collect();
        let rss = (self.ztz - 2.0 * beta.dot(&self.xtz) + beta.dot(&(&self.xtx * &beta))).max(0.0);
        Ok(Solution { beta, edf_diag, rss })
    }

    /// `n·rss / (n − edf)²`, infinite when edf reaches n.
    pub fn gcv(&self, lambdas: &[f64]) -> Result<f64, GamError> {
        let s = self.solve(lambdas)?;
        Ok(gcv_score(self.n(), s.rss, s.edf_diag.iter().sum()))
    }

    pub fn fit(&self, lambdas: &[f64]) -> Result<FitResult, GamError> {
        let s = self.solve(lambdas)?;
        let fitted_vec = &self.x * &s.beta;
        let residual = &self.z - &fitted_vec;
        let mut rss = residual.dot(&residual);
        let n = self.n();
        let edf_total: f64 = s.edf_diag.iter().sum();
        let mut warnings = Vec::new();
        let aic = if rss <= f64::EPSILON * f64::EPSILON * self.ztz.max(f64::MIN_POSITIVE) * n as f64 {
            warnings.push("residual sum of squares is zero; AIC reported as -inf".to_string());
            rss = 0.0;
            f64::NEG_INFINITY
        } else {
            gaussian_aic(n, rss, edf_total)
        };
        let edf_per_term = self
            .blocks
            .iter()
            .map(|b| TermEdf {
                term: b.name.clone(),
                edf: s.edf_diag[b.start..b.start + b.len].iter().sum(),
            })
            .collect();
        Ok(FitResult {
            coefficients: s.beta.iter().copied().collect(),
            lambdas: self
                .penalized_terms()
                .into_iter()
                .zip(lambdas)
                .map(|(term, &lambda)| LambdaChoice { term, lambda })
                .collect(),
            edf_total,
            edf_per_term,
            rss,
            n_used: n,
            n_dropped: 0,
            aic,
            gcv: gcv_score(n, rss, edf_total),
            gcv_trace: Vec::new(),
            warnings,
            fitted: fitted_vec.iter().copied().collect(),
            block_ranges: self.blocks.iter().map(|b| (b.name.clone(), b.start, b.len)).collect(),
        })
    }
}

fn gcv_score(n: usize, rss: f64, edf: f64) -> f64 {
    let denom = n as f64 - edf;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        n as f64 * rss / (denom * denom)
    }
}

/// Solve `(XᵀX + Σ λⱼ Sⱼ) β = Xᵀz` for fixed lambdas (one per penalized block).
pub fn fit_penalized(blocks: &[DesignBlock], z: &[f64], lambdas: &[f64]) -> Result<FitResult, GamError> {
    PenalizedProblem::new(blocks, z)?.fit(lambdas)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambdas: Vec<f64>,
    /// Best GCV after each block update.
    pub gcv_trace: Vec<f64>,
}

/// Coordinate descent over penalized blocks: each block's lambda minimizes
/// GCV on its grid with the others held fixed; two full sweeps, starting from
/// each grid's middle value. Ties keep the earliest grid point.
pub fn select_lambdas(problem: &PenalizedProblem, grids: &[Vec<f64>]) -> Result<LambdaSelection, GamError> {
    let n_pen = problem.penalized_terms().len();
    if grids.len() != n_pen {
        return Err(GamError::DimensionMismatch(format!(
            "{} lambda grids for {n_pen} penalized blocks",
            grids.len()
        )));
    }
    if let Some(i) = grids.iter().position(Vec::is_empty) {
        return Err(GamError::InvalidSpec(format!("lambda grid {i} is empty")));
    }
    let mut lambdas: Vec<f64> = grids.iter().map(|g| g[g.len() / 2]).collect();
    let mut trace = Vec::new();
    for _sweep in 0..2 {
        for (j, grid) in grids.iter().enumerate() {
            let mut best: Option<(f64, f64)> = None;
            for &candidate in grid {
                lambdas[j] = candidate;
                let score = match problem.gcv(&lambdas) {
                    Ok(s) => s,
                    Err(GamError::SingularSystem(_)) => continue,
                    Err(e) => return Err(e),
                };
                if best.is_none_or(|(_, b)| score < b) {
                    best = Some((candidate, score));
                }
            }
            let (lambda, score) =
                best.ok_or_else(|| GamError::SingularSystem(format!("no lambda on grid {j} gives a solvable system")))?;
            lambdas[j] = lambda;
            trace.push(score);
        }
    }
    Ok(LambdaSelection {
        lambdas,
        gcv_trace: trace,
    })
}

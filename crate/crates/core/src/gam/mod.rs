//! Penalized additive models with ridge random intercepts ("GAMM-lite") and
//! the ΔAIC harness that compares each relevance metric against a base model.

mod basis;
mod compare;
mod model;
mod penalized;

use thiserror::Error;

pub use basis::{bspline_basis, default_lambda_grid, BSplineBasis, SmoothTermSpec};
pub use compare::{
    compare_models, evaluate_metrics, join_rows, ComparisonReport, EvalConfig, JoinSummary, JoinedRow,
    MetricComparison, Provenance, Response, ResponseSection, SkippedMetric, TermCurve,
};
pub use model::{fit_model, Frame, ModelFit, ModelSpec, PARTIAL_EFFECT_POINTS};
pub use penalized::{
    fit_penalized, gaussian_aic, select_lambdas, DesignBlock, FitResult, LambdaChoice, LambdaSelection,
    PenalizedProblem, TermEdf, TermKind,
};

#[derive(Debug, Error)]
pub enum GamError {
    #[error("covariate '{0}' is constant")]
    DegenerateCovariate(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("too few rows: need {needed}, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("join failure: {0}")]
    JoinFailure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

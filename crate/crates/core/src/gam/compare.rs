//! Base model versus base + s(metric), scored by ΔAIC.
//!
//! The base model is `s(proportion) + s(saliency) + re(participant) +
//! re(position)` on a log response. For each metric the base and the full
//! model are fit on the same rows (those where the metric is present), so
//! each ΔAIC compares like with like.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::basis::{default_lambda_grid, SmoothTermSpec};
use super::model::{fit_model, smooth_label, Frame, ModelFit, ModelSpec, PARTIAL_EFFECT_POINTS};
use super::GamError;
use crate::relevance::{MetricRow, METRIC_NAMES};
use crate::tables::FixationRecord;

const MIN_JOINED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    TotalDuration,
    FixationNumber,
}

impl Response {
    pub fn label(&self) -> &'static str {
        match self {
            Self::TotalDuration => "total_duration",
            Self::FixationNumber => "fixation_number",
        }
    }

    fn value(&self, f: &FixationRecord) -> f64 {
        match self {
            Self::TotalDuration => f.total_duration_ms,
            Self::FixationNumber => f.fixation_count as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub responses: Vec<Response>,
    pub metrics: Vec<String>,
    pub basis_size: usize,
    pub lambda_grid: Vec<f64>,
    pub effect_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            responses: vec![Response::TotalDuration, Response::FixationNumber],
            metrics: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
            basis_size: 10,
            lambda_grid: default_lambda_grid(),
            effect_points: PARTIAL_EFFECT_POINTS,
        }
    }
}

impl EvalConfig {
    fn smooth(&self, covariate: &str) -> SmoothTermSpec {
        SmoothTermSpec {
            basis_size: self.basis_size,
            lambda_grid: self.lambda_grid.clone(),
            ..SmoothTermSpec::new(covariate)
        }
    }
}

/// One fixation record with its object's metric row.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRow<'a> {
    pub fixation: &'a FixationRecord,
    pub metrics: &'a MetricRow,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JoinSummary {
    pub fixation_rows: usize,
    pub metric_rows: usize,
    pub joined_rows: usize,
    /// Fixation rows whose (image_id, object_id) has no metric row.
    pub orphan_fixations: usize,
    /// Metric rows that no fixation row refers to.
    pub unfixated_objects: usize,
    pub duplicate_metric_keys: usize,
}

/// Inner join on (image_id, object_id), in fixation-file order. A repeated
/// metric key keeps its first row.
pub fn join_rows<'a>(metrics: &'a [MetricRow], fixations: &'a [FixationRecord]) -> (Vec<JoinedRow<'a>>, JoinSummary) {
    let mut index: HashMap<(&str, &str), usize> = HashMap::with_capacity(metrics.len());
    let mut summary = JoinSummary {
        fixation_rows: fixations.len(),
        metric_rows: metrics.len(),
        ..Default::default()
    };
    for (i, m) in metrics.iter().enumerate() {
        if index.insert((&m.image_id, &m.object_id), i).is_some() {
            summary.duplicate_metric_keys += 1;
        }
    }
    // first occurrence wins
    for (i, m) in metrics.iter().enumerate().rev() {
        index.insert((&m.image_id, &m.object_id), i);
    }
    let mut used = vec![false; metrics.len()];
    let mut joined = Vec::with_capacity(fixations.len());
    for f in fixations {
        match index.get(&(f.image_id.as_str(), f.object_id.as_str())) {
            Some(&i) => {
                used[i] = true;
                joined.push(JoinedRow {
                    fixation: f,
                    metrics: &metrics[i],
                });
            }
            None => summary.orphan_fixations += 1,
        }
    }
    summary.joined_rows = joined.len();
    summary.unfixated_objects = metrics.len() - summary.duplicate_metric_keys - used.iter().filter(|u| **u).count();
    (joined, summary)
}

/// Sampled partial effect of one smooth term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCurve {
    pub term: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub delta_aic: f64,
    pub aic_base: f64,
    pub aic_full: f64,
    pub edf_base: f64,
    pub edf_full: f64,
    pub edf_metric: f64,
    pub lambda_metric: f64,
    /// Approximate F statistic on the penalized fits; not an exact GAMM test.
    pub approx_f: Option<f64>,
    pub approx_p: Option<f64>,
    pub n_used: usize,
    pub n_dropped: usize,
    pub curve: TermCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMetric {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSummary {
    pub terms: Vec<String>,
    pub aic: f64,
    pub edf: f64,
    pub rss: f64,
    pub n_used: usize,
    pub n_dropped: usize,
    /// ΔAIC of the base model refit against itself; always zero.
    pub base_vs_base: f64,
    pub curves: Vec<TermCurve>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSection {
    pub response: Response,
    pub base: BaseSummary,
    /// Ascending ΔAIC: the most useful metric first.
    pub metrics: Vec<MetricComparison>,
    pub ranking: Vec<String>,
    pub skipped: Vec<SkippedMetric>,
}

impl ResponseSection {
    pub fn metric(&self, name: &str) -> Option<&MetricComparison> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub response_transform: String,
    pub aic: String,
    pub smoothing_selection: String,
    pub significance: String,
    pub basis: String,
    pub lambda_grid: Vec<f64>,
    pub random_effects: String,
    /// Diagnostics carried over from the metric table's producer, if any.
    pub inputs: Option<serde_json::Value>,
}

impl Provenance {
    fn new(config: &EvalConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            response_transform: "natural log; rows with response <= 0 dropped".into(),
            aic: "n*ln(rss/n) + 2*(edf + 1)".into(),
            smoothing_selection: "GCV n*rss/(n-edf)^2, coordinate descent over blocks, 2 sweeps".into(),
            significance: "approximate F on penalized fits (labeled approximate)".into(),
            basis: format!(
                "cubic B-spline, K={}, quantile knots, 2nd-difference penalty, sum-to-zero",
                config.basis_size
            ),
            lambda_grid: config.lambda_grid.clone(),
            random_effects: "ridge-penalized dummy intercepts for participant and position".into(),
            inputs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub provenance: Provenance,
    pub join: JoinSummary,
    pub sections: Vec<ResponseSection>,
}

impl ComparisonReport {
    pub fn section(&self, response: Response) -> Option<&ResponseSection> {
        self.sections.iter().find(|s| s.response == response)
    }
}

/// ΔAIC = AIC(full) − AIC(base); negative favours the full model.
pub fn compare_models(base: &ModelFit, full: &ModelFit) -> f64 {
    full.aic() - base.aic()
}

/// F on the metric term's edf; lambdas of shared blocks are reselected in the
/// full fit, so the total edf difference is not a usable numerator df.
fn approx_f(base: &ModelFit, full: &ModelFit, df1: f64) -> (Option<f64>, Option<f64>) {
    let df2 = full.fit.n_used as f64 - full.fit.edf_total;
    if !(df1 > 1e-8 && df2 > 0.0 && full.fit.rss > 0.0) {
        return (None, None);
    }
    let f = ((base.fit.rss - full.fit.rss) / df1 / (full.fit.rss / df2)).max(0.0);
    let p = FisherSnedecor::new(df1, df2).ok().map(|d| 1.0 - d.cdf(f));
    (Some(f), p)
}

fn is_constant(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

struct SectionBuilder<'a> {
    config: &'a EvalConfig,
    frame: Frame,
    base_spec: ModelSpec,
    /// Base fits keyed by the row subset they were fit on.
    cache: Vec<(Vec<usize>, ModelFit)>,
}

impl SectionBuilder<'_> {
    fn base_fit(&mut self, rows: &[usize]) -> Result<&ModelFit, GamError> {
        if let Some(pos) = self.cache.iter().position(|(r, _)| r == rows) {
            return Ok(&self.cache[pos].1);
        }
        let fit = fit_model(&self.base_spec, &self.frame.select(rows))?;
        self.cache.push((rows.to_vec(), fit));
        Ok(&self.cache.last().expect("just pushed").1)
    }
}

fn response_section(
    joined: &[JoinedRow],
    response: Response,
    config: &EvalConfig,
) -> Result<ResponseSection, GamError> {
    let mut notes = Vec::new();
    let response_col = response.label();
    // the saliency control is used only where it is known; with no saliency
    // at all the term is left out
    let has_saliency = joined.iter().any(|r| r.metrics.saliency.is_some());
    let rows: Vec<usize> = (0..joined.len())
        .filter(|&i| !has_saliency || joined[i].metrics.saliency.is_some())
        .collect();
    if !has_saliency {
        notes.push("no saliency values available; s(saliency) omitted".to_string());
    } else if rows.len() < joined.len() {
        notes.push(format!(
            "{} rows without saliency excluded from all fits",
            joined.len() - rows.len()
        ));
    }
    let rows_data: Vec<&JoinedRow> = rows.iter().map(|&i| &joined[i]).collect();
    let n = rows_data.len();
    let mut frame = Frame::new(n)
        .with_numeric(
            response_col,
            rows_data.iter().map(|r| response.value(r.fixation)).collect(),
        )?
        .with_numeric("proportion", rows_data.iter().map(|r| r.metrics.proportion).collect())?
        .with_factor(
            "participant",
            rows_data.iter().map(|r| r.fixation.participant.clone()).collect(),
        )?
        .with_factor(
            "position",
            rows_data
                .iter()
                .map(|r| r.metrics.position.label().to_string())
                .collect(),
        )?;
    let mut base_spec = ModelSpec {
        ridge_grid: config.lambda_grid.clone(),
        ..ModelSpec::new(response_col)
    };
    let proportion: Vec<f64> = rows_data.iter().map(|r| r.metrics.proportion).collect();
    if is_constant(&proportion) {
        notes.push("proportion is constant; s(proportion) omitted".to_string());
    } else {
        base_spec.smooth_terms.push(config.smooth("proportion"));
    }
    if has_saliency {
        let sal: Vec<f64> = rows_data.iter().map(|r| r.metrics.saliency.unwrap_or(0.0)).collect();
        if is_constant(&sal) {
            notes.push("saliency is constant; s(saliency) omitted".to_string());
        } else {
            base_spec.smooth_terms.push(config.smooth("saliency"));
        }
        frame = frame.with_numeric("saliency", sal)?;
    }
    base_spec = base_spec.random_intercept("participant").random_intercept("position");

    let mut metric_values: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    for name in &config.metrics {
        let vals: Option<Vec<Option<f64>>> = rows_data.iter().map(|r| r.metrics.metric(name)).collect();
        match vals {
            Some(v) => metric_values.push((name.clone(), v)),
            None => return Err(GamError::MissingColumn(name.clone())),
        }
    }
    for (name, vals) in &metric_values {
        frame = frame.with_numeric(name.clone(), vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect())?;
    }

    let mut builder = SectionBuilder {
        config,
        frame,
        base_spec: base_spec.clone(),
        cache: Vec::new(),
    };

    let all_rows: Vec<usize> = (0..n).collect();
    let base_all = builder.base_fit(&all_rows)?.clone();
    let base_again = fit_model(&base_spec, &builder.frame)?;
    let base = BaseSummary {
        terms: std::iter::once("(intercept)".to_string())
            .chain(base_all.fit.edf_per_term.iter().skip(1).map(|t| t.term.clone()))
            .collect(),
        aic: base_all.aic(),
        edf: base_all.fit.edf_total,
        rss: base_all.fit.rss,
        n_used: base_all.fit.n_used,
        n_dropped: base_all.fit.n_dropped,
        base_vs_base: compare_models(&base_all, &base_again),
        curves: base_all
            .smooths
            .iter()
            .filter_map(|s| {
                base_all
                    .partial_effect(&s.term, config.effect_points)
                    .map(|points| TermCurve {
                        term: s.term.clone(),
                        points,
                    })
            })
            .collect(),
        notes,
    };

    let mut metrics = Vec::new();
    let mut skipped = Vec::new();
    for (name, vals) in &metric_values {
        let subset: Vec<usize> = (0..n).filter(|&i| vals[i].is_some()).collect();
        let skip = |reason: String| SkippedMetric {
            metric: name.clone(),
            reason,
        };
        if subset.is_empty() {
            skipped.push(skip("metric missing on every row".into()));
            continue;
        }
        let present: Vec<f64> = subset.iter().map(|&i| vals[i].unwrap_or_default()).collect();
        if is_constant(&present) {
            skipped.push(skip("metric is constant over the rows where it is present".into()));
            continue;
        }
        let base_fit = match builder.base_fit(&subset) {
            Ok(f) => f.clone(),
            Err(e @ (GamError::TooFewRows { .. } | GamError::DegenerateCovariate(_) | GamError::SingularSystem(_))) => {
                skipped.push(skip(format!("base model: {e}")));
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut full_spec = base_spec.clone();
        full_spec.smooth_terms.push(builder.config.smooth(name));
        let full = match fit_model(&full_spec, &builder.frame.select(&subset)) {
            Ok(f) => f,
            Err(e @ (GamError::TooFewRows { .. } | GamError::DegenerateCovariate(_) | GamError::SingularSystem(_))) => {
                skipped.push(skip(format!("full model: {e}")));
                continue;
            }
            Err(e) => return Err(e),
        };
        let term = smooth_label(name);
        let edf_metric = full.fit.term_edf(&term).unwrap_or(0.0);
        let (f, p) = approx_f(&base_fit, &full, edf_metric);
        metrics.push(MetricComparison {
            metric: name.clone(),
            delta_aic: compare_models(&base_fit, &full),
            aic_base: base_fit.aic(),
            aic_full: full.aic(),
            edf_base: base_fit.fit.edf_total,
            edf_full: full.fit.edf_total,
            edf_metric,
            lambda_metric: full
                .fit
                .lambdas
                .iter()
                .find(|l| l.term == term)
                .map(|l| l.lambda)
                .unwrap_or(f64::NAN),
            approx_f: f,
            approx_p: p,
            n_used: full.fit.n_used,
            n_dropped: full.fit.n_dropped + (n - subset.len()),
            curve: TermCurve {
                points: full.partial_effect(&term, config.effect_points).unwrap_or_default(),
                term,
            },
        });
    }
    // stable: ties keep configuration order
    metrics.sort_by(|a, b| a.delta_aic.total_cmp(&b.delta_aic));
    let ranking = metrics.iter().map(|m| m.metric.clone()).collect();
    Ok(ResponseSection {
        response,
        base,
        metrics,
        ranking,
        skipped,
    })
}

/// Join, then for each configured response fit the base model and one
/// base + s(metric) model per metric, ranking metrics by ascending ΔAIC.
pub fn evaluate_metrics(
    metric_rows: &[MetricRow],
    fixations: &[FixationRecord],
    config: &EvalConfig,
) -> Result<ComparisonReport, GamError> {
    if config.responses.is_empty() {
        return Err(GamError::InvalidSpec("no responses requested".into()));
    }
    let (joined, join) = join_rows(metric_rows, fixations);
    if joined.len() < MIN_JOINED {
        return Err(GamError::JoinFailure(format!(
            "{} joined rows (need at least {MIN_JOINED}); {} fixation rows had no metric row",
            joined.len(),
            join.orphan_fixations
        )));
    }
    let sections = config
        .responses
        .iter()
        .map(|&r| response_section(&joined, r, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport {
        provenance: Provenance::new(config),
        join,
        sections,
    })
}

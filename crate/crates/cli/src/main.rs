//! `semrel` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use semrel::bundle::{parse_bundle, validate_bundle, Issue, SceneBundle};
use semrel::fmt::format_real;
use semrel::gam::{evaluate_metrics, ComparisonReport, EvalConfig, Response, TermCurve};
use semrel::lexicon::{load_vec_file, WordVectorStore};
use semrel::relevance::{compute_metric_table, MetricOptions, MetricRow, NeighborhoodPolicy, SceneDiagnostics};
use semrel::saliency::{encode_p5, load_gray, render_map_csv, spectral_residual, SaliencyReduce, SrParams};
use semrel::sim::{simulate_benchmark, SimConfig};
use semrel::tables::{read_fixations, read_metric_table, write_fixations, write_metric_rows};

#[derive(Parser, Debug)]
#[command(
    name = "semrel",
    version,
    about = "Contextual semantic relevance metrics and fixation model comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the relevance metric table for one bundle or a directory of bundles.
    Metrics(MetricsArgs),
    /// Spectral-residual saliency map of a PGM/PPM image.
    Saliency(SaliencyArgs),
    /// Compare metrics by ΔAIC against the base fixation model.
    Evaluate(EvaluateArgs),
    /// Validate a scene bundle and print every defect.
    Validate(ValidateArgs),
    /// Write a synthetic metric table and fixation file.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Neighborhood {
    Adjacent,
    All,
}

impl From<Neighborhood> for NeighborhoodPolicy {
    fn from(n: Neighborhood) -> Self {
        match n {
            Neighborhood::Adjacent => NeighborhoodPolicy::AdjacentOverlap,
            Neighborhood::All => NeighborhoodPolicy::AllOthers,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Reduce {
    Mean,
    Max,
    Sum,
}

impl From<Reduce> for SaliencyReduce {
    fn from(r: Reduce) -> Self {
        match r {
            Reduce::Mean => SaliencyReduce::Mean,
            Reduce::Max => SaliencyReduce::Max,
            Reduce::Sum => SaliencyReduce::Sum,
        }
    }
}

#[derive(clap::Args, Debug)]
struct SrArgs {
    /// Side of the square working grid (32, 64, 128 or 256).
    #[arg(long, default_value_t = 64)]
    sr_work_size: usize,
    /// Standard deviation of the log-spectrum blur.
    #[arg(long, default_value_t = 2.0)]
    sr_sigma: f64,
    #[arg(long, default_value_t = 1e-8)]
    sr_log_epsilon: f64,
}

impl SrArgs {
    fn params(&self) -> SrParams {
        SrParams {
            work_size: self.sr_work_size,
            gaussian_sigma: self.sr_sigma,
            log_epsilon: self.sr_log_epsilon,
        }
    }
}

#[derive(clap::Args, Debug)]
struct MetricsArgs {
    /// Bundle file, or a directory whose *.json files are processed in name order.
    #[arg(long)]
    bundle: PathBuf,
    /// Word vectors in .vec text format.
    #[arg(long)]
    wordvec: PathBuf,
    /// Alternate vector store for concepts_semsim.
    #[arg(long)]
    conceptnet: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "adjacent")]
    vision_neighborhood: Neighborhood,
    #[arg(long, value_enum, default_value = "all")]
    language_neighborhood: Neighborhood,
    /// Add the object-to-image cosine into objs_vissim.
    #[arg(long)]
    objs_include_image: bool,
    #[arg(long, value_enum, default_value = "mean")]
    saliency_reduce: Reduce,
    #[command(flatten)]
    sr: SrArgs,
    /// Output CSV; diagnostics go to `<out>.diagnostics.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SaliencyArgs {
    #[arg(long)]
    image: PathBuf,
    /// Output P5 map.
    #[arg(long)]
    out_map: PathBuf,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[command(flatten)]
    sr: SrArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ResponseArg {
    Duration,
    Count,
    Both,
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    fixations: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    response: ResponseArg,
    /// Output directory for report.json and partial-effect CSVs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    n_scenes: usize,
    #[arg(long)]
    out_metrics: PathBuf,
    #[arg(long)]
    out_fixations: PathBuf,
    /// Metric that drives the simulated responses.
    #[arg(long, default_value = "sum_vissem_sim",
          value_parser = clap::builder::PossibleValuesParser::new(semrel::relevance::METRIC_NAMES))]
    driver: String,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Saliency(a) => cmd_saliency(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Write via a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| anyhow!(e.error))
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Worker count from RELEVANCE_THREADS: unset means rayon's default, 0 means
/// sequential.
fn thread_limit() -> Result<Option<usize>, Failure> {
    match std::env::var("RELEVANCE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::Usage(anyhow!("RELEVANCE_THREADS must be a nonnegative integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn bundle_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(path)
            .with_context(|| format!("cannot list {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json") && p.is_file())
            .collect();
        paths.sort();
        if paths.is_empty() {
            bail!("no .json bundles in {}", path.display());
        }
        Ok(paths)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

#[derive(Serialize)]
struct BundleWarning {
    bundle: String,
    path: String,
    message: String,
}

#[derive(Serialize)]
struct MetricsSidecar<'a> {
    tool: &'static str,
    version: &'static str,
    options: &'a MetricOptions,
    wordvec: String,
    wordvec_entries: usize,
    wordvec_warnings: usize,
    conceptnet: Option<String>,
    rows: usize,
    missing_totals: std::collections::BTreeMap<String, usize>,
    bundle_warnings: Vec<BundleWarning>,
    scenes: Vec<SceneDiagnostics>,
}

struct SceneOutput {
    rows: Vec<MetricRow>,
    diagnostics: SceneDiagnostics,
    warnings: Vec<Issue>,
    source: String,
}

fn process_scene(
    path: &Path,
    store: &WordVectorStore,
    concepts: Option<&WordVectorStore>,
    options: &MetricOptions,
) -> Result<SceneOutput> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let (scene, warnings): (SceneBundle, _) =
        parse_bundle(&text).with_context(|| format!("bundle {}", path.display()))?;
    let root = path.parent().filter(|p| !p.as_os_str().is_empty());
    let table = compute_metric_table(&scene, store, concepts, options, root)
        .with_context(|| format!("bundle {}", path.display()))?;
    Ok(SceneOutput {
        rows: table.rows,
        diagnostics: table.diagnostics,
        warnings,
        source: path.display().to_string(),
    })
}

fn cmd_metrics(a: &MetricsArgs) -> Result<u8, Failure> {
    let sr_params = a.sr.params();
    sr_params.validate().map_err(|e| Failure::Usage(e.into()))?;
    let threads = thread_limit()?;
    let options = MetricOptions {
        vision_neighborhood: a.vision_neighborhood.into(),
        language_neighborhood: a.language_neighborhood.into(),
        objs_include_image: a.objs_include_image,
        sr_params,
        saliency_reduce: a.saliency_reduce.into(),
    };
    let store = load_vec_file(&a.wordvec).with_context(|| format!("word vectors {}", a.wordvec.display()))?;
    let concepts = match &a.conceptnet {
        Some(p) => Some(load_vec_file(p).with_context(|| format!("concept vectors {}", p.display()))?),
        None => None,
    };
    let paths = bundle_paths(&a.bundle)?;
    let run = |p: &PathBuf| process_scene(p, &store, concepts.as_ref(), &options);
    let outputs: Vec<SceneOutput> = match threads {
        Some(0) => paths.iter().map(run).collect::<Result<_>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| anyhow!(e))?
            .install(|| paths.par_iter().map(run).collect::<Result<_>>())?,
        None => paths.par_iter().map(run).collect::<Result<_>>()?,
    };

    let mut rows = Vec::new();
    let mut scenes = Vec::new();
    let mut bundle_warnings = Vec::new();
    let mut missing_totals = std::collections::BTreeMap::new();
    for out in outputs {
        for (k, v) in &out.diagnostics.missing {
            *missing_totals.entry(k.clone()).or_insert(0) += v;
        }
        bundle_warnings.extend(out.warnings.into_iter().map(|w| BundleWarning {
            bundle: out.source.clone(),
            path: w.path,
            message: w.message,
        }));
        rows.extend(out.rows);
        scenes.push(out.diagnostics);
    }
    let mut csv = Vec::new();
    write_metric_rows(&mut csv, &rows).map_err(anyhow::Error::from)?;
    let sidecar = MetricsSidecar {
        tool: "semrel",
        version: env!("CARGO_PKG_VERSION"),
        options: &options,
        wordvec: a.wordvec.display().to_string(),
        wordvec_entries: store.len(),
        wordvec_warnings: store.warnings().len(),
        conceptnet: a.conceptnet.as_ref().map(|p| p.display().to_string()),
        rows: rows.len(),
        missing_totals,
        bundle_warnings,
        scenes,
    };
    write_atomic(&a.out, &csv)?;
    write_atomic(&with_suffix(&a.out, ".diagnostics.json"), &json_bytes(&sidecar)?)?;
    log::info!("wrote {} rows to {}", rows.len(), a.out.display());
    Ok(0)
}

fn cmd_saliency(a: &SaliencyArgs) -> Result<u8, Failure> {
    let params = a.sr.params();
    params.validate().map_err(|e| Failure::Usage(e.into()))?;
    let image = load_gray(&a.image).with_context(|| format!("image {}", a.image.display()))?;
    let map = spectral_residual(&image, &params).map_err(anyhow::Error::from)?;
    write_atomic(&a.out_map, &encode_p5(map.width, map.height, &map.values))?;
    if let Some(p) = &a.out_csv {
        write_atomic(p, render_map_csv(&map).as_bytes())?;
    }
    Ok(0)
}

fn effects_csv(curve: &TermCurve) -> String {
    let mut out = String::from("covariate_value,effect\n");
    for (x, y) in &curve.points {
        out.push_str(&format!("{},{}\n", format_real(*x), format_real(*y)));
    }
    out
}

/// `s(proportion)` → `proportion`.
fn term_slug(term: &str) -> String {
    term.trim_start_matches("s(").trim_end_matches(')').to_string()
}

fn summary_text(report: &ComparisonReport) -> String {
    let mut out = String::new();
    for s in &report.sections {
        out.push_str(&format!(
            "== {} (base AIC {}, n = {}) ==\n",
            s.response.label(),
            format_real(s.base.aic),
            s.base.n_used
        ));
        out.push_str("rank  metric              delta_aic     edf    approx_F\n");
        for (i, m) in s.metrics.iter().enumerate() {
            out.push_str(&format!(
                "{:>4}  {:<18} {:>10.3} {:>7.3} {:>10}\n",
                i + 1,
                m.metric,
                m.delta_aic,
                m.edf_metric,
                m.approx_f.map(|f| format!("{f:.3}")).unwrap_or_else(|| "-".into())
            ));
        }
        for k in &s.skipped {
            out.push_str(&format!("   -  {:<18} skipped: {}\n", k.metric, k.reason));
        }
    }
    out
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<u8, Failure> {
    let rows = read_metric_table(&a.metrics).with_context(|| format!("metric table {}", a.metrics.display()))?;
    let fixations = read_fixations(&a.fixations).with_context(|| format!("fixations {}", a.fixations.display()))?;
    let responses = match a.response {
        ResponseArg::Duration => vec![Response::TotalDuration],
        ResponseArg::Count => vec![Response::FixationNumber],
        ResponseArg::Both => vec![Response::TotalDuration, Response::FixationNumber],
    };
    let config = EvalConfig {
        responses,
        ..EvalConfig::default()
    };
    let mut report = evaluate_metrics(&rows, &fixations, &config).map_err(anyhow::Error::from)?;
    let sidecar = with_suffix(&a.metrics, ".diagnostics.json");
    if sidecar.is_file() {
        let text = std::fs::read_to_string(&sidecar).with_context(|| format!("cannot read {}", sidecar.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("diagnostics {}", sidecar.display()))?;
        report.provenance.inputs = Some(value);
    }

    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_atomic(&a.out.join("report.json"), &json_bytes(&report)?)?;
    let summary = summary_text(&report);
    write_atomic(&a.out.join("summary.txt"), summary.as_bytes())?;
    for s in &report.sections {
        let label = s.response.label();
        for c in &s.base.curves {
            let name = format!("effect_{label}_base_{}.csv", term_slug(&c.term));
            write_atomic(&a.out.join(name), effects_csv(c).as_bytes())?;
        }
        for m in &s.metrics {
            let name = format!("effect_{label}_{}.csv", m.metric);
            write_atomic(&a.out.join(name), effects_csv(&m.curve).as_bytes())?;
        }
    }
    print!("{summary}");
    Ok(0)
}

fn cmd_validate(a: &ValidateArgs) -> Result<u8, Failure> {
    let report = validate_bundle(&a.bundle);
    print!("{}", report.render());
    Ok(if report.ok { 0 } else { 2 })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<u8, Failure> {
    let config = SimConfig {
        driver: a.driver.clone(),
        ..SimConfig::default()
    };
    let (rows, fixations) = simulate_benchmark(a.seed, a.n_scenes, &config);
    let mut metrics = Vec::new();
    write_metric_rows(&mut metrics, &rows).map_err(anyhow::Error::from)?;
    let mut fix = Vec::new();
    write_fixations(&mut fix, &fixations).map_err(anyhow::Error::from)?;
    write_atomic(&a.out_metrics, &metrics)?;
    write_atomic(&a.out_fixations, &fix)?;
    Ok(0)
}

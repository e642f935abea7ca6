//! Config-driven case studies: benchmark prices on a grid, repeated fits on
//! fresh samples, grid MSE and its quantiles, curve and heatmap exports.
//!
//! Every unit of random work owns a stream derived from the config seed:
//!
//! * benchmark grid point `i`: `seed / BENCHMARK / i`
//! * samples for cell `c` (one `(M, N)` pair), repetition `r`: `seed / c / r`
//! * estimator randomness for that repetition: `seed / c / r / FIT`
//! * baseline repetition `r`, grid point `i`: `seed / BASELINE / r / i`
//!
//! so results do not depend on thread scheduling.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, invalid, io_err, Error, Result};
use crate::estimators::{EstimatorSpec, FittedSurface, Surface};
use crate::models::{ConditionalSampler, ModelSpec};
use crate::numerics::{linspace, quantile, RngStream, RunningMoments};
use crate::points::PointSet;
use crate::sampling::{draw_sample_set, ParamSpace};

const BENCHMARK_STREAM: u64 = 0xbe4c;
const BASELINE_STREAM: u64 = 0xba5e;
const FIT_STREAM: u64 = u64::MAX;

pub const DEFAULT_CURVE_POINTS: usize = 500;

/// Reference prices on the evaluation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchmarkSpec {
    /// Closed-form prices (Black–Scholes only).
    Analytic,
    /// Mean of `n_sims` payoffs per grid point.
    Mc { n_sims: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    pub points: PointSet,
    pub prices: Vec<f64>,
    /// Standard errors of the prices; zero for closed-form prices.
    pub stderrs: Vec<f64>,
    /// Simulations per point; zero for closed-form prices.
    pub n_sims: usize,
}

impl BenchmarkGrid {
    pub fn analytic<S: ConditionalSampler + ?Sized>(model: &S, points: PointSet) -> Result<Self> {
        let prices = points
            .rows()
            .map(|t| model.analytic_price(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            stderrs: vec![0.0; prices.len()],
            points,
            prices,
            n_sims: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Mean squared standard error: the grid MSE a perfect surface would
    /// show against this benchmark.
    pub fn noise_floor(&self) -> f64 {
        self.stderrs.iter().map(|s| s * s).sum::<f64>() / self.len() as f64
    }
}

/// Per grid point, the mean of `n_sims` i.i.d. payoffs with its standard
/// error. With `n_sims = 1` the standard error is infinite.
pub fn mc_benchmark_grid<S: ConditionalSampler + ?Sized>(
    model: &S,
    grid: &PointSet,
    n_sims: usize,
    stream: RngStream,
) -> Result<BenchmarkGrid> {
    if n_sims == 0 {
        return Err(invalid("benchmark needs at least one simulation per point"));
    }
    if grid.dim() != model.param_dim() {
        return Err(invalid("grid dimension does not match the model"));
    }
    let stats: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.derive(i as u64).generator();
            let theta = grid.row(i);
            let mut m = RunningMoments::default();
            for _ in 0..n_sims {
                m.push(model.sample(theta, &mut rng)?);
            }
            let se = if n_sims > 1 {
                (m.variance() / n_sims as f64).sqrt()
            } else {
                f64::INFINITY
            };
            Ok((m.mean(), se))
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkGrid {
        points: grid.clone(),
        prices: stats.iter().map(|s| s.0).collect(),
        stderrs: stats.iter().map(|s| s.1).collect(),
        n_sims,
    })
}

/// Mean of `(h(θ) - benchmark(θ))²` over the benchmark grid.
pub fn grid_mse<F: Surface + ?Sized>(surface: &F, benchmark: &BenchmarkGrid) -> Result<f64> {
    if surface.input_dim() != benchmark.points.dim() {
        return Err(invalid(format!(
            "surface takes {} parameters, benchmark grid has dimension {}",
            surface.input_dim(),
            benchmark.points.dim()
        )));
    }
    let preds = surface.predict_points(&benchmark.points)?;
    Ok(mse(&preds, &benchmark.prices))
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Grid MSE of classical per-point Monte Carlo with `per_point_samples`
/// payoffs at each grid point.
pub fn mc_baseline_mse<S: ConditionalSampler + ?Sized>(
    model: &S,
    benchmark: &BenchmarkGrid,
    per_point_samples: usize,
    stream: RngStream,
) -> Result<f64> {
    if per_point_samples == 0 {
        return Err(invalid("baseline needs at least one sample per point"));
    }
    let estimates: Vec<f64> = (0..benchmark.len())
        .map(|i| {
            let mut rng = stream.derive(i as u64).generator();
            model.sample_mean(benchmark.points.row(i), per_point_samples, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(mse(&estimates, &benchmark.prices))
}

/// Classical Monte Carlo comparison run alongside a case study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub per_point_samples: usize,
    pub reps: usize,
}

fn default_reps() -> usize {
    1
}

fn default_curve_points() -> usize {
    DEFAULT_CURVE_POINTS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for exported files; the CLI's `--out-dir` takes precedence.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Export the fitted curve of repetition 0 on a fine line (1-d spaces).
    #[serde(default)]
    pub curve: bool,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
    /// Export the fitted surface of repetition 0 on the grid (2-d spaces).
    #[serde(default)]
    pub heatmap: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            curve: false,
            curve_points: DEFAULT_CURVE_POINTS,
            heatmap: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub space: ParamSpace,
    pub estimator: EstimatorSpec,
    pub lambdas: Vec<f64>,
    /// Sample count for a single pre-averaging width.
    #[serde(default)]
    pub n: Option<usize>,
    /// Pre-averaging width for a single cell (default 1).
    #[serde(default)]
    pub m: Option<usize>,
    /// M-sweep at fixed `budget = M N`.
    #[serde(default)]
    pub ms: Option<Vec<usize>>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub benchmark: BenchmarkSpec,
    #[serde(default)]
    pub baseline: Option<BaselineSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// One `(M, N)` pair of a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub m: usize,
    pub n: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.space.validate()?;
        if self.space.dims() != self.model.param_dim() {
            return Err(Error::Config(format!(
                "model takes {} parameters, space has {} dimensions",
                self.model.param_dim(),
                self.space.dims()
            )));
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("lambdas must be a non-empty list of values >= 0".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if let BenchmarkSpec::Mc { n_sims: 0 } = self.benchmark {
            return Err(Error::Config("benchmark n_sims must be at least 1".into()));
        }
        if matches!(self.benchmark, BenchmarkSpec::Analytic) && !self.model.has_analytic_price() {
            return Err(Error::Config("analytic benchmark needs a closed-form model".into()));
        }
        if let Some(b) = &self.baseline {
            if b.per_point_samples == 0 || b.reps == 0 {
                return Err(Error::Config("baseline needs positive samples and reps".into()));
            }
        }
        if self.outputs.curve && self.outputs.curve_points < 2 {
            return Err(Error::Config("curve_points must be at least 2".into()));
        }
        self.cells().map(|_| ())
    }

    /// The `(M, N)` cells of the study, audited against the budget.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        match (&self.ms, self.budget, self.n, self.m) {
            (Some(ms), Some(budget), None, None) => {
                if ms.is_empty() {
                    return Err(Error::Config("ms must not be empty".into()));
                }
                ms.iter()
                    .map(|&m| {
                        if m == 0 || budget % m != 0 {
                            return Err(Error::Config(format!(
                                "budget {budget} is not a multiple of M = {m}"
                            )));
                        }
                        Ok(Cell { m, n: budget / m })
                    })
                    .collect()
            }
            (None, None, Some(n), m) => {
                let m = m.unwrap_or(1);
                if n == 0 || m == 0 {
                    return Err(Error::Config("n and m must be positive".into()));
                }
                Ok(vec![Cell { m, n }])
            }
            _ => Err(Error::Config(
                "give either n (and optionally m) or ms together with budget".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
    pub rep: usize,
    pub draws: u64,
    pub mse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lambda: f64,
    pub m: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub completed: usize,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub lambda: f64,
    pub m: usize,
    pub theta: Vec<f64>,
    pub price_fit: f64,
    pub price_ref: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub lambda: f64,
    pub m: usize,
    pub theta_1: f64,
    pub theta_2: f64,
    pub price_fit: f64,
    pub price_benchmark: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub per_point_samples: usize,
    pub mses: Vec<f64>,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub benchmark: BenchmarkGrid,
    pub records: Vec<MseRecord>,
    pub summary: Vec<SummaryRow>,
    pub baseline: Option<BaselineReport>,
    pub curves: Vec<CurveRow>,
    pub heatmap: Vec<HeatmapRow>,
}

fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let q = |p| quantile(values, p).expect("non-empty");
    (q(0.25), q(0.5), q(0.75))
}

/// Quantile rows per `(λ, M)` from the raw records, in config order.
pub fn summarize(config: &ExperimentConfig, records: &[MseRecord]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for cell in config.cells()? {
        for &lambda in &config.lambdas {
            let mses: Vec<f64> = records
                .iter()
                .filter(|r| r.m == cell.m && r.lambda.to_bits() == lambda.to_bits())
                .filter_map(|r| r.mse)
                .collect();
            let (q25, median, q75) = quartiles(&mses);
            rows.push(SummaryRow {
                lambda,
                m: cell.m,
                q25,
                median,
                q75,
                completed: mses.len(),
                complete: mses.len() == config.reps,
            });
        }
    }
    Ok(rows)
}

impl ExperimentReport {
    pub fn summary_for(&self, lambda: f64, m: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.m == m && r.lambda.to_bits() == lambda.to_bits())
    }

    pub fn is_complete(&self) -> bool {
        self.summary.iter().all(|r| r.complete)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn benchmark_for(config: &ExperimentConfig) -> Result<BenchmarkGrid> {
    let grid = config.space.grid_points();
    match config.benchmark {
        BenchmarkSpec::Analytic => BenchmarkGrid::analytic(&config.model, grid),
        BenchmarkSpec::Mc { n_sims } => mc_benchmark_grid(
            &config.model,
            &grid,
            n_sims,
            RngStream::new(config.seed).derive(BENCHMARK_STREAM),
        ),
    }
}

struct RepOutcome {
    records: Vec<MseRecord>,
    fits: Option<Vec<FittedSurface>>,
}

fn run_rep(config: &ExperimentConfig, benchmark: &BenchmarkGrid, ci: usize, cell: Cell, rep: usize) -> RepOutcome {
    let stream = RngStream::new(config.seed).derive(ci as u64).derive(rep as u64);
    let failed = |draws: u64, msg: String| {
        config
            .lambdas
            .iter()
            .map(|&lambda| MseRecord {
                lambda,
                m: cell.m,
                n: cell.n,
                rep,
                draws,
                mse: None,
                error: Some(msg.clone()),
            })
            .collect()
    };
    let samples = match draw_sample_set(&config.model, &config.space, cell.n, cell.m, stream) {
        Ok(s) => s,
        Err(e) => {
            return RepOutcome {
                records: failed(0, e.to_string()),
                fits: None,
            }
        }
    };
    let mut fit_rng = stream.derive(FIT_STREAM).generator();
    let fits = match config.estimator.fit_path(&samples, &config.lambdas, &mut fit_rng) {
        Ok(f) => f,
        Err(e) => {
            return RepOutcome {
                records: failed(samples.draws, e.to_string()),
                fits: None,
            }
        }
    };
    let records = config
        .lambdas
        .iter()
        .zip(&fits)
        .map(|(&lambda, fit)| {
            let (mse, error) = match grid_mse(fit, benchmark) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MseRecord {
                lambda,
                m: cell.m,
                n: cell.n,
                rep,
                draws: samples.draws,
                mse,
                error,
            }
        })
        .collect();
    let keep = rep == 0 && (config.outputs.curve || config.outputs.heatmap);
    RepOutcome {
        records,
        fits: keep.then_some(fits),
    }
}

fn curve_rows(config: &ExperimentConfig, cell: Cell, fits: &[FittedSurface]) -> Result<Vec<CurveRow>> {
    if config.space.dims() != 1 {
        return Ok(Vec::new());
    }
    let [lo, hi] = config.space.bounds[0];
    let line = PointSet::from_scalars(linspace(lo, hi, config.outputs.curve_points));
    let refs: Vec<Option<f64>> = line.rows().map(|t| config.model.analytic_price(t).ok()).collect();
    let mut rows = Vec::new();
    for (&lambda, fit) in config.lambdas.iter().zip(fits) {
        let preds = fit.predict_points(&line)?;
        for ((t, p), r) in line.rows().zip(preds).zip(&refs) {
            rows.push(CurveRow {
                lambda,
                m: cell.m,
                theta: t.to_vec(),
                price_fit: p,
                price_ref: *r,
            });
        }
    }
    Ok(rows)
}

fn heatmap_rows(config: &ExperimentConfig, benchmark: &BenchmarkGrid, cell: Cell, fits: &[FittedSurface]) -> Result<Vec<HeatmapRow>> {
    if config.space.dims() != 2 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (&lambda, fit) in config.lambdas.iter().zip(fits) {
        let preds = fit.predict_points(&benchmark.points)?;
        for ((t, p), b) in benchmark.points.rows().zip(preds).zip(&benchmark.prices) {
            rows.push(HeatmapRow {
                lambda,
                m: cell.m,
                theta_1: t[0],
                theta_2: t[1],
                price_fit: p,
                price_benchmark: *b,
            });
        }
    }
    Ok(rows)
}

/// Classical Monte Carlo replicates against `benchmark`.
pub fn baseline_report<S: ConditionalSampler + ?Sized>(
    model: &S,
    benchmark: &BenchmarkGrid,
    spec: &BaselineSpec,
    seed: u64,
) -> Result<BaselineReport> {
    let root = RngStream::new(seed).derive(BASELINE_STREAM);
    let mses: Vec<f64> = (0..spec.reps)
        .into_par_iter()
        .map(|r| mc_baseline_mse(model, benchmark, spec.per_point_samples, root.derive(r as u64)))
        .collect::<Result<_>>()?;
    let (q25, median, q75) = quartiles(&mses);
    Ok(BaselineReport {
        per_point_samples: spec.per_point_samples,
        mses,
        q25,
        median,
        q75,
    })
}

/// Runs every `(M, rep)` unit: fresh samples, one fit per λ, grid MSE.
/// Failed units are recorded and their cells marked incomplete.
pub fn run_case_study(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    run_case_study_with_benchmark(config, benchmark_for(config)?)
}

/// [`run_case_study`] against a precomputed benchmark, e.g. one shared by
/// studies that differ only in their sample budget.
pub fn run_case_study_with_benchmark(config: &ExperimentConfig, benchmark: BenchmarkGrid) -> Result<ExperimentReport> {
    config.validate()?;
    if benchmark.points != config.space.grid_points() {
        return Err(invalid("benchmark grid does not match the config's parameter grid"));
    }
    let cells = config.cells()?;
    let units: Vec<(usize, Cell, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, &cell)| (0..config.reps).map(move |r| (ci, cell, r)))
        .collect();
    let outcomes: Vec<RepOutcome> = units
        .par_iter()
        .map(|&(ci, cell, rep)| run_rep(config, &benchmark, ci, cell, rep))
        .collect();
    let mut records = Vec::with_capacity(units.len() * config.lambdas.len());
    let mut curves = Vec::new();
    let mut heatmap = Vec::new();
    for (&(_, cell, _), outcome) in units.iter().zip(outcomes) {
        records.extend(outcome.records);
        if let Some(fits) = outcome.fits {
            if config.outputs.curve {
                curves.extend(curve_rows(config, cell, &fits)?);
            }
            if config.outputs.heatmap {
                heatmap.extend(heatmap_rows(config, &benchmark, cell, &fits)?);
            }
        }
    }
    let summary = summarize(config, &records)?;
    let baseline = config
        .baseline
        .as_ref()
        .map(|spec| baseline_report(&config.model, &benchmark, spec, config.seed))
        .transpose()?;
    Ok(ExperimentReport {
        config: config.clone(),
        benchmark,
        records,
        summary,
        baseline,
        curves,
        heatmap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// Shortest round-trip representation; blank for missing values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv_file(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn write_benchmark_csv(benchmark: &BenchmarkGrid, path: &Path) -> Result<()> {
    let dim = benchmark.points.dim();
    let mut header: Vec<String> = (1..=dim).map(|k| format!("theta_{k}")).collect();
    header.extend(strings(&["price", "stderr"]));
    let rows = benchmark
        .points
        .rows()
        .zip(benchmark.prices.iter().zip(&benchmark.stderrs))
        .map(|(t, (p, s))| {
            let mut row: Vec<String> = t.iter().map(|v| fmt_f64(*v)).collect();
            row.push(fmt_f64(*p));
            row.push(fmt_f64(*s));
            row
        });
    write_csv_file(path, &header, rows)
}

/// Writes the report into `dir` and returns the files written.
///
/// CSV: `mse_raw.csv` (lambda, m, rep, mse), `mse_summary.csv` (lambda, m,
/// q25, median, q75), `benchmark.csv`, plus `curve.csv`, `heatmap.csv` and
/// `mse_baseline.csv` when present. JSON: `report.json` with everything.
pub fn export_report(report: &ExperimentReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = dir.join("report.json");
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            let mut f = fs::File::create(&path).map_err(io_err(&path))?;
            f.write_all(text.as_bytes()).map_err(io_err(&path))?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let path = dir.join("mse_raw.csv");
            write_csv_file(
                &path,
                &strings(&["lambda", "m", "rep", "mse"]),
                report.records.iter().map(|r| {
                    vec![fmt_f64(r.lambda), r.m.to_string(), r.rep.to_string(), fmt_opt(r.mse)]
                }),
            )?;
            written.push(path);

            let path = dir.join("mse_summary.csv");
            write_csv_file(
                &path,
                &strings(&["lambda", "m", "q25", "median", "q75"]),
                report.summary.iter().map(|r| {
                    vec![
                        fmt_f64(r.lambda),
                        r.m.to_string(),
                        fmt_f64(r.q25),
                        fmt_f64(r.median),
                        fmt_f64(r.q75),
                    ]
                }),
            )?;
            written.push(path);

            let path = dir.join("benchmark.csv");
            write_benchmark_csv(&report.benchmark, &path)?;
            written.push(path);

            if let Some(b) = &report.baseline {
                let path = dir.join("mse_baseline.csv");
                write_csv_file(
                    &path,
                    &strings(&["per_point_samples", "rep", "mse"]),
                    b.mses
                        .iter()
                        .enumerate()
                        .map(|(i, v)| vec![b.per_point_samples.to_string(), i.to_string(), fmt_f64(*v)]),
                )?;
                written.push(path);
            }

            if !report.curves.is_empty() {
                let dim = report.curves[0].theta.len();
                let mut header = strings(&["lambda", "m"]);
                header.extend((1..=dim).map(|k| format!("theta_{k}")));
                header.extend(strings(&["price_fit", "price_ref"]));
                let path = dir.join("curve.csv");
                write_csv_file(
                    &path,
                    &header,
                    report.curves.iter().map(|r| {
                        let mut row = vec![fmt_f64(r.lambda), r.m.to_string()];
                        row.extend(r.theta.iter().map(|v| fmt_f64(*v)));
                        row.push(fmt_f64(r.price_fit));
                        row.push(fmt_opt(r.price_ref));
                        row
                    }),
                )?;
                written.push(path);
            }

            if !report.heatmap.is_empty() {
                let path = dir.join("heatmap.csv");
                write_csv_file(
                    &path,
                    &strings(&["lambda", "m", "theta_1", "theta_2", "price_fit", "price_benchmark"]),
                    report.heatmap.iter().map(|r| {
                        vec![
                            fmt_f64(r.lambda),
                            r.m.to_string(),
                            fmt_f64(r.theta_1),
                            fmt_f64(r.theta_2),
                            fmt_f64(r.price_fit),
                            fmt_f64(r.price_benchmark),
                        ]
                    }),
                )?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

//! Browser demo: three small interactive studies run in the page.
//!
//! Each export takes plain numbers (seeds as `u32` so JS can pass a plain
//! number) and returns a JSON string, so the page needs no bundler. Everything runs single-threaded; the multi-threaded
//! harness paths are not used here.

use minmc::estimators::{EstimatorSpec, Surface};
use minmc::harness::{grid_mse, BenchmarkGrid};
use minmc::kernels::{eval_kernel, Combine, FeatureNodesConfig, KernelKind};
use minmc::models::{ConditionalSampler, ModelSpec};
use minmc::numerics::linspace;
use minmc::sampling::{draw_sample_set, ParamSpace};
use minmc::{PointSet, Result, RngStream};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const CURVE_POINTS: usize = 200;
const GRID_POINTS: usize = 100;

fn bs_model() -> ModelSpec {
    serde_json::from_str(
        r#"{"model": "black_scholes", "spot": 100.0, "strike": 100.0, "maturity": 2.0, "vol_map": "affine01"}"#,
    )
    .expect("valid model")
}

fn heston_model() -> ModelSpec {
    serde_json::from_str(
        r#"{"model": "heston",
            "base": {"spot": 100.0, "strike": 100.0, "maturity": 0.08333333333333333, "kappa": 5.0,
                     "theta_var": 0.5, "sigma_vol": 0.2, "rho": -0.5, "steps": 64},
            "params": ["kappa", "theta_var"]}"#,
    )
    .expect("valid model")
}

fn estimator(kind: &str, dim: usize) -> Result<EstimatorSpec> {
    Ok(match kind {
        "krr" => EstimatorSpec::Krr {
            kernel: KernelKind::Triangular,
        },
        "rf" => EstimatorSpec::RfRidge {
            nodes: FeatureNodesConfig::gaussian(256, dim, 0).with_combine(Combine::Components),
        },
        other => return Err(minmc::Error::Config(format!("unknown estimator {other:?}"))),
    })
}

#[derive(Serialize)]
pub struct CurveResult {
    pub theta: Vec<f64>,
    pub fit: Vec<f64>,
    pub price: Vec<f64>,
    pub grid: Vec<f64>,
    /// Per-point Monte Carlo means with the same total number of payoffs.
    pub baseline: Vec<f64>,
    pub mse_fit: f64,
    pub mse_baseline: f64,
}

/// Fits the Black-Scholes price curve on `[0, 1]` from `n` samples and
/// compares it with per-point Monte Carlo at the same budget.
pub fn bs_curve(kind: &str, n: usize, lambda: f64, seed: u64) -> Result<CurveResult> {
    if n < GRID_POINTS {
        return Err(minmc::Error::Config(format!("need at least {GRID_POINTS} samples")));
    }
    let model = bs_model();
    let space = ParamSpace::interval(0.0, 1.0, GRID_POINTS)?;
    let stream = RngStream::new(seed);
    let samples = draw_sample_set(&model, &space, n, 1, stream.derive(0))?;
    let fit = estimator(kind, 1)?.fit(&samples, lambda, &mut stream.derive(1).generator())?;

    let line = PointSet::from_scalars(linspace(0.0, 1.0, CURVE_POINTS));
    let bench = BenchmarkGrid::analytic(&model, space.grid_points())?;
    let per_point = n / GRID_POINTS;
    let baseline: Vec<f64> = bench
        .points
        .rows()
        .enumerate()
        .map(|(i, t)| model.sample_mean(t, per_point, &mut stream.derive(2).derive(i as u64).generator()))
        .collect::<Result<_>>()?;
    let mse_baseline = baseline
        .iter()
        .zip(&bench.prices)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / GRID_POINTS as f64;
    Ok(CurveResult {
        fit: fit.predict_points(&line)?,
        price: line.rows().map(|t| model.analytic_price(t)).collect::<Result<_>>()?,
        theta: line.coords().to_vec(),
        grid: bench.points.coords().to_vec(),
        mse_fit: grid_mse(&fit, &bench)?,
        baseline,
        mse_baseline,
    })
}

#[derive(Serialize)]
pub struct SectionResult {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

/// `y -> k(x0, y)` on `[0, 1]`.
pub fn kernel_section(kind: &str, x0: f64, nodes: usize) -> Result<SectionResult> {
    let kernel: KernelKind = match kind {
        "triangular" => KernelKind::Triangular,
        "laplace" => KernelKind::laplace(),
        "filipovic" => KernelKind::Filipovic,
        "feature_map" => serde_json::from_value(serde_json::json!({"kind": "feature_map", "count": nodes}))?,
        other => return Err(minmc::Error::Config(format!("unknown kernel {other:?}"))),
    };
    let x = linspace(0.0, 1.0, CURVE_POINTS);
    let values = x
        .iter()
        .map(|y| eval_kernel(&kernel, &[x0], &[*y]))
        .collect::<Result<_>>()?;
    Ok(SectionResult { x, values })
}

#[derive(Serialize)]
pub struct HeatmapResult {
    pub kappa: Vec<f64>,
    pub theta_var: Vec<f64>,
    /// Row-major over (kappa, theta_var).
    pub fit: Vec<f64>,
    pub benchmark: Vec<f64>,
    pub mse: f64,
    pub noise_floor: f64,
}

/// Random-feature fit of the Heston price over `(κ, θ_var)` against a
/// small per-point Monte Carlo benchmark.
pub fn heston_heatmap(n: usize, lambda: f64, grid: usize, bench_sims: usize, seed: u64) -> Result<HeatmapResult> {
    let model = heston_model();
    let space = ParamSpace::new(vec![[1.0, 10.0], [0.2, 1.0]], vec![grid, grid])?;
    let stream = RngStream::new(seed);
    let samples = draw_sample_set(&model, &space, n, 1, stream.derive(0))?;
    let fit = estimator("rf", 2)?.fit(&samples, lambda, &mut stream.derive(1).generator())?;
    let points = space.grid_points();
    let mut prices = Vec::with_capacity(points.len());
    let mut stderrs = Vec::with_capacity(points.len());
    for (i, t) in points.rows().enumerate() {
        let mut rng = stream.derive(2).derive(i as u64).generator();
        let draws: Vec<f64> = (0..bench_sims).map(|_| model.sample(t, &mut rng)).collect::<Result<_>>()?;
        let mean = draws.iter().sum::<f64>() / bench_sims as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (bench_sims as f64 - 1.0);
        prices.push(mean);
        stderrs.push((var / bench_sims as f64).sqrt());
    }
    let bench = BenchmarkGrid {
        points,
        prices,
        stderrs,
        n_sims: bench_sims,
    };
    let axes = space.axes();
    Ok(HeatmapResult {
        fit: fit.predict_points(&bench.points)?,
        mse: grid_mse(&fit, &bench)?,
        noise_floor: bench.noise_floor(),
        benchmark: bench.prices,
        kappa: axes[0].clone(),
        theta_var: axes[1].clone(),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| Ok(serde_json::to_string(&v)?))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = bsCurve)]
pub fn bs_curve_js(kind: &str, n: usize, lambda: f64, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(bs_curve(kind, n, lambda, seed.into()))
}

#[wasm_bindgen(js_name = kernelSection)]
pub fn kernel_section_js(kind: &str, x0: f64, nodes: usize) -> std::result::Result<String, JsValue> {
    to_js(kernel_section(kind, x0, nodes))
}

#[wasm_bindgen(js_name = hestonHeatmap)]
pub fn heston_heatmap_js(n: usize, lambda: f64, grid: usize, bench_sims: usize, seed: u32) -> std::result::Result<String, JsValue> {
    to_js(heston_heatmap(n, lambda, grid, bench_sims, seed.into()))
}

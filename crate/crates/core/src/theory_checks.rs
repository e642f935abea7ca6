//! Executable versions of the ridge-regression inequalities and limit
//! statements behind the method.
//!
//! The operator inequalities are dimension-free, so they are exercised on
//! finite instances: `H = ℝ^d`, the covariance operator `Q` an SPD matrix,
//! `a = Q h₀`, and `‖v‖²_{L²(μ)} = vᵀ Q v`. The statistical statements (error
//! decay with `λ_N = N^{-1/5}`, the limit of the training loss) are checked by
//! simulation on models with a closed-form price.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::estimators::{empirical_loss, EstimatorSpec, Surface};
use crate::kernels::FeatureNodes;
use crate::models::ConditionalSampler;
use crate::numerics::{linspace, solve_spd, standard_normal, trapezoid, Generator, RngStream, RunningMoments, SpdMatrix};
use crate::sampling::{draw_sample_set, draw_thetas, ParamSpace};

/// One pass/fail record, as printed by `minmc theory-check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub params: serde_json::Value,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `λ √x / (λ + x)`.
pub fn ridge_factor(lambda: f64, x: f64) -> f64 {
    lambda * x.sqrt() / (lambda + x)
}

/// True iff `λ √x / (λ + x) ≤ √λ / 2` at every `x`.
pub fn scalar_bound_check(lambda: f64, xs: &[f64]) -> bool {
    let bound = lambda.sqrt() / 2.0 + 1e-12;
    xs.iter().all(|&x| ridge_factor(lambda, x) <= bound)
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.log10(), hi.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// Finite stand-in for the covariance operator, its right-hand side and the
/// unregularized solution.
#[derive(Clone, Debug)]
pub struct FiniteModel {
    q: SpdMatrix,
    a: Vec<f64>,
    h0: Vec<f64>,
}

impl FiniteModel {
    pub fn new(q: SpdMatrix, a: Vec<f64>, h0: Vec<f64>) -> Result<Self> {
        if a.len() != q.dim() || h0.len() != q.dim() {
            return Err(invalid("Q, a and h0 must share one dimension"));
        }
        if !(q.min_eigenvalue() > 0.0) {
            return Err(invalid("Q must be positive definite"));
        }
        let r = q.matrix() * DVector::from_column_slice(&h0) - DVector::from_column_slice(&a);
        if r.norm() > 1e-10 {
            return Err(invalid(format!("Q h0 differs from a by {:e}", r.norm())));
        }
        Ok(Self { q, a, h0 })
    }

    /// The model with `a := Q h0`.
    pub fn from_solution(q: SpdMatrix, h0: Vec<f64>) -> Result<Self> {
        if h0.len() != q.dim() {
            return Err(invalid("Q and h0 must share one dimension"));
        }
        let a = (q.matrix() * DVector::from_column_slice(&h0)).as_slice().to_vec();
        Self::new(q, a, h0)
    }

    /// `Q = U diag(eigs) Uᵀ` with a random orthogonal `U`, eigenvalues uniform
    /// in `[eig_lo, eig_hi]`, and Gaussian `h0`.
    pub fn random(dim: usize, eig_lo: f64, eig_hi: f64, rng: &mut Generator) -> Result<Self> {
        let eigs: Vec<f64> = (0..dim).map(|_| rng.random_range(eig_lo..=eig_hi)).collect();
        let q = random_spd_with_spectrum(&eigs, rng)?;
        let h0 = (0..dim).map(|_| standard_normal(rng)).collect();
        Self::from_solution(q, h0)
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn q(&self) -> &SpdMatrix {
        &self.q
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn h0(&self) -> &[f64] {
        &self.h0
    }

    /// `h_λ = (Q + λ)⁻¹ a`.
    pub fn ridge_solution(&self, lambda: f64) -> Result<Vec<f64>> {
        Ok(solve_spd(&self.q.shifted(lambda), &self.a)?.x)
    }

    /// `‖v‖_Q = sqrt(vᵀ Q v)`.
    pub fn q_norm(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        v.dot(&(self.q.matrix() * &v)).max(0.0).sqrt()
    }
}

fn random_orthogonal(dim: usize, rng: &mut Generator) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| standard_normal(rng));
    g.qr().q()
}

fn random_spd_with_spectrum(eigs: &[f64], rng: &mut Generator) -> Result<SpdMatrix> {
    let u = random_orthogonal(eigs.len(), rng);
    let m = &u * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * u.transpose();
    SpdMatrix::new((&m + m.transpose()) * 0.5)
}

/// PSD matrix `B Bᵀ / k` with `B` a `dim x rank` Gaussian matrix.
pub fn random_psd(dim: usize, rank: usize, rng: &mut Generator) -> Result<SpdMatrix> {
    let b = DMatrix::from_fn(dim, rank, |_, _| standard_normal(rng));
    let m = &b * b.transpose() / rank.max(1) as f64;
    SpdMatrix::new((&m + m.transpose()) * 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeShiftEntry {
    pub lambda: f64,
    /// `‖h_λ - h₀‖_Q`.
    pub error: f64,
    /// `√λ ‖h₀‖ / 2`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeShiftReport {
    pub entries: Vec<RidgeShiftEntry>,
    /// Error at the smallest λ is below the error at the largest.
    pub converges: bool,
    /// Errors are non-increasing as λ decreases.
    pub monotone: bool,
    pub pass: bool,
}

impl RidgeShiftReport {
    pub fn failures(&self) -> impl Iterator<Item = &RidgeShiftEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

/// Checks `‖h_λ - h₀‖_Q ≤ √λ ‖h₀‖ / 2` for each λ and that `h_λ → h₀` as
/// `λ ↓ 0`. The shift is formed as `-λ (Q + λ)⁻¹ h₀`, which equals
/// `h_λ - h₀` when `a = Q h₀` and does not cancel at tiny λ.
pub fn ridge_shift_check(model: &FiniteModel, lambdas: &[f64]) -> Result<RidgeShiftReport> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid("ridge levels must be positive and finite"));
    }
    let h0_norm = DVector::from_column_slice(&model.h0).norm();
    let mut entries = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let w = solve_spd(&model.q.shifted(lambda), &model.h0)?.x;
        let shift: Vec<f64> = w.iter().map(|v| -lambda * v).collect();
        let error = model.q_norm(&shift);
        let bound = lambda.sqrt() * h0_norm / 2.0;
        entries.push(RidgeShiftEntry {
            lambda,
            error,
            bound,
            pass: error <= bound + 1e-10,
        });
    }
    let mut by_lambda: Vec<&RidgeShiftEntry> = entries.iter().collect();
    by_lambda.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let tol = 1e-12 * h0_norm.max(1.0);
    let monotone = by_lambda.windows(2).all(|w| w[0].error <= w[1].error + tol);
    let (lo, hi) = (by_lambda[0], by_lambda[by_lambda.len() - 1]);
    let converges = lo.lambda == hi.lambda || lo.error < hi.error || hi.error == 0.0;
    let pass = entries.iter().all(|e| e.pass) && monotone && converges;
    Ok(RidgeShiftReport {
        entries,
        converges,
        monotone,
        pass,
    })
}

/// Largest singular value by power iteration on `MᵀM`.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.amax() == 0.0 {
        return 0.0;
    }
    let mut rng = RngStream::new(0x6f70).generator();
    let mut v = DVector::from_fn(m.ncols(), |_, _| 1.0 + rng.random_range(0.0..1.0));
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..5000 {
        let mv = m * &v;
        let next = mv.norm();
        let w = m.transpose() * mv;
        let wn = w.norm();
        if wn == 0.0 {
            return next;
        }
        v = w / wn;
        let done = (next - sigma).abs() <= 1e-10 * next;
        sigma = next;
        if done {
            break;
        }
    }
    // One more Rayleigh step from the converged direction.
    sigma.max((m * &v).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseDifference {
    /// `‖(Q₁ + λ)⁻¹ - (Q₂ + λ)⁻¹‖_op`.
    pub lhs: f64,
    /// `‖Q₁ - Q₂‖_op / λ²`.
    pub bound: f64,
    pub pass: bool,
}

fn shifted_inverse(q: &SpdMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    let shifted = q.shifted(lambda).into_inner();
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("Q + λ is not positive definite".into()))?;
    Ok(chol.inverse())
}

pub fn inverse_difference(q1: &SpdMatrix, q2: &SpdMatrix, lambda: f64) -> Result<InverseDifference> {
    if q1.dim() != q2.dim() {
        return Err(invalid("operators must share one dimension"));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    let lhs = operator_norm(&(shifted_inverse(q1, lambda)? - shifted_inverse(q2, lambda)?));
    let bound = operator_norm(&(q1.matrix() - q2.matrix())) / (lambda * lambda);
    Ok(InverseDifference {
        lhs,
        bound,
        pass: lhs <= bound + 1e-10,
    })
}

pub fn inverse_difference_check(q1: &SpdMatrix, q2: &SpdMatrix, lambda: f64) -> Result<bool> {
    Ok(inverse_difference(q1, q2, lambda)?.pass)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRatioReport {
    /// `N E‖mean_N - μ‖² / E‖b₁ - μ‖²`, both expectations over replicates.
    pub ratio: f64,
    /// Delta-method standard error of `ratio`.
    pub stderr: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub pass: bool,
}

/// Replicates of `N ‖mean_N - μ‖²` against `‖b₁ - μ‖²` for an arbitrary
/// vector-valued draw; `z` sets the half-width of the acceptance band.
pub fn mc_ratio<F>(mu: &[f64], n: usize, reps: usize, z: f64, rng: &mut Generator, mut draw: F) -> Result<McRatioReport>
where
    F: FnMut(&mut Generator) -> Vec<f64>,
{
    if n == 0 || reps < 2 {
        return Err(invalid("need N >= 1 and at least two replicates"));
    }
    let dim = mu.len();
    let mut u = Vec::with_capacity(reps);
    let mut v = Vec::with_capacity(reps);
    let mut sum = vec![0.0; dim];
    for _ in 0..reps {
        sum.iter_mut().for_each(|s| *s = 0.0);
        let mut first = 0.0;
        for i in 0..n {
            let b = draw(rng);
            if i == 0 {
                first = b.iter().zip(mu).map(|(x, m)| (x - m).powi(2)).sum();
            }
            sum.iter_mut().zip(&b).for_each(|(s, x)| *s += x);
        }
        let dev: f64 = sum.iter().zip(mu).map(|(s, m)| (s / n as f64 - m).powi(2)).sum();
        u.push(n as f64 * dev);
        v.push(first);
    }
    let r = reps as f64;
    let u_bar = u.iter().sum::<f64>() / r;
    let v_bar = v.iter().sum::<f64>() / r;
    let ratio = u_bar / v_bar;
    let mut resid = RunningMoments::default();
    for (a, b) in u.iter().zip(&v) {
        resid.push(a - ratio * b);
    }
    let stderr = (resid.variance() / r).sqrt() / v_bar;
    let (band_lo, band_hi) = (ratio - z * stderr, ratio + z * stderr);
    Ok(McRatioReport {
        ratio,
        stderr,
        band_lo,
        band_hi,
        pass: band_lo <= 1.0 && 1.0 <= band_hi,
    })
}

/// AR(1)-correlated Gaussian vectors, `Cov_ij = ρ^|i-j|`, centered at zero.
pub fn hilbert_mc_check(dim: usize, n: usize, reps: usize, rho: f64, rng: &mut Generator) -> Result<McRatioReport> {
    if dim == 0 || reps < 100 {
        return Err(invalid("need dim >= 1 and at least 100 replicates"));
    }
    if !(rho.abs() < 1.0) {
        return Err(invalid("correlation must lie in (-1, 1)"));
    }
    let cov = SpdMatrix::from_symmetric_fn(dim, |i, j| rho.powi((i as i32 - j as i32).abs()))?;
    let l = cov
        .into_inner()
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("covariance".into()))?
        .l();
    let mu = vec![0.0; dim];
    mc_ratio(&mu, n, reps, 3.0, rng, |g| {
        let z = DVector::from_fn(dim, |_, _| standard_normal(g));
        (&l * z).as_slice().to_vec()
    })
}

/// The same identity for the operator-valued variable `φ_Θ ⊗ φ_Θ`, with `φ`
/// the random tanh features and `Θ ~ U[0, 1]`. The mean operator is computed
/// by quadrature.
pub fn hilbert_schmidt_mc_check(nodes: &FeatureNodes, n: usize, reps: usize, rng: &mut Generator) -> Result<McRatioReport> {
    if nodes.dim() != 1 || reps < 100 {
        return Err(invalid("need scalar nodes and at least 100 replicates"));
    }
    let d = nodes.width();
    let grid = linspace(0.0, 1.0, 2001);
    let feats: Vec<Vec<f64>> = grid.iter().map(|t| nodes.features(&[*t])).collect::<Result<_>>()?;
    let mut mu = vec![0.0; d * d];
    for j in 0..d {
        for k in 0..d {
            let vals: Vec<f64> = feats.iter().map(|f| f[j] * f[k]).collect();
            mu[j * d + k] = trapezoid(&vals, &grid)?;
        }
    }
    mc_ratio(&mu, n, reps, 3.0, rng, |g| {
        let t: f64 = g.random_range(0.0..1.0);
        let f = nodes.features(&[t]).expect("scalar node");
        let mut out = Vec::with_capacity(d * d);
        for j in 0..d {
            for k in 0..d {
                out.push(f[j] * f[k]);
            }
        }
        out
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `λ_N = N^{-1/5}`.
pub fn rate_lambda(n: usize) -> f64 {
    (n as f64).powf(-0.2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub ns: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// Rep-averaged `‖h_fit - h₀‖_{L²(μ)}`.
    pub errors: Vec<f64>,
    pub slope: f64,
    pub reps: usize,
    pub strictly_decreasing: bool,
    /// Set when a single repetition makes the averages unreliable.
    pub high_variance: bool,
}

/// `‖f - h₀‖_{L²(μ)}` for uniform μ on an interval, by trapezoid quadrature
/// on the space's grid.
pub fn l2_error<S, F>(space: &ParamSpace, fit: &F, model: &S) -> Result<f64>
where
    S: ConditionalSampler + ?Sized,
    F: Surface + ?Sized,
{
    if space.dims() != 1 {
        return Err(Error::UnsupportedModel("L² error quadrature needs a scalar parameter".into()));
    }
    let grid = space.grid_points();
    let preds = fit.predict_points(&grid)?;
    let sq: Vec<f64> = grid
        .rows()
        .zip(&preds)
        .map(|(t, p)| Ok((p - model.analytic_price(t)?).powi(2)))
        .collect::<Result<_>>()?;
    let [lo, hi] = space.bounds[0];
    Ok((trapezoid(&sq, grid.coords())? / (hi - lo)).sqrt())
}

/// Fits at `λ_N = N^{-1/5}` for each `N` and reports the rep-averaged
/// `L²(μ)` error against the closed-form price. Repetition `r` at size index
/// `i` draws from `stream.derive(i).derive(r)`.
pub fn convergence_rate<S: ConditionalSampler + ?Sized>(
    model: &S,
    space: &ParamSpace,
    estimator: &EstimatorSpec,
    ns: &[usize],
    reps: usize,
    stream: RngStream,
) -> Result<RateReport> {
    let probe = vec![space.bounds[0][0]; space.dims()];
    model.analytic_price(&probe)?;
    if ns.len() < 2 || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(invalid("sample sizes must be positive and strictly increasing"));
    }
    if (ns[ns.len() - 1] as f64 / ns[0] as f64).log10() < 1.5 {
        return Err(invalid("sample sizes must span at least 1.5 decades"));
    }
    if reps == 0 {
        return Err(invalid("need at least one repetition"));
    }
    let lambdas: Vec<f64> = ns.iter().map(|&n| rate_lambda(n)).collect();
    let mut errors = Vec::with_capacity(ns.len());
    for (i, (&n, &lambda)) in ns.iter().zip(&lambdas).enumerate() {
        let per_rep: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let s = stream.derive(i as u64).derive(r as u64);
                let samples = draw_sample_set(model, space, n, 1, s)?;
                let mut fit_rng = s.derive(u64::MAX).generator();
                let fit = estimator.fit(&samples, lambda, &mut fit_rng)?;
                l2_error(space, &fit, model)
            })
            .collect::<Result<_>>()?;
        errors.push(per_rep.iter().sum::<f64>() / reps as f64);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(RateReport {
        slope: log_log_slope(&xs, &errors),
        strictly_decreasing: errors.windows(2).all(|w| w[1] < w[0]),
        high_variance: reps == 1,
        ns: ns.to_vec(),
        lambdas,
        errors,
        reps,
    })
}

/// `E[Var(X | Θ)]` by nested Monte Carlo: `outer` parameter draws, `inner`
/// payoffs each, unbiased conditional variances.
pub fn conditional_variance_oracle<S: ConditionalSampler + ?Sized>(
    model: &S,
    space: &ParamSpace,
    outer: usize,
    inner: usize,
    stream: RngStream,
) -> Result<f64> {
    if outer == 0 || inner < 2 {
        return Err(invalid("need at least one outer and two inner draws"));
    }
    let mut rng = stream.generator();
    let thetas = draw_thetas(space, outer, &mut rng)?;
    let vars: Vec<f64> = thetas
        .rows()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, t)| {
            let mut g = stream.derive(i as u64).generator();
            let mut m = RunningMoments::default();
            for _ in 0..inner {
                m.push(model.sample(t, &mut g)?);
            }
            Ok(m.variance())
        })
        .collect::<Result<_>>()?;
    Ok(vars.iter().sum::<f64>() / outer as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossLimitReport {
    pub ns: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// `V_N(h_{N, λ_N})` on the training samples.
    pub losses: Vec<f64>,
    /// `E[Var(X | Θ)] / M`.
    pub target: f64,
    pub m: usize,
    /// `|loss - target| / target` per `N`.
    pub relative_gaps: Vec<f64>,
}

/// Training loss at `λ_N = N^{-1/5}` against the conditional-variance
/// target, which `oracle_variance` supplies for `M = 1`.
pub fn loss_limit<S: ConditionalSampler + ?Sized>(
    model: &S,
    space: &ParamSpace,
    estimator: &EstimatorSpec,
    ns: &[usize],
    m: usize,
    oracle_variance: f64,
    stream: RngStream,
) -> Result<LossLimitReport> {
    if ns.is_empty() || m == 0 {
        return Err(invalid("need at least one sample size and M >= 1"));
    }
    let target = oracle_variance / m as f64;
    let lambdas: Vec<f64> = ns.iter().map(|&n| rate_lambda(n)).collect();
    let mut losses = Vec::with_capacity(ns.len());
    for (i, (&n, &lambda)) in ns.iter().zip(&lambdas).enumerate() {
        let s = stream.derive(i as u64);
        let samples = draw_sample_set(model, space, n, m, s)?;
        let fit = estimator.fit(&samples, lambda, &mut s.derive(u64::MAX).generator())?;
        losses.push(empirical_loss(&fit, &samples)?);
    }
    let relative_gaps = losses
        .iter()
        .map(|l| if target > 0.0 { (l - target).abs() / target } else { l.abs() })
        .collect();
    Ok(LossLimitReport {
        ns: ns.to_vec(),
        lambdas,
        losses,
        target,
        m,
        relative_gaps,
    })
}

/// Number of fuzzed instances per check in [`run_suite`].
pub const SUITE_INSTANCES: usize = 100;

/// Band half-width for the Monte Carlo identity in the fuzz suite: with 100
/// instances, a per-instance 3σ band would flag one spuriously about a
/// quarter of the time, so the suite uses a family-wise 4.2σ band.
pub const SUITE_BAND_Z: f64 = 4.2;

fn worst(ratios: impl Iterator<Item = f64>) -> f64 {
    ratios.fold(0.0, f64::max)
}

/// Runs each inequality check on [`SUITE_INSTANCES`] random instances. The
/// observed value is the worst `lhs / bound` ratio, so `pass` means it stayed
/// at or below one.
pub fn run_suite(seed: u64) -> Result<Vec<Verdict>> {
    let root = RngStream::new(seed);
    let mut out = Vec::new();

    let mut rng = root.derive(1).generator();
    let mut worst_scalar: f64 = 0.0;
    let mut all = true;
    for _ in 0..SUITE_INSTANCES {
        let lambda = 10f64.powf(rng.random_range(-8.0..2.0));
        let xs = logspace(1e-8, 1e8, 10_000);
        all &= scalar_bound_check(lambda, &xs);
        let bound = lambda.sqrt() / 2.0;
        worst_scalar = worst_scalar.max(worst(xs.iter().map(|&x| ridge_factor(lambda, x) / bound)));
    }
    out.push(Verdict {
        check: "scalar_bound".into(),
        params: json!({"instances": SUITE_INSTANCES, "points": 10_000, "seed": seed}),
        observed: worst_scalar,
        bound: 1.0,
        pass: all,
    });

    let mut rng = root.derive(2).generator();
    let lambdas = logspace(1e-6, 1.0, 20);
    let mut worst_shift: f64 = 0.0;
    let mut all = true;
    for _ in 0..SUITE_INSTANCES {
        let dim = rng.random_range(2..=50);
        let model = FiniteModel::random(dim, 0.1, 10.0, &mut rng)?;
        let report = ridge_shift_check(&model, &lambdas)?;
        all &= report.pass;
        worst_shift = worst_shift.max(worst(report.entries.iter().map(|e| e.error / e.bound)));
    }
    out.push(Verdict {
        check: "ridge_shift".into(),
        params: json!({"instances": SUITE_INSTANCES, "max_dim": 50, "eigenvalues": [0.1, 10.0], "lambdas": lambdas.len(), "seed": seed}),
        observed: worst_shift,
        bound: 1.0,
        pass: all,
    });

    let mut rng = root.derive(3).generator();
    let mut worst_inv: f64 = 0.0;
    let mut all = true;
    for i in 0..SUITE_INSTANCES {
        let dim = 30;
        let q1 = random_psd(dim, rng.random_range(1..=dim), &mut rng)?;
        let q2 = random_psd(dim, rng.random_range(1..=dim), &mut rng)?;
        let lambda = [0.01, 0.1, 1.0][i % 3];
        let r = inverse_difference(&q1, &q2, lambda)?;
        all &= r.pass;
        worst_inv = worst_inv.max(r.lhs / r.bound);
    }
    out.push(Verdict {
        check: "inverse_difference".into(),
        params: json!({"instances": SUITE_INSTANCES, "dim": 30, "lambdas": [0.01, 0.1, 1.0], "seed": seed}),
        observed: worst_inv,
        bound: 1.0,
        pass: all,
    });

    let mut rng = root.derive(4).generator();
    let mut worst_mc: f64 = 0.0;
    let mut all = true;
    for _ in 0..SUITE_INSTANCES {
        let dim = rng.random_range(1..=20);
        let n = rng.random_range(1..=50);
        let rho: f64 = rng.random_range(-0.9..0.9);
        let cov = SpdMatrix::from_symmetric_fn(dim, |i, j| rho.powi((i as i32 - j as i32).abs()))?;
        let l = cov.into_inner().cholesky().expect("AR(1) covariance").l();
        let mu = vec![0.0; dim];
        let r = mc_ratio(&mu, n, 400, SUITE_BAND_Z, &mut rng, |g| {
            (&l * DVector::from_fn(dim, |_, _| standard_normal(g))).as_slice().to_vec()
        })?;
        all &= r.pass;
        if r.stderr > 0.0 {
            worst_mc = worst_mc.max((r.ratio - 1.0).abs() / (SUITE_BAND_Z * r.stderr));
        }
    }
    out.push(Verdict {
        check: "hilbert_mc".into(),
        params: json!({"instances": SUITE_INSTANCES, "reps": 400, "band_sigmas": SUITE_BAND_Z, "seed": seed}),
        observed: worst_mc,
        bound: 1.0,
        pass: all,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;
    use crate::kernels::FeatureNodesConfig;
    use crate::models::{bs_price_at, BsSpec, ModelSpec, VolMap};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    #[test]
    fn scalar_bound_attained_at_lambda() {
        let lambda = 0.04;
        assert_close(ridge_factor(lambda, lambda), 0.1, 1e-15);
        assert!(scalar_bound_check(lambda, &[lambda, 0.0]));
        assert!(scalar_bound_check(1.0, &logspace(1e-8, 1e8, 10_000)));
        assert_eq!(ridge_factor(0.3, 0.0), 0.0);
        assert!(scalar_bound_check(1.0, &[]));
    }

    #[test]
    fn identity_model_has_closed_form_shift() {
        let a = vec![1.0, -2.0, 0.5];
        let model = FiniteModel::from_solution(SpdMatrix::identity(3), a.clone()).unwrap();
        let a_norm = (1.0f64 + 4.0 + 0.25).sqrt();
        let report = ridge_shift_check(&model, &[0.01, 0.5, 2.0]).unwrap();
        for e in &report.entries {
            assert_close(e.error, e.lambda * a_norm / (1.0 + e.lambda), 1e-12);
        }
        assert!(report.pass && report.monotone && report.converges);
        let h = model.ridge_solution(0.5).unwrap();
        assert_close(h[1], -2.0 / 1.5, 1e-14);
    }

    #[test]
    fn tiny_ridge_shift() {
        let mut rng = RngStream::new(11).generator();
        let model = FiniteModel::random(10, 0.1, 10.0, &mut rng).unwrap();
        let report = ridge_shift_check(&model, &[1e-12]).unwrap();
        let h0_norm = DVector::from_column_slice(model.h0()).norm();
        assert!(report.entries[0].error <= 5e-7 * h0_norm);
    }

    #[test]
    fn random_fifty_dim_instance() {
        let mut rng = RngStream::new(12).generator();
        let model = FiniteModel::random(50, 0.1, 10.0, &mut rng).unwrap();
        let eig = model.q().eigenvalues();
        assert!(eig.min() >= 0.1 - 1e-9 && eig.max() <= 10.0 + 1e-9);
        let report = ridge_shift_check(&model, &logspace(1e-6, 1.0, 20)).unwrap();
        assert!(report.pass, "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn finite_model_rejects_inconsistent_data() {
        let q = SpdMatrix::identity(2);
        assert!(FiniteModel::new(q.clone(), vec![1.0, 1.0], vec![1.0, 0.0]).is_err());
        let singular = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(FiniteModel::from_solution(singular, vec![1.0, 0.0]).is_err());
        assert!(ridge_shift_check(&FiniteModel::from_solution(q, vec![1.0, 0.0]).unwrap(), &[0.0]).is_err());
    }

    #[test]
    fn operator_norm_matches_the_spectrum() {
        let mut rng = RngStream::new(13).generator();
        let q = random_psd(30, 7, &mut rng).unwrap();
        let m = q.matrix() - DMatrix::identity(30, 30) * 0.8;
        let exact = m.clone().symmetric_eigen().eigenvalues.amax();
        assert_close(operator_norm(&m), exact, 1e-8 * exact);
        assert_eq!(operator_norm(&DMatrix::zeros(4, 4)), 0.0);
    }

    #[test]
    fn inverse_difference_examples() {
        let mut rng = RngStream::new(14).generator();
        let q = random_psd(5, 5, &mut rng).unwrap();
        let same = inverse_difference(&q, &q, 0.1).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert!(same.pass);
        let (c, lambda) = (3.0, 0.5);
        let zero = SpdMatrix::new(DMatrix::zeros(1, 1)).unwrap();
        let scalar = SpdMatrix::new(DMatrix::from_element(1, 1, c)).unwrap();
        let r = inverse_difference(&zero, &scalar, lambda).unwrap();
        assert_close(r.lhs, c / (lambda * (c + lambda)), 1e-12);
        assert_close(r.bound, c / (lambda * lambda), 1e-12);
        assert!(inverse_difference_check(&zero, &scalar, lambda).unwrap());
    }

    #[test]
    fn mc_ratio_is_one_for_single_draws() {
        let mut rng = RngStream::new(15).generator();
        let r = hilbert_mc_check(4, 1, 200, 0.3, &mut rng).unwrap();
        assert_close(r.ratio, 1.0, 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn mc_ratio_scalar_and_correlated() {
        let mut rng = RngStream::new(16).generator();
        let r = hilbert_mc_check(1, 100, 10_000, 0.0, &mut rng).unwrap();
        assert!((0.9..=1.1).contains(&r.ratio), "{r:?}");
        let r = hilbert_mc_check(20, 50, 2_000, 0.7, &mut rng).unwrap();
        assert!((0.9..=1.1).contains(&r.ratio), "{r:?}");
        assert!(hilbert_mc_check(2, 5, 99, 0.0, &mut rng).is_err());
    }

    #[test]
    fn operator_valued_mc_ratio() {
        let nodes = FeatureNodes::generate(FeatureNodesConfig::gaussian(6, 1, 3)).unwrap();
        let mut rng = RngStream::new(17).generator();
        let r = hilbert_schmidt_mc_check(&nodes, 20, 2_000, &mut rng).unwrap();
        assert!((0.9..=1.1).contains(&r.ratio), "{r:?}");
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1e3, 1e4, 1e5];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.1)).collect();
        assert_close(log_log_slope(&xs, &ys), -0.1, 1e-12);
        assert_close(rate_lambda(100_000), 0.1, 1e-12);
    }

    fn bs_model() -> ModelSpec {
        ModelSpec::BlackScholes(BsSpec {
            spot: 100.0,
            strike: 100.0,
            rate: 0.0,
            maturity: 1.0,
            vol_map: VolMap::Affine01,
        })
    }

    /// Payoff equal to the price itself: no conditional noise.
    struct Noiseless(BsSpec);

    impl ConditionalSampler for Noiseless {
        fn param_dim(&self) -> usize {
            1
        }

        fn sample(&self, theta: &[f64], _rng: &mut Generator) -> Result<f64> {
            bs_price_at(&self.0, theta[0])
        }

        fn analytic_price(&self, theta: &[f64]) -> Result<f64> {
            bs_price_at(&self.0, theta[0])
        }
    }

    fn small_rf() -> EstimatorSpec {
        EstimatorSpec::RfRidge {
            nodes: FeatureNodesConfig::gaussian(64, 1, 1),
        }
    }

    #[test]
    fn convergence_rate_validates_inputs() {
        let space = ParamSpace::interval(0.0, 1.0, 50).unwrap();
        let est = small_rf();
        let stream = RngStream::new(1);
        assert!(convergence_rate(&bs_model(), &space, &est, &[100, 1000], 1, stream).is_err());
        assert!(convergence_rate(&bs_model(), &space, &est, &[1000, 100], 1, stream).is_err());
        let report = convergence_rate(&bs_model(), &space, &est, &[100, 400, 3200], 1, stream).unwrap();
        assert!(report.high_variance);
        assert_eq!(report.errors.len(), 3);
        assert!(report.errors.iter().all(|e| *e >= 0.0));
        let again = convergence_rate(&bs_model(), &space, &est, &[100, 400, 3200], 1, stream).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn heston_has_no_rate_check() {
        use crate::models::{HestonModel, HestonParam, HestonSpec};
        let model = ModelSpec::Heston(HestonModel {
            base: HestonSpec {
                spot: 100.0,
                strike: 100.0,
                maturity: 1.0 / 12.0,
                kappa: 2.0,
                theta_var: 0.04,
                sigma_vol: 0.2,
                rho: -0.5,
                v0: None,
                steps: 8,
            },
            params: vec![HestonParam::Kappa],
        });
        let space = ParamSpace::interval(1.0, 10.0, 10).unwrap();
        let r = convergence_rate(&model, &space, &small_rf(), &[100, 10_000], 1, RngStream::new(2));
        assert!(matches!(r, Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn noiseless_payoffs_have_vanishing_loss() {
        let spec = match bs_model() {
            ModelSpec::BlackScholes(s) => s,
            _ => unreachable!(),
        };
        let model = Noiseless(spec);
        let space = ParamSpace::interval(0.0, 1.0, 50).unwrap();
        let oracle = conditional_variance_oracle(&model, &space, 50, 10, RngStream::new(3)).unwrap();
        assert_eq!(oracle, 0.0);
        let est = EstimatorSpec::RfRidge {
            nodes: FeatureNodesConfig::gaussian(128, 1, 1),
        };
        // Only ridge bias remains, and it shrinks with λ_N.
        let ns = [1000, 8000, 64_000];
        let report = loss_limit(&model, &space, &est, &ns, 1, oracle, RngStream::new(4)).unwrap();
        assert!(report.losses.windows(2).all(|w| w[1] < w[0]), "{report:?}");
        assert!(report.losses[2] < 0.5 * report.losses[0], "{report:?}");
    }

    #[test]
    fn oracle_matches_the_quadrature_value() {
        // E[Var(X | Θ)] = 96.2966 for this model, by quadrature.
        let space = ParamSpace::interval(0.0, 1.0, 100).unwrap();
        let v = conditional_variance_oracle(&bs_model(), &space, 1000, 10_000, RngStream::new(5)).unwrap();
        assert!((v - 96.2966).abs() <= 0.03 * 96.2966, "{v}");
    }

    #[test]
    fn suite_passes() {
        let verdicts = run_suite(0).unwrap();
        assert_eq!(verdicts.len(), 4);
        for v in &verdicts {
            assert!(v.pass, "{v:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ridge_shift_bound_on_random_models(seed in 0u64..1_000_000, dim in 1usize..25) {
            let mut rng = RngStream::new(seed).generator();
            let model = FiniteModel::random(dim, 0.01, 20.0, &mut rng).unwrap();
            let report = ridge_shift_check(&model, &logspace(1e-8, 10.0, 12)).unwrap();
            prop_assert!(report.pass);
        }

        #[test]
        fn inverse_difference_on_random_pairs(seed in 0u64..1_000_000, lambda in 1e-3f64..10.0) {
            let mut rng = RngStream::new(seed).generator();
            let q1 = random_psd(12, 3, &mut rng).unwrap();
            let q2 = random_psd(12, 12, &mut rng).unwrap();
            prop_assert!(inverse_difference_check(&q1, &q2, lambda).unwrap());
        }

        #[test]
        fn scalar_bound_everywhere(lambda in 1e-10f64..1e4, x in 0.0f64..1e10) {
            prop_assert!(ridge_factor(lambda, x) <= lambda.sqrt() / 2.0 + 1e-12);
        }
    }
}

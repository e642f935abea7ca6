//! Shared numerical plumbing: seeded random streams, Gaussian draws, SPD
//! solves, quadrature and order statistics.
//!
//! Every random quantity in the crate is drawn from a [`Generator`] obtained
//! from an [`RngStream`]. A stream is a `(seed, stream_id)` pair; ChaCha8 has
//! 2^64 independent streams per key, so child streams derived by index give
//! reproducible, scheduling-independent sequences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Generator = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream keyed by `index`. Same parent and index always give the
    /// same child; the parent's own sequence is untouched.
    pub fn derive(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index ^ 0x5851_f42d_4c95_7f2d)),
        }
    }

    pub fn generator(&self) -> Generator {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Pairs of unit Gaussians with a fixed correlation.
#[derive(Clone, Copy, Debug)]
pub struct CorrelatedNormals {
    rho: f64,
    complement: f64,
}

impl CorrelatedNormals {
    pub fn new(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(invalid(format!("correlation {rho} outside [-1, 1]")));
        }
        Ok(Self {
            rho,
            complement: (1.0 - rho * rho).sqrt(),
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1 = standard_normal(rng);
        let z_perp = standard_normal(rng);
        (z1, self.rho * z1 + self.complement * z_perp)
    }
}

/// Draws `(Z1, Z2)` with unit variances and correlation `rho`, using
/// `Z2 = rho * Z1 + sqrt(1 - rho^2) * Z_perp`.
pub fn normal_pair_correlated<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> Result<(f64, f64)> {
    Ok(CorrelatedNormals::new(rho)?.sample(rng))
}

/// Standard normal CDF through `erfc`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Dense symmetric matrix that is expected to be positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

const SYMMETRY_RTOL: f64 = 1e-12;

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(invalid(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                    return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }

    /// Builds the matrix from the upper triangle of `f` and mirrors it.
    pub fn from_symmetric_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        Self(m)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.0.clone().symmetric_eigenvalues()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    /// Numerical PSD test: every eigenvalue at least `-1e-10 * trace / dim`.
    pub fn is_numerically_psd(&self) -> bool {
        let tol = 1e-10 * self.trace().abs() / self.dim() as f64;
        self.min_eigenvalue() >= -tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// Diagonal shift that was needed for the factorization to succeed.
    pub jitter: f64,
}

const MAX_JITTER_ESCALATIONS: usize = 3;

/// Solves `A x = b` by Cholesky. If the factorization fails a diagonal jitter
/// of `1e-12 * trace / dim` is added and escalated by x10 up to three times.
pub fn solve_spd(a: &SpdMatrix, b: &[f64]) -> Result<SpdSolution> {
    let n = a.dim();
    if b.len() != n {
        return Err(invalid(format!(
            "right-hand side has length {}, matrix has dim {n}",
            b.len()
        )));
    }
    let rhs = DVector::from_column_slice(b);
    if let Some(chol) = a.matrix().clone().cholesky() {
        let x = chol.solve(&rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(SpdSolution {
                x: x.as_slice().to_vec(),
                jitter: 0.0,
            });
        }
    }
    let base = {
        let t = a.trace() / n as f64;
        if t > 0.0 {
            1e-12 * t
        } else {
            1e-12
        }
    };
    let mut jitter = base;
    for _ in 0..=MAX_JITTER_ESCALATIONS {
        if let Some(chol) = a.shifted(jitter).into_inner().cholesky() {
            let mut x = chol.solve(&rhs);
            if x.iter().all(|v| v.is_finite()) {
                // Iterative refinement against the unshifted matrix, kept only
                // while the residual shrinks.
                let mut res = (&rhs - a.matrix() * &x).norm();
                for _ in 0..3 {
                    let r = &rhs - a.matrix() * &x;
                    let candidate = &x + chol.solve(&r);
                    let cand_res = (&rhs - a.matrix() * &candidate).norm();
                    if !(cand_res < res) {
                        break;
                    }
                    x = candidate;
                    res = cand_res;
                }
                return Ok(SpdSolution {
                    x: x.as_slice().to_vec(),
                    jitter,
                });
            }
        }
        jitter *= 10.0;
    }
    Err(Error::SingularMatrix(format!(
        "Cholesky failed for dim {n} even with diagonal jitter {:.3e}",
        jitter / 10.0
    )))
}

/// Linear-interpolation quantile: the k-th order statistic (1-based) sits at
/// probability (k-1)/(n-1).
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("quantile level {p} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Composite trapezoid rule over an increasing grid.
pub fn trapezoid(f_values: &[f64], grid: &[f64]) -> Result<f64> {
    if f_values.len() != grid.len() {
        return Err(invalid(format!(
            "trapezoid: {} values for {} grid points",
            f_values.len(),
            grid.len()
        )));
    }
    if grid.len() < 2 {
        return Err(invalid("trapezoid needs at least two grid points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("trapezoid grid must be strictly increasing"));
    }
    Ok(grid
        .windows(2)
        .zip(f_values.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum())
}

/// `n` equidistant points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let mut acc = RunningMoments::default();
        for &v in values {
            acc.push(v);
        }
        acc.estimate()
    }
}

/// Welford accumulator for mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> MeanEstimate {
        let stderr = if self.count < 2 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        };
        MeanEstimate {
            mean: self.mean,
            stderr,
            count: self.count,
        }
    }
}

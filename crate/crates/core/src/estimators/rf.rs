use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Surface;
use crate::error::{invalid, Result};
use crate::kernels::FeatureNodes;
use crate::numerics::{solve_spd, SpdMatrix};
use crate::sampling::SampleSet;

/// Random-feature ridge fit: `f(θ) = (1/D) Σ_j g_j φ_θ(u_j)`, the image of
/// `g ∈ L²(R)` under the feature map, with `‖f‖² ≤ (1/D) Σ_j g_j²`. For
/// vector-valued features each `g_j` has one entry per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfFit {
    pub nodes: FeatureNodes,
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Non-zero when the normal equations needed a diagonal jitter, which at
    /// `λ = 0` approximates the minimum-norm solution.
    pub jitter: f64,
    /// `(1/D) Σ_j g_j²`.
    pub h_norm_sq: f64,
}

impl RfFit {
    pub fn is_jittered(&self) -> bool {
        self.jitter > 0.0
    }
}

impl Surface for RfFit {
    fn input_dim(&self) -> usize {
        self.nodes.dim()
    }

    fn predict(&self, theta: &[f64]) -> Result<f64> {
        let feats = self.nodes.features(theta)?;
        let s: f64 = feats.iter().zip(&self.weights).map(|(p, g)| p * g).sum();
        Ok(s / self.nodes.count() as f64)
    }
}

/// `AᵀA / N` and `AᵀX / N` for the feature matrix `A`. One assembly serves
/// every ridge level fitted on the same samples.
#[derive(Clone, Debug)]
pub struct RfNormalEquations {
    nodes: FeatureNodes,
    gram: DMatrix<f64>,
    rhs: Vec<f64>,
    n: usize,
}

const ROW_BLOCK: usize = 2048;

impl RfNormalEquations {
    pub fn assemble(nodes: &FeatureNodes, samples: &SampleSet) -> Result<Self> {
        if samples.dim() != nodes.dim() {
            return Err(invalid(format!(
                "samples of dimension {} for feature nodes of dimension {}",
                samples.dim(),
                nodes.dim()
            )));
        }
        let d = nodes.width();
        let n = samples.len();
        let scale = 1.0 / nodes.count() as f64;
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        let mut block = vec![0.0; ROW_BLOCK.min(n) * d];
        for start in (0..n).step_by(ROW_BLOCK) {
            let rows = ROW_BLOCK.min(n - start);
            let thetas: Vec<&[f64]> = (start..start + rows).map(|i| samples.thetas.row(i)).collect();
            for t in &thetas {
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("non-finite parameter in samples"));
                }
            }
            // Column-major rows x d block of A.
            for j in 0..d {
                let col = &mut block[j * rows..(j + 1) * rows];
                for (c, t) in col.iter_mut().zip(&thetas) {
                    *c = nodes.feature(t, j) * scale;
                }
                let xs = &samples.xs[start..start + rows];
                rhs[j] += col.iter().zip(xs).map(|(a, x)| a * x).sum::<f64>();
            }
            // gram += Bᵀ B
            unsafe {
                matrixmultiply::dgemm(
                    d,
                    rows,
                    d,
                    1.0,
                    block.as_ptr(),
                    rows as isize,
                    1,
                    block.as_ptr(),
                    1,
                    rows as isize,
                    1.0,
                    gram.as_mut_ptr(),
                    1,
                    d as isize,
                );
            }
        }
        let inv_n = 1.0 / n as f64;
        let mut gram = DMatrix::from_vec(d, d, gram);
        for j in 0..d {
            for i in 0..j {
                let v = 0.5 * (gram[(i, j)] + gram[(j, i)]) * inv_n;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
            gram[(j, j)] *= inv_n;
        }
        rhs.iter_mut().for_each(|v| *v *= inv_n);
        Ok(Self {
            nodes: nodes.clone(),
            gram,
            rhs,
            n,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    /// Minimizes `(1/N) ‖A g - X‖² + (λ/D) ‖g‖²` with `D` the node count, i.e. solves
    /// `(AᵀA/N + (λ/D) I) g = AᵀX/N`.
    pub fn solve(&self, lambda: f64) -> Result<RfFit> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("ridge level must be non-negative, got {lambda}")));
        }
        let d = self.nodes.count() as f64;
        // `(λ/D) ‖g‖²` with `D` the node count; the system has `width` rows.
        let system = SpdMatrix::new(self.gram.clone())?.shifted(lambda / d);
        let sol = solve_spd(&system, &self.rhs)?;
        let h_norm_sq = sol.x.iter().map(|g| g * g).sum::<f64>() / d;
        Ok(RfFit {
            nodes: self.nodes.clone(),
            weights: sol.x,
            lambda,
            jitter: sol.jitter,
            h_norm_sq,
        })
    }
}

pub fn rf_ridge_fit(nodes: &FeatureNodes, samples: &SampleSet, lambda: f64) -> Result<RfFit> {
    RfNormalEquations::assemble(nodes, samples)?.solve(lambda)
}

//! Minimizers of the empirical ridge functional `V_{N,λ}`.
//!
//! * [`krr`]: exact kernel ridge regression on the span of the sampled kernel
//!   sections, `(G + Nλ I) α = X`.
//! * [`rf`]: the same problem pulled back to `L²(R)` through the random tanh
//!   feature map, solved in the primal on `D` weights.
//! * [`mlp`]: a tanh network trained by mini-batch Adam.

pub mod krr;
pub mod mlp;
pub mod rf;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Result};
use crate::kernels::{FeatureNodes, FeatureNodesConfig, KernelKind};
use crate::numerics::{Generator, RngStream};
use crate::points::PointSet;
use crate::sampling::SampleSet;

pub use krr::{krr_fit, krr_predict, KrrFit};
pub use mlp::{mlp_fit, mlp_predict, MlpFit, MlpWeights, PenaltyMode, Readout, TrainConfig};
pub use rf::{rf_ridge_fit, RfFit, RfNormalEquations};

/// A fitted price surface `θ -> h(θ)`.
pub trait Surface {
    fn input_dim(&self) -> usize;

    fn predict(&self, theta: &[f64]) -> Result<f64>;

    fn predict_points(&self, points: &PointSet) -> Result<Vec<f64>> {
        if points.dim() != self.input_dim() {
            return Err(invalid(format!(
                "surface takes {} parameters, points have dimension {}",
                self.input_dim(),
                points.dim()
            )));
        }
        points.rows().map(|p| self.predict(p)).collect()
    }
}

/// The unregularized empirical quadratic `V_N(h) = (1/N) Σ (h(Θ_i) - X_i)^2`.
pub fn empirical_loss<S: Surface + ?Sized>(fit: &S, samples: &SampleSet) -> Result<f64> {
    let preds = fit.predict_points(&samples.thetas)?;
    Ok(preds
        .iter()
        .zip(&samples.xs)
        .map(|(p, x)| (p - x).powi(2))
        .sum::<f64>()
        / samples.len() as f64)
}

/// The zero surface; useful as a baseline.
#[derive(Clone, Copy, Debug)]
pub struct ZeroSurface {
    pub dim: usize,
}

impl Surface for ZeroSurface {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.dim {
            return Err(invalid("dimension mismatch"));
        }
        Ok(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum FittedSurface {
    Krr(KrrFit),
    RfRidge(RfFit),
    Mlp(MlpFit),
}

impl Surface for FittedSurface {
    fn input_dim(&self) -> usize {
        match self {
            FittedSurface::Krr(f) => f.input_dim(),
            FittedSurface::RfRidge(f) => f.input_dim(),
            FittedSurface::Mlp(f) => f.input_dim(),
        }
    }

    fn predict(&self, theta: &[f64]) -> Result<f64> {
        match self {
            FittedSurface::Krr(f) => f.predict(theta),
            FittedSurface::RfRidge(f) => f.predict(theta),
            FittedSurface::Mlp(f) => f.predict(theta),
        }
    }

    fn predict_points(&self, points: &PointSet) -> Result<Vec<f64>> {
        match self {
            FittedSurface::Krr(f) => f.predict_points(points),
            FittedSurface::RfRidge(f) => f.predict_points(points),
            FittedSurface::Mlp(f) => f.predict_points(points),
        }
    }
}

/// Estimator choice plus its fixed hyperparameters; the ridge level is
/// supplied per fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Krr {
        kernel: KernelKind,
    },
    RfRidge {
        #[serde(default)]
        nodes: FeatureNodesConfig,
    },
    Mlp {
        #[serde(default)]
        train: TrainConfig,
    },
}

impl EstimatorSpec {
    pub fn fit(&self, samples: &SampleSet, lambda: f64, rng: &mut Generator) -> Result<FittedSurface> {
        let mut fits = self.fit_path(samples, &[lambda], rng)?;
        Ok(fits.remove(0))
    }

    /// One fit per ridge level on the same samples. The random-feature
    /// normal equations are assembled once; networks are trained in order
    /// from `rng`.
    pub fn fit_path(&self, samples: &SampleSet, lambdas: &[f64], rng: &mut Generator) -> Result<Vec<FittedSurface>> {
        match self {
            EstimatorSpec::Krr { kernel } => lambdas
                .iter()
                .map(|&l| krr_fit(kernel, samples, l).map(FittedSurface::Krr))
                .collect(),
            EstimatorSpec::RfRidge { nodes } => {
                let nodes = FeatureNodes::generate(nodes.clone())?;
                let eq = RfNormalEquations::assemble(&nodes, samples)?;
                lambdas
                    .iter()
                    .map(|&l| eq.solve(l).map(FittedSurface::RfRidge))
                    .collect()
            }
            EstimatorSpec::Mlp { train } => lambdas
                .iter()
                .map(|&l| {
                    let config = TrainConfig {
                        lambda: l,
                        ..train.clone()
                    };
                    mlp_fit(samples, &config, rng).map(FittedSurface::Mlp)
                })
                .collect(),
        }
    }
}

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub seed: Option<RngStream>,
}

/// A fitted surface plus the data that produced it, stored as JSON so the
/// surface can be evaluated again without refitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub version: u32,
    pub metadata: FitMetadata,
    pub surface: FittedSurface,
}

impl FitArtifact {
    pub fn new(surface: FittedSurface, samples: &SampleSet, lambda: f64) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            metadata: FitMetadata {
                n: samples.len(),
                m: samples.m,
                lambda,
                seed: samples.provenance,
            },
            surface,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let artifact: Self = serde_json::from_str(&text)?;
        if artifact.version != ARTIFACT_VERSION {
            return Err(invalid(format!(
                "{}: artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                path.display(),
                artifact.version
            )));
        }
        Ok(artifact)
    }
}

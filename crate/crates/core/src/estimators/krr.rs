use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Surface;
use crate::error::{invalid, Error, Result};
use crate::kernels::{gram, KernelKind};
use crate::numerics::{solve_spd, SpdMatrix};
use crate::points::PointSet;
use crate::sampling::SampleSet;

/// `h(θ) = Σ_i α_i k(Θ_i, θ)` with `(G + Nλ I) α = X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrrFit {
    pub kernel: KernelKind,
    pub anchors: PointSet,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// Diagonal jitter the solver had to add on top of `Nλ`.
    pub jitter: f64,
    /// FNV-1a digest of the training targets' bit patterns.
    pub targets_digest: u64,
}

pub(crate) fn digest(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub fn krr_fit(kernel: &KernelKind, samples: &SampleSet, lambda: f64) -> Result<KrrFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("ridge level must be non-negative, got {lambda}")));
    }
    let g = gram(kernel, &samples.thetas)?;
    let n = samples.len() as f64;
    let system = g.shifted(n * lambda);
    let sol = solve_spd(&system, &samples.xs).map_err(|e| match e {
        Error::SingularMatrix(msg) if lambda == 0.0 => Error::SingularMatrix(format!(
            "{msg}; the ridge-free Gram system is singular, use lambda > 0"
        )),
        other => other,
    })?;
    Ok(KrrFit {
        kernel: kernel.clone(),
        anchors: samples.thetas.clone(),
        alpha: sol.x,
        lambda,
        jitter: sol.jitter,
        targets_digest: digest(&samples.xs),
    })
}

pub fn krr_predict(fit: &KrrFit, theta: &[f64]) -> Result<f64> {
    fit.kernel.check_point(theta)?;
    let mut s = 0.0;
    for (anchor, a) in fit.anchors.rows().zip(&fit.alpha) {
        s += a * crate::kernels::eval_kernel(&fit.kernel, anchor, theta)?;
    }
    Ok(s)
}

impl KrrFit {
    /// `‖(G + Nλ I) α - X‖ / ‖X‖` for the given targets. Fails if the targets
    /// are not the ones the fit was trained on.
    pub fn relative_residual(&self, xs: &[f64]) -> Result<f64> {
        if digest(xs) != self.targets_digest {
            return Err(invalid("targets do not match the training data of this fit"));
        }
        let g = gram(&self.kernel, &self.anchors)?;
        let system = g.shifted(self.anchors.len() as f64 * self.lambda);
        let x = DVector::from_column_slice(xs);
        let r = system.matrix() * DVector::from_column_slice(&self.alpha) - &x;
        Ok(r.norm() / x.norm().max(f64::MIN_POSITIVE))
    }

    /// Squared RKHS norm `αᵀ G α` of the fitted surface.
    pub fn rkhs_norm_sq(&self) -> Result<f64> {
        let g: SpdMatrix = gram(&self.kernel, &self.anchors)?;
        let a = DVector::from_column_slice(&self.alpha);
        Ok(a.dot(&(g.matrix() * &a)))
    }
}

impl Surface for KrrFit {
    fn input_dim(&self) -> usize {
        self.anchors.dim()
    }

    fn predict(&self, theta: &[f64]) -> Result<f64> {
        krr_predict(self, theta)
    }
}

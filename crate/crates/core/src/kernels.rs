//! Reproducing kernels on parameter space and the random tanh feature map.
//!
//! * `Triangular`: `k(x, y) = 1 - |x - y|` on `[0, 1]`. Its RKHS carries the
//!   inner product `1/2 (f(0) + f(1)) (g(0) + g(1)) + 1/2 ∫ f' g'`, available
//!   numerically through [`rkhs_inner_triangular`].
//! * `Laplace`: `k(x, y) = c exp(-|x - y|)` on the real line, the kernel of
//!   the Sobolev space `H^2(R)`.
//! * `Filipovic`: `k(x, y) = 1 + ∫_0^{x ∧ y} e^{-z} dz` on `[0, ∞)`.
//! * `FeatureMap`: `k(x, y) = (1/D) Σ_j φ_x(u_j) φ_y(u_j)` with
//!   `φ_x(u) = Π_k tanh(x_k + u_k)` and nodes `u_j` drawn from `R`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{standard_normal, RngStream, SpdMatrix};
use crate::points::PointSet;
use rand::Rng;

/// Default feature count for random-feature fits.
pub const DEFAULT_NODE_COUNT: usize = 512;

/// `sqrt(pi / 2)`: the inverse Fourier transform of `u -> 1 / (1 + u^2)`
/// under the symmetric `(2 pi)^{-1/2}` convention, evaluated at zero lag.
pub const LAPLACE_DEFAULT_SCALE: f64 = 1.253_314_137_315_500_3;

const NODE_STREAM: u64 = 0x6e6f_6465;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeDistribution {
    #[default]
    StandardGaussian,
    UniformBox {
        low: f64,
        high: f64,
    },
}

/// Scalar activation of the feature map. `Constant` replaces every feature by
/// one and exists for hand-checkable tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Constant,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Constant => 1.0,
        }
    }
}

/// How a `d`-dimensional point enters the feature map for `d > 1`. All
/// three agree for `d = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Vector-valued features `(σ(x_k + u_k))_k`: `d` features per node and
    /// an additive kernel `Σ_k E[σ(x_k + u_k) σ(y_k + u_k)]`.
    Components,
    /// One feature per node, `Π_k σ(x_k + u_k)`.
    Product,
    /// One feature per node, `σ(Σ_k x_k + u_k)`. The surface then depends on
    /// the parameters only through their sum.
    #[default]
    Sum,
}

fn one() -> usize {
    1
}

fn default_node_count() -> usize {
    DEFAULT_NODE_COUNT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureNodesConfig {
    #[serde(default = "default_node_count")]
    pub count: usize,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default)]
    pub distribution: NodeDistribution,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub combine: Combine,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FeatureNodesConfig {
    fn default() -> Self {
        Self::gaussian(DEFAULT_NODE_COUNT, 1, 0)
    }
}

impl FeatureNodesConfig {
    pub fn gaussian(count: usize, dim: usize, seed: u64) -> Self {
        Self {
            count,
            dim,
            distribution: NodeDistribution::StandardGaussian,
            activation: Activation::Tanh,
            combine: Combine::Sum,
            seed,
        }
    }

    pub fn with_combine(self, combine: Combine) -> Self {
        Self { combine, ..self }
    }
}

/// Random feature nodes `u_1..u_D`, regenerated deterministically from their
/// config. Serializes as the config only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureNodesConfig", into = "FeatureNodesConfig")]
pub struct FeatureNodes {
    config: FeatureNodesConfig,
    nodes: Vec<f64>,
}

impl TryFrom<FeatureNodesConfig> for FeatureNodes {
    type Error = crate::Error;

    fn try_from(config: FeatureNodesConfig) -> Result<Self> {
        Self::generate(config)
    }
}

impl From<FeatureNodes> for FeatureNodesConfig {
    fn from(nodes: FeatureNodes) -> Self {
        nodes.config
    }
}

impl FeatureNodes {
    pub fn generate(config: FeatureNodesConfig) -> Result<Self> {
        if config.count == 0 {
            return Err(invalid("feature node count must be at least 1"));
        }
        if config.dim == 0 {
            return Err(invalid("feature node dimension must be at least 1"));
        }
        if let NodeDistribution::UniformBox { low, high } = config.distribution {
            if !(low < high) {
                return Err(invalid(format!("empty node box [{low}, {high}]")));
            }
        }
        let mut rng = RngStream::new(config.seed).derive(NODE_STREAM).generator();
        let nodes = (0..config.count * config.dim)
            .map(|_| match config.distribution {
                NodeDistribution::StandardGaussian => standard_normal(&mut rng),
                NodeDistribution::UniformBox { low, high } => rng.random_range(low..high),
            })
            .collect();
        Ok(Self { config, nodes })
    }

    /// Nodes given explicitly (count x dim, row-major); used in tests. These
    /// do not survive serialization, which stores the generating config only.
    pub fn from_values(dim: usize, nodes: Vec<f64>, activation: Activation) -> Result<Self> {
        if dim == 0 || nodes.is_empty() || !nodes.len().is_multiple_of(dim) {
            return Err(invalid("explicit nodes must form a non-empty count x dim table"));
        }
        Ok(Self {
            config: FeatureNodesConfig {
                count: nodes.len() / dim,
                dim,
                distribution: NodeDistribution::StandardGaussian,
                activation,
                combine: Combine::Sum,
                seed: 0,
            },
            nodes,
        })
    }

    pub fn config(&self) -> &FeatureNodesConfig {
        &self.config
    }

    pub fn count(&self) -> usize {
        self.config.count
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.config.dim..(j + 1) * self.config.dim]
    }

    /// Number of scalar features: `D d` for vector-valued features, `D`
    /// otherwise.
    pub fn width(&self) -> usize {
        match self.config.combine {
            Combine::Components => self.config.count * self.config.dim,
            Combine::Product | Combine::Sum => self.config.count,
        }
    }

    /// Bound on `k(x, x)`.
    pub fn diagonal_bound(&self) -> f64 {
        (self.width() / self.count()) as f64
    }

    /// Unscaled scalar feature `i < width()` of `x`.
    #[inline]
    pub fn feature(&self, x: &[f64], i: usize) -> f64 {
        let act = self.config.activation;
        match self.config.combine {
            Combine::Components => {
                let d = self.config.dim;
                act.apply(x[i % d] + self.nodes[i])
            }
            Combine::Product => self.node(i).iter().zip(x).map(|(u, xi)| act.apply(xi + u)).product(),
            Combine::Sum => act.apply(self.node(i).iter().zip(x).map(|(u, xi)| xi + u).sum()),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.dim {
            return Err(invalid(format!(
                "point of dimension {} for feature nodes of dimension {}",
                x.len(),
                self.config.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite point"));
        }
        Ok(())
    }

    /// All unscaled features of `x`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok((0..self.width()).map(|i| self.feature(x, i)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Triangular,
    Laplace {
        #[serde(default = "laplace_scale")]
        c: f64,
    },
    Filipovic,
    FeatureMap(FeatureNodes),
}

fn laplace_scale() -> f64 {
    LAPLACE_DEFAULT_SCALE
}

impl KernelKind {
    pub fn laplace() -> Self {
        KernelKind::Laplace {
            c: LAPLACE_DEFAULT_SCALE,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelKind::FeatureMap(nodes) => nodes.dim(),
            _ => 1,
        }
    }

    /// Bound on `k(θ, θ)` over the kernel's domain.
    pub fn diagonal_bound(&self) -> f64 {
        match self {
            KernelKind::Triangular => 1.0,
            KernelKind::Laplace { c } => *c,
            KernelKind::Filipovic => 2.0,
            KernelKind::FeatureMap(nodes) => nodes.diagonal_bound(),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        match self {
            KernelKind::FeatureMap(nodes) => nodes.check_point(x),
            _ => {
                let [v] = x else {
                    return Err(invalid(format!(
                        "scalar kernel evaluated at a point of dimension {}",
                        x.len()
                    )));
                };
                let ok = match self {
                    KernelKind::Triangular => (0.0..=1.0).contains(v),
                    KernelKind::Laplace { .. } => v.is_finite(),
                    KernelKind::Filipovic => v.is_finite() && *v >= 0.0,
                    KernelKind::FeatureMap(_) => unreachable!(),
                };
                if ok {
                    Ok(())
                } else {
                    Err(invalid(format!("point {v} outside the kernel domain")))
                }
            }
        }
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelKind::Triangular => 1.0 - (x[0] - y[0]).abs(),
            KernelKind::Laplace { c } => c * (-(x[0] - y[0]).abs()).exp(),
            KernelKind::Filipovic => 2.0 - (-x[0].min(y[0])).exp(),
            KernelKind::FeatureMap(nodes) => {
                let s: f64 = (0..nodes.width())
                    .map(|i| nodes.feature(x, i) * nodes.feature(y, i))
                    .sum();
                s / nodes.count() as f64
            }
        }
    }
}

pub fn eval_kernel(kind: &KernelKind, x: &[f64], y: &[f64]) -> Result<f64> {
    kind.check_point(x)?;
    kind.check_point(y)?;
    let v = kind.eval_unchecked(x, y);
    debug_assert!(
        x != y || v <= kind.diagonal_bound() + 1e-12,
        "k(θ, θ) = {v} exceeds the diagonal bound"
    );
    Ok(v)
}

/// Gram matrix `G_ij = k(Θ_i, Θ_j)`, upper triangle computed then mirrored.
pub fn gram(kind: &KernelKind, points: &PointSet) -> Result<SpdMatrix> {
    if points.is_empty() {
        return Err(invalid("Gram matrix of an empty point set"));
    }
    for p in points.rows() {
        kind.check_point(p)?;
    }
    match kind {
        KernelKind::FeatureMap(nodes) => {
            let a = feature_matrix(nodes, points)?;
            let d = nodes.count() as f64;
            SpdMatrix::from_symmetric_fn(points.len(), |i, j| d * a.row(i).dot(&a.row(j)))
        }
        _ => SpdMatrix::from_symmetric_fn(points.len(), |i, j| {
            kind.eval_unchecked(points.row(i), points.row(j))
        }),
    }
}

/// `N x width` matrix of features divided by the node count `D`, so that
/// `f = A g` is the surface `θ -> (1/D) Σ_j g_j φ_θ(u_j)` and `D (A Aᵀ)` is
/// the Gram matrix.
pub fn feature_matrix(nodes: &FeatureNodes, points: &PointSet) -> Result<DMatrix<f64>> {
    if points.dim() != nodes.dim() {
        return Err(invalid(format!(
            "points of dimension {} for feature nodes of dimension {}",
            points.dim(),
            nodes.dim()
        )));
    }
    for p in points.rows() {
        nodes.check_point(p)?;
    }
    let scale = 1.0 / nodes.count() as f64;
    Ok(DMatrix::from_fn(points.len(), nodes.width(), |i, j| {
        nodes.feature(points.row(i), j) * scale
    }))
}

/// Minimum grid size accepted by [`rkhs_inner_triangular`].
pub const RKHS_MIN_GRID: usize = 101;

/// Inner product of the triangular-kernel RKHS on `[0, 1]` for functions
/// sampled on a uniform grid. Derivatives use central differences, one-sided
/// at the endpoints.
pub fn rkhs_inner_triangular(f: &[f64], g: &[f64], grid: &[f64]) -> Result<f64> {
    let n = grid.len();
    if n < RKHS_MIN_GRID {
        return Err(invalid(format!(
            "RKHS inner product needs at least {RKHS_MIN_GRID} grid points, got {n}"
        )));
    }
    if f.len() != n || g.len() != n {
        return Err(invalid("function samples do not match the grid"));
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let uniform = grid
        .iter()
        .enumerate()
        .all(|(i, &x)| (x - i as f64 * h).abs() <= 1e-9);
    if grid[0] != 0.0 || (grid[n - 1] - 1.0).abs() > 1e-12 || !uniform {
        return Err(invalid("grid must be uniform on [0, 1]"));
    }
    let fp = derivative(f, h);
    let gp = derivative(g, h);
    let prod: Vec<f64> = fp.iter().zip(&gp).map(|(a, b)| a * b).collect();
    let integral = crate::numerics::trapezoid(&prod, grid)?;
    Ok(0.5 * (f[0] + f[n - 1]) * (g[0] + g[n - 1]) + 0.5 * integral)
}

fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| match i {
            0 => (f[1] - f[0]) / h,
            _ if i == n - 1 => (f[n - 1] - f[n - 2]) / h,
            _ => (f[i + 1] - f[i - 1]) / (2.0 * h),
        })
        .collect()
}

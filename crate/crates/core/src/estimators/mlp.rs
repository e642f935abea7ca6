//! Fully connected tanh network trained with mini-batch Adam on
//! `(1/|B|) Σ_B (h_w(Θ_i) - X_i)² + λ · penalty(w)`.
//!
//! The ridge term needs the norm of the network as an element of the
//! hypothesis space, which a plain network does not expose. Two readings
//! are supported:
//!
//! * [`PenaltyMode::Rkhs01`]: the network is the surface `h` on `[0, 1]` and
//!   the triangular-kernel norm `1/2 (h(0) + h(1))² + 1/2 ∫ h'²` is taken by
//!   finite differences on a fixed grid. The penalty is a fixed quadratic form
//!   in the network outputs at the grid points, so it is differentiable.
//! * [`PenaltyMode::L2Feature`]: the network is a function `g` on node space
//!   and the surface is its feature-map image
//!   `f(θ) = (1/P) Σ_p g(u_p) tanh(θ + u_p)` over fixed nodes `u_p`; the
//!   penalty is the Monte Carlo `L²(R)` norm `(1/P) Σ_p g(u_p)²`.

use nalgebra::{DMatrix, DMatrixView};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Surface;
use crate::error::{invalid, Error, Result};
use crate::kernels::{Combine, FeatureNodes, FeatureNodesConfig};
use crate::numerics::{linspace, Generator, RngStream};
use crate::points::PointSet;
use crate::sampling::SampleSet;

/// Weights of a `sizes[0] -> ... -> sizes[L] = 1` network. Each layer is
/// stored as its weight matrix (out x in, column-major) followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct LayerLayout {
    inputs: usize,
    outputs: usize,
    w: usize,
    b: usize,
}

impl MlpWeights {
    pub fn zeros(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(invalid("network needs at least an input and an output layer"));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(invalid("network output must be scalar"));
        }
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes,
            params: vec![0.0; count],
        })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(sizes: Vec<usize>, rng: &mut Generator) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in net.layout() {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for p in &mut net.params[layer.w..layer.b] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    fn layout(&self) -> Vec<LayerLayout> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let l = LayerLayout {
                    inputs: w[0],
                    outputs: w[1],
                    w: off,
                    b: off + w[0] * w[1],
                };
                off = l.b + w[1];
                l
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Multiplies the output layer (weights and bias) by `factor`.
    pub fn scale_output(&mut self, factor: f64) {
        let last = *self.layout().last().unwrap();
        let end = last.b + last.outputs;
        self.params[last.w..end].iter_mut().for_each(|p| *p *= factor);
    }

    fn weight(&self, l: &LayerLayout) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.params[l.w..l.b], l.outputs, l.inputs)
    }

    /// Forward pass on the columns of `inputs`; returns every layer's output
    /// (hidden layers after tanh, last layer linear), input included.
    fn forward(&self, inputs: DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let layers = self.layout();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(inputs);
        for (k, l) in layers.iter().enumerate() {
            let mut z = self.weight(l) * acts.last().unwrap();
            let bias = &self.params[l.b..l.b + l.outputs];
            for mut col in z.column_iter_mut() {
                for (v, b) in col.iter_mut().zip(bias) {
                    *v += b;
                }
            }
            if k + 1 < layers.len() {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output` (1 x batch).
    fn backward(&self, acts: &[DMatrix<f64>], d_out: DMatrix<f64>, grad: &mut [f64]) {
        let layers = self.layout();
        let mut delta = d_out;
        for (k, l) in layers.iter().enumerate().rev() {
            let prev = &acts[k];
            let dw = &delta * prev.transpose();
            for (g, v) in grad[l.w..l.b].iter_mut().zip(dw.iter()) {
                *g += v;
            }
            for (i, row) in delta.row_iter().enumerate() {
                grad[l.b + i] += row.sum();
            }
            if k > 0 {
                let mut back = self.weight(l).transpose() * &delta;
                back.zip_apply(prev, |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
    }
}

fn column_inputs<'a>(dim: usize, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> DMatrix<f64> {
    let n = rows.len();
    let mut data = Vec::with_capacity(dim * n);
    for r in rows {
        data.extend_from_slice(r);
    }
    DMatrix::from_vec(dim, n, data)
}

fn scalar_readout(nodes: &FeatureNodes) -> Result<()> {
    if nodes.width() != nodes.count() {
        return Err(invalid("feature readout needs one feature per node"));
    }
    Ok(())
}

pub fn mlp_predict(weights: &MlpWeights, theta: &[f64]) -> Result<f64> {
    if theta.len() != weights.input_dim() {
        return Err(invalid(format!(
            "network takes {} inputs, got {}",
            weights.input_dim(),
            theta.len()
        )));
    }
    let acts = weights.forward(DMatrix::from_column_slice(theta.len(), 1, theta));
    Ok(acts.last().unwrap()[(0, 0)])
}

fn default_penalty_nodes() -> usize {
    256
}

fn default_rkhs_grid() -> usize {
    201
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyMode {
    #[default]
    None,
    L2Feature {
        #[serde(default = "default_penalty_nodes")]
        nodes: usize,
        #[serde(default)]
        node_seed: u64,
    },
    Rkhs01 {
        #[serde(default = "default_rkhs_grid")]
        grid: usize,
    },
}

fn default_epochs() -> usize {
    50
}
fn default_batch() -> usize {
    32
}
fn default_lr() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_hidden() -> Vec<usize> {
    vec![200, 200]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub penalty: PenaltyMode,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch(),
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
            lambda: 0.0,
            penalty: PenaltyMode::None,
            hidden: default_hidden(),
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(invalid("epochs, batch size and learning rate must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(invalid("Adam moments must lie in [0, 1) and epsilon must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden layers must be non-empty"));
        }
        match self.penalty {
            PenaltyMode::L2Feature { nodes: 0, .. } => Err(invalid("need at least one penalty node")),
            PenaltyMode::Rkhs01 { grid } if grid < 3 => Err(invalid("penalty grid needs at least 3 points")),
            _ => Ok(()),
        }
    }
}

/// How network outputs become surface values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "readout", rename_all = "snake_case")]
pub enum Readout {
    /// The network is the surface.
    Direct,
    /// The network is `g` on node space; the surface is its feature-map image
    /// over the fixed nodes.
    FeatureMap { nodes: FeatureNodes },
}

/// Training objective for one mini-batch.
#[derive(Clone, Debug)]
pub struct Objective {
    readout: Readout,
    lambda: f64,
    penalty_grid: Option<Vec<f64>>,
}

impl Objective {
    pub fn new(config: &TrainConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let (readout, penalty_grid) = match &config.penalty {
            PenaltyMode::None => (Readout::Direct, None),
            PenaltyMode::Rkhs01 { grid } => {
                if dim != 1 {
                    return Err(invalid("the [0, 1] RKHS penalty needs scalar parameters"));
                }
                (Readout::Direct, Some(linspace(0.0, 1.0, *grid)))
            }
            PenaltyMode::L2Feature { nodes, node_seed } => {
                // The network maps a node to one scalar weight, so each node
                // carries a single feature.
                let config = FeatureNodesConfig::gaussian(*nodes, dim, *node_seed).with_combine(Combine::Product);
                let nodes = FeatureNodes::generate(config)?;
                (Readout::FeatureMap { nodes }, None)
            }
        };
        Ok(Self {
            readout,
            lambda: config.lambda,
            penalty_grid,
        })
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    /// Returns `(data loss, total objective)` and writes the gradient of the
    /// total objective into `grad`.
    pub fn evaluate(&self, net: &MlpWeights, thetas: &[&[f64]], xs: &[f64], grad: &mut [f64]) -> (f64, f64) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let b = xs.len() as f64;
        let dim = net.input_dim();
        match &self.readout {
            Readout::Direct => {
                let acts = net.forward(column_inputs(dim, thetas.iter().copied()));
                let out = acts.last().unwrap();
                let resid: Vec<f64> = out.iter().zip(xs).map(|(o, x)| o - x).collect();
                let data = resid.iter().map(|r| r * r).sum::<f64>() / b;
                let d_out = DMatrix::from_iterator(1, xs.len(), resid.iter().map(|r| 2.0 * r / b));
                net.backward(&acts, d_out, grad);
                let mut total = data;
                if let (Some(grid), true) = (&self.penalty_grid, self.lambda > 0.0) {
                    let acts = net.forward(DMatrix::from_row_slice(1, grid.len(), grid));
                    let h: Vec<f64> = acts.last().unwrap().iter().copied().collect();
                    let (pen, d_pen) = rkhs01_penalty(&h, grid[1] - grid[0]);
                    total += self.lambda * pen;
                    let d_out = DMatrix::from_iterator(1, h.len(), d_pen.iter().map(|d| self.lambda * d));
                    net.backward(&acts, d_out, grad);
                }
                (data, total)
            }
            Readout::FeatureMap { nodes } => {
                let p = nodes.count();
                let node_rows: Vec<&[f64]> = (0..p).map(|j| nodes.node(j)).collect();
                let acts = net.forward(column_inputs(dim, node_rows.into_iter()));
                let g: Vec<f64> = acts.last().unwrap().iter().copied().collect();
                let inv_p = 1.0 / p as f64;
                let mut d_g: Vec<f64> = g.iter().map(|v| 2.0 * self.lambda * v * inv_p).collect();
                let mut data = 0.0;
                for (t, x) in thetas.iter().zip(xs) {
                    let phi: Vec<f64> = (0..p).map(|j| nodes.feature(t, j) * inv_p).collect();
                    let f: f64 = phi.iter().zip(&g).map(|(a, b)| a * b).sum();
                    let r = f - x;
                    data += r * r;
                    for (dg, a) in d_g.iter_mut().zip(&phi) {
                        *dg += 2.0 * r * a / b;
                    }
                }
                data /= b;
                let pen = g.iter().map(|v| v * v).sum::<f64>() * inv_p;
                net.backward(&acts, DMatrix::from_vec(1, p, d_g), grad);
                (data, data + self.lambda * pen)
            }
        }
    }
}

/// `1/2 (h_0 + h_K)² + 1/2 Σ_k (h_{k+1} - h_k)² / Δ` and its gradient.
fn rkhs01_penalty(h: &[f64], step: f64) -> (f64, Vec<f64>) {
    let k = h.len() - 1;
    let ends = h[0] + h[k];
    let mut value = 0.5 * ends * ends;
    let mut grad = vec![0.0; h.len()];
    grad[0] += ends;
    grad[k] += ends;
    for i in 0..k {
        let diff = h[i + 1] - h[i];
        value += 0.5 * diff * diff / step;
        grad[i + 1] += diff / step;
        grad[i] -= diff / step;
    }
    (value, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpFit {
    pub weights: MlpWeights,
    pub readout: Readout,
    /// Mean data loss over the mini-batches of each epoch.
    pub loss_trace: Vec<f64>,
}

impl Surface for MlpFit {
    fn input_dim(&self) -> usize {
        self.weights.input_dim()
    }

    fn predict(&self, theta: &[f64]) -> Result<f64> {
        match &self.readout {
            Readout::Direct => mlp_predict(&self.weights, theta),
            Readout::FeatureMap { nodes } => {
                scalar_readout(nodes)?;
                let feats = nodes.features(theta)?;
                let mut s = 0.0;
                for (j, phi) in feats.iter().enumerate() {
                    s += phi * mlp_predict(&self.weights, nodes.node(j))?;
                }
                Ok(s / nodes.count() as f64)
            }
        }
    }

    fn predict_points(&self, points: &PointSet) -> Result<Vec<f64>> {
        if points.dim() != self.input_dim() {
            return Err(invalid("dimension mismatch"));
        }
        match &self.readout {
            Readout::Direct => {
                let acts = self.weights.forward(column_inputs(points.dim(), points.rows()));
                Ok(acts.last().unwrap().iter().copied().collect())
            }
            Readout::FeatureMap { nodes } => {
                scalar_readout(nodes)?;
                let rows: Vec<&[f64]> = (0..nodes.count()).map(|j| nodes.node(j)).collect();
                let acts = self.weights.forward(column_inputs(nodes.dim(), rows.into_iter()));
                let g = acts.last().unwrap();
                points
                    .rows()
                    .map(|t| {
                        let feats = nodes.features(t)?;
                        Ok(feats.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>() / nodes.count() as f64)
                    })
                    .collect()
            }
        }
    }
}

/// Mini-batch Adam on the configured objective. Weights are initialized from
/// `rng`; batch order comes from `config.shuffle_seed`.
pub fn mlp_fit(samples: &SampleSet, config: &TrainConfig, rng: &mut Generator) -> Result<MlpFit> {
    let dim = samples.dim();
    let objective = Objective::new(config, dim)?;
    if config.penalty_grid_needed() && samples.thetas.coords().iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(invalid("the [0, 1] RKHS penalty needs parameters in [0, 1]"));
    }
    let mut sizes = vec![dim];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut net = MlpWeights::xavier(sizes, rng)?;
    let n_params = net.params.len();
    let mut grad = vec![0.0; n_params];
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let mut step: i32 = 0;
    let shuffle = RngStream::new(config.shuffle_seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut shuffle_rng = shuffle.derive(epoch as u64).generator();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let thetas: Vec<&[f64]> = chunk.iter().map(|&i| samples.thetas.row(i)).collect();
            let xs: Vec<f64> = chunk.iter().map(|&i| samples.xs[i]).collect();
            let (data, total) = objective.evaluate(&net, &thetas, &xs, &mut grad);
            if !total.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
            epoch_loss += data;
            batches += 1;
            step += 1;
            let c1 = 1.0 - config.beta1.powi(step);
            let c2 = 1.0 - config.beta2.powi(step);
            for (((p, g), a), b) in net.params.iter_mut().zip(&grad).zip(&mut m1).zip(&mut m2) {
                *a = config.beta1 * *a + (1.0 - config.beta1) * g;
                *b = config.beta2 * *b + (1.0 - config.beta2) * g * g;
                *p -= config.learning_rate * (*a / c1) / ((*b / c2).sqrt() + config.epsilon);
            }
            if !net.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
        }
        trace.push(epoch_loss / batches as f64);
    }
    Ok(MlpFit {
        weights: net,
        readout: objective.readout,
        loss_trace: trace,
    })
}

impl TrainConfig {
    fn penalty_grid_needed(&self) -> bool {
        matches!(self.penalty, PenaltyMode::Rkhs01 { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assert_close;

    fn small_config(penalty: PenaltyMode, lambda: f64) -> TrainConfig {
        TrainConfig {
            hidden: vec![7, 5],
            lambda,
            penalty,
            ..TrainConfig::default()
        }
    }

    fn gradient_check(config: &TrainConfig, seed: u64) {
        let mut rng = RngStream::new(seed).generator();
        let dim = 1;
        let objective = Objective::new(config, dim).unwrap();
        let mut sizes = vec![dim];
        sizes.extend(&config.hidden);
        sizes.push(1);
        let mut net = MlpWeights::xavier(sizes, &mut rng).unwrap();
        // Non-zero biases so every coordinate carries gradient.
        for p in net.params.iter_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let thetas: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let rows: Vec<&[f64]> = thetas.iter().map(Vec::as_slice).collect();
        let xs: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut grad = vec![0.0; net.params.len()];
        objective.evaluate(&net, &rows, &xs, &mut grad);
        let mut scratch = grad.clone();
        let h = 1e-5;
        for _ in 0..20 {
            let k = rng.random_range(0..net.params.len());
            let orig = net.params[k];
            net.params[k] = orig + h;
            let (_, up) = objective.evaluate(&net, &rows, &xs, &mut scratch);
            net.params[k] = orig - h;
            let (_, down) = objective.evaluate(&net, &rows, &xs, &mut scratch);
            net.params[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / (fd.abs() + grad[k].abs()).max(1e-6);
            assert!(rel <= 1e-5, "coordinate {k}: analytic {} vs fd {fd} (rel {rel})", grad[k]);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        gradient_check(&small_config(PenaltyMode::None, 0.0), 1);
        gradient_check(&small_config(PenaltyMode::Rkhs01 { grid: 21 }, 0.3), 2);
        gradient_check(&small_config(PenaltyMode::L2Feature { nodes: 16, node_seed: 3 }, 0.3), 3);
    }

    #[test]
    fn zero_network_predicts_zero() {
        let net = MlpWeights::zeros(vec![2, 200, 200, 1]).unwrap();
        for t in [[0.0, 0.0], [1.0, -3.0], [1e3, 1e3]] {
            assert_eq!(mlp_predict(&net, &t).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_output_layer_scales() {
        let mut rng = RngStream::new(4).generator();
        let mut net = MlpWeights::xavier(vec![1, 200, 200, 1], &mut rng).unwrap();
        let base = mlp_predict(&net, &[0.3]).unwrap();
        net.scale_output(10.0);
        assert_close(mlp_predict(&net, &[0.3]).unwrap(), 10.0 * base, 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn saturated_inputs_stay_finite() {
        let mut rng = RngStream::new(5).generator();
        let net = MlpWeights::xavier(vec![1, 200, 200, 1], &mut rng).unwrap();
        for t in [-1e3, -10.0, 10.0, 1e3] {
            assert!(mlp_predict(&net, &[t]).unwrap().is_finite());
        }
        assert!(mlp_predict(&net, &[0.1, 0.2]).is_err());
    }

    fn constant_samples(c: f64, n: usize) -> SampleSet {
        let thetas = linspace(0.0, 1.0, n);
        SampleSet::new(PointSet::from_scalars(thetas), vec![c; n], 1).unwrap()
    }

    #[test]
    fn learns_a_constant() {
        let c = 2.0;
        let set = constant_samples(c, 1000);
        let mut rng = RngStream::new(6).generator();
        let fit = mlp_fit(&set, &TrainConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.loss_trace.len(), 50);
        let preds = fit.predict_points(&set.thetas).unwrap();
        let mse = preds.iter().map(|p| (p - c).powi(2)).sum::<f64>() / 1000.0;
        assert!(mse <= 1e-3 * c * c, "{mse}");
        assert!(fit.weights.is_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let set = constant_samples(1.0, 64);
        let config = TrainConfig {
            epochs: 3,
            hidden: vec![16, 16],
            shuffle_seed: 9,
            ..TrainConfig::default()
        };
        let a = mlp_fit(&set, &config, &mut RngStream::new(7).generator()).unwrap();
        let b = mlp_fit(&set, &config, &mut RngStream::new(7).generator()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diverging_training_is_reported() {
        let set = constant_samples(1e300, 64);
        let config = TrainConfig {
            epochs: 2,
            hidden: vec![4],
            ..TrainConfig::default()
        };
        let r = mlp_fit(&set, &config, &mut RngStream::new(8).generator());
        assert!(matches!(r, Err(Error::DivergedTraining { epoch: 0 })));
    }

    #[test]
    fn feature_readout_matches_batched_prediction() {
        let set = constant_samples(1.0, 64);
        let config = TrainConfig {
            epochs: 2,
            hidden: vec![8],
            lambda: 0.1,
            penalty: PenaltyMode::L2Feature { nodes: 32, node_seed: 1 },
            ..TrainConfig::default()
        };
        let fit = mlp_fit(&set, &config, &mut RngStream::new(9).generator()).unwrap();
        let batch = fit.predict_points(&set.thetas).unwrap();
        for (i, t) in set.thetas.rows().enumerate().step_by(9) {
            assert_close(fit.predict(t).unwrap(), batch[i], 1e-12);
        }
    }

    #[test]
    fn rkhs_penalty_of_a_line() {
        // h(t) = a + b t: 1/2 (2a + b)² + 1/2 b².
        let grid = linspace(0.0, 1.0, 11);
        let h: Vec<f64> = grid.iter().map(|t| 1.0 + 3.0 * t).collect();
        let (v, _) = rkhs01_penalty(&h, 0.1);
        assert_close(v, 0.5 * 25.0 + 0.5 * 9.0, 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lambda: -1.0, ..TrainConfig::default() }.validate().is_err());
        let set = SampleSet::new(PointSet::from_scalars(vec![1.5]), vec![1.0], 1).unwrap();
        let config = small_config(PenaltyMode::Rkhs01 { grid: 11 }, 0.1);
        assert!(mlp_fit(&set, &config, &mut RngStream::new(1).generator()).is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"penalty":{"mode":"rkhs01"}}"#).unwrap();
        assert_eq!(parsed.penalty, PenaltyMode::Rkhs01 { grid: 201 });
        assert_eq!(parsed.epochs, 50);
    }
}

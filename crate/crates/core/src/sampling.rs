//! The parameter measure μ, joint samples `{(Θ_i, X_i)}` and pre-averaging.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, invalid, Result};
use crate::models::ConditionalSampler;
use crate::numerics::{linspace, Generator, RngStream};
use crate::points::PointSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Product of uniforms on the box.
    #[default]
    Uniform,
}

/// A box `Γ` of model parameters with its sampling measure and an evaluation
/// grid (equidistant per dimension, endpoints included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpace {
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub measure: Measure,
    pub grid: Vec<usize>,
}

impl ParamSpace {
    pub fn interval(lo: f64, hi: f64, grid: usize) -> Result<Self> {
        Self::new(vec![[lo, hi]], vec![grid])
    }

    pub fn new(bounds: Vec<[f64; 2]>, grid: Vec<usize>) -> Result<Self> {
        let space = Self {
            bounds,
            measure: Measure::Uniform,
            grid,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(invalid("parameter space needs at least one dimension"));
        }
        if self.grid.len() != self.bounds.len() {
            return Err(invalid("one grid size per dimension is required"));
        }
        for [lo, hi] in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("degenerate parameter interval [{lo}, {hi}]")));
            }
        }
        if self.grid.contains(&0) {
            return Err(invalid("grid sizes must be positive"));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dims()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(t, [lo, hi])| (*lo..=*hi).contains(t))
    }

    /// Per-dimension grid coordinates.
    pub fn axes(&self) -> Vec<Vec<f64>> {
        self.bounds
            .iter()
            .zip(&self.grid)
            .map(|([lo, hi], &n)| linspace(*lo, *hi, n))
            .collect()
    }

    /// Cartesian product of the axes; the last coordinate varies fastest.
    pub fn grid_points(&self) -> PointSet {
        product_grid(&self.axes())
    }
}

pub(crate) fn product_grid(axes: &[Vec<f64>]) -> PointSet {
    let dim = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = PointSet::empty(dim);
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    for _ in 0..total {
        for k in 0..dim {
            point[k] = axes[k][idx[k]];
        }
        out.push(&point).expect("grid point dimension");
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// `n` i.i.d. draws from the product-uniform measure on the box.
pub fn draw_thetas(space: &ParamSpace, n: usize, rng: &mut Generator) -> Result<PointSet> {
    space.validate()?;
    if n == 0 {
        return Err(invalid("need at least one parameter draw"));
    }
    let mut coords = Vec::with_capacity(n * space.dims());
    for _ in 0..n {
        for [lo, hi] in &space.bounds {
            coords.push(lo + (hi - lo) * rng.random::<f64>());
        }
    }
    PointSet::new(space.dims(), coords)
}

/// Training data for one fit. `xs[i]` is the mean of `m` payoffs drawn at
/// `thetas[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub thetas: PointSet,
    pub xs: Vec<f64>,
    pub m: usize,
    /// Number of raw payoff draws consumed.
    pub draws: u64,
    #[serde(default)]
    pub provenance: Option<RngStream>,
}

impl SampleSet {
    pub fn new(thetas: PointSet, xs: Vec<f64>, m: usize) -> Result<Self> {
        if thetas.len() != xs.len() || xs.is_empty() {
            return Err(invalid(format!(
                "{} parameter points for {} payoffs",
                thetas.len(),
                xs.len()
            )));
        }
        if m == 0 {
            return Err(invalid("pre-averaging width must be at least 1"));
        }
        let draws = (xs.len() * m) as u64;
        Ok(Self {
            thetas,
            xs,
            m,
            draws,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.thetas.dim()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            thetas: self.thetas.permuted(perm),
            xs: perm.iter().map(|&p| self.xs[p]).collect(),
            ..self.clone()
        }
    }

    /// CSV with header `theta_1, .., theta_d, x, m`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        let mut header: Vec<String> = (1..=self.dim()).map(|k| format!("theta_{k}")).collect();
        header.push("x".into());
        header.push("m".into());
        w.write_record(&header).map_err(csv_err(path))?;
        for (theta, x) in self.thetas.rows().zip(&self.xs) {
            let mut rec: Vec<String> = theta.iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{x:?}"));
            rec.push(self.m.to_string());
            w.write_record(&rec).map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| crate::error::io_err(path)(e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
        let header = r.headers().map_err(csv_err(path))?.clone();
        let n_cols = header.len();
        let dim = n_cols.saturating_sub(2);
        let expected: Vec<String> = (1..=dim)
            .map(|k| format!("theta_{k}"))
            .chain(["x".to_string(), "m".to_string()])
            .collect();
        if dim == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(invalid(format!(
                "{}: expected header {}",
                path.display(),
                expected.join(",")
            )));
        }
        let mut coords = Vec::new();
        let mut xs = Vec::new();
        let mut m = None;
        for rec in r.records() {
            let rec = rec.map_err(csv_err(path))?;
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("{}: bad number {s:?}: {e}", path.display())))
            };
            for k in 0..dim {
                coords.push(parse(&rec[k])?);
            }
            xs.push(parse(&rec[dim])?);
            let row_m: usize = rec[dim + 1]
                .trim()
                .parse()
                .map_err(|e| invalid(format!("{}: bad m: {e}", path.display())))?;
            if *m.get_or_insert(row_m) != row_m {
                return Err(invalid(format!("{}: mixed pre-averaging widths", path.display())));
            }
        }
        SampleSet::new(PointSet::new(dim, coords)?, xs, m.unwrap_or(1))
    }
}

/// Pre-averaged joint sample: for each `Θ_i`, the mean of `m` conditionally
/// i.i.d. payoffs. Rows are drawn in order from `rng`, so the result depends
/// only on the generator state.
pub fn build_samples<S: ConditionalSampler + ?Sized>(
    model: &S,
    thetas: PointSet,
    m: usize,
    rng: &mut Generator,
) -> Result<SampleSet> {
    if m == 0 {
        return Err(invalid("pre-averaging width must be at least 1"));
    }
    if thetas.dim() != model.param_dim() {
        return Err(invalid(format!(
            "model takes {} parameters, thetas have dimension {}",
            model.param_dim(),
            thetas.dim()
        )));
    }
    let xs = thetas
        .rows()
        .map(|theta| model.sample_mean(theta, m, rng))
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(thetas, xs, m)
}

/// Draws thetas and payoffs from one stream: thetas first, then payoffs row
/// by row.
pub fn draw_sample_set<S: ConditionalSampler + ?Sized>(
    model: &S,
    space: &ParamSpace,
    n: usize,
    m: usize,
    stream: RngStream,
) -> Result<SampleSet> {
    let mut rng = stream.generator();
    let thetas = draw_thetas(space, n, &mut rng)?;
    let mut set = build_samples(model, thetas, m, &mut rng)?;
    set.provenance = Some(stream);
    Ok(set)
}

//! Conditional payoff samplers `P_θ` and their analytic references.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{normal_cdf, standard_normal, CorrelatedNormals, Generator};

/// How a scalar model parameter θ becomes a Black–Scholes volatility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolMap {
    /// `σ(θ) = (1 + θ) / 10` for θ in `[0, 1]`.
    Affine01,
    /// `σ(θ) = θ` for θ ≥ 0.
    Direct,
}

impl VolMap {
    pub fn sigma(self, theta: f64) -> Result<f64> {
        match self {
            VolMap::Affine01 if (0.0..=1.0).contains(&theta) => Ok((1.0 + theta) / 10.0),
            VolMap::Direct if theta >= 0.0 && theta.is_finite() => Ok(theta),
            _ => Err(invalid(format!("θ = {theta} outside the domain of {self:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsSpec {
    pub spot: f64,
    pub strike: f64,
    #[serde(default)]
    pub rate: f64,
    pub maturity: f64,
    pub vol_map: VolMap,
}

impl BsSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.maturity > 0.0 && self.rate.is_finite()) {
            return Err(invalid("Black–Scholes strike and maturity must be positive"));
        }
        // Zero spot is allowed so that the degenerate payoff can be sampled.
        if !(self.spot >= 0.0 && self.spot.is_finite()) {
            return Err(invalid("Black–Scholes spot must be non-negative"));
        }
        Ok(())
    }
}

/// `max(s - k, 0)`.
#[inline]
pub fn european_call(s: f64, k: f64) -> f64 {
    (s - k).max(0.0)
}

/// Black–Scholes call price `x Φ(d1) - K e^{-rT} Φ(d1 - σ√T)`.
pub fn bs_price(spec: &BsSpec, sigma: f64) -> Result<f64> {
    spec.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!(
            "volatility must be positive, got {sigma}; use bs_price_or_intrinsic for the σ -> 0 limit"
        )));
    }
    if spec.spot == 0.0 {
        return Ok(0.0);
    }
    let sd = sigma * spec.maturity.sqrt();
    let d1 = ((spec.spot / spec.strike).ln() + (spec.rate + 0.5 * sigma * sigma) * spec.maturity) / sd;
    let discount = (-spec.rate * spec.maturity).exp();
    Ok(spec.spot * normal_cdf(d1) - spec.strike * discount * normal_cdf(d1 - sd))
}

/// Like [`bs_price`], but `sigma == 0` returns the discounted intrinsic value
/// `(x - K e^{-rT})_+` instead of failing.
pub fn bs_price_or_intrinsic(spec: &BsSpec, sigma: f64) -> Result<f64> {
    if sigma == 0.0 {
        spec.validate()?;
        let discount = (-spec.rate * spec.maturity).exp();
        return Ok(european_call(spec.spot, spec.strike * discount));
    }
    bs_price(spec, sigma)
}

/// Price as a function of the model parameter θ.
pub fn bs_price_at(spec: &BsSpec, theta: f64) -> Result<f64> {
    bs_price(spec, spec.vol_map.sigma(theta)?)
}

#[inline]
fn bs_payoff_with_sigma<R: Rng + ?Sized>(spec: &BsSpec, sigma: f64, rng: &mut R) -> f64 {
    let t = spec.maturity;
    let z = (spec.rate - 0.5 * sigma * sigma) * t + sigma * t.sqrt() * standard_normal(rng);
    (-spec.rate * t).exp() * european_call(spec.spot * z.exp(), spec.strike)
}

/// One discounted call payoff under `P_θ`: `Z_T ~ N((r - σ²/2) T, σ² T)`.
/// With `r = 0` this is exactly `(x e^{Z_T} - K)_+`.
pub fn bs_payoff_sample<R: Rng + ?Sized>(spec: &BsSpec, theta: f64, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    let sigma = spec.vol_map.sigma(theta)?;
    Ok(bs_payoff_with_sigma(spec, sigma, rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonSpec {
    pub spot: f64,
    pub strike: f64,
    pub maturity: f64,
    pub kappa: f64,
    pub theta_var: f64,
    pub sigma_vol: f64,
    pub rho: f64,
    /// Initial variance; `None` starts the variance at `theta_var`.
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    64
}

impl HestonSpec {
    pub fn initial_variance(&self) -> f64 {
        self.v0.unwrap_or(self.theta_var)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spot", self.spot),
            ("strike", self.strike),
            ("maturity", self.maturity),
            ("kappa", self.kappa),
            ("theta_var", self.theta_var),
            ("v0", self.initial_variance()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("Heston {name} must be positive, got {v}")));
            }
        }
        if !(self.sigma_vol >= 0.0 && self.sigma_vol.is_finite()) {
            return Err(invalid("Heston vol-of-vol must be non-negative"));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(invalid("Heston correlation must lie in [-1, 1]"));
        }
        if self.steps == 0 {
            return Err(invalid("Heston needs at least one time step"));
        }
        Ok(())
    }
}

fn heston_terminal_unchecked<R: Rng + ?Sized>(spec: &HestonSpec, normals: &CorrelatedNormals, rng: &mut R) -> f64 {
    let dt = spec.maturity / spec.steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut v = spec.initial_variance();
    let mut log_s = spec.spot.ln();
    for _ in 0..spec.steps {
        let (z_s, z_v) = normals.sample(rng);
        let v_pos = v.max(0.0);
        let vol = v_pos.sqrt();
        log_s += -0.5 * v_pos * dt + vol * sqrt_dt * z_s;
        v += spec.kappa * (spec.theta_var - v_pos) * dt + spec.sigma_vol * vol * sqrt_dt * z_v;
    }
    log_s.exp()
}

/// Terminal stock price under Heston dynamics with zero rate, simulated by
/// full-truncation Euler: the variance is clipped at zero wherever it enters
/// a drift or diffusion coefficient.
pub fn heston_terminal<R: Rng + ?Sized>(spec: &HestonSpec, rng: &mut R) -> Result<f64> {
    spec.validate()?;
    let normals = CorrelatedNormals::new(spec.rho)?;
    Ok(heston_terminal_unchecked(spec, &normals, rng))
}

/// Heston coordinates that a parameter vector may drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HestonParam {
    Kappa,
    ThetaVar,
    SigmaVol,
    Rho,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HestonModel {
    pub base: HestonSpec,
    /// Which coordinates θ_1, θ_2, ... overwrite in `base`.
    pub params: Vec<HestonParam>,
}

impl HestonModel {
    pub fn spec_at(&self, theta: &[f64]) -> Result<HestonSpec> {
        if theta.len() != self.params.len() {
            return Err(invalid(format!(
                "Heston model expects {} parameters, got {}",
                self.params.len(),
                theta.len()
            )));
        }
        let mut spec = self.base.clone();
        for (p, &v) in self.params.iter().zip(theta) {
            match p {
                HestonParam::Kappa => spec.kappa = v,
                HestonParam::ThetaVar => spec.theta_var = v,
                HestonParam::SigmaVol => spec.sigma_vol = v,
                HestonParam::Rho => spec.rho = v,
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws payoffs `X ~ P_θ`.
pub trait ConditionalSampler: Sync {
    fn param_dim(&self) -> usize;

    fn sample(&self, theta: &[f64], rng: &mut Generator) -> Result<f64>;

    /// Mean of `m` conditionally i.i.d. draws at the same θ.
    fn sample_mean(&self, theta: &[f64], m: usize, rng: &mut Generator) -> Result<f64> {
        let mut sum = 0.0;
        for _ in 0..m {
            sum += self.sample(theta, rng)?;
        }
        Ok(sum / m as f64)
    }

    /// `E_θ[X]` in closed form, when known.
    fn analytic_price(&self, theta: &[f64]) -> Result<f64> {
        let _ = theta;
        Err(Error::UnsupportedModel(
            "no closed-form price for this model".into(),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    BlackScholes(BsSpec),
    Heston(HestonModel),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::BlackScholes(spec) => spec.validate(),
            ModelSpec::Heston(model) => {
                if model.params.is_empty() {
                    return Err(invalid("Heston model needs at least one free parameter"));
                }
                model.base.validate()
            }
        }
    }

    pub fn has_analytic_price(&self) -> bool {
        matches!(self, ModelSpec::BlackScholes(_))
    }
}

fn scalar(theta: &[f64]) -> Result<f64> {
    match theta {
        [t] => Ok(*t),
        _ => Err(invalid(format!(
            "Black–Scholes takes one parameter, got {}",
            theta.len()
        ))),
    }
}

impl ConditionalSampler for ModelSpec {
    fn param_dim(&self) -> usize {
        match self {
            ModelSpec::BlackScholes(_) => 1,
            ModelSpec::Heston(m) => m.params.len(),
        }
    }

    fn sample(&self, theta: &[f64], rng: &mut Generator) -> Result<f64> {
        match self {
            ModelSpec::BlackScholes(spec) => bs_payoff_sample(spec, scalar(theta)?, rng),
            ModelSpec::Heston(model) => {
                let spec = model.spec_at(theta)?;
                Ok(european_call(heston_terminal(&spec, rng)?, spec.strike))
            }
        }
    }

    fn sample_mean(&self, theta: &[f64], m: usize, rng: &mut Generator) -> Result<f64> {
        let mut sum = 0.0;
        match self {
            ModelSpec::BlackScholes(spec) => {
                spec.validate()?;
                let sigma = spec.vol_map.sigma(scalar(theta)?)?;
                for _ in 0..m {
                    sum += bs_payoff_with_sigma(spec, sigma, rng);
                }
            }
            ModelSpec::Heston(model) => {
                let spec = model.spec_at(theta)?;
                let normals = CorrelatedNormals::new(spec.rho)?;
                for _ in 0..m {
                    sum += european_call(heston_terminal_unchecked(&spec, &normals, rng), spec.strike);
                }
            }
        }
        Ok(sum / m as f64)
    }

    fn analytic_price(&self, theta: &[f64]) -> Result<f64> {
        match self {
            ModelSpec::BlackScholes(spec) => bs_price_at(spec, scalar(theta)?),
            ModelSpec::Heston(_) => Err(Error::UnsupportedModel(
                "Heston prices are benchmarked by Monte Carlo".into(),
            )),
        }
    }
}

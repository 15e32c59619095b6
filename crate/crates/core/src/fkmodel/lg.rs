//! Scalar linear-Gaussian model `x_t = ρ x_{t-1} + σ ε_t`, `y_t = x_t + τ η_t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{normal_quantile, GaussianKernel, LN_2PI, MIN_UNIFORM};
use super::{BackwardKernel, FeynmanKac, StateRescaler, WhitenedGaussianBackward};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LgParams {
    pub rho: f64,
    pub sigma: f64,
    pub tau: f64,
    pub x0_mean: f64,
    /// Standard deviation of `x_0`; stationary `σ / sqrt(1 - ρ²)` when absent.
    pub x0_sd: Option<f64>,
}

impl Default for LgParams {
    fn default() -> Self {
        LgParams { rho: 0.9, sigma: 1.0, tau: 1.0, x0_mean: 0.0, x0_sd: None }
    }
}

impl LgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument("linear-Gaussian model needs sigma > 0".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument("linear-Gaussian model needs tau > 0".into()));
        }
        if !self.rho.is_finite() || !self.x0_mean.is_finite() {
            return Err(Error::InvalidArgument("linear-Gaussian model needs finite rho and x0_mean".into()));
        }
        self.initial_sd().map(|_| ())
    }

    pub fn initial_sd(&self) -> Result<f64> {
        match self.x0_sd {
            Some(s) if s > 0.0 && s.is_finite() => Ok(s),
            Some(_) => Err(Error::InvalidArgument("x0_sd must be positive".into())),
            None if self.rho.abs() < 1.0 => Ok(self.sigma / (1.0 - self.rho * self.rho).sqrt()),
            None => Err(Error::InvalidArgument("x0_sd is required when |rho| >= 1".into())),
        }
    }

    /// Draws `(x_t, y_t)` for `t = 0..=horizon`.
    pub fn simulate(&self, horizon: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = || normal_quantile(rng.random::<f64>().max(MIN_UNIFORM));
        let mut x = self.x0_mean + self.initial_sd()? * z();
        let mut xs = Vec::with_capacity(horizon + 1);
        let mut ys = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            if t > 0 {
                x = self.rho * x + self.sigma * z();
            }
            xs.push(x);
            ys.push(x + self.tau * z());
        }
        Ok((xs, ys))
    }
}

/// Bootstrap Feynman-Kac model of the linear-Gaussian process.
#[derive(Debug, Clone)]
pub struct LgModel {
    params: LgParams,
    ys: Vec<f64>,
    initial: GaussianKernel,
    transition: GaussianKernel,
    rescaler: StateRescaler,
}

pub fn make_lg_model(params: LgParams, ys: Vec<f64>, rescaler: Option<StateRescaler>) -> Result<LgModel> {
    params.validate()?;
    if ys.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite observation".into()));
    }
    let sd0 = params.initial_sd()?;
    let initial = GaussianKernel::fixed(vec![params.x0_mean], vec![sd0 * sd0])?;
    let transition = GaussianKernel::new(vec![params.rho], vec![0.0], vec![params.sigma * params.sigma])?;
    let rescaler = match rescaler {
        Some(r) if r.dim() != 1 => return Err(Error::DimensionMismatch { expected: 1, actual: r.dim() }),
        Some(r) => r,
        None => StateRescaler::new(vec![params.x0_mean], vec![sd0])?,
    };
    Ok(LgModel { params, ys, initial, transition, rescaler })
}

impl LgModel {
    pub fn params(&self) -> &LgParams {
        &self.params
    }

    pub fn observations(&self) -> &[f64] {
        &self.ys
    }

    #[inline]
    fn log_obs(&self, t: usize, x: f64) -> f64 {
        let r = (self.ys[t] - x) / self.params.tau;
        -0.5 * LN_2PI - self.params.tau.ln() - 0.5 * r * r
    }
}

impl FeynmanKac for LgModel {
    fn dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.ys.len() - 1
    }

    fn initial_inverse(&self, u: &[f64], out: &mut [f64]) {
        self.initial.inverse_into(&[], u, out);
    }

    fn mutate_inverse(&self, _t: usize, x_prev: &[f64], v: &[f64], out: &mut [f64]) {
        self.transition.inverse_into(x_prev, v, out);
    }

    fn log_transition_density(&self, _t: usize, x_prev: &[f64], x: &[f64]) -> f64 {
        self.transition.log_density(x_prev, x)
    }

    fn log_potential(&self, t: usize, _x_prev: Option<&[f64]>, x: &[f64]) -> f64 {
        self.log_obs(t, x[0])
    }

    fn rescaler(&self) -> &StateRescaler {
        &self.rescaler
    }

    fn name(&self) -> &str {
        "lg1d"
    }

    fn backward_kernel<'a>(&'a self, t: usize, prev: &'a [f64]) -> Box<dyn BackwardKernel + 'a> {
        Box::new(WhitenedGaussianBackward::new(&self.transition, prev, move |x: &[f64]| self.log_obs(t, x[0])))
    }
}

//! Multivariate stochastic volatility with correlated shocks:
//! `y_t = S_t^{1/2} ε_t`, `x_t = μ + Φ (x_{t-1} - μ) + Ψ^{1/2} ν_t`,
//! `S_t = diag(exp(x_t))`, `(ε_t, ν_t) ~ N(0, C)` with `C` block diagonal.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{cholesky, normal_quantile, GaussianKernel, LN_2PI, MIN_UNIFORM};
use super::{BackwardKernel, FeynmanKac, StateRescaler, WhitenedGaussianBackward};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvParams {
    pub d: usize,
    /// Diagonal of `Φ`.
    pub phi: f64,
    pub mu: f64,
    /// Diagonal of `Ψ`.
    pub psi: f64,
    /// Off-diagonal correlation of `ν_t`.
    pub rho_nu: f64,
    /// Off-diagonal correlation of `ε_t`.
    pub rho_eps: f64,
}

impl Default for SvParams {
    fn default() -> Self {
        SvParams { d: 2, phi: 0.9, mu: -9.0, psi: 0.1, rho_nu: 0.8, rho_eps: 0.6 }
    }
}

fn equicorrelation(d: usize, rho: f64) -> Vec<f64> {
    (0..d * d).map(|k| if k / d == k % d { 1.0 } else { rho }).collect()
}

impl SvParams {
    fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("SV model needs d >= 1".into()));
        }
        if !(self.psi > 0.0) || !self.phi.is_finite() || !self.mu.is_finite() {
            return Err(Error::InvalidArgument("SV model needs finite phi, mu and psi > 0".into()));
        }
        Ok(())
    }

    /// Covariance of the state noise, `Ψ^{1/2} C_νν Ψ^{1/2}`.
    pub fn state_noise_covariance(&self) -> Vec<f64> {
        equicorrelation(self.d, self.rho_nu).into_iter().map(|c| c * self.psi).collect()
    }

    /// Stationary covariance `V = Φ V Φᵀ + Q`, from `(I - Φ⊗Φ) vec V = vec Q`.
    pub fn stationary_covariance(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let d = self.d;
        let phi = DMatrix::<f64>::identity(d, d) * self.phi;
        let kron = phi.kronecker(&phi);
        let a = DMatrix::<f64>::identity(d * d, d * d) - kron;
        let q = DVector::from_vec(self.state_noise_covariance());
        let v = a
            .lu()
            .solve(&q)
            .ok_or_else(|| Error::Numeric("stationary covariance does not exist (|phi| = 1)".into()))?;
        let v: Vec<f64> = v.iter().copied().collect();
        cholesky(d, &v).map_err(|_| Error::NotPositiveDefinite("stationary covariance (needs |phi| < 1)".into()))?;
        Ok(v)
    }

    /// Draws `(x_t, y_t)` for `t = 0..=horizon` from the model, with the
    /// joint correlation `C` of `(ε_t, ν_t)`. `x_0` is stationary.
    pub fn simulate(&self, horizon: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.d;
        let v0 = self.stationary_covariance()?;
        let l0 = cholesky(d, &v0)?;
        let l_eps = cholesky(d, &equicorrelation(d, self.rho_eps))?;
        let l_nu = cholesky(d, &equicorrelation(d, self.rho_nu))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normals = |k: usize| -> DVector<f64> {
            DVector::from_iterator(k, (0..k).map(|_| normal_quantile(rng.random::<f64>().max(MIN_UNIFORM))))
        };
        let mut xs = Vec::with_capacity((horizon + 1) * d);
        let mut ys = Vec::with_capacity((horizon + 1) * d);
        let mut x = DVector::from_element(d, self.mu) + &l0 * normals(d);
        let sd = self.psi.sqrt();
        for t in 0..=horizon {
            if t > 0 {
                let nu = &l_nu * normals(d);
                x = x.map(|v| self.mu + self.phi * (v - self.mu)) + nu * sd;
            }
            let eps = &l_eps * normals(d);
            xs.extend(x.iter());
            ys.extend(x.iter().zip(eps.iter()).map(|(xi, e)| (0.5 * xi).exp() * e));
        }
        Ok((xs, ys))
    }
}

struct ObservationDensity {
    d: usize,
    /// `C_εε^{-1}`, row-major.
    precision: Vec<f64>,
    /// `-d/2 ln 2π - 1/2 ln det C_εε`.
    constant: f64,
}

impl ObservationDensity {
    fn new(d: usize, rho_eps: f64) -> Result<Self> {
        let c = equicorrelation(d, rho_eps);
        let l = cholesky(d, &c)?;
        let logdet: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv = DMatrix::from_row_slice(d, d, &c)
            .try_inverse()
            .ok_or_else(|| Error::NotPositiveDefinite("observation correlation".into()))?;
        let precision = (0..d * d).map(|k| inv[(k / d, k % d)]).collect();
        Ok(ObservationDensity { d, precision, constant: -0.5 * d as f64 * LN_2PI - 0.5 * logdet })
    }

    /// `log N(y; 0, S^{1/2} C S^{1/2})` with `S = diag(exp(x))`.
    #[inline]
    fn log_density(&self, y: &[f64], x: &[f64]) -> f64 {
        let d = self.d;
        let mut w = [0.0f64; 8];
        let mut heap;
        let w: &mut [f64] = if d <= 8 {
            &mut w[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut half_sum = 0.0;
        for i in 0..d {
            w[i] = y[i] * (-0.5 * x[i]).exp();
            half_sum += 0.5 * x[i];
        }
        let mut q = 0.0;
        for i in 0..d {
            let row = &self.precision[i * d..(i + 1) * d];
            q += w[i] * row.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        self.constant - half_sum - 0.5 * q
    }
}

/// Bootstrap Feynman-Kac model of the SV process given observations.
#[derive(Clone)]
pub struct SvModel {
    params: SvParams,
    ys: Vec<f64>,
    initial: GaussianKernel,
    transition: GaussianKernel,
    obs: std::sync::Arc<ObservationDensity>,
    rescaler: StateRescaler,
}

impl std::fmt::Debug for SvModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SvModel").field("params", &self.params).field("horizon", &self.horizon()).finish()
    }
}

/// Builds the SV model; `ys` is row-major with `d` columns, one row per
/// time `0..=T`. The potential is the density of `y_t` given `x_t`.
pub fn make_sv_model(params: SvParams, ys: Vec<f64>, rescaler: Option<StateRescaler>) -> Result<SvModel> {
    params.validate()?;
    let d = params.d;
    if ys.is_empty() || ys.len() % d != 0 {
        return Err(Error::DimensionMismatch { expected: d, actual: ys.len() % d });
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite observation".into()));
    }
    let v0 = params.stationary_covariance()?;
    let initial = GaussianKernel::fixed(vec![params.mu; d], v0.clone())?;
    let transition_matrix: Vec<f64> = (0..d * d).map(|k| if k / d == k % d { params.phi } else { 0.0 }).collect();
    let offset = vec![params.mu * (1.0 - params.phi); d];
    let transition = GaussianKernel::new(transition_matrix, offset, params.state_noise_covariance())?;
    let obs = ObservationDensity::new(d, params.rho_eps)?;
    let rescaler = match rescaler {
        Some(r) if r.dim() != d => return Err(Error::DimensionMismatch { expected: d, actual: r.dim() }),
        Some(r) => r,
        None => StateRescaler::new(vec![params.mu; d], (0..d).map(|i| v0[i * d + i].sqrt()).collect())?,
    };
    Ok(SvModel { params, ys, initial, transition, obs: std::sync::Arc::new(obs), rescaler })
}

impl SvModel {
    pub fn params(&self) -> &SvParams {
        &self.params
    }

    pub fn observations(&self) -> &[f64] {
        &self.ys
    }

    pub fn transition_kernel(&self) -> &GaussianKernel {
        &self.transition
    }

    pub fn initial_kernel(&self) -> &GaussianKernel {
        &self.initial
    }

    fn y(&self, t: usize) -> &[f64] {
        let d = self.params.d;
        &self.ys[t * d..(t + 1) * d]
    }
}

impl FeynmanKac for SvModel {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn horizon(&self) -> usize {
        self.ys.len() / self.params.d - 1
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
        self.obs.log_density(self.y(t), x)
    }

    fn rescaler(&self) -> &StateRescaler {
        &self.rescaler
    }

    fn name(&self) -> &str {
        "sv2d"
    }

    fn backward_kernel<'a>(&'a self, t: usize, prev: &'a [f64]) -> Box<dyn BackwardKernel + 'a> {
        let y = self.y(t);
        let obs = &self.obs;
        Box::new(WhitenedGaussianBackward::new(&self.transition, prev, move |x: &[f64]| obs.log_density(y, x)))
    }
}

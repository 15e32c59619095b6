//! Exact filtering and smoothing for the scalar linear-Gaussian model.

use super::gaussian::LN_2PI;
use super::LgParams;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanFilterOutput {
    /// `E[x_t | y_{0:t}]`.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// `E[x_t | y_{0:t-1}]` (prior at `t = 0`).
    pub predicted_means: Vec<f64>,
    pub predicted_variances: Vec<f64>,
    /// `log p(y_t | y_{0:t-1})`.
    pub log_likelihood_increments: Vec<f64>,
}

impl KalmanFilterOutput {
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood_increments.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanSmootherOutput {
    /// `E[x_t | y_{0:T}]`.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

pub fn kalman_filter(params: &LgParams, ys: &[f64]) -> Result<KalmanFilterOutput> {
    params.validate()?;
    let (rho, q, r) = (params.rho, params.sigma * params.sigma, params.tau * params.tau);
    let n = ys.len();
    let mut out = KalmanFilterOutput {
        means: Vec::with_capacity(n),
        variances: Vec::with_capacity(n),
        predicted_means: Vec::with_capacity(n),
        predicted_variances: Vec::with_capacity(n),
        log_likelihood_increments: Vec::with_capacity(n),
    };
    let sd0 = params.initial_sd()?;
    let (mut m, mut p) = (params.x0_mean, sd0 * sd0);
    for (t, &y) in ys.iter().enumerate() {
        if t > 0 {
            m *= rho;
            p = rho * rho * p + q;
        }
        out.predicted_means.push(m);
        out.predicted_variances.push(p);
        let s = p + r;
        let e = y - m;
        out.log_likelihood_increments.push(-0.5 * (LN_2PI + s.ln() + e * e / s));
        let k = p / s;
        m += k * e;
        p *= 1.0 - k;
        out.means.push(m);
        out.variances.push(p);
    }
    Ok(out)
}

/// Rauch-Tung-Striebel pass over [`kalman_filter`].
pub fn kalman_smoother(params: &LgParams, ys: &[f64]) -> Result<KalmanSmootherOutput> {
    let f = kalman_filter(params, ys)?;
    let n = ys.len();
    let mut means = f.means.clone();
    let mut variances = f.variances.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let g = f.variances[t] * params.rho / f.predicted_variances[t + 1];
        means[t] = f.means[t] + g * (means[t + 1] - f.predicted_means[t + 1]);
        variances[t] = f.variances[t] + g * g * (variances[t + 1] - f.predicted_variances[t + 1]);
    }
    Ok(KalmanSmootherOutput { means, variances })
}

use nalgebra::DMatrix;
use statrs::function::erf::{erfc, erfc_inv};

use crate::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Floor substituted for a zero uniform before the normal quantile.
pub const MIN_UNIFORM: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile, refined by one Halley step on the CDF.
#[inline]
pub fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Gaussian Markov kernel `x | prev ~ N(A prev + b, Σ)`.
///
/// The Rosenblatt transform of this kernel is triangular in the Cholesky
/// factor `L` of `Σ`: coordinate `i` is Gaussian given coordinates `< i`
/// with standard deviation `L_ii`, so `x = mean + L z` with
/// `z_i = Φ⁻¹(v_i)` is the inverse transform.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    d: usize,
    /// Row-major `d × d`; empty means the mean does not depend on `prev`.
    transition: Vec<f64>,
    offset: Vec<f64>,
    covariance: Vec<f64>,
    chol: Vec<f64>,
    chol_inv: Vec<f64>,
    log_norm: f64,
}

pub(crate) fn cholesky(d: usize, cov: &[f64]) -> Result<DMatrix<f64>> {
    let m = DMatrix::from_row_slice(d, d, cov);
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::NotPositiveDefinite(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite("non-finite entry".into()));
    }
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl GaussianKernel {
    /// `transition` is row-major `d × d` (or empty for a fixed mean).
    pub fn new(transition: Vec<f64>, offset: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        let d = offset.len();
        if d == 0 {
            return Err(Error::InvalidArgument("kernel dimension must be >= 1".into()));
        }
        if covariance.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: covariance.len() });
        }
        if !transition.is_empty() && transition.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: transition.len() });
        }
        let l = cholesky(d, &covariance)?;
        let l_inv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
        let log_det_half: f64 = (0..d).map(|i| l[(i, i)].ln()).sum();
        Ok(GaussianKernel {
            d,
            transition,
            offset,
            covariance,
            chol: row_major(&l),
            chol_inv: row_major(&l_inv),
            log_norm: -0.5 * d as f64 * LN_2PI - log_det_half,
        })
    }

    /// Kernel with a mean independent of the previous state.
    pub fn fixed(mean: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), mean, covariance)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// Lower Cholesky factor, row-major.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    pub fn mean(&self, prev: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.copy_from_slice(&self.offset);
        if !self.transition.is_empty() {
            for i in 0..d {
                let row = &self.transition[i * d..(i + 1) * d];
                out[i] += row.iter().zip(prev).map(|(a, p)| a * p).sum::<f64>();
            }
        }
    }

    /// Inverse Rosenblatt transform, writing into `out`.
    pub fn inverse_into(&self, prev: &[f64], v: &[f64], out: &mut [f64]) {
        let d = self.d;
        self.mean(prev, out);
        let mut z_stack = [0.0f64; 8];
        let mut z_heap;
        let z: &mut [f64] = if d <= 8 {
            &mut z_stack[..d]
        } else {
            z_heap = vec![0.0; d];
            &mut z_heap
        };
        for i in 0..d {
            z[i] = normal_quantile(v[i].max(MIN_UNIFORM));
            let row = &self.chol[i * d..i * d + i + 1];
            out[i] += row.iter().zip(z.iter()).map(|(l, zj)| l * zj).sum::<f64>();
        }
    }

    /// Whitened residual `L⁻¹ (x - mean(prev))`.
    pub fn whiten(&self, prev: &[f64], x: &[f64], out: &mut [f64]) {
        let d = self.d;
        let mut mean = vec![0.0; d];
        self.mean(prev, &mut mean);
        for i in 0..d {
            let row = &self.chol_inv[i * d..i * d + i + 1];
            out[i] = row.iter().zip(x.iter().zip(&mean)).map(|(l, (xj, mj))| l * (xj - mj)).sum();
        }
    }

    /// Rosenblatt transform, writing into `out`.
    pub fn forward_into(&self, prev: &[f64], x: &[f64], out: &mut [f64]) {
        self.whiten(prev, x, out);
        for v in out.iter_mut() {
            *v = normal_cdf(*v);
        }
    }

    pub fn log_density(&self, prev: &[f64], x: &[f64]) -> f64 {
        let mut w = vec![0.0; self.d];
        self.whiten(prev, x, &mut w);
        self.log_norm - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// `L⁻¹ y`, row-major lower-triangular solve by the stored inverse.
    pub fn apply_whitening(&self, y: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            let row = &self.chol_inv[i * d..i * d + i + 1];
            out[i] = row.iter().zip(y).map(|(l, v)| l * v).sum();
        }
    }

    #[inline]
    pub(crate) fn apply_whitening_scalar(&self, y: f64) -> f64 {
        self.chol_inv[0] * y
    }

    pub(crate) fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} contains non-finite values")))
    }
}

/// Maps `v ∈ [0,1)^d` to a draw of the kernel at `x_prev`.
pub fn gaussian_rosenblatt_inverse(k: &GaussianKernel, x_prev: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), actual: v.len() });
    }
    check_finite("x_prev", x_prev)?;
    check_finite("v", v)?;
    if v.iter().any(|u| !(0.0..1.0).contains(u)) {
        return Err(Error::Numeric("uniform input outside [0, 1)".into()));
    }
    let mut out = vec![0.0; k.dim()];
    k.inverse_into(x_prev, v, &mut out);
    Ok(out)
}

/// Maps a state to its Rosenblatt coordinates in `[0,1)^d`.
pub fn gaussian_rosenblatt_forward(k: &GaussianKernel, x_prev: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), actual: x.len() });
    }
    check_finite("x_prev", x_prev)?;
    check_finite("x", x)?;
    let mut out = vec![0.0; k.dim()];
    k.forward_into(x_prev, x, &mut out);
    Ok(out)
}

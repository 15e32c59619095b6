//! Feynman-Kac models: a Markov chain `m_0, m_t` reweighted by potentials
//! `G_t`, with inverse Rosenblatt transforms for the mutation step.

mod config;
mod gaussian;
mod kalman;
mod lg;
mod rescale;
mod sv;

pub use config::{ModelConfig, ModelKind, RescaleOverride, SimulatedData};
pub use gaussian::{
    gaussian_rosenblatt_forward, gaussian_rosenblatt_inverse, normal_cdf, normal_quantile, GaussianKernel,
    MIN_UNIFORM,
};
pub use kalman::{kalman_filter, kalman_smoother, KalmanFilterOutput, KalmanSmootherOutput};
pub use lg::{make_lg_model, LgModel, LgParams};
pub use rescale::{StateRescaler, RESCALE_CLAMP};
pub use sv::{make_sv_model, SvModel, SvParams};

/// Interface consumed by the filters and smoothers.
///
/// States are flat `&[f64]` slices of length [`dim`](Self::dim). Densities
/// and potentials are exposed in log space; the linear versions are
/// provided for convenience.
pub trait FeynmanKac: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Final time index `T` (observations cover `0..=T`).
    fn horizon(&self) -> usize;

    /// `F_{m_0}^{-1}(u)`.
    fn initial_inverse(&self, u: &[f64], out: &mut [f64]);

    /// `F_{m_t}^{-1}(x_prev, v)`; coordinatewise nondecreasing in `v`.
    fn mutate_inverse(&self, t: usize, x_prev: &[f64], v: &[f64], out: &mut [f64]);

    /// `log m_t(x_prev, x)`.
    fn log_transition_density(&self, t: usize, x_prev: &[f64], x: &[f64]) -> f64;

    /// `log G_t(x_prev, x)`; `x_prev` is `None` at `t = 0`.
    fn log_potential(&self, t: usize, x_prev: Option<&[f64]>, x: &[f64]) -> f64;

    /// Logistic map into the unit cube used before Hilbert sorting.
    fn rescaler(&self) -> &StateRescaler;

    /// Identifier written to benchmark records.
    fn name(&self) -> &str {
        "custom"
    }

    fn transition_density(&self, t: usize, x_prev: &[f64], x: &[f64]) -> f64 {
        self.log_transition_density(t, x_prev, x).exp()
    }

    fn potential(&self, t: usize, x_prev: Option<&[f64]>, x: &[f64]) -> f64 {
        self.log_potential(t, x_prev, x).exp()
    }

    /// Backward kernel `p ↦ log m_t(x^p, x) + log G_t(x^p, x)` over a fixed
    /// particle set `prev` (row-major). Models may precompute per-particle
    /// terms here; the default evaluates pointwise.
    fn backward_kernel<'a>(&'a self, t: usize, prev: &'a [f64]) -> Box<dyn BackwardKernel + 'a> {
        Box::new(PointwiseBackward { model: self, t, prev })
    }
}

/// Log backward weights for one time step, before adding `log W_{t-1}`.
pub trait BackwardKernel: Send + Sync {
    /// Writes `log m_t(prev_p, next) + log G_t(prev_p, next)` for every `p`.
    fn log_weights(&self, next: &[f64], out: &mut [f64]);
}

struct PointwiseBackward<'a, M: ?Sized> {
    model: &'a M,
    t: usize,
    prev: &'a [f64],
}

impl<M: FeynmanKac + ?Sized> BackwardKernel for PointwiseBackward<'_, M> {
    fn log_weights(&self, next: &[f64], out: &mut [f64]) {
        let d = self.model.dim();
        for (p, o) in out.iter_mut().enumerate() {
            let xp = &self.prev[p * d..(p + 1) * d];
            *o = self.model.log_transition_density(self.t, xp, next)
                + self.model.log_potential(self.t, Some(xp), next);
        }
    }
}

/// Backward kernel of a Gaussian transition with a potential depending on
/// the new state only: the predicted means are whitened once per step.
pub(crate) struct WhitenedGaussianBackward<'a, F> {
    kernel: &'a GaussianKernel,
    whitened_means: Vec<f64>,
    log_potential: F,
}

impl<'a, F> WhitenedGaussianBackward<'a, F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub(crate) fn new(kernel: &'a GaussianKernel, prev: &[f64], log_potential: F) -> Self {
        let d = kernel.dim();
        let n = prev.len() / d;
        let mut whitened_means = vec![0.0; n * d];
        let mut mean = vec![0.0; d];
        for p in 0..n {
            kernel.mean(&prev[p * d..(p + 1) * d], &mut mean);
            kernel.apply_whitening(&mean, &mut whitened_means[p * d..(p + 1) * d]);
        }
        WhitenedGaussianBackward { kernel, whitened_means, log_potential }
    }
}

impl<F> BackwardKernel for WhitenedGaussianBackward<'_, F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn log_weights(&self, next: &[f64], out: &mut [f64]) {
        let d = self.kernel.dim();
        let constant = self.kernel.log_norm() + (self.log_potential)(next);
        match d {
            1 => {
                let b = self.kernel.apply_whitening_scalar(next[0]);
                for (o, a) in out.iter_mut().zip(&self.whitened_means) {
                    let r = b - a;
                    *o = constant - 0.5 * r * r;
                }
            }
            2 => {
                let mut b = [0.0; 2];
                self.kernel.apply_whitening(next, &mut b);
                for (o, a) in out.iter_mut().zip(self.whitened_means.chunks_exact(2)) {
                    let (r0, r1) = (b[0] - a[0], b[1] - a[1]);
                    *o = constant - 0.5 * (r0 * r0 + r1 * r1);
                }
            }
            _ => {
                let mut b = vec![0.0; d];
                self.kernel.apply_whitening(next, &mut b);
                for (o, a) in out.iter_mut().zip(self.whitened_means.chunks_exact(d)) {
                    let q: f64 = b.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
                    *o = constant - 0.5 * q;
                }
            }
        }
    }
}

/// A built-in model selected at run time.
#[derive(Debug, Clone)]
pub enum Model {
    Sv(SvModel),
    Lg(LgModel),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Sv($m) => $e,
            Model::Lg($m) => $e,
        }
    };
}

impl FeynmanKac for Model {
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }
    fn horizon(&self) -> usize {
        dispatch!(self, m => m.horizon())
    }
    fn initial_inverse(&self, u: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.initial_inverse(u, out))
    }
    fn mutate_inverse(&self, t: usize, x_prev: &[f64], v: &[f64], out: &mut [f64]) {
        dispatch!(self, m => m.mutate_inverse(t, x_prev, v, out))
    }
    fn log_transition_density(&self, t: usize, x_prev: &[f64], x: &[f64]) -> f64 {
        dispatch!(self, m => m.log_transition_density(t, x_prev, x))
    }
    fn log_potential(&self, t: usize, x_prev: Option<&[f64]>, x: &[f64]) -> f64 {
        dispatch!(self, m => m.log_potential(t, x_prev, x))
    }
    fn rescaler(&self) -> &StateRescaler {
        dispatch!(self, m => m.rescaler())
    }
    fn name(&self) -> &str {
        dispatch!(self, m => m.name())
    }
    fn backward_kernel<'a>(&'a self, t: usize, prev: &'a [f64]) -> Box<dyn BackwardKernel + 'a> {
        dispatch!(self, m => m.backward_kernel(t, prev))
    }
}

//! Test-only Feynman-Kac models with closed-form behaviour.

use sqmc::fkmodel::{FeynmanKac, StateRescaler};

/// Uniform states on `[0,1)` that never move (`x_t = v`, density one) with
/// potential `G_t(x) = exp(offset - tilt_t * x)` depending on the new state only.
pub struct FlatModel {
    pub horizon: usize,
    pub tilt: Vec<f64>,
    pub offset: f64,
    pub rescaler: StateRescaler,
}

impl FlatModel {
    pub fn new(horizon: usize, tilt: Vec<f64>) -> Self {
        FlatModel { horizon, tilt, offset: 0.0, rescaler: StateRescaler::new(vec![0.5], vec![0.2]).unwrap() }
    }

    pub fn constant_potential(horizon: usize) -> Self {
        Self::new(horizon, vec![0.0; horizon + 1])
    }
}

impl FeynmanKac for FlatModel {
    fn dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial_inverse(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[0];
    }
    fn mutate_inverse(&self, _t: usize, _x_prev: &[f64], v: &[f64], out: &mut [f64]) {
        out[0] = v[0];
    }
    fn log_transition_density(&self, _t: usize, _x_prev: &[f64], _x: &[f64]) -> f64 {
        0.0
    }
    fn log_potential(&self, t: usize, _x_prev: Option<&[f64]>, x: &[f64]) -> f64 {
        self.offset - self.tilt[t] * x[0]
    }
    fn rescaler(&self) -> &StateRescaler {
        &self.rescaler
    }
}

/// Standard normal initial state copied forward unchanged, constant potential.
pub struct FrozenModel {
    pub horizon: usize,
    pub rescaler: StateRescaler,
}

impl FeynmanKac for FrozenModel {
    fn dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial_inverse(&self, u: &[f64], out: &mut [f64]) {
        out[0] = sqmc::fkmodel::normal_quantile(u[0].max(sqmc::fkmodel::MIN_UNIFORM));
    }
    fn mutate_inverse(&self, _t: usize, x_prev: &[f64], _v: &[f64], out: &mut [f64]) {
        out[0] = x_prev[0];
    }
    fn log_transition_density(&self, _t: usize, _x_prev: &[f64], _x: &[f64]) -> f64 {
        0.0
    }
    fn log_potential(&self, _t: usize, _x_prev: Option<&[f64]>, _x: &[f64]) -> f64 {
        0.0
    }
    fn rescaler(&self) -> &StateRescaler {
        &self.rescaler
    }
}

/// Any model with its potential replaced by `G ≡ 1`.
pub struct Unweighted<M>(pub M);

impl<M: FeynmanKac> FeynmanKac for Unweighted<M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn horizon(&self) -> usize {
        self.0.horizon()
    }
    fn initial_inverse(&self, u: &[f64], out: &mut [f64]) {
        self.0.initial_inverse(u, out)
    }
    fn mutate_inverse(&self, t: usize, x_prev: &[f64], v: &[f64], out: &mut [f64]) {
        self.0.mutate_inverse(t, x_prev, v, out)
    }
    fn log_transition_density(&self, t: usize, x_prev: &[f64], x: &[f64]) -> f64 {
        self.0.log_transition_density(t, x_prev, x)
    }
    fn log_potential(&self, _t: usize, _x_prev: Option<&[f64]>, _x: &[f64]) -> f64 {
        0.0
    }
    fn rescaler(&self) -> &StateRescaler {
        self.0.rescaler()
    }
}

/// [`FlatModel`] whose transition density vanishes everywhere, so every
/// backward kernel is degenerate.
pub struct DisjointModel(pub FlatModel);

impl FeynmanKac for DisjointModel {
    fn dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> usize {
        self.0.horizon
    }
    fn initial_inverse(&self, u: &[f64], out: &mut [f64]) {
        self.0.initial_inverse(u, out)
    }
    fn mutate_inverse(&self, t: usize, x_prev: &[f64], v: &[f64], out: &mut [f64]) {
        self.0.mutate_inverse(t, x_prev, v, out)
    }
    fn log_transition_density(&self, _t: usize, _x_prev: &[f64], _x: &[f64]) -> f64 {
        f64::NEG_INFINITY
    }
    fn log_potential(&self, t: usize, x_prev: Option<&[f64]>, x: &[f64]) -> f64 {
        self.0.log_potential(t, x_prev, x)
    }
    fn rescaler(&self) -> &StateRescaler {
        &self.0.rescaler
    }
}

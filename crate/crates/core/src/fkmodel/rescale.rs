use crate::{Error, Result};

/// Clamp applied to rescaled coordinates before Hilbert indexing.
pub const RESCALE_CLAMP: f64 = 1e-12;

/// Componentwise logistic map `y_i = 1 / (1 + exp(-(x_i - loc_i) / scale_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRescaler {
    loc: Vec<f64>,
    scale: Vec<f64>,
}

impl StateRescaler {
    pub fn new(loc: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if loc.is_empty() || loc.len() != scale.len() {
            return Err(Error::DimensionMismatch { expected: loc.len(), actual: scale.len() });
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) || loc.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument("rescaler needs finite locations and positive scales".into()));
        }
        Ok(StateRescaler { loc, scale })
    }

    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    pub fn loc(&self) -> &[f64] {
        &self.loc
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Logistic image of `x`, clamped to `[ε, 1 - ε]`.
    ///
    /// `x` may hold several consecutive states (a trajectory); coordinates
    /// cycle through the per-axis parameters.
    pub fn rescale_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.loc.len();
        for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
            let z = (v - self.loc[i % d]) / self.scale[i % d];
            *o = (1.0 / (1.0 + (-z).exp())).clamp(RESCALE_CLAMP, 1.0 - RESCALE_CLAMP);
        }
    }

    pub fn rescale(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.rescale_into(x, &mut out);
        out
    }

    pub fn unrescale(&self, y: &[f64]) -> Vec<f64> {
        let d = self.loc.len();
        y.iter()
            .enumerate()
            .map(|(i, &v)| self.loc[i % d] + self.scale[i % d] * (v / (1.0 - v)).ln())
            .collect()
    }
}

//! JSON model configuration and simulated-data output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_lg_model, make_sv_model, LgParams, Model, StateRescaler, SvParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "sv2d")]
    Sv2d,
    #[serde(rename = "lg1d")]
    Lg1d,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sv2d => "sv2d",
            ModelKind::Lg1d => "lg1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleOverride {
    pub loc: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Observations {
    Scalar(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

/// Model configuration: `{model, params, T, data_seed | y, rescale}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<Observations>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale: Option<RescaleOverride>,
}

/// Observations (and, when simulated, latent states), row-major with `d`
/// columns and `T + 1` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub d: usize,
    pub ys: Vec<f64>,
    pub xs: Option<Vec<f64>>,
}

impl SimulatedData {
    pub fn len(&self) -> usize {
        self.ys.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// CSV with header `t,y_1..y_d[,x_1..x_d]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.d).map(|i| format!("y_{i}")));
        if self.xs.is_some() {
            header.extend((1..=self.d).map(|i| format!("x_{i}")));
        }
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.ys[t * self.d..(t + 1) * self.d].iter().map(|v| v.to_string()));
            if let Some(xs) = &self.xs {
                rec.extend(xs[t * self.d..(t + 1) * self.d].iter().map(|v| v.to_string()));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Configuration with simulated data.
    pub fn simulated(model: ModelKind, horizon: usize, data_seed: u64) -> Self {
        ModelConfig { model, params: serde_json::Value::Null, horizon, data_seed: Some(data_seed), y: None, rescale: None }
    }

    pub fn with_observations(model: ModelKind, params: serde_json::Value, rows: Vec<Vec<f64>>) -> Self {
        let horizon = rows.len().saturating_sub(1);
        ModelConfig { model, params, horizon, data_seed: None, y: Some(Observations::Rows(rows)), rescale: None }
    }

    fn validate(&self) -> Result<()> {
        match (&self.data_seed, &self.y) {
            (Some(_), Some(_)) => Err(Error::Config("give either data_seed or y, not both".into())),
            (None, None) => Err(Error::Config("one of data_seed or y is required".into())),
            _ => Ok(()),
        }
    }

    fn params_value(&self) -> serde_json::Value {
        if self.params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            self.params.clone()
        }
    }

    pub fn sv_params(&self) -> Result<SvParams> {
        serde_json::from_value(self.params_value()).map_err(|e| Error::Config(format!("SV params: {e}")))
    }

    pub fn lg_params(&self) -> Result<LgParams> {
        serde_json::from_value(self.params_value()).map_err(|e| Error::Config(format!("LG params: {e}")))
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match self.model {
            ModelKind::Sv2d => self.sv_params()?.d,
            ModelKind::Lg1d => 1,
        })
    }

    /// Observations from `y` or by simulating with `data_seed`.
    pub fn data(&self) -> Result<SimulatedData> {
        self.validate()?;
        let d = self.dim()?;
        if let Some(seed) = self.data_seed {
            let (xs, ys) = match self.model {
                ModelKind::Sv2d => self.sv_params()?.simulate(self.horizon, seed)?,
                ModelKind::Lg1d => self.lg_params()?.simulate(self.horizon, seed)?,
            };
            return Ok(SimulatedData { d, ys, xs: Some(xs) });
        }
        let ys = match self.y.as_ref().expect("validated") {
            Observations::Scalar(v) if d == 1 => v.clone(),
            Observations::Scalar(_) => return Err(Error::Config(format!("y must be a list of {d}-vectors"))),
            Observations::Rows(rows) => {
                if let Some(r) = rows.iter().find(|r| r.len() != d) {
                    return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
                }
                rows.concat()
            }
        };
        if ys.len() != (self.horizon + 1) * d {
            return Err(Error::Config(format!(
                "T = {} needs {} observations, got {}",
                self.horizon,
                self.horizon + 1,
                ys.len() / d
            )));
        }
        Ok(SimulatedData { d, ys, xs: None })
    }

    pub fn rescaler(&self) -> Result<Option<StateRescaler>> {
        self.rescale.as_ref().map(|r| StateRescaler::new(r.loc.clone(), r.scale.clone())).transpose()
    }

    pub fn build(&self) -> Result<(Model, SimulatedData)> {
        let data = self.data()?;
        let rescaler = self.rescaler()?;
        let model = match self.model {
            ModelKind::Sv2d => Model::Sv(make_sv_model(self.sv_params()?, data.ys.clone(), rescaler)?),
            ModelKind::Lg1d => Model::Lg(make_lg_model(self.lg_params()?, data.ys.clone(), rescaler)?),
        };
        Ok((model, data))
    }
}

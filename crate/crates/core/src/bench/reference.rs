//! Reference smoothing expectations used as the truth in MSE computations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::filter::run_sqmc;
use crate::fkmodel::{kalman_smoother, FeynmanKac, Model, ModelConfig, ModelKind};
use crate::smooth::{marginal_backward_weights, marginal_estimate, TestFunction};
use crate::{Error, Result};

/// How the reference is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ReferenceSpec {
    /// Exact Kalman smoother (linear-Gaussian models only).
    Kalman,
    /// A previously stored reference file.
    Stored { path: PathBuf },
    /// A high-`N` SQMC marginal-smoothing run, optionally written to `save`.
    Computed { n: usize, seed: u64, save: Option<PathBuf> },
}

/// Default particle count of the computed reference.
pub const DEFAULT_REFERENCE_N: usize = 1 << 15;

/// Reference values `values[k][t]` for test functions `phis[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub provenance: String,
    pub model: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub phis: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Reference {
    pub fn values_for(&self, phi: &str) -> Result<&[f64]> {
        self.phis
            .iter()
            .position(|p| p == phi)
            .map(|k| self.values[k].as_slice())
            .ok_or_else(|| Error::SchemaMismatch(format!("reference lacks test function {phi}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Loads a stored reference and checks its length against `horizon`.
    pub fn load(path: &Path, horizon: usize) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingReference(path.to_path_buf()));
        }
        let r: Reference = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        r.check(horizon)?;
        Ok(r)
    }

    fn check(&self, horizon: usize) -> Result<()> {
        if self.horizon != horizon || self.values.iter().any(|v| v.len() != horizon + 1) {
            return Err(Error::SchemaMismatch(format!("reference does not cover t = 0..={horizon}")));
        }
        if self.values.len() != self.phis.len() {
            return Err(Error::SchemaMismatch("reference values and test functions differ in count".into()));
        }
        Ok(())
    }
}

/// Builds the reference for `phis` on `model`.
pub fn make_reference(cfg: &ModelConfig, model: &Model, phis: &[TestFunction], spec: &ReferenceSpec) -> Result<Reference> {
    let horizon = model.horizon();
    let ids: Vec<String> = phis.iter().map(|p| p.id()).collect();
    let reference = match spec {
        ReferenceSpec::Kalman => {
            if cfg.model != ModelKind::Lg1d {
                return Err(Error::Config("the Kalman reference needs the lg1d model".into()));
            }
            let Model::Lg(lg) = model else {
                return Err(Error::Config("the Kalman reference needs the lg1d model".into()));
            };
            let s = kalman_smoother(lg.params(), lg.observations())?;
            let values = phis
                .iter()
                .map(|p| match p {
                    TestFunction::Coordinate(0) => Ok(s.means.clone()),
                    TestFunction::SecondMoment(0) => {
                        Ok(s.means.iter().zip(&s.variances).map(|(m, v)| v + m * m).collect())
                    }
                    other => Err(Error::Config(format!("no exact reference for {}", other.id()))),
                })
                .collect::<Result<Vec<_>>>()?;
            Reference { provenance: "kalman-smoother".into(), model: cfg.model.name().into(), horizon, phis: ids, values }
        }
        ReferenceSpec::Stored { path } => {
            let r = Reference::load(path, horizon)?;
            if r.model != cfg.model.name() {
                return Err(Error::SchemaMismatch(format!("reference is for model {}", r.model)));
            }
            r
        }
        ReferenceSpec::Computed { n, seed, save } => {
            let hist = run_sqmc(model, *n, *seed)?;
            let sw = marginal_backward_weights(model, &hist)?;
            let values = phis.iter().map(|p| marginal_estimate(&hist, &sw, p)).collect();
            let r = Reference {
                provenance: format!("sqmc-marginal N={n} seed={seed}"),
                model: cfg.model.name().into(),
                horizon,
                phis: ids,
                values,
            };
            if let Some(path) = save {
                r.save(path)?;
            }
            r
        }
    };
    reference.check(horizon)?;
    Ok(reference)
}

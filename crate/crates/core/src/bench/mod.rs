//! Replication harness: repeated smoothing runs, MSE against a reference
//! and SMC-versus-SQMC gain factors, with CSV and JSON output.

mod gain;
mod io;
mod reference;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use gain::{
    compute_gain, mse_decomposition, GainRow, GainTable, MseDecomposition, BOOTSTRAP_LEVEL, BOOTSTRAP_RESAMPLES,
    MAJORITY_FRACTION,
};
pub use io::{read_records, write_gains, write_records, write_timings};
pub use reference::{make_reference, Reference, ReferenceSpec, DEFAULT_REFERENCE_N};

use crate::exec::try_map_indexed;
use crate::filter::Algorithm;
use crate::fkmodel::{FeynmanKac, ModelConfig, ModelKind};
use crate::smooth::{smooth, SmoothingMethod, TestFunction};
use crate::{derive_seed, Error, Result};

/// One smoothing run: per-`t` estimates of each recorded test function.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub method: SmoothingMethod,
    pub model: String,
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    pub phis: Vec<String>,
    /// `estimates[k][t]` for `phis[k]`.
    pub estimates: Vec<Vec<f64>>,
    pub seconds: f64,
}

/// Runs `reps` replications with seeds `base_seed..base_seed + reps`.
///
/// The first failing replication (lowest seed) aborts the batch.
pub fn run_replications<M: FeynmanKac + ?Sized>(
    model: &M,
    algorithm: Algorithm,
    method: SmoothingMethod,
    n: usize,
    phis: &[TestFunction],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<RunRecord>> {
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replications, got {reps}")));
    }
    try_map_indexed(reps, |r| {
        let seed = base_seed + r as u64;
        let start = Instant::now();
        let out = smooth(model, algorithm, method, n, seed, phis)
            .map_err(|e| Error::Replication { seed, source: Box::new(e) })?;
        Ok(RunRecord {
            algorithm,
            method,
            model: model.name().to_string(),
            n,
            horizon: model.horizon(),
            seed,
            phis: phis.iter().map(|p| p.id()).collect(),
            estimates: out.estimates,
            seconds: start.elapsed().as_secs_f64(),
        })
    })
}

/// Pairs of (Monte Carlo, quasi-Monte Carlo) runs whose MSE ratio is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// SMC vs SQMC, marginal backward smoothing.
    Marginal,
    /// SMC with IID backward sampling vs SQMC with QMC backward sampling.
    Backward,
    /// SMC vs SQMC, forward smoothing.
    Forward,
    /// SQMC forward pass; IID (hybrid) vs QMC backward sampling.
    Hybrid,
}

impl Comparison {
    pub const ALL: [Comparison; 4] = [Comparison::Marginal, Comparison::Backward, Comparison::Forward, Comparison::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Comparison::Marginal => "marginal",
            Comparison::Backward => "backward",
            Comparison::Forward => "forward",
            Comparison::Hybrid => "hybrid",
        }
    }

    /// `(numerator, denominator)` run kinds of the gain.
    pub fn runs(self) -> [(Algorithm, SmoothingMethod); 2] {
        use Algorithm::*;
        use SmoothingMethod::*;
        match self {
            Comparison::Marginal => [(Smc, Marginal), (Sqmc, Marginal)],
            Comparison::Backward => [(Smc, BackwardIid), (Sqmc, BackwardQmc)],
            Comparison::Forward => [(Smc, Forward), (Sqmc, Forward)],
            Comparison::Hybrid => [(Sqmc, BackwardIid), (Sqmc, BackwardQmc)],
        }
    }
}

/// Full benchmark description; serialised into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub model: ModelConfig,
    pub methods: Vec<SmoothingMethod>,
    pub algorithms: Vec<Algorithm>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    pub phis: Vec<String>,
    pub reference: ReferenceSpec,
}

impl BenchConfig {
    /// Desk-scale profile: `T = 399`, `R = 100`, `N ∈ {2^8, 2^10}`.
    pub fn full(model: ModelKind, reference: ReferenceSpec) -> Self {
        Self::profile(model, 399, 100, vec![1 << 8, 1 << 10], reference)
    }

    /// Fast profile: `T = 99`, `R = 20`, `N = 2^8`.
    pub fn quick(model: ModelKind, reference: ReferenceSpec) -> Self {
        Self::profile(model, 99, 20, vec![1 << 8], reference)
    }

    fn profile(model: ModelKind, horizon: usize, reps: usize, ns: Vec<usize>, reference: ReferenceSpec) -> Self {
        BenchConfig {
            model: ModelConfig::simulated(model, horizon, 1),
            methods: vec![SmoothingMethod::Marginal, SmoothingMethod::BackwardQmc, SmoothingMethod::BackwardIid],
            algorithms: vec![Algorithm::Smc, Algorithm::Sqmc],
            ns,
            reps,
            base_seed: 1,
            phis: vec!["x1".into()],
            reference,
        }
    }
}

/// Everything a benchmark produced.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub gains: Vec<GainTable>,
    pub reference: Reference,
}

impl BenchReport {
    pub fn gain(&self, comparison: Comparison, n: usize, phi: &str) -> Option<&GainTable> {
        self.gains.iter().find(|g| g.comparison == comparison.name() && g.n == n && g.phi == phi)
    }
}

/// Version string embedded in manifests.
pub fn build_description() -> &'static str {
    option_env!("SQMC_GIT_DESCRIBE").unwrap_or("unknown")
}

/// Runs every requested (algorithm, method, N) combination and computes the
/// gain tables for all comparisons whose two run kinds are present.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let (model, _) = cfg.model.build()?;
    let phis = cfg.phis.iter().map(|p| TestFunction::parse(p, model.dim())).collect::<Result<Vec<_>>>()?;
    let reference = make_reference(&cfg.model, &model, &phis, &cfg.reference)?;
    let mut records = Vec::new();
    for &n in &cfg.ns {
        for &algorithm in &cfg.algorithms {
            for &method in &cfg.methods {
                records.extend(run_replications(&model, algorithm, method, n, &phis, cfg.reps, cfg.base_seed)?);
            }
        }
    }
    let mut gains = Vec::new();
    for &n in &cfg.ns {
        for comparison in Comparison::ALL {
            let [num, den] = comparison.runs();
            let select = |(a, m): (Algorithm, SmoothingMethod)| -> Vec<RunRecord> {
                records.iter().filter(|r| r.n == n && r.algorithm == a && r.method == m).cloned().collect()
            };
            let (mc, qmc) = (select(num), select(den));
            if mc.is_empty() || qmc.is_empty() {
                continue;
            }
            for phi in &cfg.phis {
                let tag = derive_seed(cfg.base_seed, n as u64) ^ comparison as u64;
                gains.push(compute_gain(
                    comparison.name(),
                    &mc,
                    &qmc,
                    reference.values_for(phi)?,
                    &reference.provenance,
                    phi,
                    tag,
                )?);
            }
        }
    }
    Ok(BenchReport { records, gains, reference })
}

#[derive(Serialize)]
struct GainSummary<'a> {
    comparison: &'a str,
    n: usize,
    phi: &'a str,
    fraction_above_one: f64,
    fraction_lo: f64,
    fraction_hi: f64,
    majority_supported: bool,
}

/// Writes `records.csv`, `timings.csv`, `gains.csv` and `manifest.json`.
///
/// Wall-clock times only appear in `timings.csv`, so the other files are
/// byte-identical across runs with the same configuration.
pub fn write_outputs(cfg: &BenchConfig, report: &BenchReport, outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    write_records(std::fs::File::create(outdir.join("records.csv"))?, &report.records)?;
    write_timings(std::fs::File::create(outdir.join("timings.csv"))?, &report.records)?;
    write_gains(std::fs::File::create(outdir.join("gains.csv"))?, &report.gains)?;
    let summaries: Vec<GainSummary> = report
        .gains
        .iter()
        .map(|g| GainSummary {
            comparison: &g.comparison,
            n: g.n,
            phi: &g.phi,
            fraction_above_one: g.fraction_above_one,
            fraction_lo: g.fraction_lo,
            fraction_hi: g.fraction_hi,
            majority_supported: g.majority_supported(),
        })
        .collect();
    let seeds: Vec<u64> = (0..cfg.reps as u64).map(|r| cfg.base_seed + r).collect();
    let manifest = serde_json::json!({
        "config": cfg,
        "seeds": seeds,
        "reference": report.reference.provenance,
        "build": build_description(),
        "version": env!("CARGO_PKG_VERSION"),
        "parallel": cfg!(feature = "parallel"),
        "bootstrap_resamples": BOOTSTRAP_RESAMPLES,
        "gains": summaries,
    });
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(outdir.join("manifest.json"), text)?;
    Ok(())
}

//! Gain factors `MSE_mc / MSE_qmc` with bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::RunRecord;
use crate::{Error, Result};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Coverage of the bootstrap interval reported per time step.
pub const BOOTSTRAP_LEVEL: f64 = 0.90;
/// Fraction of time steps with gain above one needed for a majority claim.
pub const MAJORITY_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseDecomposition {
    pub mse: f64,
    pub variance: f64,
    pub squared_bias: f64,
}

/// Per-`t` MSE of `estimates[r][t]` against `reference[t]`, with its
/// variance-plus-squared-bias decomposition.
pub fn mse_decomposition(estimates: &[&[f64]], reference: &[f64]) -> Vec<MseDecomposition> {
    let r = estimates.len() as f64;
    (0..reference.len())
        .map(|t| {
            let mean = estimates.iter().map(|e| e[t]).sum::<f64>() / r;
            let mse = estimates.iter().map(|e| (e[t] - reference[t]).powi(2)).sum::<f64>() / r;
            let variance = estimates.iter().map(|e| (e[t] - mean).powi(2)).sum::<f64>() / r;
            MseDecomposition { mse, variance, squared_bias: (mean - reference[t]).powi(2) }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRow {
    pub t: usize,
    pub mse_mc: f64,
    pub mse_qmc: f64,
    pub gain: f64,
    pub gain_lo: f64,
    pub gain_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainTable {
    pub comparison: String,
    pub n: usize,
    pub phi: String,
    pub reps: usize,
    pub reference: String,
    pub rows: Vec<GainRow>,
    /// Fraction of time steps with gain above one.
    pub fraction_above_one: f64,
    /// Bootstrap 5% and 95% quantiles of that fraction.
    pub fraction_lo: f64,
    pub fraction_hi: f64,
}

impl GainTable {
    pub fn gains(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gain).collect()
    }

    /// Gain above one at a majority (≥ 60%) of time steps, with the lower
    /// bootstrap quantile of that fraction above one half.
    pub fn majority_supported(&self) -> bool {
        self.fraction_above_one >= MAJORITY_FRACTION && self.fraction_lo > 0.5
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn check_schema(mc: &[RunRecord], qmc: &[RunRecord], phi: &str) -> Result<(usize, usize, usize)> {
    if mc.len() != qmc.len() {
        return Err(Error::SchemaMismatch(format!("{} vs {} replications", mc.len(), qmc.len())));
    }
    if mc.len() < 2 {
        return Err(Error::SchemaMismatch("need at least 2 replications".into()));
    }
    let first = &mc[0];
    let k = first
        .phis
        .iter()
        .position(|p| p == phi)
        .ok_or_else(|| Error::SchemaMismatch(format!("test function {phi} not recorded")))?;
    for r in mc.iter().chain(qmc) {
        if r.horizon != first.horizon {
            return Err(Error::SchemaMismatch(format!("T = {} vs T = {}", r.horizon, first.horizon)));
        }
        if r.phis != first.phis || r.estimates.iter().any(|e| e.len() != r.horizon + 1) {
            return Err(Error::SchemaMismatch(format!("record with seed {} has a different layout", r.seed)));
        }
        if r.n != first.n {
            return Err(Error::SchemaMismatch(format!("N = {} vs N = {}", r.n, first.n)));
        }
    }
    Ok((k, first.horizon, first.n))
}

/// Gain table for test function `phi` against `reference`.
///
/// Replications are sorted by seed and resampled in pairs
/// (`BOOTSTRAP_RESAMPLES` draws keyed by `bootstrap_seed`).
pub fn compute_gain(
    comparison: &str,
    mc: &[RunRecord],
    qmc: &[RunRecord],
    reference: &[f64],
    reference_label: &str,
    phi: &str,
    bootstrap_seed: u64,
) -> Result<GainTable> {
    let (k, horizon, n) = check_schema(mc, qmc, phi)?;
    if reference.len() != horizon + 1 {
        return Err(Error::SchemaMismatch(format!("reference has {} values, need {}", reference.len(), horizon + 1)));
    }
    let sorted = |rs: &[RunRecord]| {
        let mut v: Vec<&RunRecord> = rs.iter().collect();
        v.sort_by_key(|r| r.seed);
        v.into_iter().map(|r| r.estimates[k].clone()).collect::<Vec<_>>()
    };
    let (emc, eqmc) = (sorted(mc), sorted(qmc));
    let reps = emc.len();
    fn views(e: &[Vec<f64>]) -> Vec<&[f64]> {
        e.iter().map(|v| v.as_slice()).collect()
    }
    let mse_mc = mse_decomposition(&views(&emc), reference);
    let mse_qmc = mse_decomposition(&views(&eqmc), reference);
    if let Some(t) = mse_qmc.iter().position(|m| m.mse == 0.0) {
        return Err(Error::DegenerateGain { t });
    }
    let gains: Vec<f64> = mse_mc.iter().zip(&mse_qmc).map(|(a, b)| a.mse / b.mse).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
    let mut boot_gains = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); horizon + 1];
    let mut boot_fraction = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut idx = vec![0usize; reps];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        idx.iter_mut().for_each(|i| *i = rng.random_range(0..reps));
        let mut above = 0;
        for (t, bg) in boot_gains.iter_mut().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for &i in &idx {
                a += (emc[i][t] - reference[t]).powi(2);
                b += (eqmc[i][t] - reference[t]).powi(2);
            }
            let g = if b == 0.0 { f64::INFINITY } else { a / b };
            above += usize::from(g > 1.0);
            bg.push(g);
        }
        boot_fraction.push(above as f64 / (horizon + 1) as f64);
    }
    let tail = 0.5 * (1.0 - BOOTSTRAP_LEVEL);
    let rows = boot_gains
        .into_iter()
        .enumerate()
        .map(|(t, mut bg)| {
            bg.sort_by(f64::total_cmp);
            GainRow {
                t,
                mse_mc: mse_mc[t].mse,
                mse_qmc: mse_qmc[t].mse,
                gain: gains[t],
                gain_lo: quantile(&bg, tail),
                gain_hi: quantile(&bg, 1.0 - tail),
            }
        })
        .collect();
    boot_fraction.sort_by(f64::total_cmp);
    Ok(GainTable {
        comparison: comparison.to_string(),
        n,
        phi: phi.to_string(),
        reps,
        reference: reference_label.to_string(),
        rows,
        fraction_above_one: gains.iter().filter(|g| **g > 1.0).count() as f64 / (horizon + 1) as f64,
        fraction_lo: quantile(&boot_fraction, tail),
        fraction_hi: quantile(&boot_fraction, 1.0 - tail),
    })
}

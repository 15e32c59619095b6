//! CSV layouts of the benchmark outputs.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{GainTable, RunRecord};
use crate::filter::Algorithm;
use crate::smooth::SmoothingMethod;
use crate::{Error, Result};

const RECORD_HEADER: [&str; 9] = ["algo", "method", "model", "n", "T", "seed", "phi", "t", "estimate"];

/// Long format: one row per (run, test function, t).
pub fn write_records<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        for (phi, est) in r.phis.iter().zip(&r.estimates) {
            for (t, v) in est.iter().enumerate() {
                w.write_record([
                    r.algorithm.name(),
                    r.method.name(),
                    &r.model,
                    &r.n.to_string(),
                    &r.horizon.to_string(),
                    &r.seed.to_string(),
                    phi,
                    &t.to_string(),
                    &v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["algo", "method", "model", "n", "seed", "seconds"])?;
    for r in records {
        w.write_record([
            r.algorithm.name(),
            r.method.name(),
            &r.model,
            &r.n.to_string(),
            &r.seed.to_string(),
            &format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_gains<W: Write>(writer: W, gains: &[GainTable]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["comparison", "n", "phi", "reps", "reference", "t", "mse_mc", "mse_qmc", "gain", "gain_lo", "gain_hi"])?;
    for g in gains {
        for row in &g.rows {
            w.write_record([
                g.comparison.as_str(),
                &g.n.to_string(),
                &g.phi,
                &g.reps.to_string(),
                &g.reference,
                &row.t.to_string(),
                &row.mse_mc.to_string(),
                &row.mse_qmc.to_string(),
                &row.gain.to_string(),
                &row.gain_lo.to_string(),
                &row.gain_hi.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

type RunKey = (String, String, String, usize, u64);

/// Reads a long-format records file back into runs (timings are zero).
///
/// Rows must be complete: every run has the same test functions and a
/// value for each `t = 0..=T` of its own horizon.
pub fn read_records<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != RECORD_HEADER {
        return Err(Error::SchemaMismatch("unexpected records header".into()));
    }
    let mut runs: BTreeMap<RunKey, (usize, BTreeMap<String, Vec<(usize, f64)>>)> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let bad = |what: &str| Error::SchemaMismatch(format!("bad {what} in records row {:?}", row.position()));
        let n: usize = row[3].parse().map_err(|_| bad("n"))?;
        let horizon: usize = row[4].parse().map_err(|_| bad("T"))?;
        let seed: u64 = row[5].parse().map_err(|_| bad("seed"))?;
        let t: usize = row[7].parse().map_err(|_| bad("t"))?;
        let v: f64 = row[8].parse().map_err(|_| bad("estimate"))?;
        let key = (row[0].to_string(), row[1].to_string(), row[2].to_string(), n, seed);
        let entry = runs.entry(key).or_insert_with(|| (horizon, BTreeMap::new()));
        if entry.0 != horizon {
            return Err(Error::SchemaMismatch(format!("run with seed {seed} mixes T = {} and T = {horizon}", entry.0)));
        }
        entry.1.entry(row[6].to_string()).or_default().push((t, v));
    }
    runs.into_iter()
        .map(|((algo, method, model, n, seed), (horizon, by_phi))| {
            let mut phis = Vec::new();
            let mut estimates = Vec::new();
            for (phi, mut vals) in by_phi {
                vals.sort_by_key(|(t, _)| *t);
                if vals.len() != horizon + 1 || vals.iter().enumerate().any(|(i, (t, _))| i != *t) {
                    return Err(Error::SchemaMismatch(format!("run with seed {seed} does not cover t = 0..={horizon}")));
                }
                phis.push(phi);
                estimates.push(vals.into_iter().map(|(_, v)| v).collect());
            }
            Ok(RunRecord {
                algorithm: algo.parse::<Algorithm>()?,
                method: method.parse::<SmoothingMethod>()?,
                model,
                n,
                horizon,
                seed,
                phis,
                estimates,
                seconds: 0.0,
            })
        })
        .collect()
}

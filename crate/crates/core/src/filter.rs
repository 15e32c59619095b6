//! Forward passes: SMC with systematic resampling and SQMC with Hilbert
//! sorting and inverse-Rosenblatt mutation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{for_each_chunk, map_indexed};
use crate::fkmodel::FeynmanKac;
use crate::hilbert::{hilbert_sort, HilbertMap};
use crate::lowdisc::{generate_iid, generate_sobol, sort_by_first_coordinate, PointSet, MAX_SOBOL_DIMENSION};
use crate::{derive_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Smc,
    Sqmc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Smc => "smc",
            Algorithm::Sqmc => "sqmc",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smc" => Ok(Algorithm::Smc),
            "sqmc" => Ok(Algorithm::Sqmc),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Everything a forward pass produces, indexed by `t ∈ 0..=T`.
#[derive(Debug, Clone)]
pub struct ParticleHistory {
    pub algorithm: Algorithm,
    pub n: usize,
    pub d: usize,
    /// Row-major `N × d` particle positions per `t`.
    pub states: Vec<Vec<f64>>,
    /// Normalised weights per `t`.
    pub weights: Vec<Vec<f64>>,
    /// Logarithms of [`weights`](Self::weights).
    pub log_weights: Vec<Vec<f64>>,
    /// `ancestors[t][n]` is the time `t - 1` parent of particle `n`; empty at `t = 0`.
    pub ancestors: Vec<Vec<usize>>,
    /// Hilbert order of the rescaled particles per `t` (SQMC only).
    pub hilbert_order: Option<Vec<Vec<usize>>>,
    /// Pairs of particles sharing a Hilbert cell per `t` (SQMC only).
    pub hilbert_collisions: Vec<usize>,
    /// `log(N⁻¹ Σ_n G_t^n)` per `t`.
    pub log_likelihood_increments: Vec<f64>,
}

impl ParticleHistory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, t: usize, n: usize) -> &[f64] {
        &self.states[t][n * self.d..(n + 1) * self.d]
    }

    /// Scanning order at time `t`: Hilbert order for SQMC, identity otherwise.
    pub fn order(&self, t: usize) -> Option<&[usize]> {
        self.hilbert_order.as_ref().map(|o| o[t].as_slice())
    }

    /// `Σ_n W_t^n x_t^n` for every `t`, row-major `(T + 1) × d`.
    pub fn filtering_means(&self) -> Vec<Vec<f64>> {
        (0..self.states.len())
            .map(|t| {
                let mut m = vec![0.0; self.d];
                for (n, w) in self.weights[t].iter().enumerate() {
                    for (mi, x) in m.iter_mut().zip(self.state(t, n)) {
                        *mi += w * x;
                    }
                }
                m
            })
            .collect()
    }

    /// Checks weight normalisation, ancestor bounds and Hilbert orders.
    pub fn validate(&self) -> Result<()> {
        for (t, w) in self.weights.iter().enumerate() {
            let s: f64 = w.iter().sum();
            if w.len() != self.n || w.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::Numeric(format!("weights at t = {t} are not normalised")));
            }
        }
        for (t, a) in self.ancestors.iter().enumerate().skip(1) {
            if a.len() != self.n || a.iter().any(|&i| i >= self.n) {
                return Err(Error::Numeric(format!("ancestor out of range at t = {t}")));
            }
        }
        if let Some(orders) = &self.hilbert_order {
            for (t, o) in orders.iter().enumerate() {
                let mut seen = vec![false; self.n];
                for &i in o {
                    if i >= self.n || std::mem::replace(&mut seen[i], true) {
                        return Err(Error::Numeric(format!("Hilbert order at t = {t} is not a permutation")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `Σ_t log(N⁻¹ Σ_n G_t^n)`.
pub fn estimate_log_likelihood(hist: &ParticleHistory) -> f64 {
    hist.log_likelihood_increments.iter().sum()
}

/// Normalised weights from log potentials.
pub(crate) struct Normalized {
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
    /// `log(N⁻¹ Σ exp(log_g))`.
    pub log_mean: f64,
}

pub(crate) fn normalize_log_weights(t: usize, log_g: &[f64]) -> Result<Normalized> {
    if log_g.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::Numeric(format!("potential at t = {t} is NaN or infinite")));
    }
    let max = log_g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights { t });
    }
    let mut weights: Vec<f64> = log_g.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let log_sum = sum.ln();
    for w in weights.iter_mut() {
        *w /= sum;
    }
    let log_weights = log_g.iter().map(|v| v - max - log_sum).collect();
    Ok(Normalized { weights, log_weights, log_mean: max + log_sum - (log_g.len() as f64).ln() })
}

/// Right-continuous generalised inverse of the cumulative weights.
///
/// Returns, for each `u`, the smallest position `m` with `Σ_{i≤m} w_i ≥ u`
/// and `w_m > 0`. `us` must be nondecreasing; the output is nondecreasing.
pub fn inverse_cdf_resample(weights: &[f64], us: &[f64]) -> Result<Vec<usize>> {
    if let Some(p) = us.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted { position: p + 1 });
    }
    let last_positive = weights
        .iter()
        .rposition(|w| *w > 0.0)
        .ok_or_else(|| Error::InvalidArgument("all weights are zero".into()))?;
    let mut out = Vec::with_capacity(us.len());
    let mut m = weights.iter().position(|w| *w > 0.0).expect("a positive weight exists");
    let mut cum = weights[..=m].iter().sum::<f64>();
    for &u in us {
        while cum < u && m < last_positive {
            m += 1;
            cum += weights[m];
            while weights[m] <= 0.0 && m < last_positive {
                m += 1;
                cum += weights[m];
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Systematic resampling of `n` indices with a single uniform `u ∈ (0, 1]`:
/// `u_k = (k + u) / n`.
pub fn systematic_resample(weights: &[f64], n: usize, u: f64) -> Result<Vec<usize>> {
    let us: Vec<f64> = (0..n).map(|i| (i as f64 + u) / n as f64).collect();
    inverse_cdf_resample(weights, &us)
}

fn check_particles(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 particles, got {n}")));
    }
    Ok(())
}

/// Applies `F_{m_0}^{-1}` to the rows of `u` (first `d` columns).
pub(crate) fn initial_states<M: FeynmanKac + ?Sized>(model: &M, u: &PointSet, offset: usize) -> Vec<f64> {
    let d = model.dim();
    let mut x = vec![0.0; u.len() * d];
    for_each_chunk(&mut x, d, |i, out| model.initial_inverse(&u.row(i)[offset..offset + d], out));
    x
}

/// Applies `F_{m_t}^{-1}(x_prev^{a_n}, v_n)` with `v_n` from column `offset` on.
pub(crate) fn mutate_states<M: FeynmanKac + ?Sized>(
    model: &M,
    t: usize,
    prev: &[f64],
    ancestors: &[usize],
    v: &PointSet,
    offset: usize,
) -> Vec<f64> {
    let d = model.dim();
    let mut x = vec![0.0; ancestors.len() * d];
    for_each_chunk(&mut x, d, |i, out| {
        let a = ancestors[i];
        model.mutate_inverse(t, &prev[a * d..(a + 1) * d], &v.row(i)[offset..offset + d], out)
    });
    x
}

pub(crate) fn log_potentials<M: FeynmanKac + ?Sized>(
    model: &M,
    t: usize,
    prev: Option<(&[f64], &[usize])>,
    x: &[f64],
    n: usize,
) -> Vec<f64> {
    let d = model.dim();
    map_indexed(n, |i| {
        let xp = prev.map(|(p, a)| &p[a[i] * d..(a[i] + 1) * d]);
        model.log_potential(t, xp, &x[i * d..(i + 1) * d])
    })
}

/// Hilbert order of the rescaled states.
pub(crate) fn hilbert_order_of<M: FeynmanKac + ?Sized>(model: &M, x: &[f64]) -> Result<(Vec<usize>, usize)> {
    let d = model.dim();
    let map = HilbertMap::with_default_depth(d)?;
    let mut y = vec![0.0; x.len()];
    let r = model.rescaler();
    for_each_chunk(&mut y, d, |i, out| r.rescale_into(&x[i * d..(i + 1) * d], out));
    let order = hilbert_sort(&map, &y)?;
    Ok((order.perm, order.collisions))
}

/// Ancestors from the first column of `u` (sorted) over Hilbert-ordered weights.
pub(crate) fn sqmc_ancestors(weights: &[f64], order: &[usize], u: &PointSet) -> Result<Vec<usize>> {
    let sorted: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let pos = inverse_cdf_resample(&sorted, &u.column(0))?;
    Ok(pos.into_iter().map(|p| order[p]).collect())
}

/// SMC: systematic resampling every step and inverse-Rosenblatt mutation
/// of IID uniforms.
pub fn run_smc<M: FeynmanKac + ?Sized>(model: &M, n: usize, seed: u64) -> Result<ParticleHistory> {
    check_particles(n)?;
    let (d, horizon) = (model.dim(), model.horizon());
    let mut hist = empty_history(Algorithm::Smc, n, d, horizon, false);
    for t in 0..=horizon {
        let u = generate_iid(n, d, derive_seed(seed, 2 * t as u64))?;
        let (x, ancestors, log_g) = if t == 0 {
            let x = initial_states(model, &u, 0);
            let lg = log_potentials(model, 0, None, &x, n);
            (x, Vec::new(), lg)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * t as u64 + 1));
            let a = systematic_resample(&hist.weights[t - 1], n, 1.0 - rng.random::<f64>())?;
            let prev = &hist.states[t - 1];
            let x = mutate_states(model, t, prev, &a, &u, 0);
            let lg = log_potentials(model, t, Some((prev, &a)), &x, n);
            (x, a, lg)
        };
        push_step(&mut hist, t, x, ancestors, &log_g, None)?;
    }
    Ok(hist)
}

/// SQMC driven by scrambled Sobol point sets keyed by `seed`.
pub fn run_sqmc<M: FeynmanKac + ?Sized>(model: &M, n: usize, seed: u64) -> Result<ParticleHistory> {
    run_sqmc_with(model, n, |t, n, s| generate_sobol(n, s, Some(derive_seed(seed, t as u64))))
}

/// Maximum state dimension supported by the Sobol tables (one column is
/// reserved for resampling).
pub fn max_sqmc_dimension() -> usize {
    MAX_SOBOL_DIMENSION - 1
}

/// SQMC with caller-supplied point sets: `points(t, N, s)` must return an
/// `N × s` set with `s = d` at `t = 0` and `s = d + 1` afterwards.
pub fn run_sqmc_with<M, P>(model: &M, n: usize, mut points: P) -> Result<ParticleHistory>
where
    M: FeynmanKac + ?Sized,
    P: FnMut(usize, usize, usize) -> Result<PointSet>,
{
    check_particles(n)?;
    let (d, horizon) = (model.dim(), model.horizon());
    if d + 1 > MAX_SOBOL_DIMENSION {
        return Err(Error::UnsupportedDimension { requested: d + 1, max: MAX_SOBOL_DIMENSION });
    }
    let mut hist = empty_history(Algorithm::Sqmc, n, d, horizon, true);
    let mut order: Vec<usize> = Vec::new();
    for t in 0..=horizon {
        let s = if t == 0 { d } else { d + 1 };
        let u = points(t, n, s)?;
        if u.len() != n || u.dim() != s {
            return Err(Error::DimensionMismatch { expected: s, actual: u.dim() });
        }
        let (x, ancestors, log_g) = if t == 0 {
            let x = initial_states(model, &u, 0);
            let lg = log_potentials(model, 0, None, &x, n);
            (x, Vec::new(), lg)
        } else {
            let u = sort_by_first_coordinate(u);
            let a = sqmc_ancestors(&hist.weights[t - 1], &order, &u)?;
            let prev = &hist.states[t - 1];
            let x = mutate_states(model, t, prev, &a, &u, 1);
            let lg = log_potentials(model, t, Some((prev, &a)), &x, n);
            (x, a, lg)
        };
        let (perm, collisions) = hilbert_order_of(model, &x)?;
        push_step(&mut hist, t, x, ancestors, &log_g, Some((perm.clone(), collisions)))?;
        order = perm;
    }
    Ok(hist)
}

fn empty_history(algorithm: Algorithm, n: usize, d: usize, horizon: usize, sorted: bool) -> ParticleHistory {
    let cap = horizon + 1;
    ParticleHistory {
        algorithm,
        n,
        d,
        states: Vec::with_capacity(cap),
        weights: Vec::with_capacity(cap),
        log_weights: Vec::with_capacity(cap),
        ancestors: Vec::with_capacity(cap),
        hilbert_order: sorted.then(|| Vec::with_capacity(cap)),
        hilbert_collisions: Vec::with_capacity(cap),
        log_likelihood_increments: Vec::with_capacity(cap),
    }
}

fn push_step(
    hist: &mut ParticleHistory,
    t: usize,
    x: Vec<f64>,
    ancestors: Vec<usize>,
    log_g: &[f64],
    order: Option<(Vec<usize>, usize)>,
) -> Result<()> {
    let norm = normalize_log_weights(t, log_g)?;
    hist.states.push(x);
    hist.weights.push(norm.weights);
    hist.log_weights.push(norm.log_weights);
    hist.ancestors.push(ancestors);
    hist.log_likelihood_increments.push(norm.log_mean);
    if let (Some(orders), Some((perm, collisions))) = (hist.hilbert_order.as_mut(), order) {
        orders.push(perm);
        hist.hilbert_collisions.push(collisions);
    }
    Ok(())
}

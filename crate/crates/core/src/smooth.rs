//! Smoothing from a forward history: forward (trajectory) smoothing,
//! marginal backward smoothing and backward sampling driven by either a
//! QMC point set or IID uniforms.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exec::{map_indexed, try_map_indexed};
use crate::filter::{
    self, hilbert_order_of, initial_states, log_potentials, mutate_states, normalize_log_weights, sqmc_ancestors,
    Algorithm, ParticleHistory,
};
use crate::fkmodel::FeynmanKac;
use crate::hilbert::{hilbert_sort, HilbertMap};
use crate::lowdisc::{generate_iid, generate_sobol, sort_by_first_coordinate, PointSet, MAX_SOBOL_DIMENSION};
use crate::{derive_seed, Error, Result};

/// Stream tag of the backward-pass input, disjoint from the forward tags.
const BACKWARD_TAG: u64 = 0xB4C4_0000_0000_0000;
/// Fixed number of reduction blocks in the marginal recursion.
const REDUCTION_BLOCKS: usize = 32;
/// Index bits available to trajectory Hilbert sorting.
const TRAJECTORY_INDEX_BITS: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMethod {
    Forward,
    Marginal,
    BackwardQmc,
    BackwardIid,
}

impl SmoothingMethod {
    pub const ALL: [SmoothingMethod; 4] =
        [SmoothingMethod::Forward, SmoothingMethod::Marginal, SmoothingMethod::BackwardQmc, SmoothingMethod::BackwardIid];

    pub fn name(self) -> &'static str {
        match self {
            SmoothingMethod::Forward => "forward",
            SmoothingMethod::Marginal => "marginal",
            SmoothingMethod::BackwardQmc => "backward-qmc",
            SmoothingMethod::BackwardIid => "backward-iid",
        }
    }
}

impl fmt::Display for SmoothingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SmoothingMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown smoothing method {s:?}")))
    }
}

/// Marginal smoothing weights `W̃_{t|T}` per `t`.
#[derive(Debug, Clone)]
pub struct SmoothingWeights {
    pub weights: Vec<Vec<f64>>,
    pub log_weights: Vec<Vec<f64>>,
}

/// `N` trajectories `x̃_{0:T}` with per-trajectory weights.
#[derive(Debug, Clone)]
pub struct TrajectorySet {
    pub n: usize,
    pub d: usize,
    /// Forward-particle index of each trajectory at each `t`.
    pub indices: Vec<Vec<usize>>,
    /// Row-major `N × d` states per `t`.
    pub states: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TrajectorySet {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, t: usize, n: usize) -> &[f64] {
        &self.states[t][n * self.d..(n + 1) * self.d]
    }

    fn from_indices(hist: &ParticleHistory, indices: Vec<Vec<usize>>, weights: Vec<f64>) -> Self {
        let d = hist.d;
        let states = indices
            .iter()
            .enumerate()
            .map(|(t, idx)| idx.iter().flat_map(|&i| hist.states[t][i * d..(i + 1) * d].iter().copied()).collect())
            .collect();
        TrajectorySet { n: weights.len(), d, indices, states, weights }
    }
}

/// Test function `φ` applied to a state.
#[derive(Clone)]
pub enum TestFunction {
    /// `x_i` (zero-based coordinate).
    Coordinate(usize),
    /// `x_i²` (zero-based coordinate).
    SecondMoment(usize),
    Custom { name: String, f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl TestFunction {
    /// Parses `x<i>` or `x<i>^2` with a one-based coordinate `i`.
    pub fn parse(id: &str, d: usize) -> Result<Self> {
        let unknown = || Error::UnknownTestFunction(id.to_string());
        let body = id.strip_prefix('x').ok_or_else(unknown)?;
        let (num, square) = match body.strip_suffix("^2") {
            Some(n) => (n, true),
            None => (body, false),
        };
        let i: usize = num.parse().map_err(|_| unknown())?;
        if i == 0 || i > d {
            return Err(unknown());
        }
        Ok(if square { TestFunction::SecondMoment(i - 1) } else { TestFunction::Coordinate(i - 1) })
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn id(&self) -> String {
        match self {
            TestFunction::Coordinate(i) => format!("x{}", i + 1),
            TestFunction::SecondMoment(i) => format!("x{}^2", i + 1),
            TestFunction::Custom { name, .. } => name.clone(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Coordinate(i) => x[*i],
            TestFunction::SecondMoment(i) => x[*i] * x[*i],
            TestFunction::Custom { f, .. } => f(x),
        }
    }

    /// Default registry: every coordinate and its second moment.
    pub fn registry(d: usize) -> Vec<TestFunction> {
        (0..d).map(TestFunction::Coordinate).chain((0..d).map(TestFunction::SecondMoment)).collect()
    }
}

/// `Σ_n w_n φ(x̃_t^n)` per `t`.
pub fn smoothing_estimate(traj: &TrajectorySet, phi: &TestFunction) -> Vec<f64> {
    (0..traj.states.len())
        .map(|t| (0..traj.n).map(|n| traj.weights[n] * phi.eval(traj.state(t, n))).sum())
        .collect()
}

/// `Σ_n W̃_{t|T}^n φ(x_t^n)` per `t`.
pub fn marginal_estimate(hist: &ParticleHistory, sw: &SmoothingWeights, phi: &TestFunction) -> Vec<f64> {
    (0..hist.states.len())
        .map(|t| sw.weights[t].iter().enumerate().map(|(n, w)| w * phi.eval(hist.state(t, n))).sum())
        .collect()
}

/// Forward smoothing output: trajectories weighted by `W_T` and the number
/// of distinct time-0 ancestors among the particles alive at each `t`.
#[derive(Debug, Clone)]
pub struct ForwardSmoothing {
    pub trajectories: TrajectorySet,
    pub distinct_initial_ancestors: Vec<usize>,
    pub history: ParticleHistory,
}

/// Largest horizon for which trajectory Hilbert sorting keeps one bit per axis.
pub fn forward_smoothing_max_horizon(d: usize) -> usize {
    TRAJECTORY_INDEX_BITS / d.max(1) - 1
}

/// SQMC where the Hilbert sort at time `t` acts on the rescaled trajectory
/// `x_{0:t}` (dimension `d (t + 1)`, per-axis depth `floor(62 / (d (t + 1)))`).
pub fn forward_smoothing<M: FeynmanKac + ?Sized>(model: &M, n: usize, seed: u64) -> Result<ForwardSmoothing> {
    forward_smoothing_with(model, n, |t, n, s| generate_sobol(n, s, Some(derive_seed(seed, t as u64))))
}

/// [`forward_smoothing`] with caller-supplied point sets.
pub fn forward_smoothing_with<M, P>(model: &M, n: usize, mut points: P) -> Result<ForwardSmoothing>
where
    M: FeynmanKac + ?Sized,
    P: FnMut(usize, usize, usize) -> Result<PointSet>,
{
    let (d, horizon) = (model.dim(), model.horizon());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 particles, got {n}")));
    }
    if d * (horizon + 1) > TRAJECTORY_INDEX_BITS {
        let t = TRAJECTORY_INDEX_BITS / d;
        return Err(Error::TrajectoryDimensionCap { t, dim: d * (t + 1) });
    }
    let mut hist = ParticleHistory {
        algorithm: Algorithm::Sqmc,
        n,
        d,
        states: Vec::new(),
        weights: Vec::new(),
        log_weights: Vec::new(),
        ancestors: Vec::new(),
        hilbert_order: Some(Vec::new()),
        hilbert_collisions: Vec::new(),
        log_likelihood_increments: Vec::new(),
    };
    // genealogy[n] lists the particle indices of the path ending at n.
    let mut genealogy: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut order: Vec<usize> = Vec::new();
    let mut distinct = Vec::with_capacity(horizon + 1);
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
            genealogy = a
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let mut g = genealogy[p].clone();
                    g.push(i);
                    g
                })
                .collect();
            (x, a, lg)
        };
        let norm = normalize_log_weights(t, &log_g)?;
        hist.states.push(x);
        hist.weights.push(norm.weights);
        hist.log_weights.push(norm.log_weights);
        hist.ancestors.push(ancestors);
        hist.log_likelihood_increments.push(norm.log_mean);
        let mut roots: Vec<usize> = genealogy.iter().map(|g| g[0]).collect();
        roots.sort_unstable();
        roots.dedup();
        distinct.push(roots.len());
        let (perm, collisions) = if t == 0 {
            hilbert_order_of(model, &hist.states[0])?
        } else {
            let width = d * (t + 1);
            let map = HilbertMap::with_default_depth(width)?;
            let r = model.rescaler();
            let rows: Vec<Vec<f64>> = map_indexed(n, |i| {
                let path: Vec<f64> = genealogy[i]
                    .iter()
                    .enumerate()
                    .flat_map(|(s, &k)| hist.states[s][k * d..(k + 1) * d].iter().copied())
                    .collect();
                r.rescale(&path)
            });
            let o = hilbert_sort(&map, &rows.concat())?;
            (o.perm, o.collisions)
        };
        hist.hilbert_order.as_mut().expect("sqmc").push(perm.clone());
        hist.hilbert_collisions.push(collisions);
        order = perm;
    }
    let indices: Vec<Vec<usize>> = (0..=horizon).map(|t| genealogy.iter().map(|g| g[t]).collect()).collect();
    let trajectories = TrajectorySet::from_indices(&hist, indices, hist.weights[horizon].clone());
    Ok(ForwardSmoothing { trajectories, distinct_initial_ancestors: distinct, history: hist })
}

/// Trajectories obtained by tracing ancestors back from time `T`
/// (genealogy-tree smoothing of any forward history).
pub fn genealogy_trajectories(hist: &ParticleHistory) -> TrajectorySet {
    let horizon = hist.horizon();
    let mut indices = vec![Vec::new(); horizon + 1];
    indices[horizon] = (0..hist.n).collect();
    for t in (0..horizon).rev() {
        indices[t] = indices[t + 1].iter().map(|&i| hist.ancestors[t + 1][i]).collect();
    }
    TrajectorySet::from_indices(hist, indices, hist.weights[horizon].clone())
}

/// Normalised `exp(row - max)` in place; returns `None` when every entry is `-∞`.
fn normalize_row(row: &mut [f64]) -> Option<()> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in row.iter_mut() {
        *v *= inv;
    }
    Some(())
}

/// Marginal backward recursion
/// `W̃_t^n = Σ_m W̃_{t+1}^m W_t^n k(n, m) / Σ_p W_t^p k(p, m)` with
/// `k(p, m) = m_{t+1}(x_t^p, x_{t+1}^m) G_{t+1}(x_t^p, x_{t+1}^m)`.
///
/// Each `m` contributes one normalised row; rows are accumulated in a fixed
/// number of blocks, so the summation order does not depend on threading.
pub fn marginal_backward_weights<M: FeynmanKac + ?Sized>(model: &M, hist: &ParticleHistory) -> Result<SmoothingWeights> {
    let (n, d) = (hist.n, hist.d);
    let horizon = hist.horizon();
    let mut weights = vec![Vec::new(); horizon + 1];
    weights[horizon] = hist.weights[horizon].clone();
    let block = n.div_ceil(REDUCTION_BLOCKS);
    for t in (0..horizon).rev() {
        let kernel = model.backward_kernel(t + 1, &hist.states[t]);
        let lw = &hist.log_weights[t];
        let next_w = &weights[t + 1];
        let next_x = &hist.states[t + 1];
        let partials = try_map_indexed(n.div_ceil(block), |b| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; n];
            let mut row = vec![0.0; n];
            for m in b * block..((b + 1) * block).min(n) {
                if next_w[m] == 0.0 {
                    continue;
                }
                kernel.log_weights(&next_x[m * d..(m + 1) * d], &mut row);
                for (r, l) in row.iter_mut().zip(lw) {
                    *r += l;
                }
                normalize_row(&mut row).ok_or(Error::DegenerateKernel { t, m })?;
                for (a, r) in acc.iter_mut().zip(&row) {
                    *a += next_w[m] * r;
                }
            }
            Ok(acc)
        })?;
        let mut w = vec![0.0; n];
        for p in &partials {
            for (wi, pi) in w.iter_mut().zip(p) {
                *wi += pi;
            }
        }
        let sum: f64 = w.iter().sum();
        for wi in w.iter_mut() {
            *wi /= sum;
        }
        weights[t] = w;
    }
    let log_weights = weights.iter().map(|w| w.iter().map(|v| v.ln()).collect()).collect();
    Ok(SmoothingWeights { weights, log_weights })
}

/// Smallest position `m` in `cum` (cumulative weights of `w`) with
/// `cum[m] ≥ u` and `w[m] > 0`.
fn inverse_cdf_single(w: &[f64], cum: &[f64], u: f64) -> usize {
    let i = cum.partition_point(|c| *c < u);
    if i >= w.len() {
        return w.iter().rposition(|v| *v > 0.0).expect("normalised row");
    }
    if w[i] > 0.0 {
        i
    } else {
        w[i..].iter().position(|v| *v > 0.0).map(|k| i + k).expect("normalised row")
    }
}

fn cumulative(w: &[f64], order: Option<&[usize]>, out_w: &mut Vec<f64>, out_c: &mut Vec<f64>) {
    out_w.clear();
    out_c.clear();
    let mut c = 0.0;
    let mut push = |v: f64| {
        c += v;
        out_w.push(v);
        out_c.push(c);
    };
    match order {
        Some(o) => o.iter().for_each(|&i| push(w[i])),
        None => w.iter().for_each(|&v| push(v)),
    }
}

/// Backward sampling of `N` trajectories from `input` (`N × (T + 1)`).
///
/// Column 0 selects the time-`T` particle by inverse CDF over the filter
/// weights scanned in Hilbert order; column `k` selects the time `T - k`
/// particle from the backward kernel given the already chosen successor.
/// Column 0 must be nondecreasing. Without a Hilbert order (SMC histories)
/// particles are scanned in index order.
pub fn backward_sampling<M: FeynmanKac + ?Sized>(model: &M, hist: &ParticleHistory, input: &PointSet) -> Result<TrajectorySet> {
    let (n, d) = (hist.n, hist.d);
    let horizon = hist.horizon();
    if input.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: input.len() });
    }
    if input.dim() != horizon + 1 {
        return Err(Error::DimensionMismatch { expected: horizon + 1, actual: input.dim() });
    }
    let first = input.column(0);
    if let Some(p) = first.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Unsorted { position: p + 1 });
    }
    let mut indices = vec![Vec::new(); horizon + 1];
    indices[horizon] = match hist.order(horizon) {
        Some(o) => {
            let sorted: Vec<f64> = o.iter().map(|&i| hist.weights[horizon][i]).collect();
            filter::inverse_cdf_resample(&sorted, &first)?.into_iter().map(|p| o[p]).collect()
        }
        None => filter::inverse_cdf_resample(&hist.weights[horizon], &first)?,
    };
    for t in (0..horizon).rev() {
        let col = horizon - t;
        let successors = &indices[t + 1];
        // Trajectories sharing a successor share one backward-kernel row.
        let mut by_successor: Vec<usize> = (0..n).collect();
        by_successor.sort_by_key(|&i| (successors[i], i));
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for (pos, &i) in by_successor.iter().enumerate() {
            match groups.last_mut() {
                Some((start, len)) if successors[by_successor[*start]] == successors[i] => *len += 1,
                _ => groups.push((pos, 1)),
            }
        }
        let kernel = model.backward_kernel(t + 1, &hist.states[t]);
        let lw = &hist.log_weights[t];
        let order = hist.order(t);
        let chosen = try_map_indexed(groups.len(), |g| -> Result<Vec<(usize, usize)>> {
            let (start, len) = groups[g];
            let m = successors[by_successor[start]];
            let mut row = vec![0.0; n];
            kernel.log_weights(&hist.states[t + 1][m * d..(m + 1) * d], &mut row);
            for (r, l) in row.iter_mut().zip(lw) {
                *r += l;
            }
            normalize_row(&mut row).ok_or(Error::DegenerateKernel { t, m })?;
            let (mut w, mut c) = (Vec::with_capacity(n), Vec::with_capacity(n));
            cumulative(&row, order, &mut w, &mut c);
            Ok(by_successor[start..start + len]
                .iter()
                .map(|&i| {
                    let pos = inverse_cdf_single(&w, &c, input.row(i)[col]);
                    (i, order.map_or(pos, |o| o[pos]))
                })
                .collect())
        })?;
        let mut idx = vec![0usize; n];
        for (i, a) in chosen.into_iter().flatten() {
            idx[i] = a;
        }
        indices[t] = idx;
    }
    Ok(TrajectorySet::from_indices(hist, indices, vec![1.0 / n as f64; n]))
}

/// Backward sampling driven by a scrambled Sobol set sorted on column 0.
pub fn backward_sampling_qmc<M: FeynmanKac + ?Sized>(model: &M, hist: &ParticleHistory, seed: u64) -> Result<TrajectorySet> {
    let s = hist.horizon() + 1;
    if s > MAX_SOBOL_DIMENSION {
        return Err(Error::UnsupportedDimension { requested: s, max: MAX_SOBOL_DIMENSION });
    }
    let input = sort_by_first_coordinate(generate_sobol(hist.n, s, Some(derive_seed(seed, BACKWARD_TAG)))?);
    backward_sampling(model, hist, &input)
}

/// Backward sampling driven by IID uniforms (column 0 sorted, which leaves
/// the law of the output unchanged).
pub fn backward_sampling_iid<M: FeynmanKac + ?Sized>(model: &M, hist: &ParticleHistory, seed: u64) -> Result<TrajectorySet> {
    let input = sort_by_first_coordinate(generate_iid(hist.n, hist.horizon() + 1, derive_seed(seed, BACKWARD_TAG))?);
    backward_sampling(model, hist, &input)
}

/// Runs a forward pass with `algorithm` and smooths it with `method`,
/// returning `estimates[k][t]` for each test function `phis[k]`.
pub fn smooth<M: FeynmanKac + ?Sized>(
    model: &M,
    algorithm: Algorithm,
    method: SmoothingMethod,
    n: usize,
    seed: u64,
    phis: &[TestFunction],
) -> Result<SmoothingOutput> {
    let forward = |m: &M| match algorithm {
        Algorithm::Smc => filter::run_smc(m, n, seed),
        Algorithm::Sqmc => filter::run_sqmc(m, n, seed),
    };
    let (estimates, distinct) = match method {
        SmoothingMethod::Forward => match algorithm {
            Algorithm::Sqmc => {
                let fs = forward_smoothing(model, n, seed)?;
                (phis.iter().map(|p| smoothing_estimate(&fs.trajectories, p)).collect(), Some(fs.distinct_initial_ancestors))
            }
            Algorithm::Smc => {
                let hist = forward(model)?;
                let traj = genealogy_trajectories(&hist);
                let distinct = (0..=hist.horizon())
                    .map(|t| {
                        let mut roots = genealogy_roots(&hist, t);
                        roots.sort_unstable();
                        roots.dedup();
                        roots.len()
                    })
                    .collect();
                (phis.iter().map(|p| smoothing_estimate(&traj, p)).collect(), Some(distinct))
            }
        },
        SmoothingMethod::Marginal => {
            let hist = forward(model)?;
            let sw = marginal_backward_weights(model, &hist)?;
            (phis.iter().map(|p| marginal_estimate(&hist, &sw, p)).collect(), None)
        }
        SmoothingMethod::BackwardQmc | SmoothingMethod::BackwardIid => {
            let hist = forward(model)?;
            let traj = if method == SmoothingMethod::BackwardQmc {
                backward_sampling_qmc(model, &hist, seed)?
            } else {
                backward_sampling_iid(model, &hist, seed)?
            };
            (phis.iter().map(|p| smoothing_estimate(&traj, p)).collect(), None)
        }
    };
    Ok(SmoothingOutput { estimates, distinct_initial_ancestors: distinct })
}

/// Time-0 ancestors of the particles alive at time `t`.
fn genealogy_roots(hist: &ParticleHistory, t: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..hist.n).collect();
    for s in (1..=t).rev() {
        idx = idx.into_iter().map(|i| hist.ancestors[s][i]).collect();
    }
    idx
}

#[derive(Debug, Clone)]
pub struct SmoothingOutput {
    /// `estimates[k][t]` for test function `k`.
    pub estimates: Vec<Vec<f64>>,
    pub distinct_initial_ancestors: Option<Vec<usize>>,
}

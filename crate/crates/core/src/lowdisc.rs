//! Low-discrepancy and IID point sets in `[0,1)^s`.
//!
//! Sobol points use Joe-Kuo direction numbers (embedded for 1024
//! dimensions) in Gray-code order, optionally randomised by Owen nested
//! uniform scrambling. Scrambling is realised with a keyed hash over digit
//! prefixes, so every digit's flip depends on all preceding digits of the
//! point; digits beyond the 32 generated bits are filled the same way.

use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{derive_seed, Error, Result};

/// Number of dimensions with embedded direction numbers.
pub const MAX_SOBOL_DIMENSION: usize = 1024;

const SOBOL_BITS: usize = 32;
const TAIL_BITS: u32 = 21;
/// Largest double strictly below one.
pub const ONE_MINUS_EPS: f64 = 1.0 - f64::EPSILON / 2.0;

static JOE_KUO: &str = include_str!("../data/joe_kuo_1024.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    Sobol,
    VanDerCorput,
    IidUniform,
}

/// `n` points in `[0,1)^s`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    n: usize,
    s: usize,
    data: Vec<f64>,
    generator: Generator,
    scramble_seed: Option<u64>,
    sorted_by_first_coord: bool,
}

impl PointSet {
    /// Wraps raw row-major coordinates, validating the `[0,1)` invariant.
    pub fn from_rows(n: usize, s: usize, data: Vec<f64>, generator: Generator) -> Result<Self> {
        if n == 0 || s == 0 {
            return Err(Error::InvalidArgument("point sets need n >= 1 and s >= 1".into()));
        }
        if data.len() != n * s {
            return Err(Error::DimensionMismatch { expected: n * s, actual: data.len() });
        }
        if let Some((i, &v)) = data.iter().enumerate().find(|(_, v)| !(0.0..1.0).contains(*v)) {
            return Err(Error::Domain { axis: i % s, value: v });
        }
        let sorted = data.chunks_exact(s).zip(data.chunks_exact(s).skip(1)).all(|(a, b)| a[0] <= b[0]);
        Ok(PointSet { n, s, data, generator, scramble_seed: None, sorted_by_first_coord: sorted })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn scramble_seed(&self) -> Option<u64> {
        self.scramble_seed
    }

    pub fn is_sorted_by_first_coord(&self) -> bool {
        self.sorted_by_first_coord
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.s..(i + 1) * self.s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.s)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Applies a row permutation: row `i` of the result is row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        PointSet { data, sorted_by_first_coord: false, ..self.clone() }
    }

    /// Writes one line per point, coordinates comma-separated, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

struct DirectionTable {
    dims: Vec<[u32; SOBOL_BITS]>,
}

fn direction_table() -> &'static DirectionTable {
    static TABLE: OnceLock<DirectionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut dims = Vec::with_capacity(MAX_SOBOL_DIMENSION);
        let mut first = [0u32; SOBOL_BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (31 - k);
        }
        dims.push(first);
        for line in JOE_KUO.lines().skip(1) {
            let fields: Vec<u32> = line.split_whitespace().map(|f| f.parse().expect("direction table")).collect();
            let (s, a, m) = (fields[1] as usize, fields[2], &fields[3..]);
            let mut v = [0u32; SOBOL_BITS];
            for k in 0..SOBOL_BITS {
                v[k] = if k < s {
                    m[k] << (31 - k)
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for j in 1..s {
                        if (a >> (s - 1 - j)) & 1 == 1 {
                            x ^= v[k - j];
                        }
                    }
                    x
                };
            }
            dims.push(v);
        }
        assert_eq!(dims.len(), MAX_SOBOL_DIMENSION);
        DirectionTable { dims }
    })
}

/// Raw 32-bit Sobol integers for the first `n` indices, row-major.
fn sobol_integers(n: usize, s: usize) -> Vec<u32> {
    let table = direction_table();
    let mut out = vec![0u32; n * s];
    let mut state = vec![0u32; s];
    for i in 1..n {
        let c = (i - 1).trailing_ones() as usize;
        for (j, x) in state.iter_mut().enumerate() {
            *x ^= table.dims[j][c];
        }
        out[i * s..(i + 1) * s].copy_from_slice(&state);
    }
    out
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Owen-scrambles a 32-bit digit string and appends `TAIL_BITS` random
/// digits; returns a 53-bit integer.
#[inline]
fn owen_scramble(x: u32, key: u64) -> u64 {
    let mut out = 0u32;
    for level in 0..SOBOL_BITS {
        let prefix = if level == 0 { 0 } else { (x >> (32 - level)) as u64 };
        let flip = (mix64(key ^ mix64(((level as u64) << 32) | prefix)) & 1) as u32;
        let bit = (x >> (31 - level)) & 1;
        out |= (bit ^ flip) << (31 - level);
    }
    let tail = mix64(key ^ mix64((32u64 << 32) | x as u64)) >> (64 - TAIL_BITS);
    ((out as u64) << TAIL_BITS) | tail
}

/// First `n` points of the Sobol sequence in dimension `s`.
///
/// With a seed the points are Owen-scrambled: each point is marginally
/// uniform on `[0,1)^s` while the set keeps its net structure.
pub fn generate_sobol(n: usize, s: usize, scramble_seed: Option<u64>) -> Result<PointSet> {
    if n == 0 || s == 0 {
        return Err(Error::InvalidArgument("sobol needs n >= 1 and s >= 1".into()));
    }
    if s > MAX_SOBOL_DIMENSION {
        return Err(Error::UnsupportedDimension { requested: s, max: MAX_SOBOL_DIMENSION });
    }
    if n as u64 > 1u64 << SOBOL_BITS {
        return Err(Error::InvalidArgument(format!("at most 2^32 Sobol points, got {n}")));
    }
    let ints = sobol_integers(n, s);
    let data: Vec<f64> = match scramble_seed {
        None => ints.iter().map(|&x| x as f64 * (1.0 / 4_294_967_296.0)).collect(),
        Some(seed) => {
            let keys: Vec<u64> = (0..s).map(|j| derive_seed(seed, j as u64)).collect();
            let mut data = vec![0.0; n * s];
            crate::exec::for_each_chunk(&mut data, s, |i, row| {
                for j in 0..s {
                    let v = owen_scramble(ints[i * s + j], keys[j]) as f64 * (1.0 / 9_007_199_254_740_992.0);
                    row[j] = v.min(ONE_MINUS_EPS);
                }
            });
            data
        }
    };
    let generator = if s == 1 { Generator::VanDerCorput } else { Generator::Sobol };
    Ok(PointSet {
        n,
        s,
        data,
        generator,
        scramble_seed,
        sorted_by_first_coord: n == 1,
    })
}

/// `n` IID uniform points from a ChaCha8 stream keyed by `seed`.
pub fn generate_iid(n: usize, s: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || s == 0 {
        return Err(Error::InvalidArgument("iid point set needs n >= 1 and s >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * s).map(|_| rng.random::<f64>()).collect();
    Ok(PointSet {
        n,
        s,
        data,
        generator: Generator::IidUniform,
        scramble_seed: Some(seed),
        sorted_by_first_coord: n == 1,
    })
}

/// Stable sort of the rows on their first coordinate.
pub fn sort_by_first_coordinate(ps: PointSet) -> PointSet {
    if ps.sorted_by_first_coord {
        return ps;
    }
    let mut order: Vec<usize> = (0..ps.n).collect();
    order.sort_by(|&a, &b| ps.data[a * ps.s].total_cmp(&ps.data[b * ps.s]));
    let mut sorted = ps.permuted(&order);
    sorted.sorted_by_first_coord = true;
    sorted
}

/// Largest `N` accepted by [`measure_extreme_discrepancy`] for a given `s`.
pub fn discrepancy_oracle_limit(s: usize) -> Option<usize> {
    match s {
        1 | 2 => Some(512),
        3 => Some(64),
        _ => None,
    }
}

/// Exact extreme discrepancy `sup_B |S(u)(B) - vol(B)|` over axis-aligned
/// boxes in `[0,1)^s`.
///
/// The supremum is attained (as a limit) either by a closed box with faces
/// on point coordinates, which maximises the excess count, or by an open box
/// with faces on point coordinates, `0` or `1`, which maximises the deficit.
/// Both families are enumerated on all but the last axis; the last axis is
/// solved in linear time over the points sorted on it.
pub fn measure_extreme_discrepancy(ps: &PointSet) -> Result<f64> {
    let s = ps.s;
    let n = ps.n;
    match discrepancy_oracle_limit(s) {
        Some(limit) if n <= limit => {}
        _ => {
            return Err(Error::OracleLimit {
                s,
                n,
                limit: "s <= 2 with N <= 512, or s = 3 with N <= 64".into(),
            })
        }
    }
    let mut rows: Vec<&[f64]> = ps.rows().collect();
    rows.sort_by(|a, b| a[s - 1].total_cmp(&b[s - 1]));
    let nf = n as f64;
    let excess = max_excess(&rows, 0, s, nf, 1.0);
    let deficit = max_deficit(&rows, 0, s, nf, 1.0);
    Ok((excess.max(deficit) / nf).clamp(0.0, 1.0))
}

fn distinct_sorted(rows: &[&[f64]], axis: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| r[axis]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Max over closed boxes of `count - n * vol`, in count units.
fn max_excess(rows: &[&[f64]], axis: usize, s: usize, n: f64, vol: f64) -> f64 {
    if rows.is_empty() {
        return f64::NEG_INFINITY;
    }
    if axis == s - 1 {
        let c = n * vol;
        let mut best = f64::NEG_INFINITY;
        let mut best_left = f64::NEG_INFINITY;
        for (j, r) in rows.iter().enumerate() {
            let y = r[axis];
            best_left = best_left.max(c * y - j as f64);
            best = best.max((j + 1) as f64 - c * y + best_left);
        }
        return best;
    }
    let vals = distinct_sorted(rows, axis);
    let mut best = f64::NEG_INFINITY;
    let mut inside: Vec<&[f64]> = Vec::with_capacity(rows.len());
    for (i, &p) in vals.iter().enumerate() {
        for &q in &vals[i..] {
            inside.clear();
            inside.extend(rows.iter().filter(|r| r[axis] >= p && r[axis] <= q));
            best = best.max(max_excess(&inside, axis + 1, s, n, vol * (q - p)));
        }
    }
    best
}

/// Max over open boxes of `n * vol - count`, in count units.
fn max_deficit(rows: &[&[f64]], axis: usize, s: usize, n: f64, vol: f64) -> f64 {
    if axis == s - 1 {
        let c = n * vol;
        let k = rows.len();
        let z = |i: usize| -> f64 {
            if i == 0 {
                0.0
            } else if i == k + 1 {
                1.0
            } else {
                rows[i - 1][axis]
            }
        };
        let mut best = f64::NEG_INFINITY;
        let mut min_left = f64::INFINITY;
        for b in 1..=k + 1 {
            let a = b - 1;
            min_left = min_left.min(c * z(a) - a as f64);
            best = best.max(c * z(b) - b as f64 + 1.0 - min_left);
        }
        return best;
    }
    let vals = distinct_sorted(rows, axis);
    let mut lows = vec![0.0];
    lows.extend(vals.iter().copied().filter(|&v| v > 0.0));
    let mut highs = vals.clone();
    highs.push(1.0);
    let mut best = f64::NEG_INFINITY;
    let mut inside: Vec<&[f64]> = Vec::with_capacity(rows.len());
    for &p in &lows {
        for &q in highs.iter().filter(|&&q| q > p) {
            inside.clear();
            inside.extend(rows.iter().filter(|r| r[axis] > p && r[axis] < q));
            best = best.max(max_deficit(&inside, axis + 1, s, n, vol * (q - p)));
        }
    }
    best
}

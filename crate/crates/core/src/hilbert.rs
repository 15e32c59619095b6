//! Discretised Hilbert curve in `d` dimensions.
//!
//! At depth `m` the cube is cut into `2^(d m)` cells and the curve visits
//! them in an order where consecutive cells share a face. The index of a
//! point is computed with Hamilton's entry-point/direction transform:
//! one `d`-bit Gray-code digit per level, no floating-point arithmetic after
//! the initial quantisation `floor(x_i 2^m)`.
//!
//! Orientation: cell 0 contains the origin at every depth, so the limit
//! curve satisfies `H(0) = 0`. For `d = 1` the map is the identity.

use std::cmp::Ordering;

use crate::{Error, Result};

/// Total index bits available.
pub const MAX_INDEX_BITS: u32 = 126;
/// Per-axis resolution cap of the default depth.
pub const MAX_AXIS_BITS: u32 = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertMap {
    d: usize,
    depth: u32,
}

/// Position of a cell along the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HilbertIndex {
    pub value: u128,
}

#[inline]
fn mask(n: u32) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

#[inline]
fn rotr(x: u128, r: u32, n: u32) -> u128 {
    let r = r % n;
    if r == 0 {
        x
    } else {
        ((x >> r) | (x << (n - r))) & mask(n)
    }
}

#[inline]
fn rotl(x: u128, r: u32, n: u32) -> u128 {
    let r = r % n;
    if r == 0 {
        x
    } else {
        ((x << r) | (x >> (n - r))) & mask(n)
    }
}

#[inline]
fn gray(i: u128) -> u128 {
    i ^ (i >> 1)
}

#[inline]
fn gray_inverse(g: u128) -> u128 {
    let mut i = g;
    let mut shift = 1;
    while shift < 128 {
        i ^= i >> shift;
        shift <<= 1;
    }
    i
}

/// Entry corner of sub-cell `w` in the parent's standard frame.
#[inline]
fn entry(w: u128) -> u128 {
    if w == 0 {
        0
    } else {
        gray(2 * ((w - 1) / 2))
    }
}

/// Intra-cell direction of sub-cell `w`.
#[inline]
fn direction(w: u128, n: u32) -> u32 {
    let d = if w == 0 {
        0
    } else if w % 2 == 0 {
        (w - 1).trailing_ones()
    } else {
        w.trailing_ones()
    };
    d % n
}

impl HilbertMap {
    /// Map with explicit per-axis depth; requires `d * depth <= 126`.
    pub fn new(d: usize, depth: u32) -> Result<Self> {
        if d == 0 || depth == 0 {
            return Err(Error::InvalidArgument("Hilbert map needs d >= 1 and depth >= 1".into()));
        }
        if (d as u64) * depth as u64 > MAX_INDEX_BITS as u64 {
            return Err(Error::InvalidArgument(format!(
                "d * depth = {} exceeds {MAX_INDEX_BITS} index bits",
                d as u64 * depth as u64
            )));
        }
        Ok(HilbertMap { d, depth })
    }

    /// Map with the default depth `min(floor(62 / d), 52)`.
    ///
    /// Cell centres below 2^-53 spacing are not representable as `f64`, so
    /// one-dimensional maps stop at 52 bits.
    pub fn with_default_depth(d: usize) -> Result<Self> {
        let depth = Self::default_depth(d);
        if depth == 0 {
            return Err(Error::InvalidArgument(format!("dimension {d} leaves no bits per axis")));
        }
        Self::new(d, depth)
    }

    pub fn default_depth(d: usize) -> u32 {
        if d == 0 {
            0
        } else {
            ((62 / d) as u32).min(MAX_AXIS_BITS)
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn total_bits(&self) -> u32 {
        self.d as u32 * self.depth
    }

    /// Number of cells, `2^(d * depth)`.
    pub fn cell_count(&self) -> u128 {
        1u128 << self.total_bits()
    }

    /// Integer cell coordinates `floor(x_i 2^depth)`.
    pub fn quantize(&self, x: &[f64]) -> Result<Vec<u128>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, actual: x.len() });
        }
        let scale = (self.depth as f64).exp2();
        x.iter()
            .enumerate()
            .map(|(axis, &v)| {
                if (0.0..1.0).contains(&v) {
                    Ok(((v * scale) as u128).min(mask(self.depth)))
                } else {
                    Err(Error::Domain { axis, value: v })
                }
            })
            .collect()
    }

    /// Index of the cell at integer coordinates `cell` (each `< 2^depth`).
    pub fn cell_to_index(&self, cell: &[u128]) -> HilbertIndex {
        debug_assert_eq!(cell.len(), self.d);
        let n = self.d as u32;
        if n == 1 {
            return HilbertIndex { value: cell[0] };
        }
        let (mut h, mut e, mut dir) = (0u128, 0u128, 0u32);
        for i in (0..self.depth).rev() {
            let mut l = 0u128;
            for (j, &c) in cell.iter().enumerate() {
                l |= ((c >> i) & 1) << j;
            }
            let l = rotr(l ^ e, dir + 1, n);
            let w = gray_inverse(l);
            e ^= rotl(entry(w), dir + 1, n);
            dir = (dir + direction(w, n) + 1) % n;
            h = (h << n) | w;
        }
        HilbertIndex { value: h }
    }

    /// Integer coordinates of the cell at position `k`.
    pub fn index_to_cell(&self, k: HilbertIndex) -> Result<Vec<u128>> {
        if k.value >= self.cell_count() {
            return Err(Error::IndexOutOfRange { index: k.value, d: self.d, depth: self.depth });
        }
        let n = self.d as u32;
        if n == 1 {
            return Ok(vec![k.value]);
        }
        let mut cell = vec![0u128; self.d];
        let (mut e, mut dir) = (0u128, 0u32);
        for i in (0..self.depth).rev() {
            let w = (k.value >> (i * n)) & mask(n);
            let l = rotl(gray(w), dir + 1, n) ^ e;
            for (j, c) in cell.iter_mut().enumerate() {
                *c |= ((l >> j) & 1) << i;
            }
            e ^= rotl(entry(w), dir + 1, n);
            dir = (dir + direction(w, n) + 1) % n;
        }
        Ok(cell)
    }

    /// Index of the cell containing `x ∈ [0,1)^d`.
    pub fn point_to_index(&self, x: &[f64]) -> Result<HilbertIndex> {
        Ok(self.cell_to_index(&self.quantize(x)?))
    }

    /// Centre of cell `k`.
    pub fn index_to_cell_center(&self, k: HilbertIndex) -> Result<Vec<f64>> {
        let scale = (-(self.depth as f64)).exp2();
        Ok(self.index_to_cell(k)?.into_iter().map(|c| (c as f64 + 0.5) * scale).collect())
    }

    /// Discretised curve `H_m`: centre of the cell whose index interval
    /// contains `t ∈ [0,1)`.
    pub fn curve_point(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::Domain { axis: 0, value: t });
        }
        let k = ((t * (self.total_bits() as f64).exp2()) as u128).min(self.cell_count() - 1);
        self.index_to_cell_center(HilbertIndex { value: k })
    }
}

/// Result of sorting points along the curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertOrder {
    /// `perm[i]` is the original position of the `i`-th point in curve order.
    pub perm: Vec<usize>,
    /// Adjacent pairs (in curve order) falling in the same cell.
    pub collisions: usize,
}

/// Sorts `xs` (row-major, `map.dim()` columns) along the curve.
///
/// Ties in the index are broken by lexicographic coordinate order, then
/// original position, so the order is total and deterministic.
pub fn hilbert_sort(map: &HilbertMap, xs: &[f64]) -> Result<HilbertOrder> {
    let d = map.dim();
    if xs.len() % d != 0 {
        return Err(Error::DimensionMismatch { expected: d, actual: xs.len() % d });
    }
    let n = xs.len() / d;
    let keys = crate::exec::try_map_indexed(n, |i| map.point_to_index(&xs[i * d..(i + 1) * d]))?;
    let mut perm: Vec<usize> = (0..n).collect();
    let cmp = |&a: &usize, &b: &usize| -> Ordering {
        keys[a].cmp(&keys[b]).then_with(|| {
            let (ra, rb) = (&xs[a * d..(a + 1) * d], &xs[b * d..(b + 1) * d]);
            ra.iter()
                .zip(rb)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::slice::ParallelSliceMut;
        perm.par_sort_unstable_by(cmp);
    }
    #[cfg(not(feature = "parallel"))]
    perm.sort_unstable_by(cmp);
    let collisions = perm.windows(2).filter(|w| keys[w[0]] == keys[w[1]]).count();
    Ok(HilbertOrder { perm, collisions })
}

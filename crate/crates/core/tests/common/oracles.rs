//! Reference computations that do not share code paths with the library.

/// Classic two-dimensional Hilbert index by recursive quadrant descent with
/// the U-shape rotation table.
pub fn hilbert2_recursive(x: u128, y: u128, level: u32) -> u128 {
    if level == 0 {
        return 0;
    }
    let half = 1u128 << (level - 1);
    let (rx, ry) = ((x >= half) as u128, (y >= half) as u128);
    let quadrant = (3 * rx) ^ ry;
    let (mut lx, mut ly) = (x % half, y % half);
    if ry == 0 {
        if rx == 1 {
            lx = half - 1 - lx;
            ly = half - 1 - ly;
        }
        std::mem::swap(&mut lx, &mut ly);
    }
    quadrant * half * half + hilbert2_recursive(lx, ly, level - 1)
}

/// Hilbert index by recursive subdivision, tracking the child frame as an
/// explicit reflection vector and axis rotation.
pub fn hilbert_frame_recursive(cell: &[u128], depth: u32) -> u128 {
    let n = cell.len();
    fn descend(cell: &[u128], level: u32, reflect: Vec<bool>, rotation: usize, acc: u128) -> u128 {
        let n = cell.len();
        if level == 0 {
            return acc;
        }
        let bit = level - 1;
        let global: Vec<bool> = cell.iter().map(|c| (c >> bit) & 1 == 1).collect();
        // Local corner: undo reflection, then rotate axes right by `rotation`.
        let local: Vec<bool> = (0..n).map(|j| {
            let src = (j + rotation) % n;
            global[src] ^ reflect[src]
        }).collect();
        // Position of the corner in Gray-code order (prefix xor from the top axis).
        let mut w = 0usize;
        let mut running = false;
        for j in (0..n).rev() {
            running ^= local[j];
            if running {
                w |= 1 << j;
            }
        }
        // Entry corner and direction of child `w`.
        let entry_bits: Vec<bool> = if w == 0 {
            vec![false; n]
        } else {
            let e = 2 * ((w - 1) / 2);
            let g = e ^ (e >> 1);
            (0..n).map(|j| (g >> j) & 1 == 1).collect()
        };
        let trailing = |v: usize| (0..).take_while(|k| (v >> k) & 1 == 1).count();
        let dirn = if w == 0 { 0 } else if w % 2 == 0 { trailing(w - 1) % n } else { trailing(w) % n };
        // Rotate the entry corner left into the parent frame and compose.
        let mut next_reflect = reflect.clone();
        for j in 0..n {
            let dst = (j + rotation) % n;
            next_reflect[dst] ^= entry_bits[j];
        }
        let next_rotation = (rotation + dirn + 1) % n;
        descend(cell, level - 1, next_reflect, next_rotation, (acc << n) | w as u128)
    }
    descend(cell, depth, vec![false; n], 1 % n, 0)
}

/// Inverse CDF by rescanning the prefix sum for every `u`: the smallest `m`
/// with `Σ_{i≤m} w_i ≥ u` and `w_m > 0`, or the last positive index when the
/// total falls short of `u`.
pub fn linear_scan_inverse_cdf(w: &[f64], us: &[f64]) -> Vec<usize> {
    us.iter()
        .map(|&u| {
            for m in 0..w.len() {
                let mut cum = 0.0;
                for wi in &w[..=m] {
                    cum += wi;
                }
                if cum >= u && w[m] > 0.0 {
                    return m;
                }
            }
            (0..w.len()).rev().find(|&m| w[m] > 0.0).unwrap()
        })
        .collect()
}

/// Smoothing means and variances of the scalar linear-Gaussian model by
/// forward-backward recursion on a uniform grid.
pub fn grid_hmm_smoother(rho: f64, sigma: f64, tau: f64, m0: f64, s0: f64, ys: &[f64], points: usize, half_width_sd: f64) -> (Vec<f64>, Vec<f64>) {
    let spread = s0.max(sigma / (1.0 - rho * rho).max(1e-12).sqrt());
    let lo = m0 - half_width_sd * spread;
    let h = 2.0 * half_width_sd * spread / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
    let gauss = |x: f64, m: f64, s: f64| (-0.5 * ((x - m) / s).powi(2)).exp() / s;
    let trans: Vec<Vec<f64>> = grid
        .iter()
        .map(|&a| grid.iter().map(|&b| gauss(b, rho * a, sigma) * h).collect())
        .collect();
    let nt = ys.len();
    let mut alpha = vec![vec![0.0; points]; nt];
    for t in 0..nt {
        for j in 0..points {
            let prior = if t == 0 {
                gauss(grid[j], m0, s0) * h
            } else {
                (0..points).map(|i| alpha[t - 1][i] * trans[i][j]).sum()
            };
            alpha[t][j] = prior * gauss(ys[t], grid[j], tau);
        }
        let s: f64 = alpha[t].iter().sum();
        alpha[t].iter_mut().for_each(|v| *v /= s);
    }
    let mut beta = vec![vec![1.0; points]; nt];
    for t in (0..nt.saturating_sub(1)).rev() {
        for i in 0..points {
            beta[t][i] = (0..points).map(|j| trans[i][j] * gauss(ys[t + 1], grid[j], tau) * beta[t + 1][j]).sum();
        }
        let s: f64 = beta[t].iter().sum();
        beta[t].iter_mut().for_each(|v| *v /= s);
    }
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for t in 0..nt {
        let p: Vec<f64> = (0..points).map(|i| alpha[t][i] * beta[t][i]).collect();
        let s: f64 = p.iter().sum();
        let m: f64 = p.iter().zip(&grid).map(|(a, x)| a * x).sum::<f64>() / s;
        let v: f64 = p.iter().zip(&grid).map(|(a, x)| a * (x - m).powi(2)).sum::<f64>() / s;
        means.push(m);
        vars.push(v);
    }
    (means, vars)
}

/// Conditional law of `x_2 | x_1` for a bivariate normal with zero mean.
pub fn bivariate_conditional(s11: f64, s12: f64, s22: f64, x1: f64) -> (f64, f64) {
    (s12 / s11 * x1, (s22 - s12 * s12 / s11).sqrt())
}

/// Sample mean and standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Discrepancy over half-open boxes `[a, b)` with corners on the grid
/// `k / bins`, by 2-D prefix counts. Only `s = 2`.
pub fn grid_discrepancy_2d(pts: &[[f64; 2]], bins: usize) -> f64 {
    let mut counts = vec![vec![0usize; bins + 1]; bins + 1];
    for p in pts {
        let (i, j) = ((p[0] * bins as f64) as usize, (p[1] * bins as f64) as usize);
        counts[i + 1][j + 1] += 1;
    }
    for i in 0..=bins {
        for j in 1..=bins {
            counts[i][j] += counts[i][j - 1];
        }
    }
    for i in 1..=bins {
        for j in 0..=bins {
            counts[i][j] += counts[i - 1][j];
        }
    }
    let n = pts.len() as f64;
    let h = 1.0 / bins as f64;
    let mut worst: f64 = 0.0;
    for a1 in 0..bins {
        for b1 in a1 + 1..=bins {
            for a2 in 0..bins {
                for b2 in a2 + 1..=bins {
                    let c = counts[b1][b2] + counts[a1][a2] - counts[a1][b2] - counts[b1][a2];
                    let vol = (b1 - a1) as f64 * h * (b2 - a2) as f64 * h;
                    worst = worst.max((c as f64 / n - vol).abs());
                }
            }
        }
    }
    worst
}

/// Kolmogorov-Smirnov distance of a sample from the uniform law on `[0,1)`.
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

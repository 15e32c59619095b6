//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Positional arguments select
//! criteria by id (`ac4`). The full-scale gain experiment runs only when
//! `SQMC_ACCEPTANCE_FULL=1` is set; `SQMC_REFERENCE_N` overrides its
//! reference particle count.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::models::FlatModel;
use common::oracles::{hilbert2_recursive, hilbert_frame_recursive, linear_scan_inverse_cdf, mean_and_se, median};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqmc::bench::{run_bench, BenchConfig, BenchReport, Comparison, ReferenceSpec};
use sqmc::filter::{inverse_cdf_resample, run_smc, run_sqmc, ParticleHistory};
use sqmc::fkmodel::{
    gaussian_rosenblatt_forward, gaussian_rosenblatt_inverse, kalman_filter, kalman_smoother, make_lg_model,
    make_sv_model, FeynmanKac, LgParams, ModelConfig, ModelKind, SvParams,
};
use sqmc::hilbert::{HilbertIndex, HilbertMap};
use sqmc::lowdisc::generate_sobol;
use sqmc::smooth::{
    backward_sampling_iid, backward_sampling_qmc, forward_smoothing, marginal_backward_weights, marginal_estimate,
    smoothing_estimate, TestFunction,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
    full_only: bool,
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let full = std::env::var("SQMC_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let criteria = [
        Criterion { id: "ac1", title: "Hilbert property suite", limit: secs(10), run: ac1_hilbert, full_only: false },
        Criterion { id: "ac2", title: "Rosenblatt round trip and moments", limit: secs(5), run: ac2_rosenblatt, full_only: false },
        Criterion { id: "ac3", title: "oracle equivalence on small instances", limit: secs(10), run: ac3_oracles, full_only: false },
        Criterion { id: "ac4", title: "filtering consistency", limit: secs(120), run: ac4_filtering, full_only: false },
        Criterion { id: "ac5", title: "smoothing consistency", limit: secs(300), run: ac5_smoothing, full_only: false },
        Criterion { id: "ac6", title: "backward pass conditional-expectation identity", limit: secs(120), run: ac6_identity, full_only: false },
        Criterion { id: "ac7", title: "gain-factor majority (quick profile)", limit: secs(300), run: ac7_quick, full_only: false },
        Criterion { id: "ac7-full", title: "gain-factor majority (T=399, N=2^10, R=100)", limit: secs(3600), run: ac7_full, full_only: true },
        Criterion { id: "ac8", title: "hybrid versus QMC backward gain table", limit: secs(300), run: ac8_hybrid, full_only: false },
        Criterion { id: "ac9", title: "exact reductions", limit: secs(60), run: ac9_reductions, full_only: false },
    ];
    let mut failed = 0;
    for c in &criteria {
        if !args.is_empty() && !args.iter().any(|a| a == c.id) {
            continue;
        }
        if c.full_only && !full && !args.iter().any(|a| a == c.id) {
            println!("{:<9} SKIP  {} (set SQMC_ACCEPTANCE_FULL=1)", c.id.to_uppercase(), c.title);
            continue;
        }
        let start = Instant::now();
        let out = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{:<9} {}  {} [{:.1} s of {} s]: {}{}",
            c.id.to_uppercase(),
            if pass { "PASS" } else { "FAIL" },
            c.title,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            out.detail,
            if in_time { "" } else { " (over time limit)" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn ac1_hilbert() -> Outcome {
    let mut violations = 0usize;
    // Adjacency, exhaustive.
    for m in 1..=5 {
        let map = HilbertMap::new(2, m).unwrap();
        let mut prev = map.index_to_cell(HilbertIndex { value: 0 }).unwrap();
        for k in 1..map.cell_count() {
            let cell = map.index_to_cell(HilbertIndex { value: k }).unwrap();
            let steps: Vec<u128> = prev.iter().zip(&cell).map(|(a, b)| a.abs_diff(*b)).collect();
            if steps.iter().filter(|s| **s == 1).count() != 1 || steps.iter().any(|s| *s > 1) {
                violations += 1;
            }
            prev = cell;
        }
    }
    let adjacency = violations;
    // Bi-measure: the index interval of k has length 2^-dm and lands in a
    // cell of volume 2^-dm that contains exactly the points indexed k.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..10_000 {
        let (d, m) = [(1usize, 20u32), (2, 10), (3, 8)][i % 3];
        let map = HilbertMap::new(d, m).unwrap();
        let k = rng.random_range(0..map.cell_count());
        let cell = map.index_to_cell(HilbertIndex { value: k }).unwrap();
        let side = (-(m as f64)).exp2();
        let width = (-(map.total_bits() as f64)).exp2();
        let lower: Vec<f64> = cell.iter().map(|c| *c as f64 * side).collect();
        let upper: Vec<f64> = cell.iter().map(|c| (*c as f64 + 1.0) * side * (1.0 - 1e-12)).collect();
        let left = map.curve_point(k as f64 * width).unwrap();
        let right = map.curve_point((k as f64 + 1.0) * width * (1.0 - 1e-12)).unwrap();
        let volume = side.powi(d as i32);
        let ok = map.point_to_index(&lower).unwrap().value == k
            && map.point_to_index(&upper).unwrap().value == k
            && map.point_to_index(&left).unwrap().value == k
            && map.point_to_index(&right).unwrap().value == k
            && volume == width;
        violations += usize::from(!ok);
    }
    let bimeasure = violations - adjacency;
    // Hölder with constant 4 in the sup norm; half the pairs are close.
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let map = HilbertMap::with_default_depth(d).unwrap();
        for i in 0..100_000 {
            let x: f64 = rng.random();
            let y: f64 = if i % 2 == 0 {
                rng.random()
            } else {
                let delta = 10f64.powf(-rng.random_range(1.0..12.0));
                (x + delta).min(1.0 - f64::EPSILON)
            };
            let (a, b) = (map.curve_point(x).unwrap(), map.curve_point(y).unwrap());
            let dist = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let bound = 4.0 * (x - y).abs().powf(1.0 / d as f64);
            if dist > bound {
                violations += 1;
            }
            if (x - y).abs() > 0.0 {
                worst = worst.max(dist / (x - y).abs().powf(1.0 / d as f64));
            }
        }
    }
    let holder = violations - adjacency - bimeasure;
    outcome(
        violations == 0,
        format!(
            "violations: adjacency {adjacency}, bi-measure {bimeasure}, Hölder {holder} (largest observed ratio {worst:.3})"
        ),
    )
}

fn ac2_rosenblatt() -> Outcome {
    let p = SvParams::default();
    let model = make_sv_model(p, vec![0.0; 2], None).unwrap();
    let k = model.transition_kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let prev = [-9.0 + 2.0 * (rng.random::<f64>() - 0.5), -9.0 + 2.0 * (rng.random::<f64>() - 0.5)];
        let v = [rng.random::<f64>().max(1e-12), rng.random::<f64>().max(1e-12)];
        let x = gaussian_rosenblatt_inverse(k, &prev, &v).unwrap();
        let back = gaussian_rosenblatt_forward(k, &prev, &x).unwrap();
        worst = worst.max((back[0] - v[0]).abs()).max((back[1] - v[1]).abs());
    }
    let prev = [-8.5, -9.5];
    let ps = generate_sobol(1 << 14, 2, Some(3)).unwrap();
    let xs: Vec<Vec<f64>> = ps.rows().map(|v| gaussian_rosenblatt_inverse(k, &prev, v).unwrap()).collect();
    let n = xs.len() as f64;
    let mean = [xs.iter().map(|x| x[0]).sum::<f64>() / n, xs.iter().map(|x| x[1]).sum::<f64>() / n];
    let mut expected_mean = [0.0; 2];
    k.mean(&prev, &mut expected_mean);
    let mean_err = (mean[0] - expected_mean[0]).abs().max((mean[1] - expected_mean[1]).abs());
    let mut cov_err: f64 = 0.0;
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let c = xs.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / n;
        cov_err = cov_err.max((c - k.covariance()[2 * i + j]).abs());
    }
    outcome(
        worst < 1e-8 && mean_err < 0.01 && cov_err < 0.05,
        format!("round-trip max error {worst:.2e}, mean error {mean_err:.2e}, covariance error {cov_err:.2e}"),
    )
}

fn ac3_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut cdf_mismatch = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=100);
        let mut w: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random() }).collect();
        if w.iter().all(|v| *v == 0.0) {
            w[n - 1] = 1.0;
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let mut us: Vec<f64> = (0..rng.random_range(1..=100)).map(|_| rng.random()).collect();
        if rng.random::<f64>() < 0.1 {
            us[0] = 0.0;
        }
        us.sort_by(f64::total_cmp);
        if inverse_cdf_resample(&w, &us).unwrap() != linear_scan_inverse_cdf(&w, &us) {
            cdf_mismatch += 1;
        }
    }
    let mut index_mismatch = 0;
    for i in 0..10_000 {
        let d = 2 + i % 2;
        let map = HilbertMap::with_default_depth(d).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let c = map.quantize(&x).unwrap();
        let expected =
            if d == 2 { hilbert2_recursive(c[0], c[1], map.depth()) } else { hilbert_frame_recursive(&c, map.depth()) };
        index_mismatch += usize::from(map.point_to_index(&x).unwrap().value != expected);
    }
    outcome(
        cdf_mismatch == 0 && index_mismatch == 0,
        format!("inverse-CDF mismatches {cdf_mismatch}/1000, Hilbert index mismatches {index_mismatch}/10000"),
    )
}

fn lg_instance(horizon: usize, data_seed: u64) -> (LgParams, Vec<f64>) {
    let p = LgParams::default();
    let (_, ys) = p.simulate(horizon, data_seed).unwrap();
    (p, ys)
}

fn ac4_filtering() -> Outcome {
    let (p, ys) = lg_instance(50, 41);
    let exact = kalman_filter(&p, &ys).unwrap().means[50];
    let model = make_lg_model(p, ys, None).unwrap();
    let err = |n: usize| {
        let e: Vec<f64> =
            (0..20).map(|s| (run_sqmc(&model, n, s).unwrap().filtering_means()[50][0] - exact).abs()).collect();
        median(&e)
    };
    let (small, large) = (err(1 << 7), err(1 << 13));
    let ratio = small / large;
    outcome(ratio >= 3.0, format!("median |error| at t=50: N=2^7 {small:.2e}, N=2^13 {large:.2e}, ratio {ratio:.1}"))
}

fn ac5_smoothing() -> Outcome {
    let (p, ys) = lg_instance(20, 51);
    let exact = kalman_smoother(&p, &ys).unwrap().means;
    let model = make_lg_model(p, ys, None).unwrap();
    let x1 = TestFunction::Coordinate(0);
    let reps = 50;
    let mut per_method: Vec<(&str, Vec<Vec<f64>>)> = vec![("marginal", vec![]), ("backward-qmc", vec![]), ("backward-iid", vec![])];
    for s in 0..reps {
        let hist = run_sqmc(&model, 1 << 10, s).unwrap();
        let sw = marginal_backward_weights(&model, &hist).unwrap();
        per_method[0].1.push(marginal_estimate(&hist, &sw, &x1));
        per_method[1].1.push(smoothing_estimate(&backward_sampling_qmc(&model, &hist, s).unwrap(), &x1));
        per_method[2].1.push(smoothing_estimate(&backward_sampling_iid(&model, &hist, s).unwrap(), &x1));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, runs) in &per_method {
        let mut worst: f64 = 0.0;
        for (t, e) in exact.iter().enumerate() {
            let col: Vec<f64> = runs.iter().map(|r| r[t]).collect();
            let (m, se) = mean_and_se(&col);
            worst = worst.max((m - e).abs() / se);
        }
        pass &= worst <= 3.0;
        parts.push(format!("{name} max |z| {worst:.2}"));
    }
    outcome(pass, format!("{} over t=0..20, 50 replications, N=2^10", parts.join(", ")))
}

fn ac6_identity() -> Outcome {
    let (p, ys) = lg_instance(20, 61);
    let model = make_lg_model(p, ys, None).unwrap();
    let hist = run_sqmc(&model, 1 << 8, 6).unwrap();
    let phi = TestFunction::Coordinate(0);
    let sw = marginal_backward_weights(&model, &hist).unwrap();
    let exact = marginal_estimate(&hist, &sw, &phi)[10];
    let draws: Vec<f64> =
        (0..500).map(|s| smoothing_estimate(&backward_sampling_iid(&model, &hist, 1000 + s).unwrap(), &phi)[10]).collect();
    let (m, se) = mean_and_se(&draws);
    let z = (m - exact) / se;
    outcome(z.abs() <= 3.0, format!("recursion {exact:.6}, mean of 500 passes {m:.6} (se {se:.1e}, z {z:.2})"))
}

fn quick_report() -> &'static Result<BenchReport, String> {
    static REPORT: OnceLock<Result<BenchReport, String>> = OnceLock::new();
    REPORT.get_or_init(|| {
        let reference = ReferenceSpec::Computed { n: 1 << 12, seed: 7, save: None };
        run_bench(&BenchConfig::quick(ModelKind::Sv2d, reference)).map_err(|e| e.to_string())
    })
}

fn describe_majority(report: &BenchReport, comparison: Comparison, n: usize) -> Outcome {
    match report.gain(comparison, n, "x1") {
        Some(g) => {
            let gains = g.gains();
            outcome(
                g.majority_supported(),
                format!(
                    "gain > 1 at {:.0}% of t (bootstrap 90% interval {:.0}% to {:.0}%), median gain {:.2}, reference {}",
                    100.0 * g.fraction_above_one,
                    100.0 * g.fraction_lo,
                    100.0 * g.fraction_hi,
                    median(&gains),
                    g.reference
                ),
            )
        }
        None => outcome(false, "gain table missing"),
    }
}

fn ac7_quick() -> Outcome {
    match quick_report() {
        Ok(r) => describe_majority(r, Comparison::Marginal, 1 << 8),
        Err(e) => outcome(false, e.clone()),
    }
}

fn ac7_full() -> Outcome {
    let n_ref = std::env::var("SQMC_REFERENCE_N").ok().and_then(|v| v.parse().ok()).unwrap_or(1 << 13);
    let mut cfg = BenchConfig::full(ModelKind::Sv2d, ReferenceSpec::Computed { n: n_ref, seed: 7, save: None });
    cfg.ns = vec![1 << 10];
    cfg.methods = vec![sqmc::SmoothingMethod::Marginal];
    match run_bench(&cfg) {
        Ok(r) => describe_majority(&r, Comparison::Marginal, 1 << 10),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn ac8_hybrid() -> Outcome {
    match quick_report() {
        Ok(r) => match r.gain(Comparison::Hybrid, 1 << 8, "x1") {
            Some(g) if g.rows.iter().all(|row| row.gain.is_finite() && row.gain > 0.0) => outcome(
                true,
                format!(
                    "MSE(IID backward)/MSE(QMC backward) > 1 at {:.0}% of t, median {:.2} (direction recorded, not gated)",
                    100.0 * g.fraction_above_one,
                    median(&g.gains())
                ),
            ),
            Some(_) => outcome(false, "non-finite gain in hybrid table"),
            None => outcome(false, "hybrid gain table missing"),
        },
        Err(e) => outcome(false, e.clone()),
    }
}

fn log_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() }).fold(0.0, f64::max)
}

fn ac9_reductions() -> Outcome {
    let n = 64;
    let mut worst_uniform: f64 = 0.0;
    let flat = FlatModel::constant_potential(5);
    let histories: Vec<ParticleHistory> = vec![run_smc(&flat, n, 1).unwrap(), run_sqmc(&flat, n, 1).unwrap()];
    let uniform = vec![-(n as f64).ln(); n];
    for h in &histories {
        for lw in &h.log_weights {
            worst_uniform = worst_uniform.max(log_gap(lw, &uniform));
        }
    }
    let tilted = FlatModel::new(6, vec![0.5, 1.0, -2.0, 3.0, 0.1, -0.7, 4.0]);
    let mut worst_kernel: f64 = 0.0;
    for h in [run_smc(&tilted, n, 2).unwrap(), run_sqmc(&tilted, n, 2).unwrap()] {
        let sw = marginal_backward_weights(&tilted, &h).unwrap();
        for t in 0..=h.horizon() {
            worst_kernel = worst_kernel.max(log_gap(&sw.log_weights[t], &h.log_weights[t]));
        }
    }
    let cfg = ModelConfig::from_json(r#"{"model":"lg1d","T":0,"y":[0.7]}"#).unwrap();
    let (model, _) = cfg.build().unwrap();
    let h = run_sqmc(&model, n, 3).unwrap();
    let sw = marginal_backward_weights(&model, &h).unwrap();
    let fs = forward_smoothing(&model, n, 3).unwrap();
    let fs_log: Vec<f64> = fs.trajectories.weights.iter().map(|w| w.ln()).collect();
    let worst_t0 = log_gap(&sw.log_weights[0], &h.log_weights[0])
        .max(log_gap(&fs_log, &h.log_weights[0]))
        .max(log_gap(&fs.trajectories.states[0], &h.states[0]));
    let pass = worst_uniform <= 1e-12 && worst_kernel <= 1e-12 && worst_t0 <= 1e-12 && model.horizon() == 0;
    outcome(
        pass,
        format!(
            "max log-weight gap: flat potential {worst_uniform:.1e}, constant kernel {worst_kernel:.1e}, T=0 {worst_t0:.1e}"
        ),
    )
}

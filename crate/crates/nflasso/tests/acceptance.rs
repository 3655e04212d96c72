//! End-to-end acceptance gate: nine checks covering solver optimality,
//! the plain-lasso reduction, edge-level error control, benchmark trends,
//! the tail-bound identities, quantile accuracy, sampler fidelity, and
//! closed-form constants. Each check prints one PASS line with its
//! measured slack (visible under --nocapture); a failure trips the
//! assert with the same detail.
//!
//! Oracles used here are written from scratch in this file (projected
//! subgradient descent, sign-pattern enumeration, Gauss-Legendre tail
//! integration) so checks do not reuse the library code paths they
//! certify.

use std::time::Instant;

use rayon::prelude::*;

use nflasso::estimator::{
    fit_graph, fit_node, nfl_kkt_check, select_penalties, sigma_hat, standardize, EdgeRule,
    FitConfig, PenaltyMode, StandardizedData,
};
use nflasso::lasso::lasso_cd;
use nflasso::linalg::{normal_quantile_upper, DenseMatrix};
use nflasso::localgraph::{build_difference_matrix, DifferenceMatrix, LocalGraph};
use nflasso::sim::{
    aggregate_outcomes, chain_precision, default_distant_blocks, mvn_sample, run_replicate,
    MethodSpec, SimulationSpec,
};
use nflasso::theory::{l1_bound_constant, type1_reduction, PrecisionModel};

fn lcg(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    ((*state >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Reduced regression view for node a: columns except a, response a,
/// fusion rows reindexed into the reduced coordinates.
fn reduced_problem(
    data: &StandardizedData,
    a: usize,
    d_a: &DifferenceMatrix,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<(usize, usize)>) {
    let p = data.p();
    let x = data.matrix();
    let cols: Vec<Vec<f64>> = (0..p).filter(|&b| b != a).map(|b| x.column(b)).collect();
    let y = x.column(a);
    let shift = |i: usize| if i > a { i - 1 } else { i };
    let rows = d_a.rows().iter().map(|&(i, j)| (shift(i), shift(j))).collect();
    (cols, y, rows)
}

fn fused_objective(
    cols: &[Vec<f64>],
    y: &[f64],
    rows: &[(usize, usize)],
    lambda: f64,
    mu: f64,
    theta: &[f64],
) -> f64 {
    let n = y.len();
    let mut ss = 0.0;
    for i in 0..n {
        let mut r = y[i];
        for (j, col) in cols.iter().enumerate() {
            r -= theta[j] * col[i];
        }
        ss += r * r;
    }
    let l1: f64 = theta.iter().map(|t| t.abs()).sum();
    let fused: f64 = rows.iter().map(|&(i, j)| (theta[i] - theta[j]).abs()).sum();
    ss / n as f64 + lambda * l1 + mu * fused
}

#[test]
fn criterion_1_kkt_certification() {
    let start = Instant::now();
    let combos = [(5usize, 50usize), (5, 200), (10, 50), (10, 200), (20, 50), (20, 200)];
    let worst = (0..100usize)
        .into_par_iter()
        .map(|i| {
            let (p, n) = combos[i % combos.len()];
            let model = chain_precision(p, 0.2, &[]).unwrap();
            let raw = mvn_sample(&model, n, 1000 + i as u64).unwrap();
            let data = standardize(&raw).unwrap();
            let config = FitConfig {
                penalties: PenaltyMode::DataDriven { alpha: 0.05, k: 1.0, beta0: 0.25 },
                rule: EdgeRule::Union,
                ..FitConfig::default()
            };
            let fit = fit_graph(&data, model.local_graph(), &config).unwrap();
            let d = build_difference_matrix(model.local_graph());
            let mut worst_ratio = 0.0f64;
            for nf in &fit.node_fits {
                let d_a = d.exclude_node(nf.node).unwrap();
                let report =
                    nfl_kkt_check(&nf.theta_hat, &data, nf.node, nf.lambda, nf.mu, &d_a, 1e-7);
                let limit = 1e-6 * (1.0 + nf.lambda);
                worst_ratio = worst_ratio.max(report.max_violation / limit);
            }
            worst_ratio
        })
        .reduce(|| 0.0, f64::max);
    let elapsed = start.elapsed();
    assert!(
        worst <= 1.0,
        "criterion 1: max KKT violation reached {worst:.3e} of its budget"
    );
    assert!(elapsed.as_secs_f64() <= 60.0, "criterion 1 runtime {elapsed:.2?}");
    println!(
        "criterion 1 (kkt certification): PASS, worst violation at {:.2e} of the 1e-6(1+lambda) budget, {:.2?}",
        worst, elapsed
    );
}

/// Normalized-step subgradient descent with a geometrically shrinking
/// step budget, restarted from the incumbent each stage. One million
/// iterations total.
fn subgradient_oracle(
    cols: &[Vec<f64>],
    y: &[f64],
    rows: &[(usize, usize)],
    lambda: f64,
    mu: f64,
) -> f64 {
    let n = y.len();
    let k = cols.len();
    let sgn = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut theta = vec![0.0f64; k];
    let mut best_theta = theta.clone();
    let mut best = fused_objective(cols, y, rows, lambda, mu, &theta);
    let mut delta = 0.1 * best.max(1.0);
    let stages = 40;
    let per_stage = 1_000_000 / stages;
    let mut resid = vec![0.0f64; n];
    let mut grad = vec![0.0f64; k];
    for _ in 0..stages {
        theta.copy_from_slice(&best_theta);
        for _ in 0..per_stage {
            resid.copy_from_slice(y);
            for (j, col) in cols.iter().enumerate() {
                if theta[j] != 0.0 {
                    for i in 0..n {
                        resid[i] -= theta[j] * col[i];
                    }
                }
            }
            let mut ss = 0.0;
            for &r in &resid {
                ss += r * r;
            }
            for (j, col) in cols.iter().enumerate() {
                let mut dp = 0.0;
                for i in 0..n {
                    dp += col[i] * resid[i];
                }
                grad[j] = -2.0 * dp / n as f64 + lambda * sgn(theta[j]);
            }
            let mut obj = ss / n as f64;
            for j in 0..k {
                obj += lambda * theta[j].abs();
            }
            for &(i, j) in rows {
                let diff = theta[i] - theta[j];
                obj += mu * diff.abs();
                let s = sgn(diff);
                grad[i] += mu * s;
                grad[j] -= mu * s;
            }
            if obj < best {
                best = obj;
                best_theta.copy_from_slice(&theta);
            }
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-12);
            let step = delta / gnorm;
            for j in 0..k {
                theta[j] -= step * grad[j];
            }
        }
        delta *= 0.5;
    }
    best
}

/// Exhaustive candidate list for the two-column fused problem with one
/// difference row: the zero point, both axis soft thresholds, all eight
/// stationarity sign patterns, and the tied direction. The true
/// objective picks the winner, so inconsistent candidates are harmless.
fn enumeration_oracle(cols: &[Vec<f64>], y: &[f64], lambda: f64, mu: f64) -> f64 {
    assert!(cols.len() == 2);
    let n = y.len() as f64;
    let soft = |z: f64, t: f64| {
        if z > t {
            z - t
        } else if z < -t {
            z + t
        } else {
            0.0
        }
    };
    let dotv = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<f64>();
    let g11 = dotv(&cols[0], &cols[0]) / n;
    let g12 = dotv(&cols[0], &cols[1]) / n;
    let g22 = dotv(&cols[1], &cols[1]) / n;
    let b1 = dotv(&cols[0], y) / n;
    let b2 = dotv(&cols[1], y) / n;
    let mut candidates = vec![vec![0.0, 0.0]];
    candidates.push(vec![soft(b1, (lambda + mu) / 2.0) / g11, 0.0]);
    candidates.push(vec![0.0, soft(b2, (lambda + mu) / 2.0) / g22]);
    for s1 in [-1.0f64, 1.0] {
        for s2 in [-1.0f64, 1.0] {
            for sf in [-1.0f64, 1.0] {
                // stationarity with both coordinates active and unequal:
                // G theta = b - (lambda/2) s - (mu/2) sf (1, -1)
                let r1 = b1 - lambda / 2.0 * s1 - mu / 2.0 * sf;
                let r2 = b2 - lambda / 2.0 * s2 + mu / 2.0 * sf;
                let det = g11 * g22 - g12 * g12;
                if det.abs() > 1e-14 {
                    candidates.push(vec![(r1 * g22 - r2 * g12) / det, (g11 * r2 - g12 * r1) / det]);
                }
            }
        }
    }
    let sum: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(&a, &b)| a + b).collect();
    let t = soft(dotv(&sum, y) / n, lambda) / (dotv(&sum, &sum) / n);
    candidates.push(vec![t, t]);
    candidates
        .iter()
        .map(|c| fused_objective(cols, y, &[(0, 1)], lambda, mu, c))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_2_objective_vs_independent_oracles() {
    // part one: 25 mixed instances against the subgradient oracle
    let ks = [0.5, 1.0, 2.0];
    let b0s = [0.0, 0.25, 0.5];
    let worst_sub = (0..25usize)
        .into_par_iter()
        .map(|i| {
            let p = 3 + i % 3;
            let n = 40 + (i * 7) % 41;
            let model = chain_precision(p, 0.2, &[]).unwrap();
            let raw = mvn_sample(&model, n, 2000 + i as u64).unwrap();
            let data = standardize(&raw).unwrap();
            let a = i % p;
            let plan = select_penalties(
                n,
                p,
                0.05,
                sigma_hat(data.matrix(), a),
                ks[i % 3],
                b0s[(i / 3) % 3],
            )
            .unwrap();
            let d = build_difference_matrix(model.local_graph());
            let fit = fit_node(&data, a, plan.lambda, plan.mu, &d, 1e-8, 100_000).unwrap();
            let d_a = d.exclude_node(a).unwrap();
            let (cols, y, rows) = reduced_problem(&data, a, &d_a);
            let oracle = subgradient_oracle(&cols, &y, &rows, plan.lambda, plan.mu);
            (fit.objective - oracle).abs()
        })
        .reduce(|| 0.0, f64::max);
    assert!(
        worst_sub <= 1e-6,
        "criterion 2: subgradient-oracle objective gap {worst_sub:.3e}"
    );

    // part two: 25 three-node instances against sign-pattern enumeration
    let mut st = 77u64;
    let mut worst_enum = 0.0f64;
    for i in 0..25usize {
        let n = 30 + (i * 11) % 51;
        let model = chain_precision(3, 0.2, &[]).unwrap();
        let raw = mvn_sample(&model, n, 2100 + i as u64).unwrap();
        let data = standardize(&raw).unwrap();
        let a = if i % 2 == 0 { 0 } else { 2 };
        let lambda = 0.05 + 0.4 * lcg(&mut st);
        let mu = 0.5 * lcg(&mut st);
        let d = build_difference_matrix(model.local_graph());
        let fit = fit_node(&data, a, lambda, mu, &d, 1e-8, 100_000).unwrap();
        let d_a = d.exclude_node(a).unwrap();
        let (cols, y, rows) = reduced_problem(&data, a, &d_a);
        assert_eq!(rows, vec![(0, 1)]);
        let oracle = enumeration_oracle(&cols, &y, lambda, mu);
        worst_enum = worst_enum.max((fit.objective - oracle).abs());
    }
    assert!(
        worst_enum <= 1e-8,
        "criterion 2: enumeration-oracle objective gap {worst_enum:.3e}"
    );
    println!(
        "criterion 2 (objective equivalence): PASS, subgradient gap {:.2e} (limit 1e-6), enumeration gap {:.2e} (limit 1e-8)",
        worst_sub, worst_enum
    );
}

#[test]
fn criterion_3_plain_lasso_reduction() {
    let worst = (0..100usize)
        .into_par_iter()
        .map(|i| {
            let p = 4 + i % 7;
            let n = 30 + (i * 13) % 71;
            let model = chain_precision(p, 0.2, &[]).unwrap();
            let raw = mvn_sample(&model, n, 3000 + i as u64).unwrap();
            let data = standardize(&raw).unwrap();
            let a = i % p;
            let plan =
                select_penalties(n, p, 0.05, sigma_hat(data.matrix(), a), 1.0, 0.25).unwrap();
            let d = build_difference_matrix(model.local_graph());
            let fit = fit_node(&data, a, plan.lambda, 0.0, &d, 1e-8, 100_000).unwrap();

            let keep: Vec<usize> = (0..p).filter(|&b| b != a).collect();
            let x = data.matrix();
            let mut flat = Vec::with_capacity(n * (p - 1));
            for r in 0..n {
                for &b in &keep {
                    flat.push(x.get(r, b));
                }
            }
            let x_red = DenseMatrix::from_vec(n, p - 1, flat).unwrap();
            let sol = lasso_cd(&x_red, &x.column(a), plan.lambda, 1e-8, 100_000, None).unwrap();
            let mut gap = 0.0f64;
            for (j, &b) in keep.iter().enumerate() {
                gap = gap.max((fit.theta_hat[b] - sol.coefficients[j]).abs());
            }
            gap = gap.max(fit.theta_hat[a].abs());
            gap
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst <= 1e-10, "criterion 3: max coefficient gap {worst:.3e}");
    println!(
        "criterion 3 (plain-lasso reduction): PASS, max elementwise gap {:.2e} (limit 1e-10)",
        worst
    );
}

#[test]
fn criterion_4_cross_component_level_control() {
    let start = Instant::now();
    // two independent 10-node chains; the local graph still spans the
    // full 20-node line, so the fusion penalty bridges the gap the truth
    // does not have
    let p = 20;
    let mut omega = DenseMatrix::identity(p);
    for i in 0..p - 1 {
        if i == 9 {
            continue;
        }
        omega.set(i, i + 1, 0.2);
        omega.set(i + 1, i, 0.2);
    }
    let model = PrecisionModel::new(omega, LocalGraph::chain(p), None).unwrap();
    let replicates = 200usize;
    let crossings: usize = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let raw = mvn_sample(&model, 500, 4000 + r as u64).unwrap();
            let data = standardize(&raw).unwrap();
            let config = FitConfig {
                penalties: PenaltyMode::DataDriven { alpha: 0.05, k: 1.0, beta0: 0.0 },
                rule: EdgeRule::Union,
                ..FitConfig::default()
            };
            let fit = fit_graph(&data, model.local_graph(), &config).unwrap();
            usize::from(fit.estimate.edges.iter().any(|&(a, b)| a <= 9 && b >= 10))
        })
        .sum();
    let fraction = crossings as f64 / replicates as f64;
    let limit = 0.05 + 2.0 * (0.05 * 0.95 / replicates as f64).sqrt();
    let elapsed = start.elapsed();
    assert!(
        fraction <= limit,
        "criterion 4: cross-component fraction {fraction:.3} exceeds {limit:.3}"
    );
    assert!(elapsed.as_secs_f64() <= 300.0, "criterion 4 runtime {elapsed:.2?}");
    println!(
        "criterion 4 (level control): PASS, cross-component fraction {:.3} (limit {:.3}), {:.2?}",
        fraction, limit, elapsed
    );
}

#[test]
fn criterion_5_benchmark_trend() {
    let start = Instant::now();
    let spec = SimulationSpec {
        model: chain_precision(50, 0.2, &default_distant_blocks()).unwrap(),
        n_grid: vec![50, 100, 500],
        replicates: 50,
        methods: vec![
            MethodSpec::Nfl {
                alpha: 0.05,
                k: 1.0,
                beta0: 0.8,
                rule: EdgeRule::Union,
                tau: 1e-6,
            },
            MethodSpec::Mb { alpha: 0.05, rule: EdgeRule::Union, tau: 1e-6 },
        ],
        base_seed: 5000,
    };
    let mut keys = Vec::new();
    for method in 0..spec.methods.len() {
        for &n in &spec.n_grid {
            for r in 0..spec.replicates {
                keys.push((method, n, r));
            }
        }
    }
    let outcomes: Vec<_> = keys
        .into_par_iter()
        .map(|(method, n, r)| run_replicate(&spec, method, n, r))
        .collect();
    let report = aggregate_outcomes(&spec, outcomes).unwrap();
    let tp = |method: usize, n: usize| {
        let cell = report
            .cells
            .iter()
            .find(|c| c.method == method && c.n == n)
            .unwrap();
        assert_eq!(cell.excluded, 0, "replicates must not drop out");
        cell.tp_mean
    };
    let margin50 = tp(0, 50) - tp(1, 50);
    let margin100 = tp(0, 100) - tp(1, 100);
    let monotone = tp(0, 50) <= tp(0, 100) && tp(0, 100) <= tp(0, 500);
    let elapsed = start.elapsed();
    assert!(margin50 >= 10.0, "criterion 5: margin at n=50 is {margin50:.2}");
    assert!(margin100 >= 20.0, "criterion 5: margin at n=100 is {margin100:.2}");
    assert!(
        monotone,
        "criterion 5: tp means {:.2}, {:.2}, {:.2} not non-decreasing",
        tp(0, 50),
        tp(0, 100),
        tp(0, 500)
    );
    assert!(elapsed.as_secs_f64() <= 900.0, "criterion 5 runtime {elapsed:.2?}");
    println!(
        "criterion 5 (benchmark trend): PASS, margins {:.2} at n=50 and {:.2} at n=100, tp {:.2} <= {:.2} <= {:.2}, {:.2?}",
        margin50,
        margin100,
        tp(0, 50),
        tp(0, 100),
        tp(0, 500),
        elapsed
    );
}

#[test]
fn criterion_6_tail_reduction_identity() {
    let mut st = 66u64;
    let mut worst_rel = 0.0f64;
    for _ in 0..10_000 {
        let d1 = 0.5 + lcg(&mut st);
        let d2 = 0.5 + lcg(&mut st);
        let delta1 = 0.5 * lcg(&mut st);
        let delta2 = 0.5 * lcg(&mut st);
        let beta0 = 0.4 * lcg(&mut st);
        let eps = 0.3 + 0.4 * lcg(&mut st);
        let n = 10 + (lcg(&mut st) * 190.0) as usize;
        let ssq = 0.5 + 1.5 * lcg(&mut st);
        let (lasso, nfl, reduction) =
            type1_reduction(d1, d2, delta1, delta2, beta0, eps, n, ssq).unwrap();
        assert!(nfl <= lasso, "fusion must not raise the tail bound");
        // independent bracketed-product evaluation
        let rate = (n as f64).powf(eps) / ssq;
        let a = d1 / 2.0 * (1.0 - delta1);
        let b = d2 / 2.0 * (1.0 - delta2) * (n as f64).powf(beta0);
        let product = (1.0 - (-(2.0 * a * b + b * b) * rate).exp()) * lasso;
        let scale = reduction.abs().max(lasso);
        if scale > 0.0 {
            worst_rel = worst_rel.max((reduction - product).abs() / scale);
        }
    }
    assert!(worst_rel <= 1e-12, "criterion 6: identity deviation {worst_rel:.3e}");
    println!(
        "criterion 6 (tail reduction identity): PASS, worst relative deviation {:.2e} over 10000 draws (limit 1e-12)",
        worst_rel
    );
}

/// Upper normal tail by composite 20-point Gauss-Legendre quadrature on
/// half-unit segments over [z, z+45]; the remainder beyond is far below
/// the comparison tolerance for every z in use.
fn gauss_legendre_tail(z: f64) -> f64 {
    const NODES: [f64; 10] = [
        0.0765265211334973,
        0.2277858511416451,
        0.3737060887154195,
        0.5108670019508271,
        0.6360536807265150,
        0.7463319064601508,
        0.8391169718222188,
        0.9122344282513259,
        0.9639719272779138,
        0.9931285991850949,
    ];
    const WEIGHTS: [f64; 10] = [
        0.1527533871307258,
        0.1491729864726037,
        0.1420961093183820,
        0.1316886384491766,
        0.1181945319615184,
        0.1019301198172404,
        0.0832767415767048,
        0.0626720483341091,
        0.0406014298003869,
        0.0176140071391521,
    ];
    let inv_sqrt_2pi = 0.3989422804014327f64;
    let phi = |t: f64| inv_sqrt_2pi * (-0.5 * t * t).exp();
    let mut total = 0.0;
    let width = 0.5f64;
    let segments = 90;
    for s in 0..segments {
        let lo = z + s as f64 * width;
        let mid = lo + width / 2.0;
        let half = width / 2.0;
        let mut seg = 0.0;
        for i in 0..10 {
            seg += WEIGHTS[i] * (phi(mid + half * NODES[i]) + phi(mid - half * NODES[i]));
        }
        total += seg * half;
    }
    total
}

#[test]
fn criterion_7_quantile_accuracy() {
    let lo = 1e-12f64.ln();
    let hi = 0.5f64.ln();
    let points = 241;
    let mut worst = 0.0f64;
    for i in 0..points {
        // round-trip through ln/exp can land a hair outside the domain
        let q = (lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .exp()
            .clamp(1e-12, 0.5);
        let z = normal_quantile_upper(q).unwrap();
        let tail = gauss_legendre_tail(z);
        worst = worst.max((tail - q).abs() / q);
    }
    assert!(worst <= 1e-9, "criterion 7: relative quantile error {worst:.3e}");
    println!(
        "criterion 7 (quantile accuracy): PASS, worst relative error {:.2e} over a 241-point log grid (limit 1e-9)",
        worst
    );
}

#[test]
fn criterion_8_sampler_fidelity() {
    let model = chain_precision(5, 0.2, &[]).unwrap();
    let n = 100_000usize;
    let x = mvn_sample(&model, n, 8800).unwrap();
    let cols: Vec<Vec<f64>> = (0..5).map(|j| x.column(j)).collect();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut worst = 0.0f64;
    for i in 0..5 {
        for j in i..5 {
            let mut cov = 0.0;
            for r in 0..n {
                cov += (cols[i][r] - means[i]) * (cols[j][r] - means[j]);
            }
            cov /= (n - 1) as f64;
            worst = worst.max((cov - model.sigma().get(i, j)).abs());
        }
    }
    assert!(worst <= 0.02, "criterion 8: covariance deviation {worst:.4}");
    let again = mvn_sample(&model, n, 8800).unwrap();
    for i in 0..n {
        for j in 0..5 {
            assert_eq!(
                x.get(i, j).to_bits(),
                again.get(i, j).to_bits(),
                "criterion 8: rerun not bit-identical at ({i}, {j})"
            );
        }
    }
    println!(
        "criterion 8 (sampler fidelity): PASS, max covariance deviation {:.4} (limit 0.02), rerun bit-identical",
        worst
    );
}

#[test]
fn criterion_9_bound_constant() {
    for (s0, phi0) in [(1usize, 1.0f64), (3, 2.0), (7, 0.5), (12, 1.0)] {
        let got = l1_bound_constant(1.0, s0, phi0);
        let direct = 224.0 * (1.0 + 4.0) * (1.0 + 4.0) * (3.0 + 14.0) / 1.0 * s0 as f64
            / (phi0 * phi0);
        let closed = 95_200.0 * s0 as f64 / (phi0 * phi0);
        assert!(got == direct && got == closed, "criterion 9: {got} vs {direct} vs {closed}");
    }
    println!(
        "criterion 9 (bound constant): PASS, 95200*s0/phi0^2 matched exactly for four (s0, phi0) pairs"
    );
}

//! Computable diagnostics for the model-level conditions the estimator's
//! guarantees lean on: population regression coefficients, neighborhood
//! stability measures, restricted-eigenvalue and compatibility probes,
//! and the closed-form error bounds.
//!
//! Everything here is exact given Ω; nothing estimates from data except
//! the two design-matrix probes (`restricted_eigenvalue`,
//! `check_compatibility`).

use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::lasso::sign;
use crate::linalg::{dot, min_eigen_sym, DenseMatrix, SpdFactor};
use crate::localgraph::{DifferenceMatrix, LocalGraph};
use crate::Error;

/// A Gaussian graphical model given by its precision matrix, with the
/// implied covariance and edge set cached.
#[derive(Debug, Clone)]
pub struct PrecisionModel {
    p: usize,
    omega: DenseMatrix,
    sigma: DenseMatrix,
    true_edges: Vec<(usize, usize)>,
    local_graph: LocalGraph,
}

impl PrecisionModel {
    /// Validate Ω (symmetric, SPD), cache Σ = Ω⁻¹, and fix the edge set.
    ///
    /// When `true_edges` is given it must match the nonzero pattern of Ω
    /// off the diagonal at tolerance 1e-12; when absent it is derived
    /// from that pattern.
    pub fn new(
        omega: DenseMatrix,
        local_graph: LocalGraph,
        true_edges: Option<Vec<(usize, usize)>>,
    ) -> Result<Self, Error> {
        let p = omega.rows();
        if omega.cols() != p || local_graph.node_count() != p {
            return Err(Error::DimensionMismatch);
        }
        if !omega.is_symmetric(1e-12) {
            return Err(Error::DomainError);
        }
        let sigma = SpdFactor::cholesky(&omega)?.inverse();
        let mut derived = Vec::new();
        for a in 0..p {
            for b in a + 1..p {
                if float::abs(omega.get(a, b)) > 1e-12 {
                    derived.push((a, b));
                }
            }
        }
        let true_edges = match true_edges {
            None => derived,
            Some(mut given) => {
                for e in given.iter_mut() {
                    if e.0 > e.1 {
                        *e = (e.1, e.0);
                    }
                }
                given.sort_unstable();
                if given != derived {
                    return Err(Error::ConstraintViolation);
                }
                given
            }
        };
        Ok(PrecisionModel {
            p,
            omega,
            sigma,
            true_edges,
            local_graph,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn omega(&self) -> &DenseMatrix {
        &self.omega
    }

    /// Covariance Σ = Ω⁻¹.
    pub fn sigma(&self) -> &DenseMatrix {
        &self.sigma
    }

    pub fn true_edges(&self) -> &[(usize, usize)] {
        &self.true_edges
    }

    pub fn local_graph(&self) -> &LocalGraph {
        &self.local_graph
    }

    /// True neighbors of a node, ascending.
    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(i, j) in &self.true_edges {
            if i == a {
                out.push(j);
            } else if j == a {
                out.push(i);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Population regression coefficients of X_a on the rest:
/// θᵃ_b = −ω_{ab}/ω_{aa}, θᵃ_a = 0.
pub fn theta_population(model: &PrecisionModel, a: usize) -> Vec<f64> {
    assert!(a < model.p);
    let mut theta = vec![0.0; model.p];
    let daa = model.omega.get(a, a);
    for b in 0..model.p {
        if b != a {
            theta[b] = -model.omega.get(a, b) / daa;
        }
    }
    theta
}

/// Population regression coefficients of X_b on the coordinates in S:
/// (Σ_{S,S})⁻¹ Σ_{S,b}, in the order S is given.
pub fn theta_restricted(model: &PrecisionModel, b: usize, s: &[usize]) -> Result<Vec<f64>, Error> {
    if s.is_empty() {
        return Err(Error::EmptySet);
    }
    if b >= model.p || s.iter().any(|&k| k >= model.p) {
        return Err(Error::IndexOutOfRange);
    }
    let m = s.len();
    let mut gram = DenseMatrix::zeros(m, m);
    let mut rhs = vec![0.0; m];
    for (i, &si) in s.iter().enumerate() {
        for (j, &sj) in s.iter().enumerate() {
            gram.set(i, j, model.sigma.get(si, sj));
        }
        rhs[i] = model.sigma.get(si, b);
    }
    crate::linalg::cholesky_solve(&gram, &rhs)
}

/// Neighborhood stability measure
/// S_a(b) = Σ_{k∈ne_a} sgn(θ^{a,ne_a}_k)·θ^{b,ne_a}_k, with sgn(0) = 0.
/// Returns 0 when a has no true neighbors.
pub fn stability_s(model: &PrecisionModel, a: usize, b: usize) -> Result<f64, Error> {
    let ne = model.neighbors(a);
    if ne.is_empty() {
        return Ok(0.0);
    }
    let own = theta_restricted(model, a, &ne)?;
    let other = theta_restricted(model, b, &ne)?;
    Ok(own.iter().zip(&other).map(|(&o, &t)| sign(o) * t).sum())
}

/// Fused-penalty stability measure around the active difference set
/// 𝓛_a = { k : [(Dᵃ)ᵀ sgn(Dᵃθᵃ)]_k ≠ 0 }:
/// T_a(b) = Σ_{k∈𝓛_a} [(Dᵃ)ᵀ sgn(Dᵃθᵃ)]_k · θ^{b,𝓛_a}_k, sgn(0) = 0.
/// Returns 0 when 𝓛_a is empty (θᵃ locally constant for node a).
pub fn stability_t(
    model: &PrecisionModel,
    d: &DifferenceMatrix,
    a: usize,
    b: usize,
) -> Result<f64, Error> {
    if d.col_count() != model.p {
        return Err(Error::DimensionMismatch);
    }
    let d_a = d.exclude_node(a)?;
    let theta = theta_population(model, a);
    let mut agg = vec![0.0; model.p];
    for &(i, j) in d_a.rows() {
        let s = sign(theta[i] - theta[j]);
        agg[i] += s;
        agg[j] -= s;
    }
    let active: Vec<usize> = (0..model.p).filter(|&k| agg[k] != 0.0).collect();
    if active.is_empty() {
        return Ok(0.0);
    }
    let coef = theta_restricted(model, b, &active)?;
    Ok(active.iter().zip(&coef).map(|(&k, &t)| agg[k] * t).sum())
}

/// Worst-case stability and signal-size summary of a model.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport {
    /// max |S_a(b)| over b outside ne_a ∪ {a}; below 1 means the
    /// lasso-side stability condition holds.
    pub delta1: f64,
    /// max |T_a(b)|/‖Dᵃ_{·b}‖₁ over b outside 𝓛_a ∪ {a} with a nonzero
    /// column; below 1 means the fused-side condition holds.
    pub delta2_ratio: f64,
    /// min |π_{ab}| over true edges, π_{ab} = −ω_{ab}/√(ω_{aa}ω_{bb});
    /// 0 when the model has no edges.
    pub min_partial_correlation: f64,
    pub max_neighborhood_size: usize,
    pub max_local_degree: usize,
}

/// Aggregate the stability measures, partial-correlation floor, and
/// degree maxima over every valid node pair.
pub fn assumption_report(model: &PrecisionModel, d: &DifferenceMatrix) -> Result<AssumptionReport, Error> {
    let p = model.p;
    if d.col_count() != p {
        return Err(Error::DimensionMismatch);
    }
    let mut delta1 = 0.0f64;
    let mut delta2_ratio = 0.0f64;
    for a in 0..p {
        let ne = model.neighbors(a);
        let d_a = d.exclude_node(a)?;
        let theta = theta_population(model, a);
        let mut agg = vec![0.0; p];
        for &(i, j) in d_a.rows() {
            let s = sign(theta[i] - theta[j]);
            agg[i] += s;
            agg[j] -= s;
        }
        let col_norms = d_a.column_l1_norms();
        for b in 0..p {
            if b == a {
                continue;
            }
            if !ne.contains(&b) {
                delta1 = delta1.max(float::abs(stability_s(model, a, b)?));
            }
            if agg[b] == 0.0 && col_norms[b] > 0 {
                let t = stability_t(model, d, a, b)?;
                delta2_ratio = delta2_ratio.max(float::abs(t) / col_norms[b] as f64);
            }
        }
    }
    let mut min_pc = f64::INFINITY;
    for &(a, b) in &model.true_edges {
        let pc = -model.omega.get(a, b)
            / float::sqrt(model.omega.get(a, a) * model.omega.get(b, b));
        min_pc = min_pc.min(float::abs(pc));
    }
    if model.true_edges.is_empty() {
        min_pc = 0.0;
    }
    let max_ne = (0..p).map(|a| model.neighbors(a).len()).max().unwrap_or(0);
    Ok(AssumptionReport {
        delta1,
        delta2_ratio,
        min_partial_correlation: min_pc,
        max_neighborhood_size: max_ne,
        max_local_degree: model.local_graph.max_degree(),
    })
}

/// Smallest eigenvalue of the node-deleted Gram matrix XᵃᵀXᵃ/n,
/// the natural lower bound for the compatibility constant φ₀².
/// Returns 0 when n < p−1 (the Gram is rank deficient).
pub fn restricted_eigenvalue(x: &DenseMatrix, a: usize) -> Result<f64, Error> {
    let (n, p) = (x.rows(), x.cols());
    assert!(a < p);
    if p < 2 {
        return Err(Error::DimensionMismatch);
    }
    if n < p - 1 {
        return Ok(0.0);
    }
    let keep: Vec<usize> = (0..p).filter(|&b| b != a).collect();
    let cols: Vec<Vec<f64>> = keep.iter().map(|&b| x.column(b)).collect();
    let k = p - 1;
    let mut gram = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = dot(&cols[i], &cols[j]) / n as f64;
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    min_eigen_sym(&gram)
}

/// Outcome of the sampled compatibility falsification probe.
#[derive(Debug, Clone, Copy)]
pub struct CompatibilityCheck {
    /// True when no tested cone point violated the inequality.
    pub holds: bool,
    /// Largest observed ‖θ_{S₀}‖₁² / (s₀·θᵀ(XᵃᵀXᵃ)θ/(nφ₀²)); above 1
    /// is a counterexample.
    pub worst_ratio: f64,
}

const COMPAT_SEED: u64 = 0x0C0B_417B_111E_57A1;

/// Probe the Δ-compatibility condition for node a at constant φ₀:
/// on the cone ‖θ_{S₀ᶜ}‖₁ ≤ (3+Δ)‖θ_{S₀}‖₁ (coordinates exclude a),
/// test ‖θ_{S₀}‖₁² ≤ s₀·θᵀ(XᵃᵀXᵃ)θ/(nφ₀²).
///
/// The cone is a continuum, so this is a falsifier rather than a proof:
/// it evaluates the signed indicator extremes e_s and e_s ± (3+Δ)e_c for
/// every s ∈ S₀, c ∉ S₀ (and their negatives), plus `num_samples` random
/// directions rescaled onto the cone boundary, drawn from a fixed
/// internal stream so verdicts are reproducible.
pub fn check_compatibility(
    x: &DenseMatrix,
    a: usize,
    s0: &[usize],
    delta: f64,
    phi0: f64,
    num_samples: usize,
) -> CompatibilityCheck {
    let (n, p) = (x.rows(), x.cols());
    assert!(a < p && !s0.is_empty() && phi0 > 0.0 && delta > 0.0);
    assert!(s0.iter().all(|&s| s < p && s != a), "S0 must avoid node a");
    let keep: Vec<usize> = (0..p).filter(|&b| b != a).collect();
    let cols: Vec<Vec<f64>> = keep.iter().map(|&b| x.column(b)).collect();
    let k = p - 1;
    let in_s0 = |ri: usize| s0.contains(&keep[ri]);
    let s_count = s0.len() as f64;
    let slack = 3.0 + delta;

    let ratio = |theta: &[f64]| -> f64 {
        let mut xt = vec![0.0; n];
        for (j, col) in cols.iter().enumerate() {
            if theta[j] != 0.0 {
                for (acc, &v) in xt.iter_mut().zip(col) {
                    *acc += theta[j] * v;
                }
            }
        }
        let quad = dot(&xt, &xt) / n as f64;
        let l1s: f64 = (0..k).filter(|&j| in_s0(j)).map(|j| float::abs(theta[j])).sum();
        let lhs = l1s * l1s;
        let rhs = s_count * quad / (phi0 * phi0);
        if lhs == 0.0 {
            0.0
        } else if rhs <= 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        }
    };

    let mut worst = 0.0f64;
    let mut point = vec![0.0; k];
    for s_ri in 0..k {
        if !in_s0(s_ri) {
            continue;
        }
        for s_sign in [1.0, -1.0] {
            point[s_ri] = s_sign;
            worst = worst.max(ratio(&point));
            for c_ri in 0..k {
                if in_s0(c_ri) {
                    continue;
                }
                for c_sign in [1.0, -1.0] {
                    point[c_ri] = c_sign * slack;
                    worst = worst.max(ratio(&point));
                    point[c_ri] = 0.0;
                }
            }
            point[s_ri] = 0.0;
        }
    }
    for i in 0..num_samples {
        let mut theta: Vec<f64> = (0..k)
            .map(|j| 2.0 * crate::rng::uniform(COMPAT_SEED, (i * k + j) as u64) - 1.0)
            .collect();
        let l1s: f64 = (0..k).filter(|&j| in_s0(j)).map(|j| float::abs(theta[j])).sum();
        let l1c: f64 = (0..k).filter(|&j| !in_s0(j)).map(|j| float::abs(theta[j])).sum();
        if l1s == 0.0 {
            continue;
        }
        if l1c > slack * l1s {
            let scale = slack * l1s / l1c;
            for j in 0..k {
                if !in_s0(j) {
                    theta[j] *= scale;
                }
            }
        }
        worst = worst.max(ratio(&theta));
    }
    CompatibilityCheck {
        holds: worst <= 1.0 + 1e-9,
        worst_ratio: worst,
    }
}

/// Oracle inequality scale s₀(2λ + Bμ)²/φ₀².
pub fn oracle_bound(s0: usize, lambda: f64, mu: f64, b: f64, phi0: f64) -> f64 {
    assert!(phi0 > 0.0);
    let core = 2.0 * lambda + b * mu;
    s0 as f64 * core * core / (phi0 * phi0)
}

/// Closed-form l1-error constant 224·s₀(Δ+4)²(3Δ+14)/(φ₀²Δ²) from the
/// combined high-probability bound.
///
/// The Δ-dependent factor is computed first so integer-valued inputs
/// give bit-exact integer-valued constants (Δ = 1 yields exactly 95200).
pub fn l1_bound_constant(delta: f64, s0: usize, phi0: f64) -> f64 {
    assert!(delta > 0.0 && phi0 > 0.0);
    let c = 224.0 * (delta + 4.0) * (delta + 4.0) * (3.0 * delta + 14.0) / (delta * delta);
    c * s0 as f64 / (phi0 * phi0)
}

/// Prediction-error budget 2(λ + Bμ(1+√p/2))‖θ⁰‖₁ + npBμ(λ+Bμ)/δ_min,
/// a reported diagnostic; δ_min is the smallest nonzero singular value
/// of the node-deleted design.
pub fn l2_prediction_bound(
    lambda: f64,
    mu: f64,
    b: f64,
    p: usize,
    n: usize,
    theta0_l1: f64,
    delta_min: f64,
) -> Result<f64, Error> {
    if !(delta_min > 0.0) || !(lambda >= 0.0) || !(mu >= 0.0) || !(b >= 0.0) || !(theta0_l1 >= 0.0) {
        return Err(Error::DomainError);
    }
    let first = 2.0 * (lambda + b * mu * (1.0 + float::sqrt(p as f64) / 2.0)) * theta0_l1;
    let second = (n * p) as f64 * b * mu * (lambda + b * mu) / delta_min;
    Ok(first + second)
}

/// False-positive tail bounds with and without the fusion penalty, and
/// their difference.
///
/// ```text
/// lasso_bound = exp(−(d₁²/4)(1−δ₁)²·n^ε/σ²)
/// nfl_bound   = exp(−((d₁/2)(1−δ₁) + (d₂/2)(1−δ₂)n^{β₀})²·n^ε/σ²)
/// ```
///
/// The difference factorizes as
/// [1 − exp(−(2AB+B²)n^ε/σ²)]·lasso_bound with A = (d₁/2)(1−δ₁) and
/// B = (d₂/2)(1−δ₂)n^{β₀}; both forms are computed and required to agree
/// to 1e-12 relative as an internal consistency check.
///
/// δ = 1 is admitted (the corresponding term simply vanishes); δ > 1 or
/// δ < 0 is a domain error.
pub fn type1_reduction(
    d1: f64,
    d2: f64,
    delta1: f64,
    delta2: f64,
    beta0: f64,
    epsilon: f64,
    n: usize,
    sigma_star_sq: f64,
) -> Result<(f64, f64, f64), Error> {
    if !(0.0..=1.0).contains(&delta1) || !(0.0..=1.0).contains(&delta2) {
        return Err(Error::DomainError);
    }
    if !(sigma_star_sq > 0.0) || n < 1 || !(d1 >= 0.0) || !(d2 >= 0.0) || !(beta0 >= 0.0) {
        return Err(Error::DomainError);
    }
    let nf = n as f64;
    let rate = float::powf(nf, epsilon) / sigma_star_sq;
    let a = d1 / 2.0 * (1.0 - delta1);
    let b = d2 / 2.0 * (1.0 - delta2) * float::powf(nf, beta0);
    let lasso_bound = float::exp(-a * a * rate);
    let nfl_bound = float::exp(-(a + b) * (a + b) * rate);
    let reduction = lasso_bound - nfl_bound;
    let product_form = (1.0 - float::exp(-(2.0 * a * b + b * b) * rate)) * lasso_bound;
    let scale = float::abs(reduction).max(lasso_bound);
    assert!(
        float::abs(reduction - product_form) <= 1e-12 * scale,
        "difference and product forms disagree"
    );
    Ok((lasso_bound, nfl_bound, reduction))
}

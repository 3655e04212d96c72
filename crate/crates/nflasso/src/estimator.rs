//! Node-wise fused-lasso estimation of graph structure.
//!
//! For each node a, solve
//!
//! ```text
//! min over θ with θ_a = 0 of  n⁻¹‖X_a − Xθ‖² + λ‖θ‖₁ + μ‖Dᵃθ‖₁
//! ```
//!
//! where Dᵃ keeps the local-difference rows not touching a. The
//! neighborhood of a is the support of θ̂, and per-node neighborhoods
//! combine into an edge set by a union or intersection rule.
//!
//! The solver runs in up to three phases. Phase one lifts the problem to
//! ω = Gθ with G = [I; (μ/λ)Dᵃ] and solves a plain lasso in ω; that
//! relaxation is exact whenever no fusion constraint is active at the
//! optimum, which the fused KKT system certifies after back-mapping.
//! When the certificate fails, phase two runs ADMM on the original fused
//! objective and phase three collapses near-ties into grouped coordinates
//! and re-solves exactly with signs of the crossed differences pinned.
//! Candidates are kept by true objective value and the first iterate
//! passing the KKT certificate wins.

use alloc::vec;
use alloc::vec::Vec;

use crate::float;
use crate::lasso::{cd_run, sign, soft};
use crate::linalg::{dot, norm1, pinv_tall, DenseMatrix, SpdFactor};
use crate::localgraph::{build_difference_matrix, DifferenceMatrix, LocalGraph};
use crate::Error;

/// Zero tolerance used by the internal KKT certificates.
const KKT_ZERO_TOL: f64 = 1e-7;

/// Centered, unit-variance data with the original column scales kept.
#[derive(Debug, Clone)]
pub struct StandardizedData {
    n: usize,
    p: usize,
    matrix: DenseMatrix,
    column_sds: Vec<f64>,
}

impl StandardizedData {
    /// Wrap a matrix that is already standardized. Column means must be
    /// within 1e-10 of zero and sample variances within 1e-8 of one.
    pub fn new(matrix: DenseMatrix) -> Result<Self, Error> {
        let (n, p) = (matrix.rows(), matrix.cols());
        if n < 2 {
            return Err(Error::DomainError);
        }
        for j in 0..p {
            let col = matrix.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            if float::abs(mean) > 1e-10 {
                return Err(Error::DomainError);
            }
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            if float::abs(var - 1.0) > 1e-8 {
                return Err(Error::DomainError);
            }
        }
        Ok(StandardizedData {
            n,
            p,
            matrix,
            column_sds: vec![1.0; p],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Original per-column scale factors (sample standard deviations of
    /// the raw input; all ones when constructed from standardized data).
    pub fn column_sds(&self) -> &[f64] {
        &self.column_sds
    }
}

/// Center each column and scale to unit sample variance (divisor n−1).
///
/// No intercept is fitted anywhere downstream; centering here is what
/// removes it.
pub fn standardize(raw: &DenseMatrix) -> Result<StandardizedData, Error> {
    let (n, p) = (raw.rows(), raw.cols());
    if n < 2 {
        return Err(Error::DomainError);
    }
    let mut out = DenseMatrix::zeros(n, p);
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = raw.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let sd = float::sqrt(var);
        // relative floor so constant columns with rounding noise are
        // still rejected
        if sd <= 1e-10 * (1.0 + float::abs(mean)) {
            return Err(Error::ConstantColumn(j));
        }
        for i in 0..n {
            out.set(i, j, (col[i] - mean) / sd);
        }
        sds[j] = sd;
    }
    Ok(StandardizedData {
        n,
        p,
        matrix: out,
        column_sds: sds,
    })
}

/// Per-node penalty levels and the inputs that produced them.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyPlan {
    pub alpha: f64,
    pub k: f64,
    pub beta0: f64,
    pub sigma_hat: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// Data-driven penalty levels:
///
/// ```text
/// λ = (σ̂/√n)·Φ̃⁻¹(α/(2p²)),   μ = λ/(K·n^{β₀})
/// ```
///
/// μ is constructed from λ so that μ/λ = 1/(K·n^{β₀}) holds as written,
/// not merely up to a second rounding of n^{β₀+1/2}.
pub fn select_penalties(
    n: usize,
    p: usize,
    alpha: f64,
    sigma_hat: f64,
    k: f64,
    beta0: f64,
) -> Result<PenaltyPlan, Error> {
    if !(alpha > 0.0 && alpha < 1.0) || n < 2 || p < 2 {
        return Err(Error::DomainError);
    }
    if !(sigma_hat > 0.0) || !(k > 0.0) || !(beta0 >= 0.0) {
        return Err(Error::DomainError);
    }
    let q = alpha / (2.0 * p as f64 * p as f64);
    let quantile = crate::linalg::normal_quantile_upper(q)?;
    let lambda = sigma_hat / float::sqrt(n as f64) * quantile;
    let mu = lambda / (k * float::powf(n as f64, beta0));
    Ok(PenaltyPlan {
        alpha,
        k,
        beta0,
        sigma_hat,
        lambda,
        mu,
    })
}

/// Alternative penalty levels from a tail-probability budget t:
///
/// ```text
/// λ₀ = 2(t + log p)/n,   μ₀ = (2/B)·√(2(t + log p)/n)
/// ```
///
/// chosen so the noise event max_b (2/n)|⟨ε, X_b⟩| ≤ λ₀ + Bμ₀ holds with
/// probability at least 1 − 2e^{−t}. B is the largest column l1 norm of
/// the node's difference matrix; B = 0 (no fusion rows) selects μ₀ = 0.
pub fn select_penalties_tail(t: f64, n: usize, p: usize, b: f64) -> Result<(f64, f64), Error> {
    if n < 2 || p < 2 || !(b >= 0.0) || !t.is_finite() {
        return Err(Error::DomainError);
    }
    let mass = t + float::ln(p as f64);
    if !(mass > 0.0) {
        return Err(Error::DomainError);
    }
    let lambda0 = 2.0 * mass / n as f64;
    let mu0 = if b == 0.0 {
        0.0
    } else {
        2.0 / b * float::sqrt(2.0 * mass / n as f64)
    };
    Ok((lambda0, mu0))
}

/// Node scale σ̂_a = √(⟨X_a, X_a⟩/n).
///
/// On standardized columns this is exactly √((n−1)/n) because the
/// variance divisor is n−1. Accepts any matrix so raw-scale columns can
/// be measured too.
pub fn sigma_hat(x: &DenseMatrix, a: usize) -> f64 {
    assert!(a < x.cols(), "column index out of range");
    let col = x.column(a);
    float::sqrt(dot(&col, &col) / x.rows() as f64)
}

/// One node's fitted regression and solver diagnostics.
#[derive(Debug, Clone)]
pub struct NodeFit {
    pub node: usize,
    /// Length p with entry `node` exactly zero.
    pub theta_hat: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    /// Dimension of the lifted problem: p − 1 + (fusion rows for this node).
    pub omega_dim: usize,
    /// Inner solver iterations summed across all phases.
    pub iterations: usize,
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Fused objective n⁻¹‖X_a − Xθ‖² + λ‖θ‖₁ + μ‖Dᵃθ‖₁.
pub fn nfl_objective(
    theta: &[f64],
    data: &StandardizedData,
    a: usize,
    lambda: f64,
    mu: f64,
    d_a: &DifferenceMatrix,
) -> Result<f64, Error> {
    let (n, p) = (data.n(), data.p());
    if theta.len() != p || d_a.col_count() != p || a >= p {
        return Err(Error::DimensionMismatch);
    }
    if theta[a] != 0.0 {
        return Err(Error::ConstraintViolation);
    }
    let x = data.matrix();
    let mut resid = x.column(a);
    for b in 0..p {
        if theta[b] != 0.0 {
            for i in 0..n {
                resid[i] -= theta[b] * x.get(i, b);
            }
        }
    }
    let mut fuse = 0.0;
    for &(i, j) in d_a.rows() {
        fuse += float::abs(theta[i] - theta[j]);
    }
    Ok(dot(&resid, &resid) / n as f64 + lambda * norm1(theta) + mu * fuse)
}

/// Stationarity case of one coordinate in the fused subdifferential
/// system: active (nonzero) or zero, crossed by an active fused
/// difference or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktCase {
    ActiveFused,
    ActiveUnfused,
    ZeroFused,
    ZeroUnfused,
}

/// Result of the fused stationarity check.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub max_violation: f64,
    /// Per-coordinate case; `None` at the regression node itself.
    pub cases: Vec<Option<KktCase>>,
    /// Per-coordinate violation; 0 at the regression node.
    pub violations: Vec<f64>,
}

/// Exact subdifferential distance for the fused objective at θ.
///
/// With G_b = −(2/n)⟨X_a − Xθ, X_b⟩, a difference row r is *determined*
/// when |（Dᵃθ)_r| > tol and contributes sgn((Dᵃθ)_r)·D_{r,b} to a fixed
/// offset c_b; undetermined rows contribute a free interval of radius
/// ρ_b = Σ_r |D_{r,b}|. Coordinate b is stationary iff
///
/// ```text
/// 0 ∈ G_b + λ·[s_lo, s_hi] + μ·(c_b + [−ρ_b, ρ_b])
/// ```
///
/// where [s_lo, s_hi] is {sgn θ_b} when |θ_b| > tol and [−1, 1]
/// otherwise. The violation is the distance from 0 to that interval,
/// which degenerates to an equality residual when nothing is free.
pub fn nfl_kkt_check(
    theta: &[f64],
    data: &StandardizedData,
    a: usize,
    lambda: f64,
    mu: f64,
    d_a: &DifferenceMatrix,
    tol: f64,
) -> KktReport {
    let (n, p) = (data.n(), data.p());
    assert!(theta.len() == p && d_a.col_count() == p && a < p, "shape mismatch");
    assert!(theta[a] == 0.0, "coordinate a must be pinned to zero");
    let x = data.matrix();
    let mut resid = x.column(a);
    for b in 0..p {
        if theta[b] != 0.0 {
            for i in 0..n {
                resid[i] -= theta[b] * x.get(i, b);
            }
        }
    }
    let mut c = vec![0.0; p];
    let mut radius = vec![0.0; p];
    for &(i, j) in d_a.rows() {
        let diff = theta[i] - theta[j];
        if float::abs(diff) > tol {
            let s = sign(diff);
            c[i] += s;
            c[j] -= s;
        } else {
            radius[i] += 1.0;
            radius[j] += 1.0;
        }
    }
    let mut cases = vec![None; p];
    let mut violations = vec![0.0; p];
    let mut worst = 0.0f64;
    for b in 0..p {
        if b == a {
            continue;
        }
        let col = x.column(b);
        let g = -2.0 / n as f64 * dot(&resid, &col);
        let active = float::abs(theta[b]) > tol;
        let (s_lo, s_hi) = if active {
            (sign(theta[b]), sign(theta[b]))
        } else {
            (-1.0, 1.0)
        };
        let lo = g + lambda * s_lo + mu * (c[b] - radius[b]);
        let hi = g + lambda * s_hi + mu * (c[b] + radius[b]);
        let v = if lo <= 0.0 && 0.0 <= hi {
            0.0
        } else {
            float::abs(lo).min(float::abs(hi))
        };
        let fused = c[b] != 0.0;
        cases[b] = Some(match (active, fused) {
            (true, true) => KktCase::ActiveFused,
            (true, false) => KktCase::ActiveUnfused,
            (false, true) => KktCase::ZeroFused,
            (false, false) => KktCase::ZeroUnfused,
        });
        violations[b] = v;
        worst = worst.max(v);
    }
    KktReport {
        max_violation: worst,
        cases,
        violations,
    }
}

fn embed(th: &[f64], a: usize) -> Vec<f64> {
    let p = th.len() + 1;
    let mut full = vec![0.0; p];
    let mut r = 0;
    for b in 0..p {
        if b != a {
            full[b] = th[r];
            r += 1;
        }
    }
    full
}

fn reduced_objective(
    cols: &[Vec<f64>],
    y: &[f64],
    d_rows: &[(usize, usize)],
    lambda: f64,
    mu: f64,
    th: &[f64],
) -> f64 {
    let n = y.len() as f64;
    let mut resid = y.to_vec();
    for (j, col) in cols.iter().enumerate() {
        if th[j] != 0.0 {
            for (r, &c) in resid.iter_mut().zip(col) {
                *r -= th[j] * c;
            }
        }
    }
    let mut fuse = 0.0;
    for &(i, j) in d_rows {
        fuse += float::abs(th[i] - th[j]);
    }
    dot(&resid, &resid) / n + lambda * norm1(th) + mu * fuse
}

/// ADMM on the fused objective with splitting z = [θ; Dθ], scaled dual,
/// and over-relaxation. Runs a fixed iteration budget; refinement
/// happens outside.
fn admm_fused(
    cols: &[Vec<f64>],
    y: &[f64],
    d_rows: &[(usize, usize)],
    lambda: f64,
    mu: f64,
    iters: usize,
    th0: &[f64],
) -> Vec<f64> {
    let k = cols.len();
    let m = d_rows.len();
    let n = y.len() as f64;
    let rho = 1.0;
    let relax = 1.7;
    let mut mat = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = 2.0 / n * dot(&cols[i], &cols[j]);
            mat.set(i, j, v);
            mat.set(j, i, v);
        }
        mat.set(i, i, mat.get(i, i) + rho);
    }
    for &(i, j) in d_rows {
        mat.set(i, i, mat.get(i, i) + rho);
        mat.set(j, j, mat.get(j, j) + rho);
        mat.set(i, j, mat.get(i, j) - rho);
        mat.set(j, i, mat.get(j, i) - rho);
    }
    let factor =
        SpdFactor::cholesky(&mat).expect("identity block keeps the ADMM system positive definite");
    let xty: Vec<f64> = cols.iter().map(|c| 2.0 / n * dot(c, y)).collect();
    let mut th = th0.to_vec();
    let mut z = vec![0.0; k + m];
    z[..k].copy_from_slice(&th);
    for (r, &(i, j)) in d_rows.iter().enumerate() {
        z[k + r] = th[i] - th[j];
    }
    let mut u = vec![0.0; k + m];
    for _ in 0..iters {
        let mut rhs = xty.clone();
        for b in 0..k {
            rhs[b] += rho * (z[b] - u[b]);
        }
        for (r, &(i, j)) in d_rows.iter().enumerate() {
            let v = rho * (z[k + r] - u[k + r]);
            rhs[i] += v;
            rhs[j] -= v;
        }
        th = factor.solve_vec(&rhs).expect("rhs length fixed by construction");
        for b in 0..k {
            let ath = relax * th[b] + (1.0 - relax) * z[b];
            let v = ath + u[b];
            z[b] = soft(v, lambda / rho);
            u[b] = v - z[b];
        }
        for (r, &(i, j)) in d_rows.iter().enumerate() {
            let ath = relax * (th[i] - th[j]) + (1.0 - relax) * z[k + r];
            let v = ath + u[k + r];
            z[k + r] = soft(v, mu / rho);
            u[k + r] = v - z[k + r];
        }
    }
    th
}

/// Collapse differences of θ below `tie_tol` into shared coordinates and
/// re-solve exactly: grouped columns are summed, the l1 weight of a group
/// is its size, and each difference row crossing two groups contributes a
/// fixed linear term μ·sgn((Dθ)_r)·D_r with the sign pinned from θ.
///
/// Exact for the solution whose tie pattern and crossing signs match θ's;
/// the caller keeps candidates by true objective, so a wrong guess costs
/// nothing.
fn collapse_polish(
    th: &[f64],
    cols: &[Vec<f64>],
    y: &[f64],
    d_rows: &[(usize, usize)],
    lambda: f64,
    mu: f64,
    tie_tol: f64,
    inner_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let k = cols.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for &(i, j) in d_rows {
        if float::abs(th[i] - th[j]) <= tie_tol {
            let (pi, pj) = (find(&mut parent, i), find(&mut parent, j));
            if pi != pj {
                parent[pi] = pj;
            }
        }
    }
    let mut group_of = vec![usize::MAX; k];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for b in 0..k {
        let root = find(&mut parent, b);
        if group_of[root] == usize::MAX {
            group_of[root] = groups.len();
            groups.push(Vec::new());
        }
        group_of[b] = group_of[root];
        groups[group_of[root]].push(b);
    }
    let kg = groups.len();
    let mut gcols: Vec<Vec<f64>> = vec![vec![0.0; y.len()]; kg];
    let mut weights = vec![0.0; kg];
    let mut warm = vec![0.0; kg];
    for (gi, members) in groups.iter().enumerate() {
        for &b in members {
            for (acc, &v) in gcols[gi].iter_mut().zip(&cols[b]) {
                *acc += v;
            }
            warm[gi] += th[b];
        }
        weights[gi] = members.len() as f64;
        warm[gi] /= members.len() as f64;
    }
    let mut linear = vec![0.0; kg];
    for &(i, j) in d_rows {
        let diff = th[i] - th[j];
        if float::abs(diff) > tie_tol {
            let s = mu * sign(diff);
            linear[group_of[i]] += s;
            linear[group_of[j]] -= s;
        }
    }
    let (beta, sweeps, _, _) = cd_run(
        &gcols,
        y,
        lambda,
        Some(&weights),
        Some(&linear),
        inner_tol,
        max_iter,
        Some(&warm),
    );
    let mut out = vec![0.0; k];
    for b in 0..k {
        out[b] = beta[group_of[b]];
    }
    (out, sweeps)
}

/// Fit one node's fused regression.
///
/// `D` is the full local difference matrix on p nodes; rows touching `a`
/// are removed here. `tol` bounds the coordinate-descent sweep updates
/// (the fused pipeline tightens it internally so the KKT certificate has
/// headroom); `max_iter` caps sweeps per inner solve. Success means the
/// fused stationarity residual reached 1e-6·(1+λ); otherwise the fit is
/// reported as `NonConvergence`.
pub fn fit_node(
    data: &StandardizedData,
    a: usize,
    lambda: f64,
    mu: f64,
    d: &DifferenceMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<NodeFit, Error> {
    let (n, p) = (data.n(), data.p());
    assert!(lambda > 0.0 && mu >= 0.0, "penalties out of range");
    if d.col_count() != p || p < 2 {
        return Err(Error::DimensionMismatch);
    }
    let d_a = d.exclude_node(a)?;
    // every surviving row must avoid a entirely
    assert!(d_a.rows().iter().all(|&(i, j)| i != a && j != a));

    let x = data.matrix();
    let y = x.column(a);
    let keep: Vec<usize> = (0..p).filter(|&b| b != a).collect();
    let cols: Vec<Vec<f64>> = keep.iter().map(|&b| x.column(b)).collect();
    let shift = |b: usize| if b > a { b - 1 } else { b };
    let d_rows: Vec<(usize, usize)> = d_a.rows().iter().map(|&(i, j)| (shift(i), shift(j))).collect();
    let k = p - 1;
    let m = d_rows.len();
    let kkt_target = 1e-6 * (1.0 + lambda);

    let finish = |th: &[f64], iterations: usize| -> Result<NodeFit, Error> {
        let theta_hat = embed(th, a);
        let report = nfl_kkt_check(&theta_hat, data, a, lambda, mu, &d_a, KKT_ZERO_TOL);
        let objective = nfl_objective(&theta_hat, data, a, lambda, mu, &d_a)?;
        if report.max_violation <= kkt_target {
            Ok(NodeFit {
                node: a,
                theta_hat,
                lambda,
                mu,
                omega_dim: k + m,
                iterations,
                objective,
                kkt_residual: report.max_violation,
            })
        } else {
            Err(Error::NonConvergence { iterations })
        }
    };

    if mu == 0.0 || m == 0 {
        let (th, sweeps, _, _) = cd_run(&cols, &y, lambda, None, None, tol, max_iter, None);
        return finish(&th, sweeps);
    }

    let inner_tol = tol.min(1e-12);

    // phase one: lifted lasso in ω = Gθ
    let ratio = mu / lambda;
    let mut g = DenseMatrix::zeros(k + m, k);
    for i in 0..k {
        g.set(i, i, 1.0);
    }
    for (r, &(i, j)) in d_rows.iter().enumerate() {
        g.set(k + r, i, ratio);
        g.set(k + r, j, -ratio);
    }
    let gp = pinv_tall(&g).expect("identity block keeps GᵀG positive definite");
    let mut x_red = DenseMatrix::zeros(n, k);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            x_red.set(i, j, col[i]);
        }
    }
    let x_tilde = x_red.matmul(&gp).expect("shapes fixed by construction");
    let tilde_cols: Vec<Vec<f64>> = (0..k + m).map(|j| x_tilde.column(j)).collect();
    let (omega, sweeps, _, _) = cd_run(&tilde_cols, &y, lambda, None, None, inner_tol, max_iter, None);
    let th = gp.matvec(&omega).expect("length fixed by construction");
    let mut iterations = sweeps;
    if let Ok(fit) = finish(&th, iterations) {
        return Ok(fit);
    }

    // phases two and three: ADMM restarts with tie-collapse polish,
    // keeping the best candidate by true objective
    let mut best = th;
    let mut best_f = reduced_objective(&cols, &y, &d_rows, lambda, mu, &best);
    let mut admm_iters = 600;
    for _ in 0..5 {
        let rough = admm_fused(&cols, &y, &d_rows, lambda, mu, admm_iters, &best);
        iterations += admm_iters;
        for tie_tol in [1e-5, 1e-7, 1e-9] {
            let (cand, sweeps) = collapse_polish(
                &rough, &cols, &y, &d_rows, lambda, mu, tie_tol, inner_tol, max_iter,
            );
            iterations += sweeps;
            let f = reduced_objective(&cols, &y, &d_rows, lambda, mu, &cand);
            if f < best_f {
                best = cand;
                best_f = f;
            }
            if let Ok(fit) = finish(&best, iterations) {
                return Ok(fit);
            }
        }
        admm_iters *= 2;
    }
    Err(Error::NonConvergence { iterations })
}

/// Support of a fit above the reporting threshold τ.
pub fn extract_neighborhood(fit: &NodeFit, tau: f64) -> Vec<usize> {
    assert!(tau > 0.0);
    (0..fit.theta_hat.len())
        .filter(|&b| b != fit.node && float::abs(fit.theta_hat[b]) > tau)
        .collect()
}

/// How per-node neighborhoods vote on an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRule {
    /// Edge present when either endpoint claims the other.
    Union,
    /// Edge present only when both endpoints agree.
    Intersection,
}

/// Edge set assembled from all node neighborhoods.
#[derive(Debug, Clone)]
pub struct GraphEstimate {
    pub p: usize,
    pub neighborhoods: Vec<Vec<usize>>,
    pub rule: EdgeRule,
    /// Unordered pairs (a, b) with a < b, lexicographic.
    pub edges: Vec<(usize, usize)>,
}

/// Combine one fit per node into an edge set under the given rule.
pub fn combine_edges(fits: &[NodeFit], rule: EdgeRule, tau: f64) -> GraphEstimate {
    let p = fits.len();
    for (i, fit) in fits.iter().enumerate() {
        assert!(fit.node == i, "fits must be ordered by node index");
    }
    let neighborhoods: Vec<Vec<usize>> = fits.iter().map(|f| extract_neighborhood(f, tau)).collect();
    let mut edges = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            let fwd = neighborhoods[a].binary_search(&b).is_ok();
            let bwd = neighborhoods[b].binary_search(&a).is_ok();
            let keep = match rule {
                EdgeRule::Union => fwd || bwd,
                EdgeRule::Intersection => fwd && bwd,
            };
            if keep {
                edges.push((a, b));
            }
        }
    }
    GraphEstimate {
        p,
        neighborhoods,
        rule,
        edges,
    }
}

/// How fit_graph chooses per-node penalties.
#[derive(Debug, Clone, Copy)]
pub enum PenaltyMode {
    /// Per-node λ, μ from σ̂_a and the quantile formula.
    DataDriven { alpha: f64, k: f64, beta0: f64 },
    /// Same formula with one shared σ̂ (the mean over nodes), for
    /// ablations where per-node scales should not differ.
    DataDrivenShared { alpha: f64, k: f64, beta0: f64 },
    /// Fixed λ, μ for every node.
    Explicit { lambda: f64, mu: f64 },
    /// Tail-budget levels; μ₀ uses each node's own difference-matrix
    /// column bound B.
    TailBound { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub penalties: PenaltyMode,
    pub rule: EdgeRule,
    /// Support threshold for neighborhood extraction. The back-map from
    /// ω̂ mixes coordinates, so exact zeros cannot be expected after a
    /// fused solve; 1e-6 on standardized scale separates support from
    /// round-off.
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            penalties: PenaltyMode::DataDriven {
                alpha: 0.05,
                k: 1.0,
                beta0: 0.25,
            },
            rule: EdgeRule::Union,
            tau: 1e-6,
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

/// A full graph fit: the combined edge estimate plus every node fit.
#[derive(Debug, Clone)]
pub struct GraphFit {
    pub estimate: GraphEstimate,
    pub node_fits: Vec<NodeFit>,
}

/// Fit every node and combine neighborhoods into a graph estimate.
pub fn fit_graph(
    data: &StandardizedData,
    local_graph: &LocalGraph,
    config: &FitConfig,
) -> Result<GraphFit, Error> {
    let (n, p) = (data.n(), data.p());
    if local_graph.node_count() != p {
        return Err(Error::DimensionMismatch);
    }
    let d = build_difference_matrix(local_graph);
    let shared_sigma = match config.penalties {
        PenaltyMode::DataDrivenShared { .. } => {
            (0..p).map(|a| sigma_hat(data.matrix(), a)).sum::<f64>() / p as f64
        }
        _ => 0.0,
    };
    let mut node_fits = Vec::with_capacity(p);
    for a in 0..p {
        let (lambda, mu) = match config.penalties {
            PenaltyMode::DataDriven { alpha, k, beta0 } => {
                let plan = select_penalties(n, p, alpha, sigma_hat(data.matrix(), a), k, beta0)?;
                (plan.lambda, plan.mu)
            }
            PenaltyMode::DataDrivenShared { alpha, k, beta0 } => {
                let plan = select_penalties(n, p, alpha, shared_sigma, k, beta0)?;
                (plan.lambda, plan.mu)
            }
            PenaltyMode::Explicit { lambda, mu } => {
                if !(lambda > 0.0) || !(mu >= 0.0) {
                    return Err(Error::DomainError);
                }
                (lambda, mu)
            }
            PenaltyMode::TailBound { t } => {
                let b = d
                    .exclude_node(a)?
                    .column_l1_norms()
                    .into_iter()
                    .max()
                    .unwrap_or(0) as f64;
                select_penalties_tail(t, n, p, b)?
            }
        };
        node_fits.push(fit_node(data, a, lambda, mu, &d, config.tol, config.max_iter)?);
    }
    let estimate = combine_edges(&node_fits, config.rule, config.tau);
    Ok(GraphFit {
        estimate,
        node_fits,
    })
}

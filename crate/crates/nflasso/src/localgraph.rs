//! The prior local-neighborhood graph and its row-difference encoding.
//!
//! A `LocalGraph` is a known spatial structure on the p variables (a chain,
//! a lattice, cliques). Its `DifferenceMatrix` D has one row per local edge
//! (i, j), equal to eᵢ − eⱼ, so ‖Dθ‖₁ penalizes coefficient differences
//! across local edges. `exclude_node` drops the rows touching one node,
//! producing the Dᵃ used when node a is the regression target.
//!
//! D is stored as index pairs: rows are exact ±1/0 patterns by construction,
//! never computed, so zero tests on entries are exact.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::DenseMatrix;
use crate::Error;

/// Undirected prior graph on p nodes. Edges are stored as (u, v) with
/// u < v, sorted lexicographically, without duplicates or self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGraph {
    p: usize,
    edges: Vec<(usize, usize)>,
}

impl LocalGraph {
    /// Validates and normalizes an edge list. Pairs may arrive in either
    /// orientation; they are stored with the smaller index first.
    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self, Error> {
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= p || v >= p {
                return Err(Error::IndexOutOfRange);
            }
            if u == v {
                return Err(Error::DomainError);
            }
            norm.push(if u < v { (u, v) } else { (v, u) });
        }
        norm.sort_unstable();
        if norm.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DomainError);
        }
        Ok(LocalGraph { p, edges: norm })
    }

    /// Chain graph: edges (i, i+1) for i = 0..p−1.
    pub fn chain(p: usize) -> LocalGraph {
        LocalGraph {
            p,
            edges: (0..p.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.p).map(|v| self.degree(v)).max().unwrap_or(0)
    }
}

/// Sparse row-difference matrix: row k equals eᵢ − eⱼ for the k-th stored
/// pair (i, j), i < j, ordered lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix {
    p: usize,
    rows: Vec<(usize, usize)>,
}

/// One row per edge of the graph, +1 at the smaller endpoint, −1 at the
/// larger, in lexicographic edge order.
pub fn build_difference_matrix(g: &LocalGraph) -> DifferenceMatrix {
    DifferenceMatrix {
        p: g.node_count(),
        rows: g.edges().to_vec(),
    }
}

impl DifferenceMatrix {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> &[(usize, usize)] {
        &self.rows
    }

    /// Keeps exactly the rows (i, j) with i ≠ a and j ≠ a. Column a of the
    /// result is identically zero.
    pub fn exclude_node(&self, a: usize) -> Result<DifferenceMatrix, Error> {
        if a >= self.p {
            return Err(Error::IndexOutOfRange);
        }
        Ok(DifferenceMatrix {
            p: self.p,
            rows: self
                .rows
                .iter()
                .copied()
                .filter(|&(i, j)| i != a && j != a)
                .collect(),
        })
    }

    /// Entry b counts the rows touching column b; the max entry is the B
    /// constant of this design.
    pub fn column_l1_norms(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.p];
        for &(i, j) in &self.rows {
            counts[i] += 1;
            counts[j] += 1;
        }
        counts
    }

    /// D·θ: the vector of differences θᵢ − θⱼ over stored rows.
    pub fn apply(&self, theta: &[f64]) -> Result<Vec<f64>, Error> {
        if theta.len() != self.p {
            return Err(Error::DimensionMismatch);
        }
        Ok(self.rows.iter().map(|&(i, j)| theta[i] - theta[j]).collect())
    }

    /// Dᵀ·v.
    pub fn transpose_apply(&self, v: &[f64]) -> Result<Vec<f64>, Error> {
        if v.len() != self.rows.len() {
            return Err(Error::DimensionMismatch);
        }
        let mut out = vec![0.0; self.p];
        for (r, &(i, j)) in self.rows.iter().enumerate() {
            out[i] += v[r];
            out[j] -= v[r];
        }
        Ok(out)
    }

    /// Dense materialization; requires at least one row.
    pub fn to_dense(&self) -> Result<DenseMatrix, Error> {
        if self.rows.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut d = DenseMatrix::zeros(self.rows.len(), self.p);
        for (r, &(i, j)) in self.rows.iter().enumerate() {
            d.set(r, i, 1.0);
            d.set(r, j, -1.0);
        }
        Ok(d)
    }
}

/// A⊘B: entry (i, j) is (AB)ᵢⱼ where Aᵢⱼ = 0, and 0 elsewhere. The zero
/// test is exact equality on stored values. B must be square so that AB
/// and A share a shape for the mask.
pub fn diagonal_excluded_product(
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<DenseMatrix, Error> {
    if a.cols() != b.rows() || b.rows() != b.cols() {
        return Err(Error::DimensionMismatch);
    }
    let ab = a.matmul(b)?;
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            if a.get(i, j) == 0.0 {
                out.set(i, j, ab.get(i, j));
            }
        }
    }
    Ok(out)
}

/// Entrywise norm choice for [`local_constancy_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryNorm {
    L1,
    L2,
    LInf,
}

/// Entrywise l_p norm of D⊘Ω: how far Ω is from having equal profiles on
/// each local pair (i, j) at coordinates k ∉ {i, j}. Zero means perfectly
/// locally constant along the graph.
pub fn local_constancy_norm(
    d: &DifferenceMatrix,
    omega: &DenseMatrix,
    norm: EntryNorm,
) -> Result<f64, Error> {
    if omega.rows() != d.col_count() || omega.cols() != d.col_count() {
        return Err(Error::DimensionMismatch);
    }
    let mut acc = 0.0f64;
    for &(i, j) in d.rows() {
        for k in 0..d.col_count() {
            if k == i || k == j {
                continue;
            }
            let v = crate::float::abs(omega.get(i, k) - omega.get(j, k));
            match norm {
                EntryNorm::L1 => acc += v,
                EntryNorm::L2 => acc += v * v,
                EntryNorm::LInf => acc = acc.max(v),
            }
        }
    }
    Ok(match norm {
        EntryNorm::L2 => crate::float::sqrt(acc),
        _ => acc,
    })
}

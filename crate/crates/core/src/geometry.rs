//! Bearings, orthogonal projection weights and infinitesimal bearing rigidity.
//!
//! Edges are stored canonically as `(i, j)` with `i < j`, sorted
//! lexicographically. The edge `(i, j)` is oriented from the lower to the
//! higher index: its bearing is `g_ij = (p_i - p_j) / |p_i - p_j|`, and the
//! incidence matrix carries `+1` at `i` and `-1` at `j`, so that the rigidity
//! matrix is exactly the Jacobian of the stacked bearing function.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};

/// Distances at or below this are treated as coincident nodes.
pub const COINCIDENT_TOL: f64 = 1e-12;

/// Allowed deviation of a bearing from unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Position(pub DVector<f64>);

impl Position {
    pub fn new(coords: &[f64]) -> Self {
        Position(DVector::from_column_slice(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Unit vector pointing from `p_j` towards `p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BearingVector(DVector<f64>);

impl BearingVector {
    /// Wraps a vector that the caller claims has unit norm. The claim is
    /// checked by [`projection_matrix`], not here.
    pub fn from_raw(v: DVector<f64>) -> Self {
        BearingVector(v)
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `I_d - g g^T` for a unit bearing `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionWeight(DMatrix<f64>);

impl ProjectionWeight {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

pub fn bearing_vector(p_i: &Position, p_j: &Position) -> Result<BearingVector> {
    bearing_between(p_i, p_j).map_err(|_| Error::CoincidentNodes(0, 1))
}

fn bearing_between(p_i: &Position, p_j: &Position) -> std::result::Result<BearingVector, ()> {
    let diff = &p_i.0 - &p_j.0;
    let len = diff.norm();
    if len <= COINCIDENT_TOL {
        return Err(());
    }
    Ok(BearingVector(diff / len))
}

pub fn projection_matrix(g: &BearingVector) -> Result<ProjectionWeight> {
    let norm = g.0.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NonUnitInput(norm));
    }
    let d = g.0.len();
    let mut a = DMatrix::identity(d, d) - &g.0 * g.0.transpose();
    // exact symmetry regardless of rounding in the outer product
    for r in 0..d {
        for c in (r + 1)..d {
            let v = 0.5 * (a[(r, c)] + a[(c, r)]);
            a[(r, c)] = v;
            a[(c, r)] = v;
        }
    }
    Ok(ProjectionWeight(a))
}

/// A graph embedded in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Framework {
    positions: Vec<Position>,
    edges: Vec<(usize, usize)>,
    dim: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Framework {
    /// Validates and canonicalizes the edge list (orientation `i < j`,
    /// lexicographic order). Self-loops, duplicates, out-of-range endpoints
    /// and coincident endpoints are rejected.
    pub fn new(positions: Vec<Position>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidFramework("no nodes".into()));
        }
        let dim = positions[0].dim();
        if dim < 2 {
            return Err(Error::InvalidFramework(format!("dimension {dim} < 2")));
        }
        for (i, p) in positions.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.dim(),
                });
            }
            if p.0.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidFramework(format!("node {i} has non-finite coordinates")));
            }
        }

        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidFramework(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidFramework(format!("self-loop at node {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidFramework(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        for &(i, j) in &canon {
            if (&positions[i].0 - &positions[j].0).norm() <= COINCIDENT_TOL {
                return Err(Error::CoincidentNodes(i, j));
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        for (k, &(i, j)) in canon.iter().enumerate() {
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        for row in &mut adjacency {
            row.sort_unstable();
        }

        Ok(Framework {
            positions,
            edges: canon,
            dim,
            adjacency,
        })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().map(|&(j, _)| j)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Canonical index of the edge joining `i` and `j`, if any.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.adjacency[i];
        row.binary_search_by_key(&j, |&(nb, _)| nb)
            .ok()
            .map(|pos| row[pos].1)
    }

    /// Stacked configuration `p` of length `dn`.
    pub fn stacked_positions(&self) -> DVector<f64> {
        let d = self.dim;
        let mut p = DVector::zeros(d * self.node_count());
        for (i, pos) in self.positions.iter().enumerate() {
            p.rows_mut(i * d, d).copy_from(&pos.0);
        }
        p
    }

    /// Bearing of canonical edge `k`.
    pub fn edge_bearing(&self, k: usize) -> BearingVector {
        let (i, j) = self.edges[k];
        // coincidence was ruled out at construction
        bearing_between(&self.positions[i], &self.positions[j]).expect("validated framework")
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        let (i, j) = self.edges[k];
        (&self.positions[i].0 - &self.positions[j].0).norm()
    }

    /// Projection weight `A_k` of canonical edge `k`.
    pub fn edge_weight(&self, k: usize) -> ProjectionWeight {
        projection_matrix(&self.edge_bearing(k)).expect("bearing has unit norm")
    }

    /// Returns a copy with edge `k` removed.
    pub fn without_edge(&self, k: usize) -> Self {
        let mut edges = self.edges.clone();
        edges.remove(k);
        Framework::new(self.positions.clone(), &edges).expect("subgraph of a valid framework")
    }

    /// `m x n` signed incidence matrix: `+1` at the lower endpoint.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.edge_count(), self.node_count());
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            h[(k, i)] = 1.0;
            h[(k, j)] = -1.0;
        }
        h
    }
}

/// Stacked bearings `[g_1; ...; g_m]` in canonical edge order.
pub fn bearing_function(fw: &Framework) -> DVector<f64> {
    let d = fw.dim();
    let mut out = DVector::zeros(d * fw.edge_count());
    for k in 0..fw.edge_count() {
        out.rows_mut(k * d, d).copy_from(fw.edge_bearing(k).direction());
    }
    out
}

/// `diag(A_k / l_k) (H (x) I_d)`, the Jacobian of [`bearing_function`].
pub fn bearing_rigidity_matrix(fw: &Framework) -> DMatrix<f64> {
    let d = fw.dim();
    let mut r = DMatrix::zeros(d * fw.edge_count(), d * fw.node_count());
    for (k, &(i, j)) in fw.edges().iter().enumerate() {
        let block = fw.edge_weight(k).into_matrix() / fw.edge_length(k);
        r.view_mut((k * d, i * d), (d, d)).copy_from(&block);
        r.view_mut((k * d, j * d), (d, d)).copy_from(&(-block));
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub rigidity_matrix_rank: usize,
    pub required_rank: usize,
    pub is_rigid: bool,
    pub null_space_dimension: usize,
}

impl RigidityReport {
    /// Builds a report from a rank measured on a `dn`-column matrix.
    pub fn from_rank(rank: usize, n: usize, d: usize) -> Self {
        let required_rank = d * n - d - 1;
        RigidityReport {
            rigidity_matrix_rank: rank,
            required_rank,
            is_rigid: rank == required_rank,
            null_space_dimension: d * n - rank,
        }
    }
}

/// Infinitesimal bearing rigidity via `rank(R_B) == dn - d - 1`.
pub fn rigidity_test(fw: &Framework, rel_tol: f64) -> Result<RigidityReport> {
    if !(rel_tol > 0.0 && rel_tol < 1e-3) {
        return Err(Error::InvalidParams(format!(
            "rank tolerance {rel_tol} must lie in (0, 1e-3)"
        )));
    }
    let rank = linalg::numerical_rank(&bearing_rigidity_matrix(fw), rel_tol);
    Ok(RigidityReport::from_rank(rank, fw.node_count(), fw.dim()))
}

/// [`rigidity_test`] at the default `1e-9` relative tolerance.
pub fn is_infinitesimally_rigid(fw: &Framework) -> bool {
    rigidity_test(fw, DEFAULT_RANK_TOL)
        .map(|r| r.is_rigid)
        .unwrap_or(false)
}

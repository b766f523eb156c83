//! Proximity communication graph: hysteresis edge state, adjacency, degree,
//! Laplacian and algebraic connectivity.

use std::collections::VecDeque;

use crate::eigen::{symmetric_eigen, DenseMatrix};
use crate::error::{Error, Result};
use crate::types::Vec2;

/// Below this the Fiedler value counts as zero.
pub const CONNECTIVITY_EPS: f64 = 1e-9;

/// Symmetric binary N×N matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn empty(n: usize) -> Self {
        BinaryMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut m = Self::empty(n);
        for &(i, j) in pairs {
            m.set(i, j, true);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.n + j] != 0
    }

    /// Sets both (i, j) and (j, i). Diagonal writes are ignored.
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if i == j {
            return;
        }
        let v = u8::from(on);
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn degree(&self, i: usize) -> usize {
        self.data[i * self.n..(i + 1) * self.n]
            .iter()
            .filter(|&&v| v != 0)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.get(i, j))
    }

    pub fn edge_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count() / 2
    }

    /// Row-major flattening, as written to mission logs.
    pub fn flattened(&self) -> &[u8] {
        &self.data
    }
}

/// Raw disk-graph adjacency `a_ij`.
pub type Adjacency = BinaryMatrix;

/// Persistent hysteresis edge indicator `σ_ij`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaMatrix(pub BinaryMatrix);

impl SigmaMatrix {
    pub fn empty(n: usize) -> Self {
        SigmaMatrix(BinaryMatrix::empty(n))
    }

    /// Start-of-mission state: `σ_ij = 1` iff `d < r_com`.
    pub fn from_positions(positions: &[Vec2], r_com: f64) -> Self {
        SigmaMatrix(adjacency_from_positions(positions, r_com))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.0.get(i, j)
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.0.set(i, j, on)
    }

    pub fn as_matrix(&self) -> &BinaryMatrix {
        &self.0
    }
}

/// One step of the hysteresis rule for a single pair.
///
/// | previous | distance            | next |
/// |----------|---------------------|------|
/// | 0        | `d >= r_com - eps`  | 0    |
/// | 0        | `d <  r_com - eps`  | 1    |
/// | 1        | `d <  r_com`        | 1    |
/// | 1        | `d >= r_com`        | 0    |
#[inline]
pub fn sigma_transition(prev: bool, distance: f64, r_com: f64, epsilon: f64) -> bool {
    if prev {
        distance < r_com
    } else {
        distance < r_com - epsilon
    }
}

/// Applies [`sigma_transition`] to every pair.
pub fn update_sigma(
    prev: &SigmaMatrix,
    distances: &[Vec<f64>],
    r_com: f64,
    epsilon: f64,
) -> Result<SigmaMatrix> {
    let n = prev.dim();
    if distances.len() != n || distances.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "distance matrix must be {n}x{n}"
        )));
    }
    let mut next = SigmaMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if distances[i][j] != distances[j][i] {
                return Err(Error::NotSymmetric(i, j));
            }
            let on = sigma_transition(prev.get(i, j), distances[i][j], r_com, epsilon);
            next.set(i, j, on);
        }
    }
    Ok(next)
}

/// `a_ij = 1` iff the euclidean distance is strictly below `r_com`.
pub fn adjacency_from_positions(positions: &[Vec2], r_com: f64) -> Adjacency {
    let n = positions.len();
    let mut a = BinaryMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if positions[i].distance(positions[j]) < r_com {
                a.set(i, j, true);
            }
        }
    }
    a
}

/// Adjacency, degree and Laplacian of one graph snapshot.
#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub adjacency: Adjacency,
    pub degree: Vec<usize>,
    pub laplacian: DenseMatrix,
}

impl GraphMatrices {
    pub fn new(adjacency: Adjacency) -> Self {
        let degree = adjacency.degrees();
        let laplacian = laplacian(&adjacency);
        GraphMatrices {
            adjacency,
            degree,
            laplacian,
        }
    }
}

/// `L = D − A`.
pub fn laplacian(adjacency: &Adjacency) -> DenseMatrix {
    let n = adjacency.dim();
    let mut l = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if adjacency.get(i, j) {
                l.set(i, j, -1.0);
            }
        }
        l.set(i, i, adjacency.degree(i) as f64);
    }
    l
}

/// Second-smallest Laplacian eigenvalue (algebraic connectivity).
/// Round-off negatives are reported as 0.
pub fn fiedler_value(laplacian: &DenseMatrix) -> Result<f64> {
    let n = laplacian.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "the Fiedler value needs at least 2 vertices".into(),
        ));
    }
    let eig = symmetric_eigen(laplacian)?;
    Ok(eig.values[1].max(0.0))
}

/// Breadth-first search from vertex 0.
pub fn is_connected(adjacency: &Adjacency) -> bool {
    let n = adjacency.dim();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        for j in adjacency.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == n
}

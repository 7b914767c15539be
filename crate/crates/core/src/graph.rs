//! Undirected signed graphs, structural balance and the gauge transformation.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{operator_norm, sym_eigen, DenseMatrix, SYM_TOL};
use crate::{Error, Result};

/// Tolerance used when reconstructing weights from a Laplacian.
pub const LAPLACIAN_DEGREE_TOL: f64 = 1e-9;
/// Relative size of the Laplacian kernel threshold: `zero_tol = 1e-9·‖L‖`.
pub const ZERO_TOL_REL: f64 = 1e-9;

/// An edge seen from one endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub agent: usize,
    /// `|w_ij|`
    pub weight: f64,
    /// `sgn(w_ij)`, either `1.0` or `-1.0`.
    pub sign: f64,
}

/// Symmetric signed adjacency with zero diagonal and a connected support.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    weights: DenseMatrix,
    neighbors: Vec<Vec<Neighbor>>,
}

impl SignedGraph {
    /// Validates `W` (square, symmetric, zero diagonal, connected support).
    pub fn new(weights: DenseMatrix) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidInput(alloc::format!(
                "adjacency must be square, got {}x{}",
                weights.rows(),
                weights.cols()
            )));
        }
        let n = weights.rows();
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(alloc::format!(
                    "self-loop at vertex {i}: w_ii = {}",
                    weights[(i, i)]
                )));
            }
        }
        let asymmetry = weights.relative_asymmetry();
        if asymmetry > SYM_TOL {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let weights = weights.symmetrize();
        let neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| weights[(i, j)] != 0.0)
                    .map(|j| {
                        let w = weights[(i, j)];
                        Neighbor { agent: j, weight: w.abs(), sign: if w > 0.0 { 1.0 } else { -1.0 } }
                    })
                    .collect()
            })
            .collect();
        let g = SignedGraph { weights, neighbors };
        if !g.is_connected() {
            return Err(Error::NotConnected);
        }
        Ok(g)
    }

    /// Recovers `W` from a Laplacian: `w_ij = −L_ij` off the diagonal, and the
    /// diagonal must equal the absolute degree `Σ_j |w_ij|`.
    pub fn from_laplacian(laplacian: &DenseMatrix) -> Result<Self> {
        if !laplacian.is_square() {
            return Err(Error::InvalidInput(alloc::format!(
                "Laplacian must be square, got {}x{}",
                laplacian.rows(),
                laplacian.cols()
            )));
        }
        let n = laplacian.rows();
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                if i != j {
                    w[(i, j)] = -laplacian[(i, j)];
                    degree += laplacian[(i, j)].abs();
                }
            }
            let diag = laplacian[(i, i)];
            if (diag - degree).abs() > LAPLACIAN_DEGREE_TOL * degree.max(1.0) {
                return Err(Error::InvalidInput(alloc::format!(
                    "Laplacian row {i}: diagonal {diag} differs from absolute degree {degree}"
                )));
            }
        }
        Self::new(w)
    }

    pub fn agent_count(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    fn is_connected(&self) -> bool {
        let n = self.agent_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for nb in &self.neighbors[u] {
                if !seen[nb.agent] {
                    seen[nb.agent] = true;
                    count += 1;
                    queue.push_back(nb.agent);
                }
            }
        }
        count == n
    }

    /// The graph with adjacency `DWD`.
    pub fn gauged(&self, gauge: &GaugeDecomposition) -> Result<Self> {
        let d = gauge.matrix();
        Self::new(&(&d * &self.weights) * &d)
    }
}

/// Signature `σ ∈ {±1}^N` with `DWD ≥ 0` entrywise for `D = diag(σ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeDecomposition {
    sigma: Vec<i8>,
}

impl GaugeDecomposition {
    pub fn sigma(&self) -> &[i8] {
        &self.sigma
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.sigma[i])
    }

    /// `D = diag(σ)`.
    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_diag(&self.sigma.iter().map(|&s| f64::from(s)).collect::<Vec<_>>())
    }

    /// Vertex sets with `σ = +1` and `σ = −1`.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        let plus = (0..self.sigma.len()).filter(|&i| self.sigma[i] > 0).collect();
        let minus = (0..self.sigma.len()).filter(|&i| self.sigma[i] < 0).collect();
        (plus, minus)
    }
}

/// `L = C − W` with `C = diag(Σ_j |w_ij|)`.
pub fn laplacian(g: &SignedGraph) -> DenseMatrix {
    let n = g.agent_count();
    let mut l = g.weights.scale(-1.0);
    for i in 0..n {
        l[(i, i)] = g.neighbors[i].iter().map(|nb| nb.weight).sum();
    }
    l
}

/// Breadth-first sign colouring from vertex 0 (`σ₀ = +1`).
///
/// A positive edge copies the sign, a negative edge flips it. A conflict
/// means a cycle with an odd number of negative edges, which is returned in
/// the error.
pub fn check_structural_balance(g: &SignedGraph) -> Result<GaugeDecomposition> {
    let n = g.agent_count();
    let mut sigma = vec![0i8; n];
    let mut parent = vec![usize::MAX; n];
    sigma[0] = 1;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for nb in g.neighbors(u) {
            let want = if nb.sign > 0.0 { sigma[u] } else { -sigma[u] };
            if sigma[nb.agent] == 0 {
                sigma[nb.agent] = want;
                parent[nb.agent] = u;
                queue.push_back(nb.agent);
            } else if sigma[nb.agent] != want {
                return Err(Error::NotBalanced { cycle: tree_cycle(&parent, u, nb.agent) });
            }
        }
    }
    if sigma.contains(&0) {
        return Err(Error::NotConnected);
    }
    Ok(GaugeDecomposition { sigma })
}

/// Cycle closed by the non-tree edge `(u, v)` in the BFS tree `parent`.
fn tree_cycle(parent: &[usize], u: usize, v: usize) -> Vec<usize> {
    let path_to_root = |mut x: usize| {
        let mut p = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            p.push(x);
        }
        p
    };
    let pu = path_to_root(u);
    let pv = path_to_root(v);
    let lca = *pu.iter().find(|x| pv.contains(x)).expect("common root");
    let mut cycle: Vec<usize> = pu.iter().copied().take_while(|&x| x != lca).collect();
    cycle.push(lca);
    let back: Vec<usize> = pv.iter().copied().take_while(|&x| x != lca).collect();
    cycle.extend(back.into_iter().rev());
    cycle
}

/// `L_D = D·L·D`, the Laplacian of the unsigned graph `|W|`.
pub fn gauged_laplacian(g: &SignedGraph, gauge: &GaugeDecomposition) -> DenseMatrix {
    let d = gauge.matrix();
    &(&d * &laplacian(g)) * &d
}

/// Smallest eigenvalue above `zero_tol = 1e-9·‖L‖` of a connected signed or
/// unsigned Laplacian.
pub fn algebraic_connectivity(l: &DenseMatrix) -> Result<f64> {
    let eig = sym_eigen(l)?;
    let zero_tol = ZERO_TOL_REL * operator_norm(l)?;
    if eig.min() < -zero_tol {
        return Err(Error::InvalidLaplacian(alloc::format!(
            "negative eigenvalue {:e}",
            eig.min()
        )));
    }
    let kernel = eig.values.iter().filter(|&&v| v <= zero_tol).count();
    match kernel {
        0 => Err(Error::InvalidLaplacian("no zero eigenvalue".into())),
        1 => eig
            .values
            .iter()
            .copied()
            .find(|&v| v > zero_tol)
            .ok_or(Error::NotConnected),
        _ => Err(Error::NotConnected),
    }
}

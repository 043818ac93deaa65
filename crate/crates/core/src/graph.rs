//! Agent topologies, mixing matrices, and their spectral quantities.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rng::substream;

/// Retry budget for connectivity resampling.
const CONNECTIVITY_RETRIES: usize = 100;

/// Power-iteration settings for the spectral norm.
const POWER_ITER_CAP: usize = 10_000;
const POWER_ITER_TOL: f64 = 1e-10;

/// An undirected communication graph over `n_total` agents, a subset of
/// which may be Byzantine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub n_total: usize,
    /// Unordered pairs `(i, j)` with `i < j`.
    pub edges: BTreeSet<(usize, usize)>,
    /// Byzantine agent indices (possibly empty).
    pub byzantine: BTreeSet<usize>,
}

impl Topology {
    /// Build and validate a topology.
    pub fn new(
        n_total: usize,
        edges: BTreeSet<(usize, usize)>,
        byzantine: BTreeSet<usize>,
    ) -> Result<Self> {
        let t = Topology {
            n_total,
            edges,
            byzantine,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        if self.n_total < 1 {
            return Err(SimError::InvalidTopology("need at least one agent".into()));
        }
        for &(i, j) in &self.edges {
            if i >= j {
                return Err(SimError::InvalidTopology(format!(
                    "edge ({i},{j}) is not ordered i < j"
                )));
            }
            if j >= self.n_total {
                return Err(SimError::InvalidTopology(format!(
                    "edge ({i},{j}) out of range for {} agents",
                    self.n_total
                )));
            }
        }
        for &b in &self.byzantine {
            if b >= self.n_total {
                return Err(SimError::InvalidTopology(format!(
                    "byzantine index {b} out of range"
                )));
            }
        }
        if !is_connected(self.n_total, &self.edges, &BTreeSet::new()) {
            return Err(SimError::InvalidTopology("graph is disconnected".into()));
        }
        if !self.byzantine.is_empty()
            && !is_connected(self.n_total, &self.edges, &self.byzantine)
        {
            return Err(SimError::DisconnectedHonestSubgraph);
        }
        Ok(())
    }

    /// Neighbors of `n`, ascending.
    pub fn neighbors(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(i, j) in &self.edges {
            if i == n {
                out.push(j);
            } else if j == n {
                out.push(i);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn degree(&self, n: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == n || j == n)
            .count()
    }

    /// Non-Byzantine agent indices, ascending.
    pub fn honest(&self) -> Vec<usize> {
        (0..self.n_total)
            .filter(|i| !self.byzantine.contains(i))
            .collect()
    }

    pub fn is_byzantine(&self, n: usize) -> bool {
        self.byzantine.contains(&n)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.contains(&key)
    }

    /// Complete graph on `n` agents.
    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.insert((i, j));
            }
        }
        Topology::new(n, edges, BTreeSet::new())
    }

    /// Path graph `0 - 1 - ... - n-1`.
    pub fn path(n: usize) -> Result<Self> {
        let edges: BTreeSet<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Topology::new(n, edges, BTreeSet::new())
    }
}

/// Breadth-first connectivity over agents not in `excluded`.
fn is_connected(n_total: usize, edges: &BTreeSet<(usize, usize)>, excluded: &BTreeSet<usize>) -> bool {
    let nodes: Vec<usize> = (0..n_total).filter(|i| !excluded.contains(i)).collect();
    if nodes.is_empty() {
        return false;
    }
    let mut adj = vec![Vec::new(); n_total];
    for &(i, j) in edges {
        if !excluded.contains(&i) && !excluded.contains(&j) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = vec![false; n_total];
    let mut stack = vec![nodes[0]];
    seen[nodes[0]] = true;
    let mut count = 0usize;
    while let Some(u) = stack.pop() {
        count += 1;
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    count == nodes.len()
}

/// Sample a connected Erdos-Renyi graph `G(n, p)`.
///
/// A pure function of `(n, p, seed)`: edges are drawn pair-by-pair in fixed
/// `(i, j)` order from the seed's substream, resampling up to the retry
/// budget until the graph is connected.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Topology> {
    assert!(n >= 2, "need at least two agents");
    assert!(p > 0.0 && p <= 1.0, "edge probability must be in (0, 1]");
    let mut rng = substream(seed, "topology", 0, 0);
    for _ in 0..CONNECTIVITY_RETRIES {
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    edges.insert((i, j));
                }
            }
        }
        if is_connected(n, &edges, &BTreeSet::new()) {
            return Topology::new(n, edges, BTreeSet::new());
        }
    }
    Err(SimError::ConnectivityFailure {
        n,
        p,
        attempts: CONNECTIVITY_RETRIES,
    })
}

/// Mark `b_count` agents Byzantine, drawn uniformly without replacement,
/// resampling until the honest subgraph stays connected.
pub fn assign_byzantine(t: &Topology, b_count: usize, rng: &mut ChaCha8Rng) -> Result<Topology> {
    if b_count == 0 {
        return Ok(t.clone());
    }
    if b_count >= t.n_total {
        return Err(SimError::InvalidTopology(format!(
            "{b_count} byzantine agents leave no honest agent among {}",
            t.n_total
        )));
    }
    for _ in 0..CONNECTIVITY_RETRIES {
        let mut pool: Vec<usize> = (0..t.n_total).collect();
        let mut byz = BTreeSet::new();
        for _ in 0..b_count {
            let k = rng.random_range(0..pool.len());
            byz.insert(pool.swap_remove(k));
        }
        if is_connected(t.n_total, &t.edges, &byz) {
            return Topology::new(t.n_total, t.edges.clone(), byz);
        }
    }
    Err(SimError::DisconnectedHonestSubgraph)
}

/// A row-stochastic mixing matrix with its spectral quantities.
///
/// `lambda = 1 - ||(I - (1/N) 11^T) W||^2` (spectral norm) and
/// `chi_sq = (1/N) ||W^T 1 - 1||^2`, the deviation from column
/// stochasticity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingMatrix {
    pub weights: Vec<Vec<f64>>,
    pub lambda: f64,
    pub chi_sq: f64,
}

impl MixingMatrix {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Construct from a weight matrix, computing the spectral quantities.
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Result<Self> {
        let (lambda, chi_sq) = spectral_quantities(&weights)?;
        Ok(MixingMatrix {
            weights,
            lambda,
            chi_sq,
        })
    }
}

/// Metropolis-Hastings weights for a connected undirected graph:
/// `w_nm = 1 / (1 + max(deg n, deg m))` on edges, diagonal absorbs the
/// remainder. Symmetric and doubly stochastic.
pub fn metropolis_weights(t: &Topology) -> Result<MixingMatrix> {
    let n = t.n_total;
    let deg: Vec<usize> = (0..n).map(|i| t.degree(i)).collect();
    let mut w = vec![vec![0.0; n]; n];
    for &(i, j) in &t.edges {
        let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[i][j] = v;
        w[j][i] = v;
    }
    for i in 0..n {
        let off: f64 = w[i].iter().sum();
        w[i][i] = 1.0 - off;
    }
    MixingMatrix::from_weights(w)
}

/// Compute `(lambda, chi_sq)` for a row-stochastic matrix.
///
/// The spectral norm of `M = (I - (1/N) 11^T) W` is found by power
/// iteration on `M^T M` to relative tolerance 1e-10 with a fixed iteration
/// cap. Several fixed start vectors are tried and the largest estimate
/// kept, since any single deterministic start can be orthogonal to the
/// leading eigenvector.
pub fn spectral_quantities(w: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n = w.len();
    assert!(n > 0, "empty matrix");
    for (i, row) in w.iter().enumerate() {
        assert_eq!(row.len(), n, "matrix must be square");
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::NonStochasticInput { row: i, sum });
        }
    }

    // chi_sq = (1/N) || W^T 1 - 1 ||^2  (column sums vs 1)
    let mut chi_sq = 0.0;
    for j in 0..n {
        let col: f64 = (0..n).map(|i| w[i][j]).sum();
        chi_sq += (col - 1.0) * (col - 1.0);
    }
    chi_sq /= n as f64;

    let matvec = |x: &[f64]| -> Vec<f64> {
        // y = M x  with  M = (I - 11^T/N) W
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = crate::linalg::dot(&w[i], x);
        }
        let mean: f64 = y.iter().sum::<f64>() / n as f64;
        for v in y.iter_mut() {
            *v -= mean;
        }
        y
    };
    let matvec_t = |x: &[f64]| -> Vec<f64> {
        // y = M^T x  with  M^T = W^T (I - 11^T/N)
        let mean: f64 = x.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                y[j] += w[i][j] * centered[i];
            }
        }
        y
    };

    let mut best_sq = 0.0f64;
    for start in 0..3 {
        let mut v: Vec<f64> = (0..n)
            .map(|i| match start {
                0 => 1.0 + (i as f64) / (n as f64),
                1 => {
                    if i % 2 == 0 {
                        1.0
                    } else {
                        -1.0 - (i as f64) / (n as f64)
                    }
                }
                _ => ((i as f64) + 0.5).sin(),
            })
            .collect();
        let nv = crate::linalg::norm(&v);
        if nv == 0.0 {
            continue;
        }
        crate::linalg::scale(&mut v, 1.0 / nv);
        let mut prev = 0.0f64;
        for _ in 0..POWER_ITER_CAP {
            let u = matvec_t(&matvec(&v)); // u = M^T M v
            let sq = crate::linalg::dot(&v, &u); // Rayleigh quotient = sigma^2 estimate
            let un = crate::linalg::norm(&u);
            if un == 0.0 {
                prev = 0.0;
                break;
            }
            v = u;
            crate::linalg::scale(&mut v, 1.0 / un);
            if (sq - prev).abs() <= POWER_ITER_TOL * sq.abs().max(1e-300) {
                prev = sq;
                break;
            }
            prev = sq;
        }
        best_sq = best_sq.max(prev.max(0.0));
    }

    let lambda = 1.0 - best_sq;
    Ok((lambda, chi_sq))
}

/// Restrict a full-graph mixing matrix to the non-Byzantine agents and
/// renormalize each row to sum 1. Used as the reference virtual mixing
/// matrix when certifying robust aggregators.
pub fn induced_nonbyzantine_matrix(t: &Topology, full: &MixingMatrix) -> Result<MixingMatrix> {
    assert!(
        !t.byzantine.is_empty(),
        "induced matrix is only defined when the byzantine set is nonempty"
    );
    if !is_connected(t.n_total, &t.edges, &t.byzantine) {
        return Err(SimError::DisconnectedHonestSubgraph);
    }
    let honest = t.honest();
    let m = honest.len();
    let mut w = vec![vec![0.0; m]; m];
    for (a, &i) in honest.iter().enumerate() {
        for (b, &j) in honest.iter().enumerate() {
            w[a][b] = full.weights[i][j];
        }
        let sum: f64 = w[a].iter().sum();
        if sum <= 0.0 {
            return Err(SimError::DisconnectedHonestSubgraph);
        }
        for v in w[a].iter_mut() {
            *v /= sum;
        }
    }
    MixingMatrix::from_weights(w)
}

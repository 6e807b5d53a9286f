//! Minimum-cost assignment and the bipartite construction that turns a
//! forest-to-forest restricted mapping into an assignment problem.

use crate::error::{Error, Result};

/// Square cost matrix. `f64::INFINITY` marks a forbidden cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        if let Some(pos) = entries
            .iter()
            .position(|&e| e.is_nan() || e == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidArgument(format!(
                "cost matrix entry {pos} is not a cost"
            )));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("cost matrix must be square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `permutation[row]` is the column assigned to `row`.
    pub permutation: Vec<usize>,
    pub cost: f64,
}

/// Kuhn–Munkres with row/column potentials, O(n³). Forbidden cells never enter
/// an augmenting path.
pub fn min_cost_assignment(m: &CostMatrix) -> Result<Assignment> {
    let n = m.n;
    let inf = f64::INFINITY;
    // 1-based; column 0 is the virtual start of each augmenting search.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = None;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let a = m.get(i0 - 1, j - 1);
                if a.is_finite() {
                    let cur = a - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = Some(j);
                }
            }
            let Some(j1) = j1 else {
                return Err(Error::NoFiniteAssignment);
            };
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0; n];
    for j in 1..=n {
        permutation[row_of[j] - 1] = j - 1;
    }
    let cost = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| m.get(i, j))
        .sum();
    Ok(Assignment { permutation, cost })
}

/// Builds the `(n1 + n2)²` matrix whose optimal assignment cost equals the
/// cheapest restricted mapping between two forests.
///
/// `subtree_dists` is row-major `n1 × n2`. Rows are the trees of the first
/// forest followed by one insertion slot per tree of the second; columns are
/// the trees of the second forest followed by one deletion slot per tree of the
/// first. A tree may only use its own slot.
pub fn build_forest_matrix(
    subtree_dists: &[f64],
    delete_costs: &[f64],
    insert_costs: &[f64],
) -> Result<CostMatrix> {
    let (n1, n2) = (delete_costs.len(), insert_costs.len());
    if subtree_dists.len() != n1 * n2 {
        return Err(Error::Dimension(format!(
            "{} subtree distances for {n1} x {n2} forests",
            subtree_dists.len()
        )));
    }
    let n = n1 + n2;
    let mut entries = vec![f64::INFINITY; n * n];
    for s in 0..n1 {
        entries[s * n..s * n + n2].copy_from_slice(&subtree_dists[s * n2..(s + 1) * n2]);
        entries[s * n + n2 + s] = delete_costs[s];
    }
    for t in 0..n2 {
        let row = (n1 + t) * n;
        entries[row + t] = insert_costs[t];
        entries[row + n2..row + n].fill(0.0);
    }
    CostMatrix::new(n, entries)
}

/// Optimal restricted mapping between two forests, decoded from the
/// assignment on [`build_forest_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForestMatching {
    pub pairs: Vec<(usize, usize)>,
    pub deleted: Vec<usize>,
    pub inserted: Vec<usize>,
    pub cost: f64,
}

pub fn match_forests(
    subtree_dists: &[f64],
    delete_costs: &[f64],
    insert_costs: &[f64],
) -> Result<ForestMatching> {
    let (n1, n2) = (delete_costs.len(), insert_costs.len());
    let m = build_forest_matrix(subtree_dists, delete_costs, insert_costs)?;
    let a = min_cost_assignment(&m)?;
    let mut out = ForestMatching {
        pairs: Vec::new(),
        deleted: Vec::new(),
        inserted: Vec::new(),
        cost: a.cost,
    };
    for (row, &col) in a.permutation.iter().enumerate() {
        match (row < n1, col < n2) {
            (true, true) => out.pairs.push((row, col)),
            (true, false) => out.deleted.push(row),
            (false, true) => out.inserted.push(col),
            (false, false) => {}
        }
    }
    Ok(out)
}

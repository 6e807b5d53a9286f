//! Exhaustive reference for the constrained edit distance on small trees.
//!
//! Every partial one-to-one correspondence is enumerated with T1 nodes taken in
//! preorder. A candidate pair is dropped as soon as it breaks ancestry with a
//! pair already chosen; the lca condition is checked on complete mappings.

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::ted::{EditMapping, LabeledTree};

/// Largest tree the oracle accepts.
pub const ORACLE_MAX_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub distance: f64,
    pub witness: EditMapping,
    pub mappings_enumerated: u64,
}

struct Search<'a> {
    t1: &'a LabeledTree,
    t2: &'a LabeledTree,
    model: CostModel,
    constrained: bool,
    anc1: Vec<Vec<bool>>,
    anc2: Vec<Vec<bool>>,
    order1: Vec<usize>,
    used2: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    best: f64,
    best_pairs: Vec<(usize, usize)>,
    count: u64,
}

/// `anc[a][b]` is true when `a` is a proper ancestor of `b`, found by walking
/// parent links.
fn ancestor_table(t: &LabeledTree) -> Vec<Vec<bool>> {
    let n = t.len();
    let mut anc = vec![vec![false; n]; n];
    for (b, row) in (0..n).map(|b| (b, t.parent(b))) {
        let mut up = row;
        while let Some(a) = up {
            anc[a][b] = true;
            up = t.parent(a);
        }
    }
    anc
}

fn lca(anc: &[Vec<bool>], a: usize, b: usize) -> usize {
    let is_anc_or_self = |x: usize, y: usize| x == y || anc[x][y];
    // The deepest common ancestor has the most proper ancestors.
    (0..anc.len())
        .filter(|&x| is_anc_or_self(x, a) && is_anc_or_self(x, b))
        .max_by_key(|&x| (0..anc.len()).filter(|&y| anc[y][x]).count())
        .unwrap()
}

impl Search<'_> {
    fn consistent(&self, i: usize, j: usize) -> bool {
        self.pairs
            .iter()
            .all(|&(a, b)| self.anc1[a][i] == self.anc2[b][j] && self.anc1[i][a] == self.anc2[j][b])
    }

    fn lca_condition_holds(&self) -> bool {
        let p = &self.pairs;
        for x in 0..p.len() {
            for y in x + 1..p.len() {
                let l1 = lca(&self.anc1, p[x].0, p[y].0);
                let l2 = lca(&self.anc2, p[x].1, p[y].1);
                for (z, &(i3, j3)) in p.iter().enumerate() {
                    if z != x && z != y && self.anc1[l1][i3] != self.anc2[l2][j3] {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn cost(&self) -> f64 {
        let mut matched1 = vec![false; self.t1.len()];
        let mut matched2 = vec![false; self.t2.len()];
        let mut total = 0.0;
        for &(i, j) in &self.pairs {
            matched1[i] = true;
            matched2[j] = true;
            total += self.model.relabel(self.t1.label(i), self.t2.label(j));
        }
        for (i, _) in matched1.iter().enumerate().filter(|(_, &m)| !m) {
            total += self.model.delete(self.t1.label(i));
        }
        for (j, _) in matched2.iter().enumerate().filter(|(_, &m)| !m) {
            total += self.model.insert(self.t2.label(j));
        }
        total
    }

    fn run(&mut self, depth: usize) {
        if depth == self.order1.len() {
            self.count += 1;
            if self.constrained && !self.lca_condition_holds() {
                return;
            }
            let c = self.cost();
            if c < self.best {
                self.best = c;
                self.best_pairs = self.pairs.clone();
            }
            return;
        }
        let i = self.order1[depth];
        self.run(depth + 1);
        for j in 0..self.t2.len() {
            if self.used2[j] || !self.consistent(i, j) {
                continue;
            }
            self.used2[j] = true;
            self.pairs.push((i, j));
            self.run(depth + 1);
            self.pairs.pop();
            self.used2[j] = false;
        }
    }
}

fn search(
    t1: &LabeledTree,
    t2: &LabeledTree,
    model: CostModel,
    constrained: bool,
) -> Result<OracleResult> {
    if t1.len() > ORACLE_MAX_NODES || t2.len() > ORACLE_MAX_NODES {
        return Err(Error::OracleTooLarge(t1.len(), t2.len()));
    }
    let mut s = Search {
        t1,
        t2,
        model,
        constrained,
        anc1: ancestor_table(t1),
        anc2: ancestor_table(t2),
        order1: t1.preorder(),
        used2: vec![false; t2.len()],
        pairs: Vec::new(),
        best: f64::INFINITY,
        best_pairs: Vec::new(),
        count: 0,
    };
    s.run(0);

    let mut witness = EditMapping::default();
    let mut matched1 = vec![false; t1.len()];
    let mut matched2 = vec![false; t2.len()];
    for &(i, j) in &s.best_pairs {
        matched1[i] = true;
        matched2[j] = true;
        witness.pairs.push((t1.id(i), t2.id(j)));
    }
    witness.deleted = (0..t1.len())
        .filter(|&i| !matched1[i])
        .map(|i| t1.id(i))
        .collect();
    witness.inserted = (0..t2.len())
        .filter(|&j| !matched2[j])
        .map(|j| t2.id(j))
        .collect();
    witness.pairs.sort_unstable();
    witness.deleted.sort_unstable();
    witness.inserted.sort_unstable();
    Ok(OracleResult {
        distance: s.best,
        witness,
        mappings_enumerated: s.count,
    })
}

/// Minimum cost over all constrained edit mappings.
pub fn brute_force_dc(
    t1: &LabeledTree,
    t2: &LabeledTree,
    model: CostModel,
) -> Result<OracleResult> {
    search(t1, t2, model, true)
}

/// Minimum cost over all edit mappings that preserve ancestry, without the lca
/// condition. Never larger than [`brute_force_dc`].
pub fn brute_force_de(
    t1: &LabeledTree,
    t2: &LabeledTree,
    model: CostModel,
) -> Result<OracleResult> {
    search(t1, t2, model, false)
}

//! Persistence diagrams and the bottleneck and 1-Wasserstein distances
//! between them, both with the L∞ ground metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{min_cost_assignment, CostMatrix};
use crate::mergetree::{Interval, MergeTree};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub points: Vec<Interval>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<Interval>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !(p.birth <= p.death)) {
            return Err(Error::InvalidArgument(format!(
                "diagram point ({}, {}) lies below the diagonal",
                p.birth, p.death
            )));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("birth,death\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.birth, p.death));
        }
        out
    }
}

/// One point per extremum, the root pair included.
pub fn diagram_of(tree: &MergeTree) -> Result<PersistenceDiagram> {
    if !tree.is_paired() {
        return Err(Error::Unpaired);
    }
    Ok(PersistenceDiagram {
        points: tree.extrema().map(|n| n.interval.unwrap()).collect(),
    })
}

fn linf(p: &Interval, q: &Interval) -> f64 {
    (p.birth - q.birth).abs().max((p.death - q.death).abs())
}

fn to_diagonal(p: &Interval) -> f64 {
    (p.death - p.birth) / 2.0
}

/// Diagonal-augmented cost matrix: rows are `a` then one diagonal slot per
/// point of `b`; columns are `b` then one diagonal slot per point of `a`.
fn augmented(a: &PersistenceDiagram, b: &PersistenceDiagram) -> (usize, Vec<f64>) {
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let mut e = vec![f64::INFINITY; n * n];
    for (i, p) in a.points.iter().enumerate() {
        for (j, q) in b.points.iter().enumerate() {
            e[i * n + j] = linf(p, q);
        }
        e[i * n + nb + i] = to_diagonal(p);
    }
    for (j, q) in b.points.iter().enumerate() {
        let row = (na + j) * n;
        e[row + j] = to_diagonal(q);
        e[row + nb..row + n].fill(0.0);
    }
    (n, e)
}

pub fn wasserstein1(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    let (n, e) = augmented(a, b);
    let m = CostMatrix::new(n, e).expect("augmented matrix is well formed");
    min_cost_assignment(&m)
        .expect("diagonal slots always admit an assignment")
        .cost
}

/// Smallest threshold admitting a perfect matching on the augmented graph,
/// found by binary search over the sorted candidate costs.
pub fn bottleneck(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    let (n, e) = augmented(a, b);
    if n == 0 {
        return 0.0;
    }
    let mut candidates: Vec<f64> = e.iter().copied().filter(|c| c.is_finite()).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(n, &e, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

fn has_perfect_matching(n: usize, cost: &[f64], limit: f64) -> bool {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| cost[i * n + j] <= limit).collect())
        .collect();
    let mut match_col = vec![usize::MAX; n];
    fn augment(row: usize, adj: &[Vec<usize>], seen: &mut [bool], match_col: &mut [usize]) -> bool {
        for &col in &adj[row] {
            if seen[col] {
                continue;
            }
            seen[col] = true;
            if match_col[col] == usize::MAX || augment(match_col[col], adj, seen, match_col) {
                match_col[col] = row;
                return true;
            }
        }
        false
    }
    (0..n).all(|row| {
        let mut seen = vec![false; n];
        augment(row, &adj, &mut seen, &mut match_col)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::field::ScalarGraph;
    use crate::mergetree::Orientation;
    use proptest::prelude::*;

    fn dgm(points: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(
            points
                .iter()
                .map(|&(b, d)| Interval::new(b, d).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn diagram_of_trees() {
        let path = |v: &[f64]| {
            ScalarGraph::new(v.to_vec(), (1..v.len()).map(|i| (i - 1, i)).collect()).unwrap()
        };
        let single = MergeTree::from_graph(&path(&[0.0, 5.0]), Orientation::Join).unwrap();
        assert_eq!(diagram_of(&single).unwrap(), dgm(&[(0.0, 5.0)]));

        let t = MergeTree::from_graph(&path(&[1.0, 4.0, 0.0, 3.0, 2.0, 5.0]), Orientation::Join)
            .unwrap();
        let mut pts = diagram_of(&t).unwrap().points;
        pts.sort_by(|a, b| a.birth.total_cmp(&b.birth));
        assert_eq!(pts, dgm(&[(0.0, 5.0), (1.0, 4.0), (2.0, 3.0)]).points);
        assert_eq!(pts.len(), t.extrema().count());

        let raw =
            crate::mergetree::build_merge_tree(&path(&[0.0, 1.0]), Orientation::Join).unwrap();
        assert!(matches!(diagram_of(&raw), Err(Error::Unpaired)));
    }

    #[test]
    fn spot_values() {
        let a = dgm(&[(0.0, 2.0)]);
        let empty = dgm(&[]);
        assert_eq!(bottleneck(&a, &a), 0.0);
        assert_eq!(wasserstein1(&a, &a), 0.0);
        assert_eq!(bottleneck(&a, &empty), 1.0);
        assert_eq!(wasserstein1(&a, &empty), 1.0);
        assert_eq!(bottleneck(&empty, &empty), 0.0);

        // Matching (1, 1.1) to the diagonal costs 0.05; the alternative moves
        // (0, 2) to (1, 1.1) at cost 1 and sends the other (0, 2) away at 1.
        let b = dgm(&[(0.0, 2.0), (1.0, 1.1)]);
        assert!((bottleneck(&a, &b) - 0.05).abs() < 1e-12);

        let p = dgm(&[(1.17, 1.39)]);
        let q = dgm(&[(1.06, 1.08)]);
        assert!((wasserstein1(&p, &q) - 0.12).abs() < 1e-12);
    }

    fn arb_dgm() -> impl Strategy<Value = PersistenceDiagram> {
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..6).prop_map(|pts| {
            PersistenceDiagram::new(
                pts.into_iter()
                    .map(|(b, len)| Interval::new(b, b + len).unwrap())
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn metric_properties(a in arb_dgm(), b in arb_dgm(), c in arb_dgm()) {
            for d in [bottleneck, wasserstein1] {
                prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
                prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
                prop_assert_eq!(d(&a, &a), 0.0);
            }
        }

        #[test]
        fn wasserstein_dominates_bottleneck(a in arb_dgm(), b in arb_dgm()) {
            prop_assert!(wasserstein1(&a, &b) >= bottleneck(&a, &b) - 1e-12);
        }

        #[test]
        fn singleton_wasserstein_is_winf_relabel(b1 in 0.0f64..1.0, l1 in 0.0f64..1.0,
                                                 b2 in 0.0f64..1.0, l2 in 0.0f64..1.0) {
            let p = Interval::new(b1, b1 + l1).unwrap();
            let q = Interval::new(b2, b2 + l2).unwrap();
            let w = wasserstein1(&PersistenceDiagram { points: vec![p] },
                                 &PersistenceDiagram { points: vec![q] });
            prop_assert!((w - CostModel::Winf.relabel(&p, &q)).abs() < 1e-12);
        }
    }
}

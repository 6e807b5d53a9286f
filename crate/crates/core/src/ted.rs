//! Constrained tree edit distance between merge trees.
//!
//! The distance is the cheapest edit mapping that sends disjoint subtrees to
//! disjoint subtrees. It is computed bottom-up over all pairs of subtrees:
//! each subtree pair either relabels its roots and matches the child forests,
//! or maps one side entirely into a single child of the other. Child forests
//! are matched through a minimum-cost assignment (see [`crate::matching`]).
//! The choice made at every table cell is recorded so that an optimal mapping
//! can be read back.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::matching::match_forests;
use crate::mergetree::{stabilize_counted, Interval, MergeTree, NodeId, StabilizationConfig};

/// A rooted unordered tree whose nodes carry birth–death intervals. The empty
/// tree has no root.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTree {
    ids: Vec<NodeId>,
    labels: Vec<Interval>,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    root: Option<usize>,
    enter: Vec<usize>,
    exit: Vec<usize>,
    depth: Vec<usize>,
}

impl LabeledTree {
    pub fn empty() -> Self {
        Self {
            ids: Vec::new(),
            labels: Vec::new(),
            children: Vec::new(),
            parent: Vec::new(),
            root: None,
            enter: Vec::new(),
            exit: Vec::new(),
            depth: Vec::new(),
        }
    }

    /// Builds a tree from per-node ids, labels and child index lists.
    pub fn new(
        ids: Vec<NodeId>,
        labels: Vec<Interval>,
        children: Vec<Vec<usize>>,
        root: usize,
    ) -> Result<Self> {
        let n = ids.len();
        if labels.len() != n || children.len() != n {
            return Err(Error::Dimension(format!(
                "{} ids, {} labels, {} child lists",
                n,
                labels.len(),
                children.len()
            )));
        }
        if root >= n {
            return Err(Error::InvalidTree(format!(
                "root index {root} out of range"
            )));
        }
        let mut parent = vec![None; n];
        for (p, cs) in children.iter().enumerate() {
            for &c in cs {
                if c >= n || c == root || parent[c].replace(p).is_some() {
                    return Err(Error::InvalidTree(format!("bad child link {p} -> {c}")));
                }
            }
        }
        let mut t = Self {
            ids,
            labels,
            children,
            parent,
            root: Some(root),
            enter: vec![0; n],
            exit: vec![0; n],
            depth: vec![0; n],
        };
        let mut clock = 0;
        let mut seen = 0;
        let mut stack = vec![(root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                t.exit[v] = clock;
                continue;
            }
            seen += 1;
            if seen > n {
                return Err(Error::InvalidTree("cycle in child links".into()));
            }
            t.enter[v] = clock;
            clock += 1;
            stack.push((v, true));
            for &c in t.children[v].iter().rev() {
                t.depth[c] = t.depth[v] + 1;
                stack.push((c, false));
            }
        }
        if seen != n {
            return Err(Error::InvalidTree("nodes unreachable from the root".into()));
        }
        let mut ids_sorted = t.ids.clone();
        ids_sorted.sort_unstable();
        if ids_sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidTree("duplicate node ids".into()));
        }
        Ok(t)
    }

    pub fn from_merge_tree(tree: &MergeTree) -> Result<Self> {
        if !tree.is_paired() {
            return Err(Error::Unpaired);
        }
        let order = tree.preorder();
        let index: HashMap<NodeId, usize> =
            order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut labels = Vec::with_capacity(order.len());
        let mut children = Vec::with_capacity(order.len());
        for &id in &order {
            let node = tree.node(id).unwrap();
            labels.push(node.interval.unwrap());
            children.push(node.children.iter().map(|c| index[c]).collect());
        }
        Self::new(order, labels, children, 0)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn id(&self, v: usize) -> NodeId {
        self.ids[v]
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn label(&self, v: usize) -> &Interval {
        &self.labels[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    /// Whether `a` lies on the path from the root to `b` and differs from it.
    pub fn is_proper_ancestor(&self, a: usize, b: usize) -> bool {
        a != b && self.enter[a] <= self.enter[b] && self.exit[b] <= self.exit[a]
    }

    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    pub fn preorder(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&v| self.enter[v]);
        order
    }

    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let Some(root) = self.root else {
            return out;
        };
        let mut stack = vec![(root, false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                out.push(v);
            } else {
                stack.push((v, true));
                for &c in self.children[v].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.children[x].iter().copied());
        }
        out
    }
}

/// Node correspondence realizing a distance, in node ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditMapping {
    pub pairs: Vec<(NodeId, NodeId)>,
    pub deleted: Vec<NodeId>,
    pub inserted: Vec<NodeId>,
}

impl EditMapping {
    fn sort(&mut self) {
        self.pairs.sort_unstable();
        self.deleted.sort_unstable();
        self.inserted.sort_unstable();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TedResult {
    pub distance: f64,
    pub mapping: EditMapping,
    pub cost_model: CostModel,
    pub epsilon_used: f64,
    /// Fixed stabilization cost included in `distance`, zero unless requested
    /// and at least one saddle was merged.
    pub stabilization_surcharge: f64,
}

#[derive(Serialize)]
struct MappingExport<'a> {
    pairs: &'a [(NodeId, NodeId)],
    deleted: &'a [NodeId],
    inserted: &'a [NodeId],
    distance: f64,
    cost_model: CostModel,
    epsilon: f64,
}

impl TedResult {
    pub fn mapping_json(&self) -> String {
        serde_json::to_string_pretty(&MappingExport {
            pairs: &self.mapping.pairs,
            deleted: &self.mapping.deleted,
            inserted: &self.mapping.inserted,
            distance: self.distance,
            cost_model: self.cost_model,
            epsilon: self.epsilon_used,
        })
        .expect("mapping export is always serializable")
    }
}

/// Distance between two paired merge trees of the same orientation. Both are
/// stabilized first, each with its own absolute threshold.
pub fn ted(
    t1: &MergeTree,
    t2: &MergeTree,
    model: CostModel,
    stab: &StabilizationConfig,
) -> Result<TedResult> {
    if t1.orientation() != t2.orientation() {
        return Err(Error::OrientationMismatch(
            t1.orientation(),
            t2.orientation(),
        ));
    }
    let (s1, m1) = stabilize_counted(t1, stab)?;
    let (s2, m2) = stabilize_counted(t2, stab)?;
    let surcharge = if stab.add_fixed_cost && m1 + m2 > 0 {
        stab.fixed_cost
    } else {
        0.0
    };
    let (d, mapping) = ted_labeled(
        &LabeledTree::from_merge_tree(&s1)?,
        &LabeledTree::from_merge_tree(&s2)?,
        model,
    );
    Ok(TedResult {
        distance: d + surcharge,
        mapping,
        cost_model: model,
        epsilon_used: stab.epsilon_fraction,
        stabilization_surcharge: surcharge,
    })
}

/// Distance from a merge tree to the empty tree.
pub fn ted_to_empty(
    tree: &MergeTree,
    model: CostModel,
    stab: &StabilizationConfig,
) -> Result<TedResult> {
    let (s, merges) = stabilize_counted(tree, stab)?;
    let surcharge = if stab.add_fixed_cost && merges > 0 {
        stab.fixed_cost
    } else {
        0.0
    };
    let (d, mapping) = ted_labeled(
        &LabeledTree::from_merge_tree(&s)?,
        &LabeledTree::empty(),
        model,
    );
    Ok(TedResult {
        distance: d + surcharge,
        mapping,
        cost_model: model,
        epsilon_used: stab.epsilon_fraction,
        stabilization_surcharge: surcharge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Choice {
    /// Tree cell: relabel the roots and match the child forests.
    /// Forest cell: restricted mapping through the assignment.
    Direct,
    /// Map the left side into the k-th child of the right side.
    IntoRight(u32),
    /// Map the k-th child of the left side onto the right side.
    IntoLeft(u32),
}

struct Tables<'a> {
    t1: &'a LabeledTree,
    t2: &'a LabeledTree,
    model: CostModel,
    del_tree: Vec<f64>,
    del_forest: Vec<f64>,
    ins_tree: Vec<f64>,
    ins_forest: Vec<f64>,
    tree: Vec<f64>,
    forest: Vec<f64>,
    tree_choice: Vec<Choice>,
    forest_choice: Vec<Choice>,
}

impl<'a> Tables<'a> {
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.t2.len() + j
    }

    fn empty_costs(t: &LabeledTree, model: CostModel) -> (Vec<f64>, Vec<f64>) {
        let mut whole = vec![0.0; t.len()];
        let mut forest = vec![0.0; t.len()];
        for v in t.postorder() {
            forest[v] = t.children(v).iter().map(|&c| whole[c]).sum();
            whole[v] = forest[v] + model.delete(t.label(v));
        }
        (whole, forest)
    }

    fn new(t1: &'a LabeledTree, t2: &'a LabeledTree, model: CostModel) -> Self {
        let (del_tree, del_forest) = Self::empty_costs(t1, model);
        let (ins_tree, ins_forest) = Self::empty_costs(t2, model);
        let cells = t1.len() * t2.len();
        Self {
            t1,
            t2,
            model,
            del_tree,
            del_forest,
            ins_tree,
            ins_forest,
            tree: vec![0.0; cells],
            forest: vec![0.0; cells],
            tree_choice: vec![Choice::Direct; cells],
            forest_choice: vec![Choice::Direct; cells],
        }
    }

    fn forest_inputs(&self, i: usize, j: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (c1, c2) = (self.t1.children(i), self.t2.children(j));
        let mut dists = Vec::with_capacity(c1.len() * c2.len());
        for &s in c1 {
            for &t in c2 {
                dists.push(self.tree[self.at(s, t)]);
            }
        }
        let dels = c1.iter().map(|&s| self.del_tree[s]).collect();
        let ins = c2.iter().map(|&t| self.ins_tree[t]).collect();
        (dists, dels, ins)
    }

    fn fill(&mut self) {
        let post1 = self.t1.postorder();
        let post2 = self.t2.postorder();
        for &i in &post1 {
            for &j in &post2 {
                self.fill_cell(i, j);
            }
        }
    }

    fn fill_cell(&mut self, i: usize, j: usize) {
        let (c1, c2) = (self.t1.children(i), self.t2.children(j));
        let cell = self.at(i, j);

        // Forests. Ties keep the assignment, then the lowest child index.
        let (mut best, mut choice) = if c1.is_empty() {
            (self.ins_forest[j], Choice::Direct)
        } else if c2.is_empty() {
            (self.del_forest[i], Choice::Direct)
        } else {
            let (dists, dels, ins) = self.forest_inputs(i, j);
            let m = match_forests(&dists, &dels, &ins)
                .expect("forest matrices always admit a finite assignment");
            (m.cost, Choice::Direct)
        };
        for (k, &t) in c2.iter().enumerate() {
            let v = (self.ins_forest[j] - self.ins_forest[t]) + self.forest[self.at(i, t)];
            if v < best {
                best = v;
                choice = Choice::IntoRight(k as u32);
            }
        }
        for (k, &s) in c1.iter().enumerate() {
            let v = (self.del_forest[i] - self.del_forest[s]) + self.forest[self.at(s, j)];
            if v < best {
                best = v;
                choice = Choice::IntoLeft(k as u32);
            }
        }
        self.forest[cell] = best;
        self.forest_choice[cell] = choice;

        // Trees.
        let mut best = self.forest[cell] + self.model.relabel(self.t1.label(i), self.t2.label(j));
        let mut choice = Choice::Direct;
        for (k, &t) in c2.iter().enumerate() {
            let v = (self.ins_tree[j] - self.ins_tree[t]) + self.tree[self.at(i, t)];
            if v < best {
                best = v;
                choice = Choice::IntoRight(k as u32);
            }
        }
        for (k, &s) in c1.iter().enumerate() {
            let v = (self.del_tree[i] - self.del_tree[s]) + self.tree[self.at(s, j)];
            if v < best {
                best = v;
                choice = Choice::IntoLeft(k as u32);
            }
        }
        self.tree[cell] = best;
        self.tree_choice[cell] = choice;
    }

    fn delete_all(&self, v: usize, out: &mut EditMapping) {
        out.deleted
            .extend(self.t1.subtree(v).into_iter().map(|x| self.t1.id(x)));
    }

    fn insert_all(&self, v: usize, out: &mut EditMapping) {
        out.inserted
            .extend(self.t2.subtree(v).into_iter().map(|x| self.t2.id(x)));
    }

    fn trace_tree(&self, i: usize, j: usize, out: &mut EditMapping) {
        match self.tree_choice[self.at(i, j)] {
            Choice::Direct => {
                out.pairs.push((self.t1.id(i), self.t2.id(j)));
                self.trace_forest(i, j, out);
            }
            Choice::IntoRight(k) => {
                let keep = self.t2.children(j)[k as usize];
                out.inserted.push(self.t2.id(j));
                for &t in self.t2.children(j) {
                    if t != keep {
                        self.insert_all(t, out);
                    }
                }
                self.trace_tree(i, keep, out);
            }
            Choice::IntoLeft(k) => {
                let keep = self.t1.children(i)[k as usize];
                out.deleted.push(self.t1.id(i));
                for &s in self.t1.children(i) {
                    if s != keep {
                        self.delete_all(s, out);
                    }
                }
                self.trace_tree(keep, j, out);
            }
        }
    }

    /// Reads back the mapping between the child forests of `i` and `j`.
    fn trace_forest(&self, i: usize, j: usize, out: &mut EditMapping) {
        let (c1, c2) = (self.t1.children(i), self.t2.children(j));
        match self.forest_choice[self.at(i, j)] {
            Choice::Direct => {
                if c1.is_empty() || c2.is_empty() {
                    c1.iter().for_each(|&s| self.delete_all(s, out));
                    c2.iter().for_each(|&t| self.insert_all(t, out));
                    return;
                }
                let (dists, dels, ins) = self.forest_inputs(i, j);
                let m = match_forests(&dists, &dels, &ins)
                    .expect("forest matrices always admit a finite assignment");
                for &(s, t) in &m.pairs {
                    self.trace_tree(c1[s], c2[t], out);
                }
                for &s in &m.deleted {
                    self.delete_all(c1[s], out);
                }
                for &t in &m.inserted {
                    self.insert_all(c2[t], out);
                }
            }
            Choice::IntoRight(k) => {
                let keep = c2[k as usize];
                out.inserted.push(self.t2.id(keep));
                for &t in c2 {
                    if t != keep {
                        self.insert_all(t, out);
                    }
                }
                self.trace_forest(i, keep, out);
            }
            Choice::IntoLeft(k) => {
                let keep = c1[k as usize];
                out.deleted.push(self.t1.id(keep));
                for &s in c1 {
                    if s != keep {
                        self.delete_all(s, out);
                    }
                }
                self.trace_forest(keep, j, out);
            }
        }
    }
}

/// Constrained edit distance between two labeled trees, either of which may be
/// empty, together with an optimal mapping.
pub fn ted_labeled(t1: &LabeledTree, t2: &LabeledTree, model: CostModel) -> (f64, EditMapping) {
    let mut mapping = EditMapping::default();
    let d = match (t1.root(), t2.root()) {
        (None, None) => 0.0,
        (Some(r1), None) => {
            let (whole, _) = Tables::empty_costs(t1, model);
            mapping.deleted = t1.ids().to_vec();
            whole[r1]
        }
        (None, Some(r2)) => {
            let (whole, _) = Tables::empty_costs(t2, model);
            mapping.inserted = t2.ids().to_vec();
            whole[r2]
        }
        (Some(r1), Some(r2)) => {
            let mut tables = Tables::new(t1, t2, model);
            tables.fill();
            tables.trace_tree(r1, r2, &mut mapping);
            tables.tree[tables.at(r1, r2)]
        }
    };
    mapping.sort();
    (d, mapping)
}

/// A broken mapping condition and the node ids involved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub nodes: Vec<NodeId>,
}

impl Violation {
    fn new(condition: &str, nodes: Vec<NodeId>) -> Self {
        Self {
            condition: condition.to_string(),
            nodes,
        }
    }
}

/// Checks coverage, one-to-one, ancestor ordering and the constrained lca
/// condition. An empty result means the mapping is a valid constrained edit
/// mapping between `t1` and `t2`.
pub fn validate_mapping(
    mapping: &EditMapping,
    t1: &LabeledTree,
    t2: &LabeledTree,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut idx_pairs = Vec::with_capacity(mapping.pairs.len());
    let mut used1 = vec![0usize; t1.len()];
    let mut used2 = vec![0usize; t2.len()];
    let mut seen_left: HashMap<NodeId, usize> = HashMap::new();
    let mut seen_right: HashMap<NodeId, usize> = HashMap::new();

    for &(a, b) in &mapping.pairs {
        *seen_left.entry(a).or_default() += 1;
        *seen_right.entry(b).or_default() += 1;
        match (t1.index_of(a), t2.index_of(b)) {
            (Some(i), Some(j)) => {
                used1[i] += 1;
                used2[j] += 1;
                idx_pairs.push((i, j));
            }
            _ => out.push(Violation::new("coverage", vec![a, b])),
        }
    }
    for (id, &n) in &seen_left {
        if n > 1 {
            out.push(Violation::new("one-to-one", vec![*id]));
        }
    }
    for (id, &n) in &seen_right {
        if n > 1 {
            out.push(Violation::new("one-to-one", vec![*id]));
        }
    }
    for &a in &mapping.deleted {
        match t1.index_of(a) {
            Some(i) => used1[i] += 1,
            None => out.push(Violation::new("coverage", vec![a])),
        }
    }
    for &b in &mapping.inserted {
        match t2.index_of(b) {
            Some(j) => used2[j] += 1,
            None => out.push(Violation::new("coverage", vec![b])),
        }
    }
    for (i, &n) in used1.iter().enumerate() {
        if n != 1 {
            out.push(Violation::new("coverage", vec![t1.id(i)]));
        }
    }
    for (j, &n) in used2.iter().enumerate() {
        if n != 1 {
            out.push(Violation::new("coverage", vec![t2.id(j)]));
        }
    }

    for (x, &(i1, j1)) in idx_pairs.iter().enumerate() {
        for &(i2, j2) in &idx_pairs[x + 1..] {
            if t1.is_proper_ancestor(i1, i2) != t2.is_proper_ancestor(j1, j2)
                || t1.is_proper_ancestor(i2, i1) != t2.is_proper_ancestor(j2, j1)
            {
                out.push(Violation::new(
                    "ancestor-ordering",
                    vec![t1.id(i1), t2.id(j1), t1.id(i2), t2.id(j2)],
                ));
            }
        }
    }

    for (x, &(i1, j1)) in idx_pairs.iter().enumerate() {
        for &(i2, j2) in &idx_pairs[x + 1..] {
            let l1 = t1.lca(i1, i2);
            let l2 = t2.lca(j1, j2);
            for &(i3, j3) in &idx_pairs {
                if (i3, j3) == (i1, j1) || (i3, j3) == (i2, j2) {
                    continue;
                }
                if t1.is_proper_ancestor(l1, i3) != t2.is_proper_ancestor(l2, j3) {
                    out.push(Violation::new(
                        "constrained-lca",
                        vec![
                            t1.id(i1),
                            t1.id(i2),
                            t1.id(i3),
                            t2.id(j1),
                            t2.id(j2),
                            t2.id(j3),
                        ],
                    ));
                }
            }
        }
    }
    out
}

/// Summed edit cost of a mapping: relabels, then deletions, then insertions.
pub fn mapping_cost(
    mapping: &EditMapping,
    t1: &LabeledTree,
    t2: &LabeledTree,
    model: CostModel,
) -> Result<f64> {
    let uncovered: Vec<Violation> = validate_mapping(mapping, t1, t2)
        .into_iter()
        .filter(|v| v.condition == "coverage" || v.condition == "one-to-one")
        .collect();
    if let Some(v) = uncovered.first() {
        return Err(Error::Coverage(format!(
            "{} at nodes {:?}",
            v.condition, v.nodes
        )));
    }
    let lookup1 = |id| t1.label(t1.index_of(id).unwrap());
    let lookup2 = |id| t2.label(t2.index_of(id).unwrap());
    let relabel: f64 = mapping
        .pairs
        .iter()
        .map(|&(a, b)| model.relabel(lookup1(a), lookup2(b)))
        .sum();
    let deleted: f64 = mapping
        .deleted
        .iter()
        .map(|&a| model.delete(lookup1(a)))
        .sum();
    let inserted: f64 = mapping
        .inserted
        .iter()
        .map(|&b| model.insert(lookup2(b)))
        .sum();
    Ok(relabel + deleted + inserted)
}

//! Join and split trees, persistence pairing, simplification and
//! stabilization.
//!
//! Node ids are the indices of the graph vertices the nodes were swept from.
//! Vertices are ordered by `(scalar, id)`: a join tree sweeps that order
//! upward, a split tree downward. In both orientations a node's interval is
//! stored as `(lower, upper)`, so for a split tree the birth is the saddle value
//! and the death the maximum.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{grid_to_graph, ScalarGraph, ScalarGrid};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Join,
    Split,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Join => "join",
            Orientation::Split => "split",
        })
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "join" => Ok(Orientation::Join),
            "split" => Ok(Orientation::Split),
            other => Err(Error::InvalidArgument(format!(
                "unknown tree type '{other}'"
            ))),
        }
    }
}

/// A birth–death pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub birth: f64,
    pub death: f64,
}

impl Interval {
    pub fn new(birth: f64, death: f64) -> Result<Self> {
        if !birth.is_finite() || !death.is_finite() {
            return Err(Error::InvalidArgument(
                "interval ends must be finite".into(),
            ));
        }
        if birth > death {
            return Err(Error::InvalidArgument(format!(
                "interval birth {birth} exceeds death {death}"
            )));
        }
        Ok(Self { birth, death })
    }

    /// The interval between two scalar values, in either order.
    pub fn spanning(a: f64, b: f64) -> Self {
        Self {
            birth: a.min(b),
            death: a.max(b),
        }
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            birth: self.birth + offset,
            death: self.death + offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Extremum,
    Saddle,
    Root,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Extremum => "extremum",
            NodeKind::Saddle => "saddle",
            NodeKind::Root => "root",
        })
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extremum" => Ok(NodeKind::Extremum),
            "saddle" => Ok(NodeKind::Saddle),
            "root" => Ok(NodeKind::Root),
            other => Err(Error::InvalidArgument(format!(
                "unknown node kind '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTreeNode {
    pub id: NodeId,
    pub scalar: f64,
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub interval: Option<Interval>,
    pub pair: Option<NodeId>,
}

impl MergeTreeNode {
    pub fn new(id: NodeId, scalar: f64, kind: NodeKind, children: Vec<NodeId>) -> Self {
        Self {
            id,
            scalar,
            kind,
            children,
            interval: None,
            pair: None,
        }
    }
}

/// Parameters of saddle stabilization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConfig {
    /// Merge threshold as a fraction of the tree's maximum persistence.
    pub epsilon_fraction: f64,
    pub add_fixed_cost: bool,
    pub fixed_cost: f64,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        Self {
            epsilon_fraction: 0.0,
            add_fixed_cost: false,
            fixed_cost: 0.0,
        }
    }
}

impl StabilizationConfig {
    pub fn new(epsilon_fraction: f64, add_fixed_cost: bool, fixed_cost: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon_fraction) {
            return Err(Error::InvalidArgument(format!(
                "epsilon fraction {epsilon_fraction} outside [0, 1]"
            )));
        }
        if !(fixed_cost >= 0.0) || !fixed_cost.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "fixed stabilization cost {fixed_cost} must be a non-negative number"
            )));
        }
        Ok(Self {
            epsilon_fraction,
            add_fixed_cost,
            fixed_cost,
        })
    }

    pub fn with_epsilon(epsilon_fraction: f64) -> Result<Self> {
        Self::new(epsilon_fraction, false, 0.0)
    }
}

/// A rooted merge tree containing only critical nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    orientation: Orientation,
    nodes: BTreeMap<NodeId, MergeTreeNode>,
    root: NodeId,
}

impl MergeTree {
    /// Assembles a tree from its nodes and checks every structural invariant.
    pub fn new(orientation: Orientation, nodes: Vec<MergeTreeNode>, root: NodeId) -> Result<Self> {
        let mut map = BTreeMap::new();
        for node in nodes {
            let id = node.id;
            if map.insert(id, node).is_some() {
                return Err(Error::InvalidTree(format!("duplicate node id {id}")));
            }
        }
        let tree = Self {
            orientation,
            nodes: map,
            root,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Sweeps a grid into a paired merge tree.
    pub fn from_grid(grid: &ScalarGrid, orientation: Orientation) -> Result<Self> {
        Self::from_graph(&grid_to_graph(grid), orientation)
    }

    /// Sweeps a graph into a paired merge tree.
    pub fn from_graph(graph: &ScalarGraph, orientation: Orientation) -> Result<Self> {
        build_merge_tree(graph, orientation).map(|t| persistence_pair(&t))
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&MergeTreeNode> {
        self.nodes.get(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &MergeTreeNode> {
        self.nodes.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    fn get(&self, id: NodeId) -> &MergeTreeNode {
        &self.nodes[&id]
    }

    pub fn is_paired(&self) -> bool {
        self.nodes
            .values()
            .all(|n| n.pair.is_some() && n.interval.is_some())
    }

    pub fn extrema(&self) -> impl Iterator<Item = &MergeTreeNode> {
        let single = self.nodes.len() == 1;
        self.nodes
            .values()
            .filter(move |n| n.kind == NodeKind::Extremum || single)
    }

    pub fn saddle_count(&self) -> usize {
        self.nodes
            .values()
            .filter(|n| n.kind == NodeKind::Saddle)
            .count()
    }

    /// Largest persistence over all node intervals; 0 for unpaired trees.
    pub fn max_persistence(&self) -> f64 {
        self.nodes
            .values()
            .filter_map(|n| n.interval.map(|i| i.persistence()))
            .fold(0.0, f64::max)
    }

    pub fn parents(&self) -> HashMap<NodeId, NodeId> {
        let mut out = HashMap::with_capacity(self.nodes.len());
        for n in self.nodes.values() {
            for &c in &n.children {
                out.insert(c, n.id);
            }
        }
        out
    }

    /// Node ids, parents before children, siblings in stored order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.get(id).children.iter().rev());
        }
        out
    }

    /// Node ids, children before parents.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                for &c in self.get(id).children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    pub fn depths(&self) -> HashMap<NodeId, usize> {
        let mut out = HashMap::with_capacity(self.nodes.len());
        out.insert(self.root, 0);
        for id in self.preorder() {
            let d = out[&id];
            for &c in &self.get(id).children {
                out.insert(c, d + 1);
            }
        }
        out
    }

    /// Ids of the subtree rooted at `id`, including `id`.
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.get(n).children.iter().copied());
        }
        out
    }

    /// Sweep order of two nodes: `Less` means `a` is swept first (is older).
    pub fn sweep_cmp(&self, a: NodeId, b: NodeId) -> Ordering {
        let (na, nb) = (self.get(a), self.get(b));
        let ord = na.scalar.total_cmp(&nb.scalar).then(a.cmp(&b));
        match self.orientation {
            Orientation::Join => ord,
            Orientation::Split => ord.reverse(),
        }
    }

    /// A copy with `offset` added to every scalar and interval end.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        for n in out.nodes.values_mut() {
            n.scalar += offset;
            n.interval = n.interval.map(|i| i.shifted(offset));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidTree(msg));
        let Some(root) = self.nodes.get(&self.root) else {
            return bad(format!("root {} is not a node", self.root));
        };
        if root.kind != NodeKind::Root {
            return bad(format!("root {} has kind {}", root.id, root.kind));
        }

        let mut parent_of: HashMap<NodeId, NodeId> = HashMap::new();
        for n in self.nodes.values() {
            if !n.scalar.is_finite() {
                return bad(format!("node {} has a non-finite scalar", n.id));
            }
            for &c in &n.children {
                if !self.nodes.contains_key(&c) {
                    return bad(format!("node {} references missing child {c}", n.id));
                }
                if c == n.id {
                    return bad(format!("cycle: node {c} is its own child"));
                }
                if let Some(prev) = parent_of.insert(c, n.id) {
                    return bad(format!("node {c} has multiple parents ({prev}, {})", n.id));
                }
            }
        }
        if let Some(&p) = parent_of.get(&self.root) {
            return bad(format!("cycle: root {} has parent {p}", self.root));
        }

        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                return bad(format!("cycle detected at node {id}"));
            }
            stack.extend(self.get(id).children.iter().copied());
        }
        if let Some(&lost) = self.nodes.keys().find(|id| !seen.contains(id)) {
            // Unreached nodes with a parent chain that never ends form a cycle.
            let mut cur = lost;
            let mut chain = BTreeSet::new();
            while let Some(&p) = parent_of.get(&cur) {
                if !chain.insert(cur) {
                    return bad(format!("cycle detected at node {cur}"));
                }
                cur = p;
            }
            return bad(format!("node {lost} is not reachable from the root"));
        }

        for n in self.nodes.values() {
            match n.kind {
                NodeKind::Extremum if !n.children.is_empty() => {
                    return bad(format!("extremum {} has children", n.id));
                }
                NodeKind::Saddle if n.children.len() < 2 => {
                    return bad(format!("saddle {} has fewer than two children", n.id));
                }
                NodeKind::Root if n.id != self.root => {
                    return bad(format!("non-root node {} has kind root", n.id));
                }
                _ => {}
            }
            for &c in &n.children {
                if self.sweep_cmp(n.id, c) != Ordering::Greater {
                    return bad(format!(
                        "child {c} is not swept before its parent {} in a {} tree",
                        n.id, self.orientation
                    ));
                }
            }
        }

        let paired = self.nodes.values().filter(|n| n.pair.is_some()).count();
        if paired != 0 && paired != self.nodes.len() {
            return bad("tree is only partially paired".into());
        }
        for n in self.nodes.values() {
            match (n.pair, n.interval) {
                (Some(p), Some(iv)) => {
                    if !self.nodes.contains_key(&p) {
                        return bad(format!("node {} references missing pair {p}", n.id));
                    }
                    if !(iv.birth <= iv.death) || !iv.birth.is_finite() || !iv.death.is_finite() {
                        return bad(format!("node {} has an invalid interval", n.id));
                    }
                }
                (None, None) => {}
                _ => return bad(format!("node {} has a pair without an interval", n.id)),
            }
        }
        Ok(())
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            Ordering::Less => {
                self.parent[a] = b;
                b
            }
            Ordering::Greater => {
                self.parent[b] = a;
                a
            }
            Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
                a
            }
        }
    }
}

/// Union-find sweep over the vertices in sweep order. Regular vertices are
/// dropped; the last swept vertex becomes the root. The result is unpaired.
pub fn build_merge_tree(graph: &ScalarGraph, orientation: Orientation) -> Result<MergeTree> {
    let n = graph.vertex_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let components = graph.component_count();
    if components != 1 {
        return Err(Error::Disconnected(components));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| graph.cmp_vertices(a, b));
    if orientation == Orientation::Split {
        order.reverse();
    }

    let mut sets = DisjointSets::new(n);
    let mut swept = vec![false; n];
    // Current topmost tree node of each component, keyed by set representative.
    let mut top = vec![usize::MAX; n];
    let mut nodes = Vec::new();

    for (step, &v) in order.iter().enumerate() {
        let last = step + 1 == n;
        let mut reps: Vec<usize> = graph
            .neighbors(v)
            .iter()
            .filter(|&&w| swept[w])
            .map(|&w| sets.find(w))
            .collect();
        reps.sort_unstable();
        reps.dedup();

        let kind = match (reps.len(), last) {
            (_, true) => Some(NodeKind::Root),
            (0, false) => Some(NodeKind::Extremum),
            (1, false) => None,
            (_, false) => Some(NodeKind::Saddle),
        };
        let mut children: Vec<NodeId> = reps.iter().map(|&r| top[r]).collect();
        children.sort_unstable();

        let mut rep = v;
        for &r in &reps {
            rep = sets.union(rep, r);
        }
        swept[v] = true;
        match kind {
            Some(kind) => {
                nodes.push(MergeTreeNode::new(v, graph.scalars()[v], kind, children));
                top[rep] = v;
            }
            None => top[rep] = children[0],
        }
    }
    MergeTree::new(orientation, nodes, order[n - 1])
}

/// Elder-rule pairing computed from the tree structure.
///
/// At every merge the child branch holding the oldest extremum survives and
/// the others die at the merging node. A node merging several branches stores
/// the interval of its most persistent dying branch; the other dying extrema
/// point at it and keep their own intervals. The root is paired with the
/// oldest extremum and spans the whole range.
pub fn persistence_pair(tree: &MergeTree) -> MergeTree {
    let mut out = tree.clone();
    let mut oldest: HashMap<NodeId, NodeId> = HashMap::with_capacity(tree.len());
    let older = |a: NodeId, b: NodeId| tree.sweep_cmp(a, b) == Ordering::Less;

    for id in tree.postorder() {
        let node = tree.get(id);
        if node.children.is_empty() {
            oldest.insert(id, id);
            if id == tree.root {
                let n = out.nodes.get_mut(&id).unwrap();
                n.pair = Some(id);
                n.interval = Some(Interval::spanning(node.scalar, node.scalar));
            }
            continue;
        }
        let mut branch: Vec<NodeId> = node.children.iter().map(|c| oldest[c]).collect();
        branch.sort_by(|&a, &b| tree.sweep_cmp(a, b));
        let survivor = branch[0];
        oldest.insert(id, survivor);

        let mut best: Option<(NodeId, Interval)> = None;
        for &e in &branch[1..] {
            let iv = Interval::spanning(tree.get(e).scalar, node.scalar);
            let en = out.nodes.get_mut(&e).unwrap();
            en.pair = Some(id);
            en.interval = Some(iv);
            let better = match best {
                None => true,
                Some((b, biv)) => {
                    iv.persistence() > biv.persistence()
                        || (iv.persistence() == biv.persistence() && older(e, b))
                }
            };
            if better {
                best = Some((e, iv));
            }
        }

        if id == tree.root {
            let iv = Interval::spanning(tree.get(survivor).scalar, node.scalar);
            let sn = out.nodes.get_mut(&survivor).unwrap();
            sn.pair = Some(id);
            sn.interval = Some(iv);
            let rn = out.nodes.get_mut(&id).unwrap();
            rn.pair = Some(survivor);
            rn.interval = Some(iv);
        } else {
            let (e, iv) = best.expect("internal non-root node merges at least two branches");
            let n = out.nodes.get_mut(&id).unwrap();
            n.pair = Some(e);
            n.interval = Some(iv);
        }
    }
    out
}

/// Cancels leaf–saddle pairs with persistence below `threshold` times the
/// maximum persistence, lowest first. A threshold of 1 or more leaves only the
/// root pair.
pub fn simplify(tree: &MergeTree, threshold: f64) -> Result<MergeTree> {
    if !tree.is_paired() {
        return Err(Error::Unpaired);
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "simplification threshold {threshold} must be non-negative"
        )));
    }
    let cutoff = threshold * tree.max_persistence();
    let mut cur = tree.clone();
    loop {
        let parents = cur.parents();
        let root_partner = cur.get(cur.root).pair;
        let victim = cur
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::Extremum && Some(n.id) != root_partner)
            .filter(|n| n.pair == parents.get(&n.id).copied())
            .map(|n| (n.id, n.interval.unwrap().persistence()))
            .filter(|&(_, p)| p < cutoff || threshold >= 1.0)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((leaf, _)) = victim else {
            break;
        };

        let parent = parents[&leaf];
        cur.nodes.remove(&leaf);
        let pnode = cur.nodes.get_mut(&parent).unwrap();
        pnode.children.retain(|&c| c != leaf);
        if pnode.kind == NodeKind::Saddle && pnode.children.len() == 1 {
            let only = pnode.children[0];
            let grand = parents[&parent];
            cur.nodes.remove(&parent);
            let g = cur.nodes.get_mut(&grand).unwrap();
            for c in g.children.iter_mut() {
                if *c == parent {
                    *c = only;
                }
            }
            g.children.sort_unstable();
        }
        cur = persistence_pair(&cur);
    }
    cur.validate()?;
    Ok(cur)
}

/// Stabilizes the tree and returns it; see [`stabilize_counted`].
pub fn stabilize(tree: &MergeTree, config: &StabilizationConfig) -> Result<MergeTree> {
    stabilize_counted(tree, config).map(|(t, _)| t)
}

/// Merges each saddle into its parent saddle (or the root) when their scalar
/// values differ by less than `epsilon_fraction` times the tree's maximum
/// persistence. Saddles are visited deepest first until nothing changes.
///
/// A merged node keeps the id and scalar of the member nearest the root and
/// takes the interval and pair of its most persistent member. Extrema paired
/// with an absorbed saddle are re-pointed at the survivor and keep their
/// intervals. Returns the tree and the number of merges performed.
pub fn stabilize_counted(
    tree: &MergeTree,
    config: &StabilizationConfig,
) -> Result<(MergeTree, usize)> {
    if !tree.is_paired() {
        return Err(Error::Unpaired);
    }
    let eps = config.epsilon_fraction * tree.max_persistence();
    let mut cur = tree.clone();
    // survivor -> members absorbed into it (transitively)
    let mut absorbed: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    let mut merges = 0;

    loop {
        let mut parents = cur.parents();
        let depths = cur.depths();
        let mut saddles: Vec<NodeId> = cur
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::Saddle)
            .map(|n| n.id)
            .collect();
        saddles.sort_by(|&a, &b| {
            depths[&b]
                .cmp(&depths[&a])
                .then_with(|| cur.sweep_cmp(a, b))
        });

        let mut changed = false;
        for low in saddles {
            let high = parents[&low];
            let hn = cur.get(high);
            if !matches!(hn.kind, NodeKind::Saddle | NodeKind::Root) {
                continue;
            }
            if (hn.scalar - cur.get(low).scalar).abs() >= eps {
                continue;
            }
            let ln = cur.nodes.remove(&low).unwrap();
            for &c in &ln.children {
                parents.insert(c, high);
            }
            let hn = cur.nodes.get_mut(&high).unwrap();
            hn.children.retain(|&c| c != low);
            hn.children.extend(ln.children.iter().copied());
            hn.children.sort_unstable();

            let mut members = absorbed.remove(&low).unwrap_or_default();
            members.push(low);
            absorbed.entry(high).or_default().extend(members);
            merges += 1;
            changed = true;
        }
        if !changed {
            break;
        }
    }

    for (&survivor, members) in &absorbed {
        if survivor != cur.root {
            let mut best = tree.get(survivor).interval.unwrap();
            let mut best_pair = tree.get(survivor).pair.unwrap();
            for &m in members {
                let iv = tree.get(m).interval.unwrap();
                if iv.persistence() > best.persistence() {
                    best = iv;
                    best_pair = tree.get(m).pair.unwrap();
                }
            }
            let sn = cur.nodes.get_mut(&survivor).unwrap();
            sn.interval = Some(best);
            sn.pair = Some(best_pair);
        }
        let gone: BTreeSet<NodeId> = members.iter().copied().collect();
        for n in cur.nodes.values_mut() {
            if n.id != survivor && n.pair.is_some_and(|p| gone.contains(&p)) {
                n.pair = Some(survivor);
            }
        }
    }
    cur.validate()?;
    Ok((cur, merges))
}

/// Cuts the tree at `min_scalar` (a super-level threshold for split trees, a
/// sub-level threshold for join trees) and returns each maximal remaining
/// component, re-rooted at the node it hangs from, whose root pair has
/// persistence at least `min_persistence`. Subtrees are re-paired.
pub fn extract_subtrees(
    tree: &MergeTree,
    min_persistence: f64,
    min_scalar: f64,
) -> Result<Vec<MergeTree>> {
    if !tree.is_paired() {
        return Err(Error::Unpaired);
    }
    let passes = |id: NodeId| {
        let s = tree.get(id).scalar;
        match tree.orientation {
            Orientation::Join => s <= min_scalar,
            Orientation::Split => s >= min_scalar,
        }
    };

    let mut candidates = Vec::new();
    if passes(tree.root) {
        candidates.push(persistence_pair(tree));
    } else {
        for id in tree.preorder() {
            let node = tree.get(id);
            if passes(id) {
                continue;
            }
            for &c in &node.children {
                if !passes(c) {
                    continue;
                }
                let mut nodes: Vec<MergeTreeNode> = tree
                    .subtree_ids(c)
                    .into_iter()
                    .map(|n| tree.get(n).clone())
                    .collect();
                nodes.push(MergeTreeNode::new(id, node.scalar, NodeKind::Root, vec![c]));
                for n in nodes.iter_mut() {
                    n.pair = None;
                    n.interval = None;
                }
                let sub = MergeTree::new(tree.orientation, nodes, id)?;
                candidates.push(persistence_pair(&sub));
            }
        }
    }
    Ok(candidates
        .into_iter()
        .filter(|t| t.get(t.root).interval.unwrap().persistence() >= min_persistence)
        .collect())
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

/// Line-oriented text form: a `mergetree` header followed by one `node` line per
/// node in ascending id order.
pub fn serialize(tree: &MergeTree) -> String {
    let mut out = format!("mergetree {} root={}\n", tree.orientation, tree.root);
    for n in tree.nodes.values() {
        let children: Vec<String> = n.children.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!(
            "node {} {} {} {} {} {} children={}\n",
            n.id,
            n.scalar,
            n.kind,
            n.pair.map_or_else(|| "-".to_string(), |p| p.to_string()),
            fmt_opt_f64(n.interval.map(|i| i.birth)),
            fmt_opt_f64(n.interval.map(|i| i.death)),
            children.join(",")
        ));
    }
    out
}

pub fn deserialize(text: &str) -> Result<MergeTree> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing mergetree header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (orientation, root) = match parts.as_slice() {
        ["mergetree", o, r] => {
            let o: Orientation = o
                .parse()
                .map_err(|e: Error| Error::parse(no, e.to_string()))?;
            let r = r
                .strip_prefix("root=")
                .and_then(|r| r.parse::<NodeId>().ok())
                .ok_or_else(|| Error::parse(no, "expected root=<id>"))?;
            (o, r)
        }
        _ => {
            return Err(Error::parse(
                no,
                "expected 'mergetree <join|split> root=<id>'",
            ))
        }
    };

    let mut nodes = Vec::new();
    for (no, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 8 || f[0] != "node" {
            return Err(Error::parse(no, "expected 8 fields starting with 'node'"));
        }
        let err = |what: &str| Error::parse(no, format!("bad {what}"));
        let id: NodeId = f[1].parse().map_err(|_| err("id"))?;
        let scalar: f64 = f[2].parse().map_err(|_| err("scalar"))?;
        let kind: NodeKind = f[3].parse().map_err(|_| err("kind"))?;
        fn opt(s: &str) -> Option<&str> {
            (s != "-").then_some(s)
        }
        let pair = opt(f[4])
            .map(|p| p.parse::<NodeId>().map_err(|_| err("pair id")))
            .transpose()?;
        let birth = opt(f[5])
            .map(|p| p.parse::<f64>().map_err(|_| err("birth")))
            .transpose()?;
        let death = opt(f[6])
            .map(|p| p.parse::<f64>().map_err(|_| err("death")))
            .transpose()?;
        let interval = match (birth, death) {
            (Some(b), Some(d)) => {
                Some(Interval::new(b, d).map_err(|e| Error::parse(no, e.to_string()))?)
            }
            (None, None) => None,
            _ => return Err(Error::parse(no, "birth and death must both be present")),
        };
        let list = f[7]
            .strip_prefix("children=")
            .ok_or_else(|| err("children list"))?;
        let children = if list.is_empty() {
            Vec::new()
        } else {
            list.split(',')
                .map(|c| c.parse::<NodeId>().map_err(|_| err("child id")))
                .collect::<Result<Vec<_>>>()?
        };
        nodes.push(MergeTreeNode {
            id,
            scalar,
            kind,
            children,
            interval,
            pair,
        });
    }
    MergeTree::new(orientation, nodes, root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarGraph;
    use proptest::prelude::*;

    fn path(values: &[f64]) -> ScalarGraph {
        let edges = (1..values.len()).map(|i| (i - 1, i)).collect();
        ScalarGraph::new(values.to_vec(), edges).unwrap()
    }

    fn example() -> MergeTree {
        MergeTree::from_graph(&path(&[1.0, 4.0, 0.0, 3.0, 2.0, 5.0]), Orientation::Join).unwrap()
    }

    fn iv(b: f64, d: f64) -> Option<Interval> {
        Some(Interval::new(b, d).unwrap())
    }

    #[test]
    fn monotone_ramp() {
        let t = MergeTree::from_graph(&path(&[0.0, 1.0, 2.0, 3.0]), Orientation::Join).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.root(), 3);
        assert_eq!(t.node(3).unwrap().children, vec![0]);
        assert_eq!(t.node(0).unwrap().kind, NodeKind::Extremum);
        assert_eq!(t.node(0).unwrap().interval, iv(0.0, 3.0));
        assert_eq!(t.saddle_count(), 0);
    }

    #[test]
    fn hand_traced_join_tree() {
        let t = example();
        // Node ids are vertex indices; scalars 0..5 sit at vertices 2,0,4,3,1,5.
        let scalar = |id: NodeId| t.node(id).unwrap().scalar;
        assert_eq!(t.len(), 6);
        assert_eq!(scalar(t.root()), 5.0);
        let s3 = t.node(3).unwrap();
        assert_eq!(s3.kind, NodeKind::Saddle);
        assert_eq!(s3.children, vec![2, 4]);
        let s4 = t.node(1).unwrap();
        assert_eq!(s4.children, vec![0, 3]);
        assert_eq!(t.node(5).unwrap().children, vec![1]);

        let expect = [
            (2, 0.0, 5.0),
            (4, 2.0, 3.0),
            (3, 2.0, 3.0),
            (0, 1.0, 4.0),
            (1, 1.0, 4.0),
            (5, 0.0, 5.0),
        ];
        for (id, b, d) in expect {
            assert_eq!(t.node(id).unwrap().interval, iv(b, d), "node {id}");
        }
        assert_eq!(t.node(5).unwrap().pair, Some(2));
        assert_eq!(t.node(2).unwrap().pair, Some(5));
        assert_eq!(t.node(4).unwrap().pair, Some(3));
        assert_eq!(t.node(0).unwrap().pair, Some(1));
    }

    #[test]
    fn single_extremum_and_single_vertex() {
        let t = MergeTree::from_graph(&path(&[0.0, 2.0, 5.0]), Orientation::Join).unwrap();
        let pts: Vec<_> = t.extrema().map(|n| n.interval.unwrap()).collect();
        assert_eq!(pts, vec![Interval::new(0.0, 5.0).unwrap()]);

        let one = MergeTree::from_graph(&path(&[7.0]), Orientation::Split).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.node(0).unwrap().interval, iv(7.0, 7.0));
        assert_eq!(one.extrema().count(), 1);
    }

    #[test]
    fn rejects_empty_and_disconnected() {
        let empty = ScalarGraph::new(vec![], vec![]).unwrap();
        assert!(matches!(
            build_merge_tree(&empty, Orientation::Join),
            Err(Error::EmptyGraph)
        ));
        let two = ScalarGraph::new(vec![0.0, 1.0], vec![]).unwrap();
        assert!(matches!(
            build_merge_tree(&two, Orientation::Join),
            Err(Error::Disconnected(2))
        ));
    }

    #[test]
    fn root_can_merge() {
        let t = MergeTree::from_graph(&path(&[0.0, 5.0, 1.0]), Orientation::Join).unwrap();
        let root = t.node(t.root()).unwrap();
        assert_eq!(root.children, vec![0, 2]);
        assert_eq!(root.interval, iv(0.0, 5.0));
        assert_eq!(t.node(2).unwrap().pair, Some(1));
        assert_eq!(t.node(2).unwrap().interval, iv(1.0, 5.0));
    }

    #[test]
    fn split_is_negated_join_of_negation() {
        let values = [1.0, 4.0, 0.0, 3.0, 2.0, 5.0, 2.5];
        let split = MergeTree::from_graph(&path(&values), Orientation::Split).unwrap();
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        // Negating values reverses the order only up to index tie-breaking,
        // which does not arise with distinct values.
        let join = MergeTree::from_graph(&path(&neg), Orientation::Join).unwrap();
        assert_eq!(split.len(), join.len());
        assert_eq!(split.root(), join.root());
        for n in join.nodes() {
            let s = split.node(n.id).unwrap();
            assert_eq!(s.scalar, -n.scalar);
            assert_eq!(s.kind, n.kind);
            assert_eq!(s.children, n.children);
            assert_eq!(s.pair, n.pair);
            let j = n.interval.unwrap();
            assert_eq!(s.interval, iv(-j.death, -j.birth));
        }
    }

    #[test]
    fn multi_saddle_pairing() {
        // A star graph: centre 10, three arms with minima 0, 1, 2.
        let g = ScalarGraph::new(
            vec![5.0, 0.0, 1.0, 2.0, 10.0],
            vec![(0, 1), (0, 2), (0, 3), (0, 4)],
        )
        .unwrap();
        let t = MergeTree::from_graph(&g, Orientation::Join).unwrap();
        let s = t.node(0).unwrap();
        assert_eq!(s.kind, NodeKind::Saddle);
        assert_eq!(s.children, vec![1, 2, 3]);
        assert_eq!(s.pair, Some(2));
        assert_eq!(s.interval, iv(1.0, 5.0));
        assert_eq!(t.node(3).unwrap().pair, Some(0));
        assert_eq!(t.node(3).unwrap().interval, iv(2.0, 5.0));
        assert_eq!(t.node(1).unwrap().interval, iv(0.0, 10.0));
    }

    #[test]
    fn simplify_examples() {
        let t = example();
        assert_eq!(simplify(&t, 0.0).unwrap(), t);
        // Max persistence 5; cutoff 2 lies in (1, 3).
        let s = simplify(&t, 0.4).unwrap();
        assert!(s.node(4).is_none() && s.node(3).is_none());
        assert_eq!(s.node(0).unwrap().interval, iv(1.0, 4.0));
        assert_eq!(s.len(), 4);
        let full = simplify(&t, 1.0).unwrap();
        assert_eq!(full.len(), 2);
        assert_eq!(full.node(full.root()).unwrap().interval, iv(0.0, 5.0));
    }

    #[test]
    fn stabilize_examples() {
        let t = example();
        assert_eq!(stabilize(&t, &StabilizationConfig::default()).unwrap(), t);

        let (flat, merges) =
            stabilize_counted(&t, &StabilizationConfig::with_epsilon(1.0).unwrap()).unwrap();
        assert_eq!(merges, 2);
        let root = flat.node(flat.root()).unwrap();
        assert_eq!(root.children, vec![0, 2, 4]);
        assert_eq!(root.interval, iv(0.0, 5.0));
        assert_eq!(flat.node(4).unwrap().interval, iv(2.0, 3.0));
        assert_eq!(flat.node(4).unwrap().pair, Some(5));
    }

    #[test]
    fn stabilize_threshold_is_strict() {
        // Saddles at 1.00 and 1.01 under a root at 2; max persistence 2.
        let g = ScalarGraph::new(
            vec![0.0, 1.0, 0.5, 1.01, 0.7, 2.0],
            vec![(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)],
        )
        .unwrap();
        let t = MergeTree::from_graph(&g, Orientation::Join).unwrap();
        assert_eq!(t.node(3).unwrap().children, vec![1, 4]);
        let merged =
            stabilize(&t, &StabilizationConfig::with_epsilon(0.02 / 2.0).unwrap()).unwrap();
        assert!(merged.node(1).is_none());
        let sn = merged.node(3).unwrap();
        assert_eq!(sn.children, vec![0, 2, 4]);
        // Saddle 1 paired (0.5, 1.0); saddle 1.01 paired (0.7, 1.01): the
        // former is more persistent and represents the multi-saddle.
        assert_eq!(sn.interval, iv(0.5, 1.0));
        assert_eq!(sn.pair, Some(2));
        assert_eq!(merged.node(4).unwrap().pair, Some(3));
        let kept = stabilize(&t, &StabilizationConfig::with_epsilon(0.005 / 2.0).unwrap()).unwrap();
        assert_eq!(kept, t);
    }

    #[test]
    fn unpaired_inputs_are_rejected() {
        let raw = build_merge_tree(&path(&[1.0, 4.0, 0.0, 3.0]), Orientation::Join).unwrap();
        assert!(!raw.is_paired());
        assert!(matches!(simplify(&raw, 0.1), Err(Error::Unpaired)));
        assert!(matches!(
            stabilize(&raw, &StabilizationConfig::default()),
            Err(Error::Unpaired)
        ));
        assert!(persistence_pair(&raw).is_paired());
    }

    #[test]
    fn extract_subtree_limits() {
        let t = MergeTree::from_graph(&path(&[1.0, 4.0, 0.0, 3.0, 2.0, 5.0]), Orientation::Split)
            .unwrap();
        let all = extract_subtrees(&t, 0.0, f64::NEG_INFINITY).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].len(), t.len());
        assert!(
            extract_subtrees(&t, t.max_persistence() + 1.0, f64::NEG_INFINITY)
                .unwrap()
                .is_empty()
        );
        // Super-level set {>= 3.5} has components {4} and {5}.
        let cut = extract_subtrees(&t, 0.0, 3.5).unwrap();
        assert_eq!(cut.len(), 2);
        for sub in &cut {
            assert_eq!(sub.len(), 2);
            sub.validate().unwrap();
        }
    }

    #[test]
    fn serialization_round_trip_and_errors() {
        let t = example();
        let text = serialize(&t);
        assert!(text.starts_with("mergetree join root=5\n"));
        assert!(text.contains("node 3 3 saddle 4 2 3 children=2,4\n"));
        assert_eq!(deserialize(&text).unwrap(), t);

        let cyclic = "mergetree join root=2\n\
                      node 0 0 saddle - - - children=1,3\n\
                      node 1 1 saddle - - - children=0,4\n\
                      node 2 9 root - - - children=5\n\
                      node 3 -1 extremum - - - children=\n\
                      node 4 -2 extremum - - - children=\n\
                      node 5 -3 extremum - - - children=\n";
        let err = deserialize(cyclic).unwrap_err().to_string();
        assert!(err.contains("cycle"), "{err}");

        let missing_pair = text.replace("node 3 3 saddle 4", "node 3 3 saddle 42");
        let err = deserialize(&missing_pair).unwrap_err().to_string();
        assert!(err.contains("missing pair"), "{err}");

        let dangling = text.replace("children=2,4", "children=2,44");
        assert!(deserialize(&dangling).is_err());
        assert!(deserialize("mergetree sideways root=0\n").is_err());
    }

    fn arb_path_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100i32..100, 1..40)
            .prop_map(|v| v.into_iter().map(f64::from).collect())
    }

    proptest! {
        #[test]
        fn structural_invariants(values in arb_path_values(), split in any::<bool>()) {
            let o = if split { Orientation::Split } else { Orientation::Join };
            let t = MergeTree::from_graph(&path(&values), o).unwrap();
            t.validate().unwrap();
            let root_partner = t.node(t.root()).unwrap().pair.unwrap();
            // One diagram point per extremum; every saddle is in some pair.
            let extrema: Vec<_> = t.extrema().map(|n| n.id).collect();
            for n in t.nodes() {
                if n.kind == NodeKind::Saddle {
                    prop_assert!(t.nodes().any(|m| m.pair == Some(n.id)));
                    let partner = t.node(n.pair.unwrap()).unwrap();
                    prop_assert_eq!(partner.interval, n.interval);
                }
            }
            prop_assert!(extrema.contains(&root_partner) || t.len() == 1);
        }

        #[test]
        fn shift_and_scale(values in arb_path_values(), c in -50.0f64..50.0, k in 0.1f64..10.0) {
            let t = MergeTree::from_graph(&path(&values), Orientation::Join).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            let ts = MergeTree::from_graph(&path(&shifted), Orientation::Join).unwrap();
            let tk = MergeTree::from_graph(&path(&scaled), Orientation::Join).unwrap();
            for n in t.nodes() {
                let a = ts.node(n.id).unwrap();
                let b = tk.node(n.id).unwrap();
                prop_assert_eq!(&a.children, &n.children);
                prop_assert_eq!(&b.children, &n.children);
                let i = n.interval.unwrap();
                let ia = a.interval.unwrap();
                let ib = b.interval.unwrap();
                prop_assert!((ia.birth - (i.birth + c)).abs() < 1e-9);
                prop_assert!((ia.death - (i.death + c)).abs() < 1e-9);
                prop_assert!((ib.birth - i.birth * k).abs() < 1e-9);
                prop_assert!((ib.death - i.death * k).abs() < 1e-9);
            }
        }

        #[test]
        fn stabilize_is_idempotent(values in arb_path_values(), eps in 0.0f64..=1.0) {
            let t = MergeTree::from_graph(&path(&values), Orientation::Split).unwrap();
            let cfg = StabilizationConfig::with_epsilon(eps).unwrap();
            let once = stabilize(&t, &cfg).unwrap();
            prop_assert_eq!(stabilize(&once, &cfg).unwrap(), once);
        }

        #[test]
        fn simplify_is_monotone(values in arb_path_values(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let t = MergeTree::from_graph(&path(&values), Orientation::Join).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(simplify(&t, hi).unwrap().len() <= simplify(&t, lo).unwrap().len());
        }

        #[test]
        fn serialization_round_trips(values in arb_path_values(), split in any::<bool>()) {
            let o = if split { Orientation::Split } else { Orientation::Join };
            let t = MergeTree::from_graph(&path(&values), o).unwrap();
            prop_assert_eq!(deserialize(&serialize(&t)).unwrap(), t);
        }
    }
}

//! Seeded generators for random trees and synthetic scalar fields.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::ScalarGrid;
use crate::mergetree::{
    persistence_pair, Interval, MergeTree, MergeTreeNode, NodeKind, Orientation,
};
use crate::ted::LabeledTree;

/// A labeled tree of exactly `nodes` nodes with arbitrary shape (unary nodes
/// allowed), at most `max_degree` children per node and random intervals in
/// `[0, 1]`. Ids are shuffled.
pub fn random_labeled_tree<R: Rng>(rng: &mut R, nodes: usize, max_degree: usize) -> LabeledTree {
    if nodes == 0 {
        return LabeledTree::empty();
    }
    let max_degree = max_degree.max(1);
    let mut children = vec![Vec::new(); nodes];
    for v in 1..nodes {
        let open: Vec<usize> = (0..v).filter(|&p| children[p].len() < max_degree).collect();
        let p = *open.choose(rng).unwrap();
        children[p].push(v);
    }
    let labels = (0..nodes)
        .map(|_| {
            let b: f64 = rng.gen_range(0.0..1.0);
            let d = rng.gen_range(b..=1.0);
            Interval::new(b, d).unwrap()
        })
        .collect();
    let mut ids: Vec<usize> = (0..nodes).collect();
    ids.shuffle(rng);
    LabeledTree::new(ids, labels, children, 0).unwrap()
}

/// A paired merge tree with exactly `nodes` nodes whose saddles have between
/// 2 and `max_degree` children. Scalars are spread so that the root pair spans
/// exactly `[0, 1]`.
pub fn random_merge_tree<R: Rng>(
    rng: &mut R,
    nodes: usize,
    max_degree: usize,
    orientation: Orientation,
) -> Result<MergeTree> {
    if nodes == 0 {
        return Err(Error::InvalidArgument(
            "a merge tree needs at least one node".into(),
        ));
    }
    if max_degree < 2 {
        return Err(Error::InvalidArgument(
            "max degree must be at least 2".into(),
        ));
    }
    let children = loop {
        if let Some(c) = try_grow(rng, nodes, max_degree) {
            break c;
        }
    };

    // Scalars fall strictly from each node to its children, measured as
    // distance from the root value.
    let mut height = vec![0.0f64; nodes];
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        for &c in &children[v] {
            height[c] = height[v] + rng.gen_range(0.02..1.0);
            stack.push(c);
        }
    }
    let top = height.iter().copied().fold(0.0, f64::max);
    let scalar = |v: usize| {
        if nodes == 1 {
            return 0.0;
        }
        let t = height[v] / top;
        match orientation {
            Orientation::Join => 1.0 - t,
            Orientation::Split => t,
        }
    };
    let list = (0..nodes)
        .map(|v| {
            let kind = if v == 0 {
                NodeKind::Root
            } else if children[v].is_empty() {
                NodeKind::Extremum
            } else {
                NodeKind::Saddle
            };
            MergeTreeNode::new(v, scalar(v), kind, children[v].clone())
        })
        .collect();
    Ok(persistence_pair(&MergeTree::new(orientation, list, 0)?))
}

/// Random growth from a root with one leaf: split a leaf into a saddle with
/// two leaves, hang a leaf on a node with spare degree, or insert a saddle with
/// a new leaf above an existing node. Gives up when it cannot land on the
/// exact size.
fn try_grow<R: Rng>(rng: &mut R, nodes: usize, max_degree: usize) -> Option<Vec<Vec<usize>>> {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut parent: Vec<Option<usize>> = vec![None];
    if nodes == 1 {
        return Some(children);
    }
    children[0].push(1);
    children.push(Vec::new());
    parent.push(Some(0));
    let add = |children: &mut Vec<Vec<usize>>, parent: &mut Vec<Option<usize>>, p: usize| {
        let v = children.len();
        children.push(Vec::new());
        parent.push(Some(p));
        children[p].push(v);
        v
    };
    while children.len() < nodes {
        let left = nodes - children.len();
        let spare: Vec<usize> = (0..children.len())
            .filter(|&v| !children[v].is_empty() && children[v].len() < max_degree)
            .collect();
        let op = if left == 1 { 0 } else { rng.gen_range(0..3) };
        match op {
            0 => {
                let &p = spare.choose(rng)?;
                add(&mut children, &mut parent, p);
            }
            1 => {
                let leaves: Vec<usize> = (1..children.len())
                    .filter(|&v| children[v].is_empty())
                    .collect();
                let &v = leaves.choose(rng)?;
                add(&mut children, &mut parent, v);
                add(&mut children, &mut parent, v);
            }
            _ => {
                let v = rng.gen_range(1..children.len());
                let p = parent[v].unwrap();
                let s = children.len();
                children.push(vec![v]);
                parent.push(Some(p));
                let slot = children[p].iter().position(|&c| c == v).unwrap();
                children[p][slot] = s;
                parent[v] = Some(s);
                add(&mut children, &mut parent, s);
            }
        }
    }
    Some(children)
}

/// Parameters of a sequence of frames in which gaussian blobs and a ripple
/// texture translate along the first axis with wraparound, completing one
/// lap every `period` frames. Blob amplitudes also oscillate with the period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSequence {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub period: usize,
    /// `(x, y, amplitude, sigma, phase)` at frame 0.
    pub blobs: Vec<(f64, f64, f64, f64, f64)>,
    pub ripple: f64,
}

impl Default for PeriodicSequence {
    fn default() -> Self {
        Self {
            frames: 60,
            width: 100,
            height: 25,
            period: 20,
            blobs: vec![
                (12.0, 8.0, 1.0, 4.0, 0.0),
                (37.0, 16.0, 0.8, 3.0, 1.3),
                (61.0, 6.0, 1.2, 5.0, 2.9),
                (83.0, 17.0, 0.6, 3.5, 4.4),
            ],
            ripple: 0.05,
        }
    }
}

impl PeriodicSequence {
    /// Cells moved per frame. Must divide the width for exact periodicity.
    pub fn speed(&self) -> usize {
        self.width / self.period
    }

    pub fn frame(&self, t: usize) -> Result<ScalarGrid> {
        if self.period == 0 || !self.width.is_multiple_of(self.period) {
            return Err(Error::InvalidArgument(format!(
                "period {} does not divide width {}",
                self.period, self.width
            )));
        }
        let (w, h) = (self.width, self.height);
        let shift = (self.speed() * t) % w;
        let phase = 2.0 * PI * (t % self.period) as f64 / self.period as f64;
        let mut values = Vec::with_capacity(w * h);
        for x in 0..w {
            // Position in the co-moving frame.
            let xs = ((x + w - shift) % w) as f64;
            for y in 0..h {
                let y = y as f64;
                let mut v = 0.0;
                for &(cx, cy, a, s, ph) in &self.blobs {
                    let dx = (xs - cx).abs();
                    let dx = dx.min(w as f64 - dx);
                    let dy = y - cy;
                    let amp = a * (1.0 + 0.25 * (phase + ph).sin());
                    v += amp * (-(dx * dx + dy * dy) / (2.0 * s * s)).exp();
                }
                v += self.ripple
                    * (2.0 * PI * 8.0 * xs / w as f64).sin()
                    * (2.0 * PI * y / 8.0).sin();
                values.push(v);
            }
        }
        ScalarGrid::new(vec![w, h], values)
    }

    pub fn generate(&self) -> Result<Vec<ScalarGrid>> {
        (0..self.frames).map(|t| self.frame(t)).collect()
    }
}

fn gaussian_field(dims: [usize; 2], blobs: &[(f64, f64, f64, f64)]) -> ScalarGrid {
    let mut values = Vec::with_capacity(dims[0] * dims[1]);
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            let (x, y) = (x as f64, y as f64);
            values.push(
                blobs
                    .iter()
                    .map(|&(cx, cy, a, s)| {
                        a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
                    })
                    .sum(),
            );
        }
    }
    ScalarGrid::new(dims.to_vec(), values).unwrap()
}

/// Six well separated blobs of equal width on a 2 x 3 lattice. The first four
/// share one amplitude; the last two are `1 + perturbation` times stronger.
/// Returns the field and the blob centers in that order.
pub fn six_blob_field(perturbation: f64) -> (ScalarGrid, Vec<[f64; 2]>) {
    let centers = vec![
        [20.0, 20.0],
        [60.0, 20.0],
        [20.0, 60.0],
        [60.0, 60.0],
        [100.0, 20.0],
        [100.0, 60.0],
    ];
    let blobs: Vec<_> = centers
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let a = if k < 4 { 1.0 } else { 1.0 + perturbation };
            (c[0], c[1], a, 5.0)
        })
        .collect();
    (gaussian_field([120, 80], &blobs), centers)
}

/// Four identical blobs placed mirror-symmetrically on a square grid.
pub fn four_blob_field() -> ScalarGrid {
    let blobs: Vec<_> = [[16.0, 16.0], [16.0, 47.0], [47.0, 16.0], [47.0, 47.0]]
        .iter()
        .map(|c| (c[0], c[1], 1.0, 5.0))
        .collect();
    gaussian_field([64, 64], &blobs)
}

/// Two gaussians of different height and width on a `size x size` grid.
pub fn two_gaussian_field(size: usize) -> ScalarGrid {
    let s = size as f64;
    gaussian_field(
        [size, size],
        &[
            (0.31 * s, 0.43 * s, 1.0, 0.12 * s),
            (0.70 * s, 0.58 * s, 0.7, 0.09 * s),
        ],
    )
}

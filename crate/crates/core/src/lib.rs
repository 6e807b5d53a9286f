//! Merge trees of scalar fields and a metric tree edit distance between them.
//!
//! The pipeline is: sample a scalar field ([`field`]), sweep it into a join or
//! split tree with persistence pairs ([`mergetree`]), optionally simplify and
//! stabilize, then compare trees with the constrained edit distance of [`ted`]
//! under one of the interval cost models of [`cost`]. Persistence-diagram
//! baselines live in [`diagram`], and [`oracle`] holds a brute-force reference
//! used to check the dynamic program on small inputs.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod diagram;
pub mod error;
pub mod field;
pub mod matching;
pub mod matrix;
pub mod mergetree;
pub mod oracle;
pub mod synth;
pub mod ted;

pub use cost::CostModel;
pub use diagram::{bottleneck, diagram_of, wasserstein1, PersistenceDiagram};
pub use error::{Error, Result};
pub use field::{GaussianSpec, GridFormat, ScalarGraph, ScalarGrid};
pub use matrix::DistanceMatrix;
pub use mergetree::{
    Interval, MergeTree, MergeTreeNode, NodeId, NodeKind, Orientation, StabilizationConfig,
};
pub use ted::{ted, EditMapping, LabeledTree, TedResult};

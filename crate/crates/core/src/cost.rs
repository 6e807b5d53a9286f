//! Edit-operation costs over birth–death intervals.
//!
//! The absent label is represented by `None`; its cost does not depend on any
//! location.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mergetree::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostModel {
    /// L∞ distance between diagram points, or both points sent to the diagonal.
    #[default]
    Winf,
    /// Length of the non-overlapping parts of the two bars.
    Overhang,
}

impl CostModel {
    pub fn relabel(self, p: &Interval, q: &Interval) -> f64 {
        let db = (q.birth - p.birth).abs();
        let dd = (q.death - p.death).abs();
        let lp = (p.death - p.birth).abs();
        let lq = (q.death - q.birth).abs();
        match self {
            CostModel::Winf => db.max(dd).min((lp + lq) / 2.0),
            CostModel::Overhang => (db + dd).min(lp + lq),
        }
    }

    pub fn delete(self, p: &Interval) -> f64 {
        let len = (p.death - p.birth).abs();
        match self {
            CostModel::Winf => len / 2.0,
            CostModel::Overhang => len,
        }
    }

    pub fn insert(self, q: &Interval) -> f64 {
        self.delete(q)
    }

    /// Cost of turning `a` into `b`, with `None` standing for the empty label.
    pub fn gamma(self, a: Option<&Interval>, b: Option<&Interval>) -> f64 {
        match (a, b) {
            (Some(p), Some(q)) => self.relabel(p, q),
            (Some(p), None) => self.delete(p),
            (None, Some(q)) => self.insert(q),
            (None, None) => 0.0,
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Winf => "winf",
            CostModel::Overhang => "overhang",
        })
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "winf" => Ok(CostModel::Winf),
            "overhang" => Ok(CostModel::Overhang),
            other => Err(Error::InvalidArgument(format!(
                "unknown cost model '{other}'"
            ))),
        }
    }
}

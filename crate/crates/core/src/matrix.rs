//! All-pairs distance matrices, their CSV form and the lag-mean period
//! detector.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::mergetree::{MergeTree, StabilizationConfig};
use crate::ted::ted;

/// A labeled square matrix, symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} labels need {} values, found {}",
                n,
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) = {v}")));
                }
                if (v - values[j * n + i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    /// Header row of labels, then one label-prefixed row per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.len() {
                write!(out, ",{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty matrix file"))?;
        let labels: Vec<String> = header
            .split(',')
            .skip(1)
            .map(|s| s.trim().to_string())
            .collect();
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (ln, line) in lines {
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or("").trim();
            if rows >= n || label != labels[rows] {
                return Err(Error::parse(
                    ln + 1,
                    format!("unexpected row label '{label}'"),
                ));
            }
            let row: Vec<f64> = cells
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|e| {
                        Error::parse(ln + 1, format!("bad number '{}': {e}", c.trim()))
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::parse(
                    ln + 1,
                    format!("expected {n} values, found {}", row.len()),
                ));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(Error::parse(0, format!("expected {n} rows, found {rows}")));
        }
        Self::new(labels, values)
    }
}

/// Computes the upper triangle in parallel and mirrors it. Every pair writes
/// to its own cell, so the result does not depend on `threads`.
pub fn distance_matrix(
    labels: Vec<String>,
    trees: &[MergeTree],
    model: CostModel,
    stab: &StabilizationConfig,
    threads: usize,
) -> Result<DistanceMatrix> {
    let n = trees.len();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} trees",
            labels.len()
        )));
    }
    if threads == 0 {
        return Err(Error::InvalidArgument(
            "worker count must be at least 1".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<f64>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                ted(&trees[i], &trees[j], model, stab)
                    .map(|r| r.distance)
                    .map_err(|e| {
                        Error::InvalidArgument(format!("pair ({}, {}): {e}", labels[i], labels[j]))
                    })
            })
            .collect()
    });
    let mut values = vec![0.0; n * n];
    for (&(i, j), r) in pairs.iter().zip(results) {
        let d = r?;
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    DistanceMatrix::new(labels, values)
}

/// Output of [`detect_period`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodReport {
    /// `(lag, mean entry at that lag)` for every lag in `[2, n / 2]`.
    pub lag_means: Vec<(usize, f64)>,
    /// Smallest lag attaining the minimum mean, if it stands out.
    pub period: Option<usize>,
    pub local_minima: Vec<usize>,
}

/// Lag means below this fraction of the overall average count as a period.
const SIGNIFICANCE: f64 = 0.5;

pub fn detect_period(m: &DistanceMatrix) -> Result<PeriodReport> {
    let n = m.len();
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "matrix of size {n} is too small for period detection (need 8)"
        )));
    }
    let lag_means: Vec<(usize, f64)> = (2..=n / 2)
        .map(|lag| {
            let sum: f64 = (0..n - lag).map(|i| m.get(i, i + lag)).sum();
            (lag, sum / (n - lag) as f64)
        })
        .collect();
    let means: Vec<f64> = lag_means.iter().map(|&(_, v)| v).collect();
    let overall = means.iter().sum::<f64>() / means.len() as f64;
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    let period = if overall > 0.0 && min < SIGNIFICANCE * overall {
        lag_means.iter().find(|&&(_, v)| v == min).map(|&(l, _)| l)
    } else {
        None
    };
    let local_minima = (0..means.len())
        .filter(|&k| {
            let left = k == 0 || means[k] < means[k - 1];
            let right = k + 1 == means.len() || means[k] < means[k + 1];
            left && right && means.len() > 1
        })
        .map(|k| lag_means[k].0)
        .collect();
    Ok(PeriodReport {
        lag_means,
        period,
        local_minima,
    })
}

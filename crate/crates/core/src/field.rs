//! Scalar fields on regular grids and generic graphs.
//!
//! Grids are stored row-major: for dims `[d0, d1, d2]` the last axis varies
//! fastest. Grid coordinates used by the gaussian generator are index
//! coordinates along each axis.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regular 1–3 dimensional grid of finite samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::InvalidGrid(format!(
                "expected 1 to 3 dims, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidGrid("dims must be positive".into()));
        }
        let expected: usize = dims.iter().product();
        if values.len() != expected {
            return Err(Error::ValueCount {
                expected,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    pub fn coords(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            out[axis] = flat % self.dims[axis];
            flat /= self.dims[axis];
        }
        out
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.values[self.flat_index(coords)]
    }

    /// Returns a copy with `offset` added to every sample.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| v + offset).collect(),
        }
    }

    /// Returns a copy with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Text,
    Binary,
}

pub fn load_grid(path: impl AsRef<Path>, format: GridFormat) -> Result<ScalarGrid> {
    let path = path.as_ref();
    match format {
        GridFormat::Text => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_grid_text(&text)
        }
        GridFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_grid_binary(&bytes)
        }
    }
}

pub fn save_grid(grid: &ScalarGrid, path: impl AsRef<Path>, format: GridFormat) -> Result<()> {
    let path = path.as_ref();
    let result = match format {
        GridFormat::Text => fs::write(path, write_grid_text(grid)),
        GridFormat::Binary => fs::write(path, encode_grid_binary(grid)),
    };
    result.map_err(|e| Error::io(path, e))
}

pub fn parse_grid_text(text: &str) -> Result<ScalarGrid> {
    let mut lines = text.lines().enumerate();
    let (header_no, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(1, "missing dims header"))?;
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("dims") {
        return Err(Error::parse(header_no + 1, "header must start with 'dims'"));
    }
    let dims = tokens
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(header_no + 1, format!("bad dimension '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::parse(header_no + 1, "expected 1 to 3 dims"));
    }

    let mut values = Vec::with_capacity(dims.iter().product());
    for (line_no, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no + 1, format!("bad value '{tok}'")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite(values.len()));
            }
            values.push(v);
        }
    }
    ScalarGrid::new(dims, values)
}

pub fn write_grid_text(grid: &ScalarGrid) -> String {
    let mut out = String::from("dims");
    for d in &grid.dims {
        out.push_str(&format!(" {d}"));
    }
    out.push('\n');
    let row = *grid.dims.last().unwrap();
    for chunk in grid.values.chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn encode_grid_binary(grid: &ScalarGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (1 + grid.dims.len() + grid.values.len()));
    out.extend_from_slice(&(grid.dims.len() as u64).to_le_bytes());
    for &d in &grid.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid_binary(bytes: &[u8]) -> Result<ScalarGrid> {
    let mut words = bytes.chunks_exact(8);
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::InvalidGrid(format!(
            "binary length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let mut next = |what: &str| {
        words
            .next()
            .map(|w| <[u8; 8]>::try_from(w).unwrap())
            .ok_or_else(|| Error::InvalidGrid(format!("truncated binary grid: missing {what}")))
    };
    let ndims = u64::from_le_bytes(next("dims count")?) as usize;
    if ndims == 0 || ndims > 3 {
        return Err(Error::InvalidGrid(format!(
            "expected 1 to 3 dims, got {ndims}"
        )));
    }
    let dims = (0..ndims)
        .map(|_| next("dimension").map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = words
        .map(|w| f64::from_le_bytes(w.try_into().unwrap()))
        .collect();
    ScalarGrid::new(dims, values)
}

/// One gaussian bump of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(center: Vec<f64>, amplitude: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            center,
            amplitude,
            sigma,
        })
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        let r2: f64 = point
            .iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum();
        self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Samples a sum of gaussians at every grid point.
pub fn gen_gaussian_sum(dims: &[usize], specs: &[GaussianSpec]) -> Result<ScalarGrid> {
    if dims.is_empty() {
        return Err(Error::InvalidGrid("empty dims".into()));
    }
    for (k, s) in specs.iter().enumerate() {
        if s.center.len() != dims.len() {
            return Err(Error::InvalidArgument(format!(
                "gaussian {k} has {} coordinates for a {}-d grid",
                s.center.len(),
                dims.len()
            )));
        }
        if !(s.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian {k} has non-positive sigma"
            )));
        }
        let inside = s
            .center
            .iter()
            .zip(dims)
            .all(|(&c, &d)| c >= 0.0 && c <= (d - 1) as f64);
        if !inside {
            return Err(Error::InvalidArgument(format!(
                "gaussian {k} center lies outside the grid"
            )));
        }
    }
    let n: usize = dims.iter().product();
    let shape = ScalarGrid {
        dims: dims.to_vec(),
        values: Vec::new(),
    };
    let values = (0..n)
        .map(|flat| {
            let point: Vec<f64> = shape.coords(flat).into_iter().map(|c| c as f64).collect();
            specs.iter().map(|s| s.eval(&point)).sum()
        })
        .collect();
    ScalarGrid::new(dims.to_vec(), values)
}

/// Keeps every `step`-th sample along each axis, starting at index 0.
pub fn subsample(grid: &ScalarGrid, step: usize) -> Result<ScalarGrid> {
    if step == 0 {
        return Err(Error::InvalidArgument("step must be at least 1".into()));
    }
    if step > 1 {
        if let Some(&d) = grid.dims.iter().find(|&&d| d <= step) {
            return Err(Error::InvalidArgument(format!(
                "step {step} is not smaller than dimension {d}"
            )));
        }
    }
    let axes: Vec<Vec<usize>> = grid
        .dims
        .iter()
        .map(|&d| (0..d).step_by(step).collect())
        .collect();
    Ok(select_indices(grid, &axes))
}

/// Resamples to `target` dims by picking, per axis, the source index nearest to
/// an evenly spaced position. Both endpoints are always kept.
pub fn resample_nearest(grid: &ScalarGrid, target: &[usize]) -> Result<ScalarGrid> {
    if target.len() != grid.dims.len() {
        return Err(Error::Dimension(format!(
            "target has {} dims, grid has {}",
            target.len(),
            grid.dims.len()
        )));
    }
    let mut axes = Vec::with_capacity(target.len());
    for (&src, &dst) in grid.dims.iter().zip(target) {
        if dst == 0 || dst > src {
            return Err(Error::InvalidArgument(format!(
                "cannot resample axis of length {src} to {dst}"
            )));
        }
        let idx = if dst == 1 {
            vec![0]
        } else {
            (0..dst)
                .map(|k| ((k * (src - 1)) as f64 / (dst - 1) as f64).round() as usize)
                .collect()
        };
        axes.push(idx);
    }
    Ok(select_indices(grid, &axes))
}

/// The iterated downsampling schedule: every iteration resamples the previous
/// grid with `remove` fewer samples per axis, so each grid's samples are a
/// subset of the one before. Returns `iterations + 1` grids, the first being
/// the input.
pub fn subsample_schedule(
    grid: &ScalarGrid,
    remove: usize,
    iterations: usize,
) -> Result<Vec<ScalarGrid>> {
    let mut out = vec![grid.clone()];
    for it in 1..=iterations {
        let prev = out.last().unwrap();
        let target = prev
            .dims
            .iter()
            .map(|&d| {
                d.checked_sub(remove).filter(|&t| t > 0).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "removing {remove} samples at iteration {it} exhausts an axis of length {d}"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let next = resample_nearest(prev, &target)?;
        out.push(next);
    }
    Ok(out)
}

fn select_indices(grid: &ScalarGrid, axes: &[Vec<usize>]) -> ScalarGrid {
    let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
    let n: usize = dims.iter().product();
    let out_shape = ScalarGrid {
        dims: dims.clone(),
        values: Vec::new(),
    };
    let values = (0..n)
        .map(|flat| {
            let src: Vec<usize> = out_shape
                .coords(flat)
                .iter()
                .zip(axes)
                .map(|(&c, axis)| axis[c])
                .collect();
            grid.get(&src)
        })
        .collect();
    ScalarGrid { dims, values }
}

/// Iterated Laplacian smoothing: each sample becomes the mean of itself and its
/// existing axis-aligned neighbours.
pub fn smooth_laplacian(grid: &ScalarGrid, iterations: usize) -> ScalarGrid {
    let mut cur = grid.values.clone();
    let mut next = vec![0.0; cur.len()];
    let mut strides = vec![1usize; grid.dims.len()];
    for axis in (0..grid.dims.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * grid.dims[axis + 1];
    }
    for _ in 0..iterations {
        for (flat, out) in next.iter_mut().enumerate() {
            let coords = grid.coords(flat);
            let mut sum = cur[flat];
            let mut count = 1.0;
            for (axis, &c) in coords.iter().enumerate() {
                if c > 0 {
                    sum += cur[flat - strides[axis]];
                    count += 1.0;
                }
                if c + 1 < grid.dims[axis] {
                    sum += cur[flat + strides[axis]];
                    count += 1.0;
                }
            }
            *out = sum / count;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    ScalarGrid {
        dims: grid.dims.clone(),
        values: cur,
    }
}

/// A scalar function on the vertices of an undirected graph.
///
/// Vertices are totally ordered by `(scalar, index)`, which breaks ties between
/// equal samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGraph {
    scalars: Vec<f64>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl ScalarGraph {
    pub fn new(scalars: Vec<f64>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = scalars.len();
        if let Some(pos) = scalars.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        let mut sorted = normalized.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        for &(a, b) in &normalized {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Ok(Self {
            scalars,
            edges: normalized,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.scalars.len()
    }

    pub fn scalars(&self) -> &[f64] {
        &self.scalars
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn order_key(&self, v: usize) -> (f64, usize) {
        (self.scalars[v], v)
    }

    /// Total order on vertices: by scalar, then by index.
    pub fn cmp_vertices(&self, a: usize, b: usize) -> Ordering {
        self.scalars[a].total_cmp(&self.scalars[b]).then(a.cmp(&b))
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

pub fn parse_graph_text(text: &str) -> Result<ScalarGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing 'vertices' header"))?;
    let n = header
        .strip_prefix("vertices")
        .and_then(|r| r.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse(no, "expected 'vertices <n>'"))?;
    let mut scalars = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(no, "unexpected end of file in vertex list"))?;
        let v: f64 = line
            .parse()
            .map_err(|_| Error::parse(no, format!("bad scalar '{line}'")))?;
        if !v.is_finite() {
            return Err(Error::parse(no, "non-finite scalar"));
        }
        scalars.push(v);
    }

    let (no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(no, "missing 'edges' header"))?;
    let m = header
        .strip_prefix("edges")
        .and_then(|r| r.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse(no, "expected 'edges <m>'"))?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(no, "unexpected end of file in edge list"))?;
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => edges.push((a, b)),
            _ => return Err(Error::parse(no, format!("bad edge '{line}'"))),
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::parse(no, "trailing content after edge list"));
    }
    ScalarGraph::new(scalars, edges)
}

pub fn write_graph_text(graph: &ScalarGraph) -> String {
    let mut out = format!("vertices {}\n", graph.vertex_count());
    for v in &graph.scalars {
        out.push_str(&format!("{v}\n"));
    }
    out.push_str(&format!("edges {}\n", graph.edges.len()));
    for (a, b) in &graph.edges {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<ScalarGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph_text(&text)
}

/// Freudenthal connectivity: every grid point links to the points reached by
/// adding any non-zero 0/1 offset vector. That is a path in 1D, the
/// 6-neighbourhood in 2D and the 14-neighbourhood in 3D.
pub fn grid_to_graph(grid: &ScalarGrid) -> ScalarGraph {
    let d = grid.dims.len();
    let offsets: Vec<Vec<usize>> = (1..(1usize << d))
        .map(|mask| (0..d).map(|axis| (mask >> (d - 1 - axis)) & 1).collect())
        .collect();
    let mut edges = Vec::new();
    for flat in 0..grid.len() {
        let coords = grid.coords(flat);
        for off in &offsets {
            let inside = coords
                .iter()
                .zip(off)
                .zip(&grid.dims)
                .all(|((&c, &o), &dim)| c + o < dim);
            if inside {
                let nb: Vec<usize> = coords.iter().zip(off).map(|(c, o)| c + o).collect();
                edges.push((flat, grid.flat_index(&nb)));
            }
        }
    }
    edges.sort_unstable();
    // Construction cannot produce loops or duplicates.
    ScalarGraph::new(grid.values.clone(), edges).expect("freudenthal edges are simple")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dims: &[usize], values: &[f64]) -> ScalarGrid {
        ScalarGrid::new(dims.to_vec(), values.to_vec()).unwrap()
    }

    #[test]
    fn parses_text_grid() {
        let g = parse_grid_text("dims 2 2\n0 1 2 3\n").unwrap();
        assert_eq!(g.dims(), &[2, 2]);
        assert_eq!(g.values(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_value_count_mismatch() {
        let err = parse_grid_text("dims 2 2\n0 1 2\n").unwrap_err();
        assert!(err.to_string().contains("value count mismatch"), "{err}");
    }

    #[test]
    fn rejects_bad_header_and_non_finite() {
        assert!(matches!(
            parse_grid_text("size 2\n0 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_grid_text("dims 3\n0 inf 1\n"),
            Err(Error::NonFinite(1))
        ));
        assert!(matches!(
            parse_grid_text("dims 2\n0\nx\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn binary_round_trip_and_truncation() {
        let g = grid(&[2, 3], &[0.5, -1.0, 2.25, 3.0, 4.0, 1e-300]);
        let bytes = encode_grid_binary(&g);
        assert_eq!(decode_grid_binary(&bytes).unwrap(), g);
        assert!(decode_grid_binary(&bytes[..bytes.len() - 8]).is_err());
        assert!(decode_grid_binary(&bytes[..3]).is_err());
    }

    #[test]
    fn empty_gaussian_sum_is_zero() {
        let g = gen_gaussian_sum(&[3, 4], &[]).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert!(gen_gaussian_sum(&[], &[]).is_err());
    }

    #[test]
    fn single_gaussian_peaks_at_center() {
        let spec = GaussianSpec::new(vec![3.0, 5.0], 1.0, 2.0).unwrap();
        let g = gen_gaussian_sum(&[8, 10], &[spec]).unwrap();
        let peak = g.get(&[3, 5]);
        assert_eq!(peak, 1.0);
        assert!(g.values().iter().all(|&v| v <= peak));
    }

    #[test]
    fn mirrored_gaussians_give_mirror_symmetric_field() {
        let (rows, cols) = (9usize, 14usize);
        let a = GaussianSpec::new(vec![3.0, 2.5], 1.0, 1.7).unwrap();
        let b = GaussianSpec::new(vec![3.0, (cols - 1) as f64 - 2.5], 1.0, 1.7).unwrap();
        let g = gen_gaussian_sum(&[rows, cols], &[a.clone(), b.clone()]).unwrap();
        // Independent pointwise evaluation of the mirrored field.
        for r in 0..rows {
            for c in 0..cols {
                let m = cols - 1 - c;
                let p = [r as f64, m as f64];
                let mirrored = a.eval(&p) + b.eval(&p);
                assert!((g.get(&[r, c]) - mirrored).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn subsample_basics() {
        let g = grid(&[4, 4], &(0..16).map(f64::from).collect::<Vec<_>>());
        assert_eq!(subsample(&g, 1).unwrap(), g);
        let s = subsample(&g, 2).unwrap();
        assert_eq!(s.dims(), &[2, 2]);
        assert_eq!(s.values(), &[0.0, 2.0, 8.0, 10.0]);
        assert!(subsample(&g, 5).is_err());
        assert!(subsample(&g, 0).is_err());
    }

    #[test]
    fn subsample_schedule_reaches_thirty() {
        let g = gen_gaussian_sum(&[300, 300], &[]).unwrap();
        let levels = subsample_schedule(&g, 30, 9).unwrap();
        assert_eq!(levels.len(), 10);
        let sizes: Vec<usize> = levels.iter().map(|l| l.dims()[0]).collect();
        assert_eq!(sizes, vec![300, 270, 240, 210, 180, 150, 120, 90, 60, 30]);
        assert_eq!(levels[9].dims(), &[30, 30]);
        assert!(subsample_schedule(&g, 30, 10).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let g = grid(&[3], &[0.0, 3.0, 0.0]);
        assert_eq!(smooth_laplacian(&g, 0), g);
        let s = smooth_laplacian(&g, 1);
        assert_eq!(s.values(), &[1.5, 1.0, 1.5]);
        let c = grid(&[2, 3], &[2.5; 6]);
        assert_eq!(smooth_laplacian(&c, 7), c);
    }

    #[test]
    fn graph_edge_counts() {
        let path = grid_to_graph(&grid(&[5], &[0.0; 5]));
        assert_eq!(path.edges().len(), 4);
        let square = grid_to_graph(&grid(&[2, 2], &[0.0; 4]));
        assert_eq!(square.edges().len(), 5);
        let cube = grid_to_graph(&grid(&[3, 3, 3], &[0.0; 27]));
        // Centre vertex (1, 1, 1) of a 3x3x3 grid.
        assert_eq!(cube.neighbors(13).len(), 14);
    }

    /// Edges of the Freudenthal triangulation, enumerated per cell from its
    /// simplices: one simplex per axis permutation, walking from the cell's
    /// lower corner.
    fn freudenthal_edges_by_simplices(dims: &[usize]) -> Vec<(usize, usize)> {
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(k - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, k - 1);
                    out.push(q);
                }
            }
            out
        }
        let d = dims.len();
        let shape = ScalarGrid::new(dims.to_vec(), vec![0.0; dims.iter().product()]).unwrap();
        let mut edges = std::collections::BTreeSet::new();
        let cells: Vec<usize> = dims.iter().map(|&x| x.saturating_sub(1)).collect();
        let ncells: usize = cells.iter().product();
        for cell in 0..ncells {
            let mut corner = vec![0; d];
            let mut rem = cell;
            for axis in (0..d).rev() {
                corner[axis] = rem % cells[axis];
                rem /= cells[axis];
            }
            for perm in permutations(d) {
                let mut verts = vec![shape.flat_index(&corner)];
                let mut cur = corner.clone();
                for &axis in &perm {
                    cur[axis] += 1;
                    verts.push(shape.flat_index(&cur));
                }
                for i in 0..verts.len() {
                    for j in i + 1..verts.len() {
                        let (a, b) = (verts[i].min(verts[j]), verts[i].max(verts[j]));
                        edges.insert((a, b));
                    }
                }
            }
        }
        edges.into_iter().collect()
    }

    #[test]
    fn grid_graph_matches_triangulation_enumeration() {
        for dims in [vec![3, 3], vec![4, 2], vec![3, 3, 3], vec![2, 4, 3]] {
            let n = dims.iter().product();
            let g = grid_to_graph(&grid(&dims, &vec![0.0; n]));
            let mut ours = g.edges().to_vec();
            ours.sort_unstable();
            assert_eq!(ours, freudenthal_edges_by_simplices(&dims), "dims {dims:?}");
        }
    }

    #[test]
    fn graph_validation() {
        assert!(ScalarGraph::new(vec![0.0, 1.0], vec![(0, 0)]).is_err());
        assert!(ScalarGraph::new(vec![0.0, 1.0], vec![(0, 1), (1, 0)]).is_err());
        assert!(ScalarGraph::new(vec![0.0, 1.0], vec![(0, 2)]).is_err());
        let g = ScalarGraph::new(vec![1.0, 1.0, 0.0], vec![(0, 1)]).unwrap();
        assert_eq!(g.component_count(), 2);
        assert_eq!(g.cmp_vertices(0, 1), Ordering::Less);
        assert_eq!(g.cmp_vertices(2, 0), Ordering::Less);
    }

    #[test]
    fn graph_text_round_trip() {
        let g = ScalarGraph::new(vec![0.5, -2.0, 3.0], vec![(0, 1), (1, 2)]).unwrap();
        let text = write_graph_text(&g);
        assert_eq!(parse_graph_text(&text).unwrap(), g);
        assert!(parse_graph_text("vertices 2\n1\n2\nedges 1\n0 5\n").is_err());
        assert!(parse_graph_text("vertices 2\n1\n").is_err());
    }

    fn arb_grid() -> impl Strategy<Value = ScalarGrid> {
        prop::collection::vec(1usize..6, 1..=3).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            prop::collection::vec(-1e3f64..1e3, n)
                .prop_map(move |values| ScalarGrid::new(dims.clone(), values).unwrap())
        })
    }

    proptest! {
        #[test]
        fn text_and_binary_round_trip(g in arb_grid()) {
            prop_assert_eq!(parse_grid_text(&write_grid_text(&g)).unwrap(), g.clone());
            prop_assert_eq!(decode_grid_binary(&encode_grid_binary(&g)).unwrap(), g);
        }

        #[test]
        fn smoothing_is_a_contraction(g in arb_grid(), iters in 0usize..4) {
            let s = smooth_laplacian(&g, iters);
            let max = g.values().iter().cloned().fold(f64::MIN, f64::max);
            let min = g.values().iter().cloned().fold(f64::MAX, f64::min);
            for &v in s.values() {
                prop_assert!(v <= max + 1e-9 && v >= min - 1e-9);
            }
        }

        #[test]
        fn subsampling_composes(g in arb_grid(), a in 1usize..3, b in 1usize..3) {
            prop_assume!(g.dims().iter().all(|&d| d > a * b));
            let once = subsample(&g, a).unwrap();
            prop_assume!(once.dims().iter().all(|&d| d > b));
            let twice = subsample(&once, b).unwrap();
            prop_assert_eq!(twice, subsample(&g, a * b).unwrap());
        }

        #[test]
        fn grid_graph_is_deterministic(g in arb_grid()) {
            prop_assert_eq!(grid_to_graph(&g), grid_to_graph(&g));
        }
    }
}

//! Python bindings: merge tree construction, the tree edit distance and the
//! diagram baselines.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use merge_ted::field::gen_gaussian_sum;
use merge_ted::mergetree::{deserialize, serialize, simplify, stabilize};
use merge_ted::{
    CostModel, GaussianSpec, Interval, MergeTree as CoreTree, ScalarGraph, ScalarGrid,
    StabilizationConfig,
};

fn err(e: merge_ted::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = merge_ted::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

#[pyclass(name = "MergeTree", module = "merge_ted_py", frozen)]
struct MergeTree {
    inner: CoreTree,
}

#[pymethods]
impl MergeTree {
    /// Builds a tree from a row-major grid of samples.
    #[staticmethod]
    #[pyo3(signature = (dims, values, orientation = "split"))]
    fn from_grid(dims: Vec<usize>, values: Vec<f64>, orientation: &str) -> PyResult<Self> {
        let grid = ScalarGrid::new(dims, values).map_err(err)?;
        let inner = CoreTree::from_grid(&grid, parse(orientation)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (scalars, edges, orientation = "split"))]
    fn from_graph(
        scalars: Vec<f64>,
        edges: Vec<(usize, usize)>,
        orientation: &str,
    ) -> PyResult<Self> {
        let graph = ScalarGraph::new(scalars, edges).map_err(err)?;
        let inner = CoreTree::from_graph(&graph, parse(orientation)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn deserialize(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: deserialize(text).map_err(err)?,
        })
    }

    fn serialize(&self) -> String {
        serialize(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "MergeTree({}, nodes={}, root={})",
            self.inner.orientation(),
            self.inner.len(),
            self.inner.root()
        )
    }

    #[getter]
    fn root(&self) -> usize {
        self.inner.root()
    }

    #[getter]
    fn orientation(&self) -> String {
        self.inner.orientation().to_string()
    }

    fn max_persistence(&self) -> f64 {
        self.inner.max_persistence()
    }

    /// `{id: (scalar, kind, children, (birth, death))}` for every node.
    fn nodes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for n in self.inner.nodes() {
            let iv = n.interval.map(|i| (i.birth, i.death));
            d.set_item(n.id, (n.scalar, n.kind.to_string(), n.children.clone(), iv))?;
        }
        Ok(d)
    }

    /// Persistence diagram as `(birth, death)` tuples.
    fn diagram(&self) -> PyResult<Vec<(f64, f64)>> {
        let d = merge_ted::diagram_of(&self.inner).map_err(err)?;
        Ok(d.points.iter().map(|p| (p.birth, p.death)).collect())
    }

    fn simplify(&self, threshold: f64) -> PyResult<Self> {
        Ok(Self {
            inner: simplify(&self.inner, threshold).map_err(err)?,
        })
    }

    fn stabilize(&self, epsilon: f64) -> PyResult<Self> {
        let cfg = StabilizationConfig::with_epsilon(epsilon).map_err(err)?;
        Ok(Self {
            inner: stabilize(&self.inner, &cfg).map_err(err)?,
        })
    }
}

/// Tree edit distance with its mapping, as a dict.
#[pyfunction]
#[pyo3(signature = (first, second, cost = "winf", eps = 0.0, stab_cost = None))]
fn ted<'py>(
    py: Python<'py>,
    first: &MergeTree,
    second: &MergeTree,
    cost: &str,
    eps: f64,
    stab_cost: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = StabilizationConfig::new(eps, stab_cost.is_some(), stab_cost.unwrap_or(0.0))
        .map_err(err)?;
    let model: CostModel = parse(cost)?;
    let r = py
        .detach(|| merge_ted::ted(&first.inner, &second.inner, model, &cfg))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("distance", r.distance)?;
    d.set_item("pairs", r.mapping.pairs)?;
    d.set_item("deleted", r.mapping.deleted)?;
    d.set_item("inserted", r.mapping.inserted)?;
    d.set_item("stabilization_surcharge", r.stabilization_surcharge)?;
    Ok(d)
}

#[pyfunction]
fn wasserstein1(first: &MergeTree, second: &MergeTree) -> PyResult<f64> {
    let a = merge_ted::diagram_of(&first.inner).map_err(err)?;
    let b = merge_ted::diagram_of(&second.inner).map_err(err)?;
    Ok(merge_ted::wasserstein1(&a, &b))
}

#[pyfunction]
fn bottleneck(first: &MergeTree, second: &MergeTree) -> PyResult<f64> {
    let a = merge_ted::diagram_of(&first.inner).map_err(err)?;
    let b = merge_ted::diagram_of(&second.inner).map_err(err)?;
    Ok(merge_ted::bottleneck(&a, &b))
}

fn interval(p: (f64, f64)) -> PyResult<Interval> {
    Interval::new(p.0, p.1).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, q, cost = "winf"))]
fn relabel_cost(p: (f64, f64), q: (f64, f64), cost: &str) -> PyResult<f64> {
    Ok(parse::<CostModel>(cost)?.relabel(&interval(p)?, &interval(q)?))
}

#[pyfunction]
#[pyo3(signature = (p, cost = "winf"))]
fn delete_cost(p: (f64, f64), cost: &str) -> PyResult<f64> {
    Ok(parse::<CostModel>(cost)?.delete(&interval(p)?))
}

/// Row-major samples of a gaussian sum; specs are `(center, amplitude, sigma)`.
#[pyfunction]
fn gaussian_grid(dims: Vec<usize>, specs: Vec<(Vec<f64>, f64, f64)>) -> PyResult<Vec<f64>> {
    let specs = specs
        .into_iter()
        .map(|(c, a, s)| GaussianSpec::new(c, a, s))
        .collect::<merge_ted::Result<Vec<_>>>()
        .map_err(err)?;
    Ok(gen_gaussian_sum(&dims, &specs)
        .map_err(err)?
        .values()
        .to_vec())
}

#[pymodule]
fn merge_ted_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<MergeTree>()?;
    m.add_function(wrap_pyfunction!(ted, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(bottleneck, m)?)?;
    m.add_function(wrap_pyfunction!(relabel_cost, m)?)?;
    m.add_function(wrap_pyfunction!(delete_cost, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_grid, m)?)?;
    Ok(())
}

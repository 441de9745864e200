//! Scalar fields sampled on regular tangent-space grids.

mod estimate;
mod io;
mod oracle;

pub use estimate::{
    discrete_gradient, discrete_lipschitz, discrete_lipschitz_random, discrete_lipschitz_within,
    pairwise_lipschitz, second_difference, Stencil,
};
pub use io::write_csv;
pub use oracle::{FunctionKind, FunctionOracle};

use crate::error::{Error, Result};
use crate::manifold::{Chart, Tangent, MAX_DIM};

/// Upper bound on the number of nodes of a single grid.
pub const MAX_NODES: usize = 1 << 24;

/// Regular lattice `origin + i·spacing`, stored row-major with the last axis
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentGrid {
    dim: usize,
    shape: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
    origin: [f64; MAX_DIM],
}

impl TangentGrid {
    pub fn new(shape: &[usize], spacing: &[f64], origin: &[f64]) -> Result<Self> {
        let dim = shape.len();
        if !(1..=MAX_DIM).contains(&dim) || spacing.len() != dim || origin.len() != dim {
            return Err(Error::Grid(format!("grid needs 1..={MAX_DIM} axes with matching spacing and origin")));
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::Grid(format!("every axis needs at least 2 nodes, got {shape:?}")));
        }
        if spacing.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing:?}")));
        }
        let total = shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= MAX_NODES => {}
            _ => return Err(Error::Grid(format!("grid {shape:?} exceeds the {MAX_NODES}-node cap"))),
        }
        let mut g = TangentGrid { dim, shape: [1; MAX_DIM], spacing: [1.0; MAX_DIM], origin: [0.0; MAX_DIM] };
        g.shape[..dim].copy_from_slice(shape);
        g.spacing[..dim].copy_from_slice(spacing);
        g.origin[..dim].copy_from_slice(origin);
        Ok(g)
    }

    /// Cube `[-half_width, half_width]^dim` with `2^k + 1` nodes per axis, so
    /// the origin is a node.
    pub fn centered(dim: usize, half_width: f64, k: u32) -> Result<Self> {
        if k == 0 || k > 24 {
            return Err(Error::Grid(format!("resolution exponent {k} outside 1..=24")));
        }
        let n = (1usize << k) + 1;
        let h = 2.0 * half_width / (1u64 << k) as f64;
        TangentGrid::new(&vec![n; dim], &vec![h; dim], &vec![-half_width; dim])
    }

    /// The grid for chart n: half-width 4δ, so the chart ball of radius 3δ
    /// keeps a δ margin on every side.
    pub fn for_chart(chart: &Chart, k: u32) -> Result<Self> {
        TangentGrid::centered(chart.dim(), 4.0 * chart.delta, k)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..self.dim].iter().product()
    }

    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for k in 0..self.dim {
            flat = flat * self.shape[k] + idx[k];
        }
        flat
    }

    #[inline]
    pub fn node(&self, flat: usize) -> Tangent {
        let idx = self.multi_index(flat);
        let mut v = Tangent::zeros(self.dim);
        for (k, x) in v.as_mut_slice().iter_mut().enumerate() {
            *x = self.origin[k] + idx[k] as f64 * self.spacing[k];
        }
        v
    }

    /// Node nearest to `x`, if `x` lies in the hull.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0; MAX_DIM];
        for k in 0..self.dim {
            let t = ((x[k] - self.origin[k]) / self.spacing[k]).round();
            if t < 0.0 || t > (self.shape[k] - 1) as f64 {
                return None;
            }
            idx[k] = t as usize;
        }
        Some(self.flat_index(&idx[..self.dim]))
    }

    pub fn hull(&self, axis: usize) -> (f64, f64) {
        let lo = self.origin[axis];
        (lo, lo + (self.shape[axis] - 1) as f64 * self.spacing[axis])
    }
}

/// Scalar values on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: TangentGrid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: TangentGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("non-finite value {} at node {i}", values[i])));
        }
        Ok(GridField { grid, values })
    }

    pub fn from_fn(grid: TangentGrid, f: impl Fn(&Tangent) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        GridField::new(grid, values)
    }

    pub fn constant(grid: TangentGrid, c: f64) -> Result<Self> {
        let n = grid.len();
        GridField::new(grid, vec![c; n])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridField::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Multilinear interpolation; exact at nodes.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        if x.len() != g.dim {
            return Err(Error::Domain(format!("{}-vector on a {}-dimensional grid", x.len(), g.dim)));
        }
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for k in 0..g.dim {
            let (lo, hi) = g.hull(k);
            let slack = 1e-12 * g.spacing[k];
            if !(x[k] >= lo - slack && x[k] <= hi + slack) {
                return Err(Error::OutOfHull { axis: k, value: x[k], lo, hi });
            }
            let mut t = ((x[k] - lo) / g.spacing[k]).clamp(0.0, (g.shape[k] - 1) as f64);
            // Node coordinates carry rounding; snap so nodes reproduce exactly.
            if (t - t.round()).abs() <= 1e-11 {
                t = t.round();
            }
            let i = (t.floor() as usize).min(g.shape[k] - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << g.dim) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..g.dim {
                let up = (corner >> (g.dim - 1 - k)) & 1;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * g.shape[k] + base[k] + up;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        Ok(acc)
    }
}

/// A subset of grid nodes, kept both as a mask and as a sorted index list.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub mask: Vec<bool>,
    pub members: Vec<usize>,
}

impl NodeSet {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let members = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        NodeSet { mask, members }
    }

    pub fn all(grid: &TangentGrid) -> Self {
        NodeSet::from_mask(vec![true; grid.len()])
    }

    /// Nodes with norm strictly below `radius`.
    pub fn ball(grid: &TangentGrid, radius: f64) -> Self {
        NodeSet::from_mask((0..grid.len()).map(|i| grid.node(i).norm() < radius).collect())
    }

    /// Nodes at least `margin` index steps away from every face.
    pub fn interior(grid: &TangentGrid, margin: usize) -> Self {
        NodeSet::from_mask(
            (0..grid.len())
                .map(|i| {
                    let idx = grid.multi_index(i);
                    (0..grid.dim()).all(|k| idx[k] >= margin && idx[k] + margin < grid.shape()[k])
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }
}

/// `values[i] = oracle(exp(node_i))`; every node must lie in the chart ball.
pub fn sample_to_grid(oracle: &FunctionOracle, chart: &Chart, grid: &TangentGrid) -> Result<GridField> {
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = chart.exp(&grid.node(i))?;
        values.push(oracle.eval(&chart.model, &p));
    }
    GridField::new(grid.clone(), values)
}

/// Like [`sample_to_grid`] but only on `nodes`; all other nodes hold 0.
pub fn sample_on_nodes(oracle: &FunctionOracle, chart: &Chart, grid: &TangentGrid, nodes: &NodeSet) -> Result<GridField> {
    let mut values = vec![0.0; grid.len()];
    for &i in &nodes.members {
        let p = chart.exp(&grid.node(i))?;
        values[i] = oracle.eval(&chart.model, &p);
    }
    GridField::new(grid.clone(), values)
}

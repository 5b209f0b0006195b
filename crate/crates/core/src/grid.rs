//! Grids, nodal fields, boundary conditions and norms.
//!
//! Multi-dimensional grids are tensor products of one-dimensional grids, so
//! every line of a field along a given axis shares the same [`Grid1D`].

use std::io::Write;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};

use crate::error::{invalid, MoltError, Result};

/// Ordered nodes `x_0 < x_1 < ... < x_N` of one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
}

impl Grid1D {
    /// Builds a grid from explicit node coordinates (possibly nonuniform).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(invalid(format!(
                "grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    /// `N` equal cells on `[a, b]`.
    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(invalid(format!("need N >= 2 cells, got {cells}")));
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("need finite a < b, got [{a}, {b}]")));
        }
        let h = (b - a) / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|j| a + j as f64 * h).collect();
        nodes[cells] = b;
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of cells `N` (one less than the node count).
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.b() - self.a()
    }

    /// `h_j = x_j - x_{j-1}` for `j = 1..=N`, stored at index `j - 1`.
    pub fn spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (j, &xj) in self.nodes.iter().enumerate() {
            if (xj - x).abs() < (self.nodes[best] - x).abs() {
                best = j;
            }
        }
        best
    }
}

/// Convenience wrapper matching the common uniform-grid constructor.
pub fn uniform_grid(a: f64, b: f64, cells: usize) -> Result<Grid1D> {
    Grid1D::uniform(a, b, cells)
}

/// Tensor-product grid in one to three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    axes: Vec<Grid1D>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Grid1D>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(invalid(format!(
                "grids have 1 to 3 axes, got {}",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn line(g: Grid1D) -> Self {
        Self { axes: vec![g] }
    }

    pub fn plane(gx: Grid1D, gy: Grid1D) -> Self {
        Self { axes: vec![gx, gy] }
    }

    pub fn cube(gx: Grid1D, gy: Grid1D, gz: Grid1D) -> Self {
        Self {
            axes: vec![gx, gy, gz],
        }
    }

    pub fn axes(&self) -> &[Grid1D] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Grid1D {
        &self.axes[k]
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Grid1D::len).collect()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Grid1D::len).product()
    }
}

/// Boundary treatment applied to every line sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// `u(a) = u(b)` and `u_x(a) = u_x(b)`; both endpoint values are stored.
    Periodic,
    /// `u_x(a) = u_x(b) = 0`.
    HomogeneousNeumann,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = MoltError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(Self::Periodic),
            "neumann" | "homogeneous_neumann" => Ok(Self::HomogeneousNeumann),
            other => Err(invalid(format!("unknown boundary condition '{other}'"))),
        }
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Periodic => write!(f, "periodic"),
            Self::HomogeneousNeumann => write!(f, "neumann"),
        }
    }
}

/// Parameters of one linear diffusion propagator `e^{gamma dt Laplacian}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Diffusion coefficient (area / time). Zero means no diffusion.
    pub gamma: f64,
    pub dt: f64,
    /// Number of retained terms `P` of the resolvent expansion.
    pub order: usize,
    pub beta2: f64,
    /// Polynomial degree `M` of the local quadrature.
    pub spatial_order: usize,
    pub bc: BoundaryCondition,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.order == 0 {
            return Err(invalid("expansion order P must be >= 1"));
        }
        if !(self.beta2 > 0.0) {
            return Err(invalid(format!("beta^2 must be > 0, got {}", self.beta2)));
        }
        if self.spatial_order == 0 {
            return Err(invalid("spatial order M must be >= 1"));
        }
        Ok(())
    }

    /// `alpha = beta / sqrt(gamma dt)`; infinite when `gamma == 0`.
    pub fn alpha(&self) -> f64 {
        (self.beta2 / (self.gamma * self.dt)).sqrt()
    }
}

/// Nodal values on a tensor grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<TensorGrid>,
    values: ArrayD<f64>,
}

impl Field {
    pub fn new(grid: Arc<TensorGrid>, values: ArrayD<f64>) -> Result<Self> {
        if values.shape() != grid.shape().as_slice() {
            return Err(MoltError::InvalidField(format!(
                "value shape {:?} does not match grid shape {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MoltError::InvalidField("non-finite nodal value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<TensorGrid>) -> Self {
        let values = ArrayD::zeros(IxDyn(&grid.shape()));
        Self { grid, values }
    }

    /// Samples `f` at every node; `f` receives the node coordinates.
    pub fn from_fn(grid: Arc<TensorGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let shape = grid.shape();
        let values = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            let mut x = [0.0; 3];
            for k in 0..grid.ndim() {
                x[k] = grid.axis(k).nodes()[idx[k]];
            }
            f(&x[..grid.ndim()])
        });
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut ArrayD<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> ArrayD<f64> {
        self.values
    }

    pub fn with_values(&self, values: ArrayD<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn max_norm(&self) -> Result<f64> {
        max_norm(self.values.iter().copied())
    }

    /// `max |u - v|` over all nodes.
    pub fn max_diff(&self, other: &Field) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(MoltError::InvalidField("shape mismatch in max_diff".into()));
        }
        max_norm(
            self.values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a - b),
        )
    }

    /// Largest mismatch between opposite faces, which must vanish for
    /// periodic data that stores both endpoints.
    pub fn periodic_mismatch(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.values.ndim() {
            let n = self.values.len_of(ndarray::Axis(k)) - 1;
            let lo = self.values.index_axis(ndarray::Axis(k), 0);
            let hi = self.values.index_axis(ndarray::Axis(k), n);
            for (a, b) in lo.iter().zip(hi.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    /// Writes one CSV row per node: `x[,y[,z]],value` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names = ["x", "y", "z"];
        let header: Vec<&str> = names[..self.grid.ndim()].to_vec();
        writeln!(w, "{},value", header.join(","))?;
        for (idx, v) in self.values.indexed_iter() {
            for k in 0..self.grid.ndim() {
                write!(w, "{},", self.grid.axis(k).nodes()[idx[k]])?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// `max_j |f_j|`; rejects non-finite entries.
pub fn max_norm(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let mut m: f64 = 0.0;
    for v in values {
        if !v.is_finite() {
            return Err(MoltError::InvalidField(format!("non-finite entry {v}")));
        }
        m = m.max(v.abs());
    }
    Ok(m)
}

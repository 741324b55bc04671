use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node-centred grid on `[a, b]` with `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("grid needs a < b, got [{a}, {b}]")));
        }
        if n_cells < 4 {
            return Err(Error::InvalidArgument(format!("grid needs n_cells >= 4, got {n_cells}")));
        }
        Ok(Self { a, b, n_cells })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_cells as f64
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.b
        } else {
            self.a + self.h() * i as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i` (`h/2` at the ends).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5 * self.h()
        } else {
            self.h()
        }
    }
}

/// Grid function with a time stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect(), 0.0)
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_nodes()],
            time: 0.0,
        }
    }

    /// Face difference quotients `(u_{i+1} − u_i)/h`, one per cell.
    pub fn face_gradients(&self) -> Vec<f64> {
        let h = self.grid.h();
        self.values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
    }

    pub fn max_abs_gradient(&self) -> f64 {
        self.face_gradients().iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Discrete `‖u_x‖²_{L²}` from face gradients.
    pub fn gradient_l2_sq(&self) -> f64 {
        let h = self.grid.h();
        self.face_gradients().iter().map(|g| g * g * h).sum()
    }

    /// Trapezoid `L¹` distance between two fields on the same grid.
    pub fn l1_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (u, v))| self.grid.weight(i) * (u - v).abs())
            .sum()
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (u, v)| m.max((u - v).abs()))
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::initial::InitialData;

/// Largest 2-D grid accepted, in nodes per axis.
pub const MAX_2D_AXIS: usize = 512;

/// Nodal values on a uniform grid `x_i = origin + i·dx` (1-D or 2-D,
/// row-major with x fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub dim: usize,
    pub dx: f64,
    pub origin: [f64; 2],
    /// Nodes per axis; `shape[1] == 1` in 1-D.
    pub shape: [usize; 2],
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(dim: usize, dx: f64, origin: [f64; 2], shape: [usize; 2], values: Vec<f64>) -> Result<Self> {
        let f = Field {
            dim,
            dx,
            origin,
            shape,
            values,
            time: 0.0,
        };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidConfig(format!("field dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid spacing must be positive, got {}", self.dx)));
        }
        if self.shape[0] < 5 || (self.dim == 2 && self.shape[1] < 5) {
            return Err(Error::InvalidConfig("a field needs at least 4 cells per axis".into()));
        }
        if self.dim == 1 && self.shape[1] != 1 {
            return Err(Error::InvalidConfig("1-D fields have shape [n, 1]".into()));
        }
        if self.dim == 2 && (self.shape[0] > MAX_2D_AXIS + 1 || self.shape[1] > MAX_2D_AXIS + 1) {
            return Err(Error::InvalidConfig(format!(
                "2-D fields are limited to {MAX_2D_AXIS}² cells, got {:?}",
                self.shape
            )));
        }
        if self.values.len() != self.shape[0] * self.shape[1] {
            return Err(Error::InvalidConfig("value count does not match the shape".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("field value {v} is not finite")));
        }
        Ok(())
    }

    /// Samples `u0` on `[lo, hi]` with nodes `lo + i·dx`; `hi` is rounded to the grid.
    pub fn sample_1d(u0: &InitialData, lo: f64, hi: f64, dx: f64) -> Result<Self> {
        let n = ((hi - lo) / dx).round() as usize + 1;
        let values = (0..n).map(|i| u0.eval1(lo + i as f64 * dx)).collect();
        Field::new(1, dx, [lo, 0.0], [n, 1], values)
    }

    pub fn sample_2d(u0: &InitialData, lo: [f64; 2], hi: [f64; 2], dx: f64) -> Result<Self> {
        let nx = ((hi[0] - lo[0]) / dx).round() as usize + 1;
        let ny = ((hi[1] - lo[1]) / dx).round() as usize + 1;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(u0.eval(&[lo[0] + i as f64 * dx, lo[1] + j as f64 * dx]));
            }
        }
        Field::new(2, dx, lo, [nx, ny], values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.dx
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.shape[0] + i]
    }

    /// Coordinates of node `k` in storage order.
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let i = k % self.shape[0];
        let j = k / self.shape[0];
        [self.x(i), self.y(j)]
    }

    /// Upper end of the grid along each axis.
    pub fn hi(&self) -> [f64; 2] {
        [self.x(self.shape[0] - 1), self.y(self.shape[1] - 1)]
    }

    /// Piecewise-linear interpolation along x (1-D fields).
    pub fn interp1(&self, x: f64) -> f64 {
        let n = self.shape[0];
        let s = ((x - self.origin[0]) / self.dx).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Shifts values by one node along x with periodic wrap.
    pub fn roll_x(&self, by: isize) -> Field {
        let nx = self.shape[0] as isize;
        let mut values = vec![0.0; self.values.len()];
        for j in 0..self.shape[1] {
            for i in 0..self.shape[0] {
                let src = (i as isize - by).rem_euclid(nx) as usize;
                values[j * self.shape[0] + i] = self.values[j * self.shape[0] + src];
            }
        }
        Field { values, ..self.clone() }
    }
}

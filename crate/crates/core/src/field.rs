//! Square sampling grids and the real/complex fields stored on them.
//!
//! Grids are centered: index `m` along an axis sits at `(m - n/2) * pitch`
//! (integer division), so odd grids are symmetric about zero and even grids
//! carry one extra sample on the negative side.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A square, centered sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub pitch: f64,
}

impl Grid {
    pub fn new(points: usize, pitch: f64) -> Self {
        Self { points, pitch }
    }

    /// Grid covering a window of side `side` with `points` samples per side.
    pub fn from_window(side: f64, points: usize) -> Self {
        Self { points, pitch: side / points as f64 }
    }

    pub fn side(&self) -> f64 {
        self.points as f64 * self.pitch
    }

    pub fn center_index(&self) -> usize {
        self.points / 2
    }

    /// Coordinate of index `m` along one axis.
    pub fn coord(&self, m: usize) -> f64 {
        (m as f64 - self.center_index() as f64) * self.pitch
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|m| self.coord(m)).collect()
    }

    /// Fractional index of coordinate `x` along one axis.
    pub fn fractional_index(&self, x: f64) -> f64 {
        x / self.pitch + self.center_index() as f64
    }

    /// Index of the sample nearest to coordinate `x`, if inside the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let m = self.fractional_index(x).round();
        (m >= 0.0 && (m as usize) < self.points).then_some(m as usize)
    }

    /// Spatial frequency (cycles per unit length) of centered DFT bin `q`.
    pub fn frequency(&self, q: usize) -> f64 {
        (q as f64 - self.center_index() as f64) / self.side()
    }
}

/// Which physical plane a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    Slm,
    Screen,
    Sample,
    Camera,
    Image,
}

/// Real samples on a centered square grid (random-field storage).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub values: Array2<f64>,
    pub grid: Grid,
}

impl RealField {
    pub fn new(values: Array2<f64>, pitch: f64) -> Result<Self> {
        let (a, b) = values.dim();
        if a != b {
            return Err(Error::GridMismatch(format!("non-square grid {a}x{b}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite field sample".into()));
        }
        Ok(Self { grid: Grid::new(a, pitch), values })
    }

    pub fn mean(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// Bilinear interpolation at physical coordinates; periodic wrap at the edges.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let n = self.grid.points as isize;
        let fx = self.grid.fractional_index(x[0]);
        let fy = self.grid.fractional_index(x[1]);
        let (i0, j0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - i0, fy - j0);
        let wrap = |i: isize| i.rem_euclid(n) as usize;
        let (i0, j0) = (i0 as isize, j0 as isize);
        let v = |i: isize, j: isize| self.values[[wrap(i), wrap(j)]];
        (1.0 - tx) * (1.0 - ty) * v(i0, j0)
            + tx * (1.0 - ty) * v(i0 + 1, j0)
            + (1.0 - tx) * ty * v(i0, j0 + 1)
            + tx * ty * v(i0 + 1, j0 + 1)
    }
}

/// Complex samples on a centered square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Array2<Complex64>,
    pub grid: Grid,
    pub plane: Plane,
}

impl Field {
    pub fn new(values: Array2<Complex64>, pitch: f64, plane: Plane) -> Result<Self> {
        let (a, b) = values.dim();
        if a != b {
            return Err(Error::GridMismatch(format!("non-square grid {a}x{b}")));
        }
        Ok(Self { grid: Grid::new(a, pitch), values, plane })
    }

    /// Riemann-sum energy `sum |f|^2 * pitch^2`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.pitch * self.grid.pitch
    }

    /// Value at the grid sample nearest to `x`.
    pub fn nearest(&self, x: [f64; 2]) -> Option<Complex64> {
        let i = self.grid.nearest_index(x[0])?;
        let j = self.grid.nearest_index(x[1])?;
        Some(self.values[[i, j]])
    }
}

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Uniform grid `x_j = center + (j − n/2)·dx`, `dx = length / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n: usize,
    length: f64,
    center: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64, center: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(invalid(format!("grid size must be a power of two >= 16, got {n}")));
        }
        if !(length > 0.0 && length.is_finite()) || !center.is_finite() {
            return Err(invalid(format!("grid length must be positive and finite, got {length}")));
        }
        Ok(Self { n, length, center })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn start(&self) -> f64 {
        self.point(0)
    }

    pub fn point(&self, j: usize) -> f64 {
        self.center + (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Distance from the center to the farthest grid point on the short side.
    pub fn half_width(&self) -> f64 {
        self.length / 2.0 - self.spacing()
    }

    /// The grid of the conjugate variable under the discrete Fourier
    /// transform: same `n`, spacing `2π / length`.
    pub fn conjugate(&self, center: f64) -> Grid1D {
        Grid1D { n: self.n, length: 2.0 * PI * self.n as f64 / self.length, center }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rep {
    /// `X` on the system axis, `Φ_A` on a probe axis.
    PositionLike,
    /// `K` on the system axis, `J_A` on a probe axis.
    Conjugate,
}

/// A discretized canonical pair: the position-like grid and its conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub position: Grid1D,
    pub conjugate: Grid1D,
}

impl Axis {
    pub fn new(position: Grid1D, conjugate_center: f64) -> Self {
        Self { position, conjugate: position.conjugate(conjugate_center) }
    }

    /// Builds the axis from its conjugate grid (e.g. a `J_K` grid).
    pub fn from_conjugate(conjugate: Grid1D, position_center: f64) -> Self {
        Self { position: conjugate.conjugate(position_center), conjugate }
    }

    pub fn n(&self) -> usize {
        self.position.n()
    }

    pub fn grid(&self, rep: Rep) -> &Grid1D {
        match rep {
            Rep::PositionLike => &self.position,
            Rep::Conjugate => &self.conjugate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid1D::new(8, 1.0, 0.0).is_err());
        assert!(Grid1D::new(48, 1.0, 0.0).is_err());
        assert!(Grid1D::new(64, 0.0, 0.0).is_err());
        assert!(Grid1D::new(64, 1.0, 0.0).is_ok());
    }

    #[test]
    fn conjugate_spacing_product() {
        let g = Grid1D::new(128, 10.0, 1.5).unwrap();
        let c = g.conjugate(0.0);
        assert!((g.spacing() * c.spacing() - 2.0 * PI / 128.0).abs() < 1e-15);
        assert!((c.conjugate(1.5).length() - g.length()).abs() < 1e-12);
        assert_eq!(g.point(64), 1.5);
    }
}

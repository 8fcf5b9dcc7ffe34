//! Uniform grids on [0, 1], complex-valued profiles and the composite trapezoid rule.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of [0, 1] into `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialGrid {
    n_cells: usize,
}

impl SpatialGrid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::Grid("n_cells must be positive".into()));
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_cells).map(|i| self.node(i))
    }

    pub(crate) fn ensure_same(&self, other: &SpatialGrid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Dimension(format!(
                "{what}: grid with {} cells vs {} cells",
                self.n_cells, other.n_cells
            )));
        }
        Ok(())
    }
}

/// A complex function sampled at the nodes of a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexProfile {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl ComplexProfile {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "profile has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn constant(grid: SpatialGrid, value: Complex64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self::constant(grid, Complex64::new(0.0, 0.0))
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn first(&self) -> Complex64 {
        self.values[0]
    }

    pub fn last(&self) -> Complex64 {
        self.values[self.grid.n_cells]
    }

    /// Linear interpolation between the two nodes bracketing `x` (clamped to [0, 1]).
    pub fn interpolate(&self, x: f64) -> Complex64 {
        let n = self.grid.n_cells;
        let s = (x.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// L² norm with the trapezoid weights used by [`l2_inner`].
    pub fn norm(&self) -> f64 {
        let dx = self.grid.spacing();
        let n = self.grid.n_cells;
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * v.norm_sqr();
        }
        (acc * dx).sqrt()
    }

    pub fn sup_distance(&self, other: &ComplexProfile) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "sup_distance")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.map(|v| v * factor)
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &ComplexProfile, factor: Complex64) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "add_scaled")?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    pub fn integral(&self) -> Complex64 {
        trapezoid(&self.values, self.grid.spacing())
    }
}

/// Composite trapezoid approximation of ∫₀¹ a(x) conj(b(x)) dx.
pub fn l2_inner(a: &ComplexProfile, b: &ComplexProfile) -> Result<Complex64> {
    a.grid.ensure_same(&b.grid, "l2_inner")?;
    let n = a.grid.n_cells;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += x * y.conj() * w;
    }
    Ok(acc * a.grid.spacing())
}

/// Composite trapezoid rule over equally spaced samples; zero for fewer than two samples.
pub fn trapezoid(values: &[Complex64], spacing: f64) -> Complex64 {
    match values.len() {
        0 | 1 => Complex64::new(0.0, 0.0),
        n => {
            let inner: Complex64 = values[1..n - 1].iter().sum();
            (inner + (values[0] + values[n - 1]) * 0.5) * spacing
        }
    }
}

/// Trapezoid weights (without the spacing factor) for `n_intervals` intervals.
pub fn trapezoid_weights(n_intervals: usize) -> Vec<f64> {
    if n_intervals == 0 {
        return vec![0.0];
    }
    let mut w = vec![1.0; n_intervals + 1];
    w[0] = 0.5;
    w[n_intervals] = 0.5;
    w
}

/// Trapezoid weights with third-order endpoint corrections (Gregory), without the spacing factor.
///
/// Reduces to the trapezoid rule for one interval and to Simpson's rule for two.
pub fn corrected_weights(n_intervals: usize) -> Vec<f64> {
    let mut w = trapezoid_weights(n_intervals);
    if n_intervals >= 2 {
        let n = n_intervals;
        for (k, c) in [3.0, -4.0, 1.0].into_iter().enumerate() {
            w[k] -= c / 24.0;
            w[n - k] -= c / 24.0;
        }
    }
    w
}

/// Running trapezoid integral: `out[i] ≈ ∫₀^{x_i} f`.
pub fn cumulative_trapezoid(values: &[Complex64], spacing: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += (values[i - 1] + v) * (0.5 * spacing);
        }
        out.push(acc);
    }
    out
}

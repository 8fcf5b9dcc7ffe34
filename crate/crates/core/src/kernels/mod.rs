//! Backstepping kernels `k`, `K` (lower triangle) and `p`, `P` (upper triangle).

mod goursat;
mod transform;

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::grid::{ComplexProfile, SpatialGrid};
use crate::plant::PlantSpec;

pub use transform::{
    apply_forward, apply_inverse, apply_observer_forward, apply_observer_inverse,
    solve_reciprocal_kernel, solve_reciprocal_kernel_with,
};

const MIN_CELLS: usize = 8;

/// Which triangle of the unit square a kernel lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `0 ≤ ξ ≤ x ≤ 1`
    Lower,
    /// `0 ≤ x ≤ ξ ≤ 1`
    Upper,
}

/// Complex values at node pairs `(x_i, ξ_j)` of one triangle; row-major in `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid {
    grid: SpatialGrid,
    orientation: Orientation,
    values: Vec<Complex64>,
}

impl KernelGrid {
    pub fn zeros(grid: SpatialGrid, orientation: Orientation) -> Self {
        let n = grid.len();
        Self {
            grid,
            orientation,
            values: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    /// Populate the declared triangle from `f(i, j)`.
    pub fn from_index_fn(
        grid: SpatialGrid,
        orientation: Orientation,
        f: impl Fn(usize, usize) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(grid, orientation);
        let n = grid.n_cells();
        for i in 0..=n {
            for j in 0..=n {
                if out.contains(i, j) {
                    out.set(i, j, f(i, j));
                }
            }
        }
        out
    }

    pub fn from_fn(grid: SpatialGrid, orientation: Orientation, f: impl Fn(f64, f64) -> Complex64) -> Self {
        Self::from_index_fn(grid, orientation, |i, j| f(grid.node(i), grid.node(j)))
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let n = self.grid.n_cells();
        i <= n
            && j <= n
            && match self.orientation {
                Orientation::Lower => j <= i,
                Orientation::Upper => j >= i,
            }
    }

    /// Value at `(x_i, ξ_j)`, `None` outside the triangle.
    pub fn get(&self, i: usize, j: usize) -> Option<Complex64> {
        self.contains(i, j).then(|| self.values[i * self.grid.len() + j])
    }

    /// Value at `(x_i, ξ_j)`; panics outside the triangle.
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(self.contains(i, j), "({i}, {j}) outside {:?} triangle", self.orientation);
        self.values[i * self.grid.len() + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(self.contains(i, j));
        let n = self.grid.len();
        self.values[i * n + j] = v;
    }

    pub fn diagonal(&self) -> ComplexProfile {
        ComplexProfile::new(self.grid, (0..self.grid.len()).map(|i| self.at(i, i)).collect())
            .expect("diagonal length")
    }

    /// `T(x, ξ) = R(ξ, x)`; swaps the orientation.
    pub fn transpose(&self) -> Self {
        let orientation = match self.orientation {
            Orientation::Lower => Orientation::Upper,
            Orientation::Upper => Orientation::Lower,
        };
        Self::from_index_fn(self.grid, orientation, |i, j| self.at(j, i))
    }

    /// `T(x, ξ) = R(1 - x, 1 - ξ)`; swaps the orientation.
    pub fn reflect(&self) -> Self {
        let n = self.grid.n_cells();
        let orientation = match self.orientation {
            Orientation::Lower => Orientation::Upper,
            Orientation::Upper => Orientation::Lower,
        };
        Self::from_index_fn(self.grid, orientation, |i, j| self.at(n - i, n - j))
    }

    /// Sup of `|self - other|` over the shared triangle.
    pub fn sup_distance(&self, other: &KernelGrid) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "kernel distance")?;
        if self.orientation != other.orientation {
            return Err(Error::Dimension("kernels on different triangles".into()));
        }
        Ok(self.populated().map(|(i, j)| (self.at(i, j) - other.at(i, j)).norm()).fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.populated().map(|(i, j)| self.at(i, j).norm()).fold(0.0, f64::max)
    }

    /// Populated index pairs in row-major order.
    pub fn populated(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.grid.n_cells();
        (0..=n).flat_map(move |i| (0..=n).map(move |j| (i, j))).filter(|&(i, j)| self.contains(i, j))
    }

    /// CSV dump with header `x,xi,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,xi,re,im\n");
        for (i, j) in self.populated() {
            let v = self.at(i, j);
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt17(self.grid.node(i)),
                fmt17(self.grid.node(j)),
                fmt17(v.re),
                fmt17(v.im)
            );
        }
        s
    }
}

/// Successive-approximation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub update: f64,
}

fn check_grid(plant: &PlantSpec, grid: SpatialGrid) -> Result<()> {
    plant.grid().ensure_same(&grid, "kernel solve")?;
    if grid.n_cells() < MIN_CELLS {
        return Err(Error::Grid(format!("kernel solves need n_cells >= {MIN_CELLS}")));
    }
    Ok(())
}

fn check_rate(c: f64) -> Result<()> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("damping rate must be nonnegative (got {c})")));
    }
    Ok(())
}

/// Control kernel `k` on the lower triangle.
pub fn solve_control_kernel(plant: &PlantSpec, c_s: f64, grid: SpatialGrid) -> Result<KernelGrid> {
    Ok(solve_control_kernel_with(plant, c_s, grid, &SolverOptions::default())?.0)
}

pub fn solve_control_kernel_with(
    plant: &PlantSpec,
    c_s: f64,
    grid: SpatialGrid,
    opts: &SolverOptions,
) -> Result<(KernelGrid, SolveStats)> {
    check_grid(plant, grid)?;
    check_rate(c_s)?;
    goursat::solve(plant, c_s, opts)
}

/// Observer kernel `p` on the upper triangle.
///
/// `p(x, ξ)` is the transpose of the control-type kernel built with `c_o`.
pub fn solve_observer_kernel(plant: &PlantSpec, c_o: f64, grid: SpatialGrid) -> Result<KernelGrid> {
    Ok(solve_observer_kernel_with(plant, c_o, grid, &SolverOptions::default())?.0)
}

pub fn solve_observer_kernel_with(
    plant: &PlantSpec,
    c_o: f64,
    grid: SpatialGrid,
    opts: &SolverOptions,
) -> Result<(KernelGrid, SolveStats)> {
    check_grid(plant, grid)?;
    check_rate(c_o)?;
    let (k, stats) = goursat::solve(plant, c_o, opts)?;
    Ok((k.transpose(), stats))
}

/// `φ(x_i) = -i/2 ∫₀^{x_i} (h + c) - iq` at the grid nodes.
pub fn diagonal_data(plant: &PlantSpec, c: f64) -> ComplexProfile {
    let half = goursat::diagonal_data(plant, c);
    let grid = plant.grid();
    ComplexProfile::new(grid, (0..grid.len()).map(|i| half[2 * i]).collect()).expect("length")
}

/// `(k(1,1), k_x(1, ·))` from one-sided second-order differences.
///
/// Applied to the transpose of an upper kernel `p` this gives `(p(1,1), p_ξ(·, 1))`.
pub fn kernel_feedback_trace(k: &KernelGrid) -> Result<(Complex64, ComplexProfile)> {
    if k.orientation() != Orientation::Lower {
        return Err(Error::Dimension("feedback trace expects a lower kernel".into()));
    }
    let grid = k.grid();
    let n = grid.n_cells();
    if n < MIN_CELLS {
        return Err(Error::Grid(format!("feedback trace needs n_cells >= {MIN_CELLS}")));
    }
    let d = grid.spacing();
    let mut kx = vec![Complex64::new(0.0, 0.0); n + 1];
    for (j, slot) in kx.iter_mut().enumerate().take(n - 1) {
        *slot = (3.0 * k.at(n, j) - 4.0 * k.at(n - 1, j) + k.at(n - 2, j)) / (2.0 * d);
    }
    // At the corner use k_x = d/dx k(x,x) - k_ξ.
    let diag_slope = (3.0 * k.at(n, n) - 4.0 * k.at(n - 1, n - 1) + k.at(n - 2, n - 2)) / (2.0 * d);
    let k_xi = (3.0 * k.at(n, n) - 4.0 * k.at(n, n - 1) + k.at(n, n - 2)) / (2.0 * d);
    kx[n] = diag_slope - k_xi;
    kx[n - 1] = (kx[n] + kx[n - 2]) * 0.5;
    Ok((k.at(n, n), ComplexProfile::new(grid, kx)?))
}

/// Kernel equation a residual refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSide {
    Control,
    Observer,
}

/// Max over interior nodes of the centred-difference PDE residual.
pub fn kernel_residual(kernel: &KernelGrid, plant: &PlantSpec, c: f64, side: KernelSide) -> Result<f64> {
    let lower = match (side, kernel.orientation()) {
        (KernelSide::Control, Orientation::Lower) => kernel.clone(),
        (KernelSide::Observer, Orientation::Upper) => kernel.transpose(),
        _ => return Err(Error::Dimension("kernel orientation does not match side".into())),
    };
    plant.grid().ensure_same(&kernel.grid(), "kernel residual")?;
    let grid = kernel.grid();
    let n = grid.n_cells();
    let d2 = grid.spacing() * grid.spacing();
    let h = plant.h().values();
    let mut worst: f64 = 0.0;
    for i in 2..n {
        for j in 1..i {
            let kxx = lower.at(i + 1, j) - 2.0 * lower.at(i, j) + lower.at(i - 1, j);
            let kyy = lower.at(i, j + 1) - 2.0 * lower.at(i, j) + lower.at(i, j - 1);
            let r = (kxx - kyy) / d2 - Complex64::new(0.0, 1.0) * (h[j] + c) * lower.at(i, j);
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}

/// Max of `|k_ξ(x,0) + iq k(x,0)|` (control) by a forward second-order stencil.
pub fn kernel_edge_residual(kernel: &KernelGrid, plant: &PlantSpec, side: KernelSide) -> Result<f64> {
    let lower = match (side, kernel.orientation()) {
        (KernelSide::Control, Orientation::Lower) => kernel.clone(),
        (KernelSide::Observer, Orientation::Upper) => kernel.transpose(),
        _ => return Err(Error::Dimension("kernel orientation does not match side".into())),
    };
    let grid = kernel.grid();
    let d = grid.spacing();
    let iq = Complex64::new(0.0, plant.q());
    Ok((2..=grid.n_cells())
        .map(|i| {
            let kxi = (-3.0 * lower.at(i, 0) + 4.0 * lower.at(i, 1) - lower.at(i, 2)) / (2.0 * d);
            (kxi + iq * lower.at(i, 0)).norm()
        })
        .fold(0.0, f64::max))
}

/// The four kernels used by the controller and the observer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSet {
    pub k: KernelGrid,
    #[serde(rename = "K")]
    pub k_inv: KernelGrid,
    pub p: KernelGrid,
    #[serde(rename = "P")]
    pub p_inv: KernelGrid,
    pub c_s: f64,
    pub c_o: f64,
    pub control_stats: SolveStats,
    pub observer_stats: SolveStats,
}

impl KernelSet {
    pub fn solve(plant: &PlantSpec, c_s: f64, c_o: f64) -> Result<Self> {
        Self::solve_with(plant, c_s, c_o, &SolverOptions::default())
    }

    pub fn solve_with(plant: &PlantSpec, c_s: f64, c_o: f64, opts: &SolverOptions) -> Result<Self> {
        let grid = plant.grid();
        let (k, control_stats) = solve_control_kernel_with(plant, c_s, grid, opts)?;
        let (p, observer_stats) = solve_observer_kernel_with(plant, c_o, grid, opts)?;
        let k_inv = solve_reciprocal_kernel_with(&k, opts)?;
        let p_inv = solve_reciprocal_kernel_with(&p, opts)?;
        Ok(Self {
            k,
            k_inv,
            p,
            p_inv,
            c_s,
            c_o,
            control_stats,
            observer_stats,
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.k.grid()
    }
}

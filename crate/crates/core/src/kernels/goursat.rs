//! Goursat problem for the backstepping kernel in characteristic coordinates.
//!
//! With `α = x + ξ`, `β = x - ξ` and `G(α, β) = k(x, ξ)` the problem
//! `k_xx - k_ξξ = a(ξ) k`, `k_ξ(x, 0) + iq k(x, 0) = 0`, `k(x, x) = φ(x)` becomes
//!
//! ```text
//! G(α, β) = G(β, β) + φ(α/2) - φ(β/2) + ¼ ∫_β^α J(τ, β) dτ,
//! G(β, β) = 2φ(β/2) - φ(0) + ∫_0^β [iq G(τ, τ) + ½ J(τ, τ)] dτ,
//! J(τ, β) = ∫_0^β a((τ - s)/2) G(τ, s) ds,
//! ```
//!
//! solved by successive approximation on a grid of step `Δ` in both `α` and `β`.
//! Coarse nodes `(x_i, ξ_j)` sit at `(α, β) = ((i + j)Δ, (i - j)Δ)`; the other
//! parity class lives on the half grid, where `h` is linearly interpolated.

use num_complex::Complex64;

use super::{KernelGrid, Orientation, SolveStats, SolverOptions};
use crate::error::{Error, Result};
use crate::plant::PlantSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Values of `h` at the half grid `m Δ / 2`, `m = 0..=2N`.
fn half_grid(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len() - 1;
    let mut out = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        out.push(values[i]);
        out.push((values[i] + values[i + 1]) * 0.5);
    }
    out.push(values[n]);
    out
}

/// `φ(x) = -i/2 ∫₀ˣ (h + c) - iq` on the half grid.
pub(crate) fn diagonal_data(plant: &PlantSpec, c: f64) -> Vec<Complex64> {
    let h = half_grid(plant.h().values());
    let step = plant.grid().spacing() * 0.5;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(h.len());
    for m in 0..h.len() {
        if m > 0 {
            acc += (h[m - 1] + h[m] + 2.0 * c) * (0.5 * step);
        }
        out.push(-0.5 * I * acc - I * plant.q());
    }
    out
}

/// Lower-triangle kernel of `k_xx - k_ξξ = i(h(ξ) + c) k` with the Robin edge and diagonal data.
pub(crate) fn solve(plant: &PlantSpec, c: f64, opts: &SolverOptions) -> Result<(KernelGrid, SolveStats)> {
    let grid = plant.grid();
    let n = grid.n_cells();
    let d = grid.spacing();
    let q = plant.q();
    let phi = diagonal_data(plant, c);
    let a: Vec<Complex64> = half_grid(plant.h().values())
        .into_iter()
        .map(|h| I * (h + c))
        .collect();

    // Row b holds alpha indices b..=2n-b.
    let row_len = |b: usize| 2 * n - 2 * b + 1;
    let mut g: Vec<Vec<Complex64>> = (0..=n).map(|b| vec![Complex64::new(0.0, 0.0); row_len(b)]).collect();
    let mut j: Vec<Vec<Complex64>> = g.clone();
    let mut update = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;

        // J(alpha, b) by cumulative trapezoid in s for each alpha.
        for alpha in 0..=2 * n {
            let bmax = alpha.min(2 * n - alpha);
            j[0][alpha] = Complex64::new(0.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for b in 1..=bmax {
                let prev = a[alpha - (b - 1)] * g[b - 1][alpha - (b - 1)];
                let cur = a[alpha - b] * g[b][alpha - b];
                acc += (prev + cur) * (0.5 * d);
                j[b][alpha - b] = acc;
            }
        }

        // Edge values G(b, b).
        let mut edge = vec![Complex64::new(0.0, 0.0); n + 1];
        let integrand = |b: usize| I * q * g[b][0] + 0.5 * j[b][0];
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..=n {
            if b > 0 {
                acc += (integrand(b - 1) + integrand(b)) * (0.5 * d);
            }
            edge[b] = 2.0 * phi[b] - phi[0] + acc;
        }

        update = 0.0;
        for b in 0..=n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..row_len(b) {
                if k > 0 {
                    acc += (j[b][k - 1] + j[b][k]) * (0.5 * d);
                }
                let new = edge[b] + phi[b + k] - phi[b] + 0.25 * acc;
                update = f64::max(update, (new - g[b][k]).norm());
                g[b][k] = new;
            }
        }
        if update < opts.tolerance {
            break;
        }
    }
    if !(update < opts.tolerance) {
        return Err(Error::KernelSolve { iterations, update });
    }

    let kernel = KernelGrid::from_index_fn(grid, Orientation::Lower, |i, jx| {
        let b = i - jx;
        g[b][i + jx - b]
    });
    Ok((kernel, SolveStats { iterations, update }))
}

//! Volterra transformations and reciprocal kernels.

use num_complex::Complex64;

use super::{KernelGrid, Orientation, SolverOptions};
use crate::error::{Error, Result};
use crate::grid::{corrected_weights, ComplexProfile};

fn require(kernel: &KernelGrid, orientation: Orientation, op: &str) -> Result<()> {
    if kernel.orientation() != orientation {
        return Err(Error::Dimension(format!(
            "{op} expects a {orientation:?} kernel, got {:?}",
            kernel.orientation()
        )));
    }
    Ok(())
}

/// Quadrature weights (without spacing) for every row length `0..=n`.
fn weight_table(n: usize) -> Vec<Vec<f64>> {
    (0..=n).map(|m| if m == 0 { vec![0.0] } else { corrected_weights(m) }).collect()
}

/// `z(x) + sign ∫₀ˣ R(x,ξ) z(ξ) dξ` for a lower kernel.
fn lower_volterra(kernel: &KernelGrid, z: &ComplexProfile, sign: f64) -> Result<ComplexProfile> {
    kernel.grid().ensure_same(&z.grid(), "kernel transform")?;
    let n = z.grid().n_cells();
    let d = z.grid().spacing();
    let zv = z.values();
    let weights = weight_table(n);
    let out = (0..=n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            if i == 1 && n >= 4 {
                // Single interval: three-point rule, kernel continued past the diagonal along column 2.
                let ext = 3.0 * kernel.at(2, 2) - 3.0 * kernel.at(3, 2) + kernel.at(4, 2);
                acc = (5.0 * kernel.at(1, 0) * zv[0] + 8.0 * kernel.at(1, 1) * zv[1] - ext * zv[2]) / 12.0;
            } else {
                for (jx, (zj, w)) in zv.iter().zip(&weights[i]).enumerate() {
                    acc += kernel.at(i, jx) * zj * *w;
                }
            }
            zv[i] + acc * (sign * d)
        })
        .collect();
    ComplexProfile::new(z.grid(), out)
}

fn reversed(z: &ComplexProfile) -> ComplexProfile {
    let mut v = z.values().to_vec();
    v.reverse();
    ComplexProfile::new(z.grid(), v).expect("same length")
}

/// `v(x) = z(x) - ∫₀ˣ k(x,ξ) z(ξ) dξ`.
pub fn apply_forward(kernel: &KernelGrid, z: &ComplexProfile) -> Result<ComplexProfile> {
    require(kernel, Orientation::Lower, "apply_forward")?;
    lower_volterra(kernel, z, -1.0)
}

/// `z(x) = v(x) + ∫₀ˣ K(x,ξ) v(ξ) dξ`.
pub fn apply_inverse(kernel: &KernelGrid, v: &ComplexProfile) -> Result<ComplexProfile> {
    require(kernel, Orientation::Lower, "apply_inverse")?;
    lower_volterra(kernel, v, 1.0)
}

/// `z̃(x) = e(x) - ∫ₓ¹ p(x,ξ) e(ξ) dξ`.
pub fn apply_observer_forward(kernel: &KernelGrid, e: &ComplexProfile) -> Result<ComplexProfile> {
    require(kernel, Orientation::Upper, "apply_observer_forward")?;
    Ok(reversed(&lower_volterra(&kernel.reflect(), &reversed(e), -1.0)?))
}

/// `e(x) = z̃(x) + ∫ₓ¹ P(x,ξ) z̃(ξ) dξ`.
pub fn apply_observer_inverse(kernel: &KernelGrid, z: &ComplexProfile) -> Result<ComplexProfile> {
    require(kernel, Orientation::Upper, "apply_observer_inverse")?;
    Ok(reversed(&lower_volterra(&kernel.reflect(), &reversed(z), 1.0)?))
}

/// Reciprocal kernel: `R(x,ξ) = src(x,ξ) + ∫_ξ^x R(x,s) src(s,ξ) ds` (lower), mirrored for upper.
pub fn solve_reciprocal_kernel(src: &KernelGrid) -> Result<KernelGrid> {
    solve_reciprocal_kernel_with(src, &SolverOptions::default())
}

pub fn solve_reciprocal_kernel_with(src: &KernelGrid, opts: &SolverOptions) -> Result<KernelGrid> {
    match src.orientation() {
        Orientation::Lower => reciprocal_lower(src, opts),
        Orientation::Upper => Ok(reciprocal_lower(&src.reflect(), opts)?.reflect()),
    }
}

fn reciprocal_lower(src: &KernelGrid, opts: &SolverOptions) -> Result<KernelGrid> {
    let grid = src.grid();
    let n = grid.n_cells();
    let d = grid.spacing();
    let mut out = KernelGrid::zeros(grid, Orientation::Lower);
    let mut row = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut next = row.clone();
    let weights = weight_table(n);
    for i in 0..=n {
        for l in 0..=i {
            row[l] = src.at(i, l);
        }
        let mut update = f64::INFINITY;
        let mut it = 0;
        while it < opts.max_iterations {
            it += 1;
            update = 0.0;
            for l in 0..=i {
                let mut acc = Complex64::new(0.0, 0.0);
                for (s, w) in (l..=i).zip(&weights[i - l]) {
                    acc += row[s] * src.at(s, l) * *w;
                }
                next[l] = src.at(i, l) + acc * d;
                update = f64::max(update, (next[l] - row[l]).norm());
            }
            row[..=i].copy_from_slice(&next[..=i]);
            if update < opts.tolerance {
                break;
            }
        }
        if !(update < opts.tolerance) {
            return Err(Error::Reciprocity { row: i, update });
        }
        for l in 0..=i {
            out.set(i, l, row[l]);
        }
    }
    Ok(out)
}

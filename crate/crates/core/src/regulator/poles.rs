//! Observer pole placement by Ackermann's formula on the transposed pair.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Eigenvalues of a complex square matrix.
pub fn complex_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    m.clone()
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Numeric("eigenvalue computation failed".into()))
}

/// Gain `l` with `σ(M + l c) = desired`, for a complex row `c`.
pub fn place_poles_complex(
    c: &DVector<Complex64>,
    m: &DMatrix<Complex64>,
    desired: &[Complex64],
) -> Result<DVector<Complex64>> {
    let n = m.nrows();
    if m.ncols() != n || c.len() != n {
        return Err(Error::Dimension(format!(
            "pole placement: M is {}x{}, c has length {}",
            m.nrows(),
            m.ncols(),
            c.len()
        )));
    }
    if desired.len() != n {
        return Err(Error::PolePlacement(format!(
            "{} desired poles for a system of order {n}",
            desired.len()
        )));
    }
    if let Some(p) = desired.iter().find(|p| !(p.re < 0.0)) {
        return Err(Error::PolePlacement(format!("desired pole {p} is not in the open left half-plane")));
    }
    if n == 0 {
        return Ok(DVector::zeros(0));
    }

    // Controllability matrix of (Mᵀ, cᵀ).
    let mt = m.transpose();
    let mut ctrb = DMatrix::<Complex64>::zeros(n, n);
    let mut col = c.clone();
    for k in 0..n {
        ctrb.set_column(k, &col);
        col = &mt * col;
    }
    let sv = ctrb.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() <= 1e-10 * smax {
        return Err(Error::PolePlacement("pair (c, M) is not observable".into()));
    }

    // φ(Mᵀ) = Π (Mᵀ - p I).
    let eye = DMatrix::<Complex64>::identity(n, n);
    let mut phi = eye.clone();
    for p in desired {
        phi = &phi * (&mt - &eye * *p);
    }
    let mut e_n = DVector::<Complex64>::zeros(n);
    e_n[n - 1] = Complex64::new(1.0, 0.0);
    let inv = ctrb
        .try_inverse()
        .ok_or_else(|| Error::PolePlacement("pair (c, M) is not observable".into()))?;
    let row = e_n.transpose() * inv * phi;
    let l: DVector<Complex64> = -row.transpose();

    let closed = m + &l * c.transpose();
    let achieved = complex_eigenvalues(&closed)?;
    let scale = 1.0 + desired.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if max_matching_distance(&achieved, desired) > 1e-9 * scale {
        return Err(Error::PolePlacement(format!(
            "placed poles {achieved:?} deviate from the requested set"
        )));
    }
    Ok(l)
}

/// Real gain `l` with `σ(M + l c) = desired` (desired set closed under conjugation).
pub fn place_poles(c: &DVector<f64>, m: &DMatrix<f64>, desired: &[Complex64]) -> Result<DVector<f64>> {
    let l = place_poles_complex(&c.map(|v| Complex64::new(v, 0.0)), &to_complex(m), desired)?;
    let residue = l.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let scale = 1.0 + l.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
    if residue > 1e-9 * scale {
        return Err(Error::PolePlacement(format!(
            "desired set is not closed under conjugation (gain has imaginary part {residue:.3e})"
        )));
    }
    Ok(l.map(|v| v.re))
}

/// Greedy max-over-pairs distance between two spectra of equal length.
pub fn max_matching_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .min_by(|p, q| (p.1 - x).norm().total_cmp(&(q.1 - x).norm()));
        match best {
            Some((k, y)) => {
                used[k] = true;
                worst = worst.max((y - x).norm());
            }
            None => return f64::INFINITY,
        }
    }
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    worst
}

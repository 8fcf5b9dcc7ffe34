//! Crank–Nicolson for `X' = A X + f(t)` with `A` block diagonal plus a few rank-one terms.
//!
//! The block-diagonal part holds tridiagonal PDE blocks and one small dense block; the
//! rank-one terms `col rowᵀ` carry boundary feedback, output injection and the other couplings.
//! Each step is solved exactly with the Woodbury identity.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// Square tridiagonal matrix; `sub[0]` and `sup[n-1]` are unused.
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    pub sub: Vec<C>,
    pub diag: Vec<C>,
    pub sup: Vec<C>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[C], out: &mut [C]) {
        let n = self.len();
        for j in 0..n {
            let mut acc = self.diag[j] * x[j];
            if j > 0 {
                acc += self.sub[j] * x[j - 1];
            }
            if j + 1 < n {
                acc += self.sup[j] * x[j + 1];
            }
            out[j] = acc;
        }
    }

    /// `alpha I + beta self`.
    pub fn affine(&self, alpha: C, beta: C) -> Self {
        Self {
            sub: self.sub.iter().map(|v| beta * v).collect(),
            diag: self.diag.iter().map(|v| alpha + beta * v).collect(),
            sup: self.sup.iter().map(|v| beta * v).collect(),
        }
    }

    pub fn factor(&self) -> Result<Thomas> {
        let n = self.len();
        let mut sup_mod = vec![C::new(0.0, 0.0); n];
        let mut inv = vec![C::new(0.0, 0.0); n];
        let mut prev = C::new(0.0, 0.0);
        for j in 0..n {
            let d = if j == 0 { self.diag[0] } else { self.diag[j] - self.sub[j] * prev };
            if !(d.norm() > 1e-300) {
                return Err(Error::Numeric(format!("singular tridiagonal pivot at row {j}")));
            }
            inv[j] = 1.0 / d;
            prev = if j + 1 < n { self.sup[j] * inv[j] } else { C::new(0.0, 0.0) };
            sup_mod[j] = prev;
        }
        Ok(Thomas {
            sub: self.sub.clone(),
            inv,
            sup_mod,
        })
    }
}

/// Thomas factorization of a tridiagonal matrix.
#[derive(Debug, Clone)]
pub(crate) struct Thomas {
    sub: Vec<C>,
    inv: Vec<C>,
    sup_mod: Vec<C>,
}

impl Thomas {
    pub fn solve_in_place(&self, x: &mut [C]) {
        let n = self.inv.len();
        for j in 0..n {
            let carry = if j == 0 { C::new(0.0, 0.0) } else { self.sub[j] * x[j - 1] };
            x[j] = (x[j] - carry) * self.inv[j];
        }
        for j in (0..n.saturating_sub(1)).rev() {
            let next = x[j + 1];
            x[j] -= self.sup_mod[j] * next;
        }
    }
}

/// `A = diag(T_1, .., T_p, D) + Σ col rowᵀ` (plain transpose, no conjugation).
#[derive(Debug, Clone)]
pub(crate) struct LinearModel {
    pub pde: Vec<Tridiagonal>,
    pub dense: DMatrix<C>,
    pub rank_one: Vec<(DVector<C>, DVector<C>)>,
}

impl LinearModel {
    #[cfg(test)]
    pub fn dim(&self) -> usize {
        self.pde.iter().map(Tridiagonal::len).sum::<usize>() + self.dense.nrows()
    }

    fn block_apply(&self, x: &DVector<C>) -> DVector<C> {
        let mut out = DVector::zeros(x.len());
        let mut off = 0;
        for t in &self.pde {
            let n = t.len();
            t.apply(&x.as_slice()[off..off + n], &mut out.as_mut_slice()[off..off + n]);
            off += n;
        }
        let nd = self.dense.nrows();
        if nd > 0 {
            let y = &self.dense * x.rows(off, nd);
            out.rows_mut(off, nd).copy_from(&y);
        }
        out
    }

    pub fn apply(&self, x: &DVector<C>) -> DVector<C> {
        let mut out = self.block_apply(x);
        for (col, row) in &self.rank_one {
            let s = row.dot(x);
            out.axpy(s, col, C::new(1.0, 0.0));
        }
        out
    }
}

/// Precomputed Crank–Nicolson step for a fixed `dt`.
pub(crate) struct CrankNicolson {
    model: LinearModel,
    dt: f64,
    factors: Vec<Thomas>,
    dense_lu: Option<nalgebra::LU<C, nalgebra::Dyn, nalgebra::Dyn>>,
    /// `M₀⁻¹ (dt/2) col` per rank-one term.
    solved_cols: Vec<DVector<C>>,
    /// `(I - Vᵀ M₀⁻¹ U')⁻¹`.
    capacitance: DMatrix<C>,
}

impl CrankNicolson {
    pub fn new(model: LinearModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive (got {dt})")));
        }
        let half = C::new(0.5 * dt, 0.0);
        let one = C::new(1.0, 0.0);
        let factors = model
            .pde
            .iter()
            .map(|t| t.affine(one, -half).factor())
            .collect::<Result<Vec<_>>>()?;
        let nd = model.dense.nrows();
        let dense_lu = (nd > 0).then(|| (DMatrix::identity(nd, nd) - model.dense.map(|v| v * half)).lu());
        if let Some(lu) = &dense_lu {
            if !lu.is_invertible() {
                return Err(Error::Numeric("singular dense block in Crank–Nicolson".into()));
            }
        }
        let mut cn = Self {
            model,
            dt,
            factors,
            dense_lu,
            solved_cols: Vec::new(),
            capacitance: DMatrix::zeros(0, 0),
        };
        let solved: Vec<DVector<C>> = cn
            .model
            .rank_one
            .iter()
            .map(|(col, _)| cn.block_solve(col * half))
            .collect();
        let k = solved.len();
        let mut cap = DMatrix::<C>::identity(k, k);
        for (a, (_, row)) in cn.model.rank_one.iter().enumerate() {
            for (b, s) in solved.iter().enumerate() {
                cap[(a, b)] -= row.dot(s);
            }
        }
        cn.capacitance = if k > 0 {
            cap.try_inverse()
                .ok_or_else(|| Error::Numeric("singular Woodbury capacitance matrix".into()))?
        } else {
            cap
        };
        cn.solved_cols = solved;
        Ok(cn)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn block_solve(&self, mut b: DVector<C>) -> DVector<C> {
        let mut off = 0;
        for f in &self.factors {
            let n = f.inv.len();
            f.solve_in_place(&mut b.as_mut_slice()[off..off + n]);
            off += n;
        }
        if let Some(lu) = &self.dense_lu {
            let nd = self.model.dense.nrows();
            let rhs = b.rows(off, nd).into_owned();
            let y = lu.solve(&rhs).expect("invertible");
            b.rows_mut(off, nd).copy_from(&y);
        }
        b
    }

    /// One step from `x` with the averaged forcing `(f(t_n) + f(t_{n+1}))/2`.
    pub fn step(&self, x: &DVector<C>, forcing: &DVector<C>) -> DVector<C> {
        let half = 0.5 * self.dt;
        let mut rhs = self.model.apply(x) * C::new(half, 0.0);
        rhs += x;
        rhs.axpy(C::new(self.dt, 0.0), forcing, C::new(1.0, 0.0));
        let y0 = self.block_solve(rhs);
        if self.solved_cols.is_empty() {
            return y0;
        }
        let proj = DVector::from_iterator(
            self.model.rank_one.len(),
            self.model.rank_one.iter().map(|(_, row)| row.dot(&y0)),
        );
        let coef = &self.capacitance * proj;
        let mut y = y0;
        for (c, s) in coef.iter().zip(&self.solved_cols) {
            y.axpy(*c, s, C::new(1.0, 0.0));
        }
        y
    }
}

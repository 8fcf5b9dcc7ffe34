//! Finite-dimensional exosystem `w' = S w` generating the disturbances and the reference.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const IMAG_TOL: f64 = 1e-8;
const RESIDUE_TOL: f64 = 1e-9;

/// Eigendecomposition `S = V diag(λ) V⁻¹` of a real diagonalizable matrix.
#[derive(Debug, Clone)]
pub struct ModalDecomposition {
    values: Vec<Complex64>,
    vectors: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
}

impl ModalDecomposition {
    pub fn new(s: &DMatrix<f64>) -> Result<Self> {
        let n = s.nrows();
        if n != s.ncols() {
            return Err(Error::Exosystem(format!("matrix is {}x{}, not square", n, s.ncols())));
        }
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                vectors: DMatrix::zeros(0, 0),
                inverse: DMatrix::zeros(0, 0),
            });
        }
        let scale = 1.0 + s.norm();
        let mut raw: Vec<Complex64> = s.clone().complex_eigenvalues().iter().copied().collect();
        raw.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));

        // Group numerically repeated eigenvalues.
        let mut clusters: Vec<Vec<Complex64>> = Vec::new();
        for lam in raw {
            match clusters.iter_mut().find(|c| (c[0] - lam).norm() < 1e-7 * scale) {
                Some(c) => c.push(lam),
                None => clusters.push(vec![lam]),
            }
        }

        let sc = s.map(|v| Complex64::new(v, 0.0));
        let mut values = Vec::with_capacity(n);
        let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(n);
        for cluster in &clusters {
            let lam = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
            let shifted = &sc - DMatrix::<Complex64>::identity(n, n) * lam;
            let svd = shifted.svd(false, true);
            let v_t = svd
                .v_t
                .ok_or_else(|| Error::Exosystem("SVD failed while computing eigenvectors".into()))?;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
            for &idx in order.iter().take(cluster.len()) {
                if svd.singular_values[idx] > 1e-6 * scale {
                    return Err(Error::Exosystem(format!(
                        "matrix is not diagonalizable (eigenvalue {lam} has a Jordan block)"
                    )));
                }
                let v: DVector<Complex64> = v_t.row(idx).adjoint().into_owned();
                columns.push(v);
                values.push(lam);
            }
        }
        let vectors = DMatrix::from_columns(&columns);
        let svd = vectors.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 1e-10 * smax {
            return Err(Error::Exosystem("eigenvector matrix is singular".into()));
        }
        let inverse = vectors
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Exosystem("eigenvector matrix is singular".into()))?;
        let recon = &vectors * DMatrix::from_diagonal(&DVector::from_vec(values.clone())) * &inverse;
        if (recon - sc).norm() > 1e-8 * scale {
            return Err(Error::Exosystem("eigendecomposition failed to reproduce the matrix".into()));
        }
        Ok(Self {
            values,
            vectors,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Eigenvectors as columns.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn inverse(&self) -> &DMatrix<Complex64> {
        &self.inverse
    }

    fn block_diag(a: &Self, b: &Self) -> Self {
        let (na, nb) = (a.dim(), b.dim());
        let n = na + nb;
        let mut vectors = DMatrix::zeros(n, n);
        let mut inverse = DMatrix::zeros(n, n);
        vectors.view_mut((0, 0), (na, na)).copy_from(&a.vectors);
        vectors.view_mut((na, na), (nb, nb)).copy_from(&b.vectors);
        inverse.view_mut((0, 0), (na, na)).copy_from(&a.inverse);
        inverse.view_mut((na, na), (nb, nb)).copy_from(&b.inverse);
        let mut values = a.values.clone();
        values.extend_from_slice(&b.values);
        Self {
            values,
            vectors,
            inverse,
        }
    }
}

/// Which spectral checks to enforce when building an [`ExosystemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumCheck {
    /// All eigenvalues purely imaginary.
    #[default]
    Neutral,
    /// Skip the imaginary-axis check on `S_d` (synthetic solvability experiments).
    AllowNonNeutralDisturbance,
}

/// Exosystem `S = diag(S_d, S_r)` with output couplings and initial state.
#[derive(Debug, Clone)]
pub struct ExosystemSpec {
    s_d: DMatrix<f64>,
    s_r: DMatrix<f64>,
    q_d1: DVector<f64>,
    q_d2: DVector<f64>,
    q_r: DVector<f64>,
    w0: DVector<f64>,
    modes_d: ModalDecomposition,
    modes_r: ModalDecomposition,
    modes: ModalDecomposition,
    w0_modal: DVector<Complex64>,
}

impl ExosystemSpec {
    pub fn new(
        s_d: DMatrix<f64>,
        s_r: DMatrix<f64>,
        q_d1: DVector<f64>,
        q_d2: DVector<f64>,
        q_r: DVector<f64>,
        w0: DVector<f64>,
    ) -> Result<Self> {
        Self::with_check(s_d, s_r, q_d1, q_d2, q_r, w0, SpectrumCheck::Neutral)
    }

    pub fn with_check(
        s_d: DMatrix<f64>,
        s_r: DMatrix<f64>,
        q_d1: DVector<f64>,
        q_d2: DVector<f64>,
        q_r: DVector<f64>,
        w0: DVector<f64>,
        check: SpectrumCheck,
    ) -> Result<Self> {
        let n_d = s_d.nrows();
        let n_r = s_r.nrows();
        if q_d1.len() != n_d || q_d2.len() != n_d {
            return Err(Error::Exosystem(format!(
                "q_d1/q_d2 must have length n_d = {n_d} (got {} and {})",
                q_d1.len(),
                q_d2.len()
            )));
        }
        if q_r.len() != n_r {
            return Err(Error::Exosystem(format!(
                "q_r must have length n_r = {n_r} (got {})",
                q_r.len()
            )));
        }
        if w0.len() != n_d + n_r {
            return Err(Error::Exosystem(format!(
                "w0 must have length n_d + n_r = {} (got {})",
                n_d + n_r,
                w0.len()
            )));
        }
        let all_finite = s_d.iter().chain(s_r.iter()).chain(q_d1.iter()).chain(q_d2.iter())
            .chain(q_r.iter()).chain(w0.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Exosystem("non-finite entry".into()));
        }
        let modes_d = ModalDecomposition::new(&s_d)?;
        let modes_r = ModalDecomposition::new(&s_r)?;

        for (name, modes, scale, enforce) in [
            ("S_d", &modes_d, 1.0 + s_d.norm(), check == SpectrumCheck::Neutral),
            ("S_r", &modes_r, 1.0 + s_r.norm(), true),
        ] {
            if !enforce {
                continue;
            }
            if let Some(l) = modes.values().iter().find(|l| l.re.abs() > IMAG_TOL * scale) {
                return Err(Error::Exosystem(format!(
                    "{name} has eigenvalue {l} off the imaginary axis"
                )));
            }
        }
        let vals = modes_d.values();
        for a in 0..vals.len() {
            for b in a + 1..vals.len() {
                if (vals[a] - vals[b]).norm() < 1e-7 * (1.0 + s_d.norm()) {
                    return Err(Error::Exosystem(format!(
                        "eigenvalues of S_d must be distinct ({} repeated)",
                        vals[a]
                    )));
                }
            }
        }
        if n_r > 0 && !is_observable(&q_r, &s_r) {
            return Err(Error::Exosystem(
                "pair (q_r^T, S_r) is not observable".into(),
            ));
        }

        let modes = ModalDecomposition::block_diag(&modes_d, &modes_r);
        let w0c = w0.map(|v| Complex64::new(v, 0.0));
        let w0_modal = modes.inverse() * w0c;
        Ok(Self {
            s_d,
            s_r,
            q_d1,
            q_d2,
            q_r,
            w0,
            modes_d,
            modes_r,
            modes,
            w0_modal,
        })
    }

    pub fn n_d(&self) -> usize {
        self.s_d.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.s_r.nrows()
    }

    pub fn n_w(&self) -> usize {
        self.n_d() + self.n_r()
    }

    pub fn s_d(&self) -> &DMatrix<f64> {
        &self.s_d
    }

    pub fn s_r(&self) -> &DMatrix<f64> {
        &self.s_r
    }

    /// Full block-diagonal `S`.
    pub fn s(&self) -> DMatrix<f64> {
        let (nd, nr) = (self.n_d(), self.n_r());
        let mut s = DMatrix::zeros(nd + nr, nd + nr);
        s.view_mut((0, 0), (nd, nd)).copy_from(&self.s_d);
        s.view_mut((nd, nd), (nr, nr)).copy_from(&self.s_r);
        s
    }

    pub fn q_d1(&self) -> &DVector<f64> {
        &self.q_d1
    }

    pub fn q_d2(&self) -> &DVector<f64> {
        &self.q_d2
    }

    pub fn q_r(&self) -> &DVector<f64> {
        &self.q_r
    }

    pub fn w0(&self) -> &DVector<f64> {
        &self.w0
    }

    /// `p_1 = [q_d1; 0]`.
    pub fn p1(&self) -> DVector<f64> {
        self.pad(&self.q_d1, 0)
    }

    /// `p_2 = [q_d2; 0]`.
    pub fn p2(&self) -> DVector<f64> {
        self.pad(&self.q_d2, 0)
    }

    /// `p_r = [0; q_r]`.
    pub fn pr(&self) -> DVector<f64> {
        self.pad(&self.q_r, self.n_d())
    }

    fn pad(&self, v: &DVector<f64>, offset: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_w());
        out.rows_mut(offset, v.len()).copy_from(v);
        out
    }

    pub fn modes(&self) -> &ModalDecomposition {
        &self.modes
    }

    pub fn modes_d(&self) -> &ModalDecomposition {
        &self.modes_d
    }

    pub fn modes_r(&self) -> &ModalDecomposition {
        &self.modes_r
    }

    /// Same couplings and matrices, different initial state.
    pub fn with_initial_state(&self, w0: DVector<f64>) -> Result<Self> {
        if w0.len() != self.n_w() {
            return Err(Error::Dimension(format!(
                "w0 has length {}, expected {}",
                w0.len(),
                self.n_w()
            )));
        }
        let w0_modal = self.modes.inverse() * w0.map(|v| Complex64::new(v, 0.0));
        Ok(Self {
            w0,
            w0_modal,
            ..self.clone()
        })
    }

    /// Modal amplitudes `V⁻¹ w(t) = e^{λ t} V⁻¹ w0`.
    pub fn modal_state(&self, t: f64) -> DVector<Complex64> {
        DVector::from_iterator(
            self.n_w(),
            self.modes
                .values()
                .iter()
                .zip(self.w0_modal.iter())
                .map(|(l, a)| (l * t).exp() * a),
        )
    }

    /// `w(t) = e^{St} w0` via the eigendecomposition.
    pub fn state(&self, t: f64) -> Result<DVector<f64>> {
        let wc = self.modes.vectors() * self.modal_state(t);
        let residue = wc.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let scale = 1.0 + wc.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        if residue > RESIDUE_TOL * scale {
            return Err(Error::Exosystem(format!(
                "exosystem state has imaginary residue {residue:.3e} at t = {t}"
            )));
        }
        Ok(wc.map(|v| v.re))
    }

    /// `(d1, d2, r)` at state `w`.
    pub fn outputs(&self, w: &DVector<f64>) -> (f64, f64, f64) {
        let nd = self.n_d();
        let wd = w.rows(0, nd);
        let wr = w.rows(nd, self.n_r());
        (self.q_d1.dot(&wd), self.q_d2.dot(&wd), self.q_r.dot(&wr))
    }
}

/// `w(t) = e^{St} w0`.
pub fn exosystem_state(e: &ExosystemSpec, t: f64) -> Result<DVector<f64>> {
    if t < 0.0 {
        return Err(Error::Exosystem(format!("time must be nonnegative (got {t})")));
    }
    e.state(t)
}

/// Rank test on the observability matrix of `(c^T, a)`.
pub fn is_observable(c: &DVector<f64>, a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 {
        return true;
    }
    let mut obs = DMatrix::<f64>::zeros(n, n);
    let mut row = c.transpose();
    for k in 0..n {
        obs.row_mut(k).copy_from(&row);
        row = &row * a;
    }
    let sv = obs.svd(false, false).singular_values;
    let smax = sv.max();
    smax > 0.0 && sv.min() > 1e-10 * smax
}

/// 2×2 rotation generator `[[0, ω], [-ω, 0]]`.
pub fn rotation(omega: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_zero(w0: f64) -> ExosystemSpec {
        ExosystemSpec::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(1, 1),
            DVector::zeros(0),
            DVector::zeros(0),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![w0]),
        )
        .unwrap()
    }

    #[test]
    fn constant_exosystem() {
        let e = scalar_zero(3.0);
        for t in [0.0, 1.0, 17.5] {
            assert!((exosystem_state(&e, t).unwrap()[0] - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_block() {
        let w = 1.7;
        let e = ExosystemSpec::new(
            DMatrix::zeros(0, 0),
            rotation(w),
            DVector::zeros(0),
            DVector::zeros(0),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        )
        .unwrap();
        for t in [0.0, 0.3, 2.0, 50.0] {
            let s = exosystem_state(&e, t).unwrap();
            assert!((s[0] - (w * t).cos()).abs() < 1e-12);
            assert!((s[1] + (w * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_time_returns_initial_state() {
        let e = ExosystemSpec::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, -2.0, 0.0]),
            rotation(1.0),
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.5, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.3, -0.2, 1.0, 0.5]),
        )
        .unwrap();
        let s = exosystem_state(&e, 0.0).unwrap();
        assert!((s - e.w0()).norm() < 1e-13);
        assert!(exosystem_state(&e, -1.0).is_err());
    }

    #[test]
    fn rejects_jordan_block() {
        let err = ModalDecomposition::new(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert!(matches!(err, Err(Error::Exosystem(_))));
    }

    #[test]
    fn rejects_unobservable_reference() {
        let err = ExosystemSpec::new(
            DMatrix::zeros(0, 0),
            rotation(1.0),
            DVector::zeros(0),
            DVector::zeros(0),
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        );
        match err {
            Err(Error::Exosystem(msg)) => assert!(msg.contains("observable")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_repeated_disturbance_eigenvalues() {
        let err = ExosystemSpec::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(0, 0),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::zeros(0),
            DVector::from_vec(vec![1.0, 1.0]),
        );
        assert!(matches!(err, Err(Error::Exosystem(_))));
    }

    #[test]
    fn rejects_unstable_or_damped_modes_unless_allowed() {
        let s_d = DMatrix::from_row_slice(1, 1, &[-0.5]);
        let build = |check| {
            ExosystemSpec::with_check(
                s_d.clone(),
                DMatrix::zeros(0, 0),
                DVector::from_vec(vec![1.0]),
                DVector::from_vec(vec![0.0]),
                DVector::zeros(0),
                DVector::from_vec(vec![1.0]),
                check,
            )
        };
        assert!(build(SpectrumCheck::Neutral).is_err());
        let e = build(SpectrumCheck::AllowNonNeutralDisturbance).unwrap();
        assert!((e.state(2.0).unwrap()[0] - (-1.0f64).exp()).abs() < 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Rotation generators are skew-symmetric, so the Euclidean norm is conserved.
            #[test]
            fn norm_is_conserved_for_skew_generators(
                wd in 0.1f64..5.0, wr in 0.1f64..5.0,
                w0 in prop::collection::vec(-3.0f64..3.0, 5),
                t in 0.0f64..100.0,
            ) {
                let mut s_d = DMatrix::zeros(3, 3);
                s_d.view_mut((1, 1), (2, 2)).copy_from(&rotation(wd));
                let e = ExosystemSpec::new(
                    s_d,
                    rotation(wr),
                    DVector::from_vec(vec![1.0, 1.0, 0.0]),
                    DVector::from_vec(vec![0.5, 0.0, 1.0]),
                    DVector::from_vec(vec![1.0, 0.0]),
                    DVector::from_vec(w0),
                ).unwrap();
                let n0 = e.w0().norm();
                let nt = e.state(t).unwrap().norm();
                prop_assert!((nt - n0).abs() <= 1e-10 * n0.max(1e-300));
            }

            // For a general diagonalizable neutral S only the modal amplitudes are conserved.
            #[test]
            fn modal_amplitudes_are_conserved(
                a in -2.0f64..2.0, b in 0.5f64..3.0, t in 0.0f64..100.0,
            ) {
                // Similar to a rotation but not normal.
                let t_mat = DMatrix::from_row_slice(2, 2, &[1.0, a, 0.0, 1.0]);
                let s_r = &t_mat * rotation(b) * t_mat.clone().try_inverse().unwrap();
                let e = ExosystemSpec::new(
                    DMatrix::zeros(0, 0),
                    s_r,
                    DVector::zeros(0),
                    DVector::zeros(0),
                    DVector::from_vec(vec![1.0, 0.0]),
                    DVector::from_vec(vec![1.0, -0.5]),
                ).unwrap();
                let m0 = e.modal_state(0.0);
                let mt = e.modal_state(t);
                for (x, y) in m0.iter().zip(mt.iter()) {
                    prop_assert!((x.norm() - y.norm()).abs() < 1e-10 * (1.0 + x.norm()));
                }
            }
        }
    }
}

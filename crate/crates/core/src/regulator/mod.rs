//! Regulator equations, observer gains and the assembled [`GainSet`].

mod equations;
mod poles;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use equations::{
    check_state_solvability, m_residuals, m_sources, modal_nu, n_residuals, solve_m, solve_n, state_margins,
    ObserverSolution, RegulatorSolution,
};
pub use poles::{complex_eigenvalues, max_matching_distance, place_poles, place_poles_complex};

use crate::error::{Error, Result};
use crate::exosystem::ExosystemSpec;
use crate::grid::ComplexProfile;
use crate::kernels::{apply_observer_forward, kernel_feedback_trace, KernelSet, SolverOptions};
use crate::plant::{ObservationFunctional, PlantSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Design constants for [`assemble_gains`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParameters {
    pub c_s: f64,
    pub c_o: f64,
    pub desired_r: Vec<Complex64>,
    pub desired_d: Vec<Complex64>,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl DesignParameters {
    /// `c_s`, `c_o` with the default poles `-1, -2, ..` (reference) and `-1.5, -2.5, ..` (disturbance).
    pub fn with_default_poles(c_s: f64, c_o: f64, n_r: usize, n_d: usize) -> Self {
        Self {
            c_s,
            c_o,
            desired_r: default_poles(n_r, 1.0),
            desired_d: default_poles(n_d, 1.5),
            solver: SolverOptions::default(),
        }
    }
}

/// `-start, -start-1, ..`, `count` entries.
pub fn default_poles(count: usize, start: f64) -> Vec<Complex64> {
    (0..count).map(|k| Complex64::new(-(start + k as f64), 0.0)).collect()
}

/// Largest residuals of the design equations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignResiduals {
    pub m_ode: f64,
    pub m_boundary: f64,
    pub m_nonlocal: f64,
    pub n_ode: f64,
    pub n_left: f64,
    pub n_right: f64,
}

/// Everything the controller and the observer need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainSet {
    pub kernels: KernelSet,
    pub m: Vec<ComplexProfile>,
    pub m_w: Vec<Complex64>,
    pub n: Vec<ComplexProfile>,
    pub l_profile: ComplexProfile,
    pub l0: Complex64,
    /// Complex in general since `n(1)` is.
    pub l_d: Vec<Complex64>,
    pub l_r: Vec<f64>,
    /// `k(1,1)` and `k_x(1, ·)` for the feedback law.
    pub k11: Complex64,
    pub kx1: ComplexProfile,
    pub state_margins: Vec<Complex64>,
    pub sinh_moduli: Vec<f64>,
    pub residuals: DesignResiduals,
    pub design: DesignParameters,
}

impl GainSet {
    /// `n(1)` as a vector.
    pub fn n_at_one(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.n.len(), self.n.iter().map(|p| p.last()))
    }

    /// `S_r + l_r q_rᵀ`.
    pub fn reference_error_matrix(&self, e: &ExosystemSpec) -> DMatrix<f64> {
        e.s_r() + DVector::from_column_slice(&self.l_r) * e.q_r().transpose()
    }

    /// `S_d + l_d n(1)ᵀ`.
    pub fn disturbance_error_matrix(&self, e: &ExosystemSpec) -> DMatrix<Complex64> {
        e.s_d().map(|v| Complex64::new(v, 0.0)) + DVector::from_column_slice(&self.l_d) * self.n_at_one().transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

fn check_simple_hurwitz(name: &str, eigs: &[Complex64]) -> Result<()> {
    if let Some(p) = eigs.iter().find(|p| !(p.re < 0.0)) {
        return Err(Error::Hypothesis(format!("{name} is not Hurwitz (eigenvalue {p})")));
    }
    let scale = 1.0 + eigs.iter().map(|p| p.norm()).fold(0.0, f64::max);
    for (a, p) in eigs.iter().enumerate() {
        for q in &eigs[a + 1..] {
            if (p - q).norm() < 1e-8 * scale {
                return Err(Error::Hypothesis(format!("{name} has a repeated eigenvalue {p}")));
            }
        }
    }
    Ok(())
}

/// Solve every design problem and collect the gains.
pub fn assemble_gains(
    plant: &PlantSpec,
    e: &ExosystemSpec,
    c: &ObservationFunctional,
    design: &DesignParameters,
) -> Result<GainSet> {
    let kernels = KernelSet::solve_with(plant, design.c_s, design.c_o, &design.solver)?;
    assemble_with_kernels(plant, e, c, design, kernels)
}

/// [`assemble_gains`] with precomputed kernels.
pub fn assemble_with_kernels(
    plant: &PlantSpec,
    e: &ExosystemSpec,
    c: &ObservationFunctional,
    design: &DesignParameters,
    kernels: KernelSet,
) -> Result<GainSet> {
    if kernels.c_s != design.c_s || kernels.c_o != design.c_o {
        return Err(Error::Config("kernels were solved for different damping constants".into()));
    }
    let grid = plant.grid();
    let m_sol = solve_m(plant, &kernels, e, c, design.c_s)?;
    let n_sol = solve_n(plant, &kernels, e, design.c_o)?;
    let (m_ode, m_boundary, m_nonlocal) = m_residuals(&m_sol, plant, &kernels, e, c, design.c_s)?;
    let (n_ode, n_left, n_right) = n_residuals(&n_sol, plant, &kernels, e, design.c_o)?;

    let l_r = place_poles(e.q_r(), e.s_r(), &design.desired_r)?;
    let n1 = DVector::from_iterator(e.n_d(), n_sol.n.iter().map(|p| p.last()));
    let s_d = e.s_d().map(|v| Complex64::new(v, 0.0));
    let l_d = place_poles_complex(&n1, &s_d, &design.desired_d)?;

    let a_r = e.s_r() + &l_r * e.q_r().transpose();
    let eig_r = complex_eigenvalues(&a_r.map(|v| Complex64::new(v, 0.0)))?;
    let eig_d = complex_eigenvalues(&(&s_d + &l_d * n1.transpose()))?;
    check_simple_hurwitz("S_r + l_r q_r^T", &eig_r)?;
    check_simple_hurwitz("S_d + l_d n(1)^T", &eig_d)?;
    let scale = 1.0 + eig_r.iter().chain(&eig_d).map(|p| p.norm()).fold(0.0, f64::max);
    for p in &eig_r {
        if let Some(q) = eig_d.iter().find(|q| (*q - p).norm() < 1e-8 * scale) {
            return Err(Error::Hypothesis(format!(
                "reference and disturbance observer poles coincide ({p} and {q})"
            )));
        }
    }

    // l = F_o[n(x)ᵀ l_d] - i p_ξ(x, 1), l0 = p(1, 1).
    let mut nl = ComplexProfile::zeros(grid);
    for (p, l) in n_sol.n.iter().zip(l_d.iter()) {
        nl = nl.add_scaled(p, *l)?;
    }
    let (l0, p_xi) = kernel_feedback_trace(&kernels.p.transpose())?;
    let l_profile = apply_observer_forward(&kernels.p, &nl)?.add_scaled(&p_xi, -I)?;
    let (k11, kx1) = kernel_feedback_trace(&kernels.k)?;

    Ok(GainSet {
        m: m_sol.m,
        m_w: m_sol.m_w,
        n: n_sol.n,
        l_profile,
        l0,
        l_d: l_d.iter().copied().collect(),
        l_r: l_r.iter().copied().collect(),
        k11,
        kx1,
        state_margins: m_sol.margins,
        sinh_moduli: n_sol.sinh_moduli,
        residuals: DesignResiduals {
            m_ode,
            m_boundary,
            m_nonlocal,
            n_ode,
            n_left,
            n_right,
        },
        design: design.clone(),
        kernels,
    })
}

//! Regulator equations for `m` (state feedback) and `n` (observer), solved mode by mode.
//!
//! For an eigenpair `(λ, v)` the projected equation `i y'' + (λ + c) y = f` becomes
//! `y'' = ν² y - i f` with `ν = √(i(λ + c))` (principal branch), whose solutions are
//! `γ₁ cosh(νx) + γ₂ sinh(νx)/ν + ∫₀ˣ sinh(ν(x-ξ))/ν (-i f(ξ)) dξ`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolvabilityError};
use crate::exosystem::ExosystemSpec;
use crate::grid::{cumulative_trapezoid, ComplexProfile, SpatialGrid};
use crate::kernels::{apply_forward, apply_inverse, apply_observer_inverse, KernelGrid, KernelSet, Orientation};
use crate::plant::{evaluate_ce, ObservationFunctional, PlantSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);
const MARGIN_TOL: f64 = 1e-8;
/// `|λ + c|` below this selects the polynomial branch.
const DEGENERATE_TOL: f64 = 1e-10;

/// A profile together with its first two derivatives.
#[derive(Debug, Clone)]
pub(crate) struct Jet {
    pub value: Vec<Complex64>,
    pub d1: Vec<Complex64>,
    pub d2: Vec<Complex64>,
}

impl Jet {
    fn zeros(len: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); len];
        Self {
            value: z.clone(),
            d1: z.clone(),
            d2: z,
        }
    }

    fn axpy(&mut self, a: Complex64, other: &Jet) {
        for (dst, src) in [(&mut self.value, &other.value), (&mut self.d1, &other.d1), (&mut self.d2, &other.d2)] {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
}

/// `ν = √(i(λ + c))`, or `None` on the degenerate branch `λ + c = 0`.
pub fn modal_nu(lambda: Complex64, c: f64) -> Option<Complex64> {
    let shifted = lambda + c;
    (shifted.norm() >= DEGENERATE_TOL).then(|| (I * shifted).sqrt())
}

/// `cosh(νx)` and `sinh(νx)/ν` (or `1` and `x`).
fn fundamental(nu: Option<Complex64>, grid: SpatialGrid) -> (Jet, Jet) {
    let xs: Vec<f64> = grid.nodes().collect();
    match nu {
        Some(nu) => {
            let nu2 = nu * nu;
            let ch: Vec<Complex64> = xs.iter().map(|&x| (nu * x).cosh()).collect();
            let sh: Vec<Complex64> = xs.iter().map(|&x| (nu * x).sinh()).collect();
            let c = Jet {
                d1: sh.iter().map(|s| nu * s).collect(),
                d2: ch.iter().map(|v| nu2 * v).collect(),
                value: ch.clone(),
            };
            let s_val: Vec<Complex64> = sh.iter().map(|s| s / nu).collect();
            let s = Jet {
                d2: s_val.iter().map(|v| nu2 * v).collect(),
                value: s_val,
                d1: ch,
            };
            (c, s)
        }
        None => {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            let c = Jet {
                value: vec![one; xs.len()],
                d1: vec![zero; xs.len()],
                d2: vec![zero; xs.len()],
            };
            let s = Jet {
                value: xs.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                d1: vec![one; xs.len()],
                d2: vec![zero; xs.len()],
            };
            (c, s)
        }
    }
}

/// `P(x) = ∫₀ˣ sinh(ν(x-ξ))/ν s(ξ) dξ` (or `∫₀ˣ (x-ξ) s`) with `P'' = ν² P + s`.
fn particular(nu: Option<Complex64>, s: &[Complex64], grid: SpatialGrid) -> Jet {
    let d = grid.spacing();
    let xs: Vec<f64> = grid.nodes().collect();
    match nu {
        Some(nu) => {
            let fwd: Vec<Complex64> = xs.iter().zip(s).map(|(&x, v)| (-nu * x).exp() * v).collect();
            let bwd: Vec<Complex64> = xs.iter().zip(s).map(|(&x, v)| (nu * x).exp() * v).collect();
            let a = cumulative_trapezoid(&fwd, d);
            let b = cumulative_trapezoid(&bwd, d);
            let mut out = Jet::zeros(xs.len());
            for (i, &x) in xs.iter().enumerate() {
                let ep = (nu * x).exp();
                let em = (-nu * x).exp();
                out.value[i] = (ep * a[i] - em * b[i]) / (2.0 * nu);
                out.d1[i] = (ep * a[i] + em * b[i]) * 0.5;
                out.d2[i] = nu * nu * out.value[i] + s[i];
            }
            out
        }
        None => {
            let cs = cumulative_trapezoid(s, d);
            let xs_s: Vec<Complex64> = xs.iter().zip(s).map(|(&x, v)| v * x).collect();
            let cxs = cumulative_trapezoid(&xs_s, d);
            let mut out = Jet::zeros(xs.len());
            for (i, &x) in xs.iter().enumerate() {
                out.value[i] = cs[i] * x - cxs[i];
                out.d1[i] = cs[i];
                out.d2[i] = s[i];
            }
            out
        }
    }
}

fn profile(grid: SpatialGrid, v: Vec<Complex64>) -> ComplexProfile {
    ComplexProfile::new(grid, v).expect("grid length")
}

/// Margins `C_e F⁻¹[cosh(√(i(λ+c_s)) ·)]` for each `λ`; fails if any has modulus below `1e-8`.
pub fn check_state_solvability(
    c: &ObservationFunctional,
    k_inv: &KernelGrid,
    eigenvalues: &[Complex64],
    c_s: f64,
) -> Result<Vec<Complex64>> {
    let margins = state_margins(c, k_inv, eigenvalues, c_s)?;
    for (lambda, m) in eigenvalues.iter().zip(&margins) {
        if !(m.norm() >= MARGIN_TOL) {
            return Err(SolvabilityError::RegulatorMargin {
                lambda: *lambda,
                margin: m.norm(),
            }
            .into());
        }
    }
    Ok(margins)
}

/// Margins without the threshold check.
pub fn state_margins(
    c: &ObservationFunctional,
    k_inv: &KernelGrid,
    eigenvalues: &[Complex64],
    c_s: f64,
) -> Result<Vec<Complex64>> {
    if k_inv.orientation() != Orientation::Lower {
        return Err(Error::Dimension("solvability check expects the lower reciprocal kernel".into()));
    }
    let grid = k_inv.grid();
    eigenvalues
        .iter()
        .map(|&lambda| {
            let (ch, _) = fundamental(modal_nu(lambda, c_s), grid);
            let z = apply_inverse(k_inv, &profile(grid, ch.value))?;
            evaluate_ce(c, &z)
        })
        .collect()
}

/// Solution of the `m` regulator equations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegulatorSolution {
    /// Components `m_1 .. m_{n_w}`.
    pub m: Vec<ComplexProfile>,
    pub m_prime: Vec<ComplexProfile>,
    pub m_second: Vec<ComplexProfile>,
    /// `m'(1)`.
    pub m_w: Vec<Complex64>,
    pub margins: Vec<Complex64>,
}

fn reassemble(grid: SpatialGrid, modal: &[Jet], inverse: &nalgebra::DMatrix<Complex64>) -> Vec<Jet> {
    let n = modal.len();
    (0..n)
        .map(|k| {
            let mut acc = Jet::zeros(grid.len());
            for (j, jet) in modal.iter().enumerate() {
                acc.axpy(inverse[(j, k)], jet);
            }
            acc
        })
        .collect()
}

fn dot(a: &DVector<f64>, v: nalgebra::DVectorView<'_, Complex64>) -> Complex64 {
    a.iter().zip(v.iter()).map(|(x, y)| y * *x).sum()
}

/// `F[g]` and `k(·, 0)`, the two source shapes of the `m` equation.
pub fn m_sources(plant: &PlantSpec, kernels: &KernelSet) -> Result<(ComplexProfile, ComplexProfile)> {
    let fg = apply_forward(&kernels.k, plant.g())?;
    let grid = plant.grid();
    let k0 = profile(grid, (0..grid.len()).map(|i| kernels.k.at(i, 0)).collect());
    Ok((fg, k0))
}

/// Solve `i m'' + mᵀS + c_s m = F[g] p₁ᵀ - i k(x,0) p₂ᵀ`, `m'(0) = p₂`, `C_e F⁻¹[m] = p_r`.
pub fn solve_m(
    plant: &PlantSpec,
    kernels: &KernelSet,
    e: &ExosystemSpec,
    c: &ObservationFunctional,
    c_s: f64,
) -> Result<RegulatorSolution> {
    let grid = plant.grid();
    grid.ensure_same(&kernels.grid(), "solve_m")?;
    grid.ensure_same(&c.grid(), "solve_m observation")?;
    let modes = e.modes();
    let margins = check_state_solvability(c, &kernels.k_inv, modes.values(), c_s)?;
    let (fg, k0) = m_sources(plant, kernels)?;
    let (p1, p2, pr) = (e.p1(), e.p2(), e.pr());

    let mut modal = Vec::with_capacity(e.n_w());
    for (j, &lambda) in modes.values().iter().enumerate() {
        let v = modes.vectors().column(j);
        let (a1, a2, ar) = (dot(&p1, v), dot(&p2, v), dot(&pr, v));
        let s: Vec<Complex64> = fg
            .values()
            .iter()
            .zip(k0.values())
            .map(|(f, k)| -I * a1 * f - a2 * k)
            .collect();
        let nu = modal_nu(lambda, c_s);
        let (ch, sh) = fundamental(nu, grid);
        let mut jet = particular(nu, &s, grid);
        jet.axpy(a2, &sh);
        let partial = apply_inverse(&kernels.k_inv, &profile(grid, jet.value.clone()))?;
        let gamma1 = (ar - evaluate_ce(c, &partial)?) / margins[j];
        jet.axpy(gamma1, &ch);
        modal.push(jet);
    }
    let parts = reassemble(grid, &modal, modes.inverse());
    let n = grid.n_cells();
    Ok(RegulatorSolution {
        m_w: parts.iter().map(|j| j.d1[n]).collect(),
        m: parts.iter().map(|j| profile(grid, j.value.clone())).collect(),
        m_prime: parts.iter().map(|j| profile(grid, j.d1.clone())).collect(),
        m_second: parts.iter().map(|j| profile(grid, j.d2.clone())).collect(),
        margins,
    })
}

/// Solution of the `n` observer equations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObserverSolution {
    /// Components `n_1 .. n_{n_d}`.
    pub n: Vec<ComplexProfile>,
    pub n_prime: Vec<ComplexProfile>,
    pub n_second: Vec<ComplexProfile>,
    /// `|sinh ν_j|` per eigenvalue of `S_d`.
    pub sinh_moduli: Vec<f64>,
}

/// Solve `i n'' + nᵀS_d + c_o n = F_o⁻¹[g] q_d1ᵀ`, `n'(0) = q_d2`, `n'(1) = 0`.
pub fn solve_n(plant: &PlantSpec, kernels: &KernelSet, e: &ExosystemSpec, c_o: f64) -> Result<ObserverSolution> {
    let grid = plant.grid();
    grid.ensure_same(&kernels.grid(), "solve_n")?;
    let n = grid.n_cells();
    let gt = apply_observer_inverse(&kernels.p_inv, plant.g())?;
    let modes = e.modes_d();
    let mut modal = Vec::with_capacity(e.n_d());
    let mut sinh_moduli = Vec::with_capacity(e.n_d());
    for (j, &lambda) in modes.values().iter().enumerate() {
        let v = modes.vectors().column(j);
        let (a1, a2) = (dot(e.q_d1(), v), dot(e.q_d2(), v));
        let f: Vec<Complex64> = gt.values().iter().map(|g| g * a1).collect();
        let s: Vec<Complex64> = f.iter().map(|v| -I * v).collect();
        let nu = modal_nu(lambda, c_o);
        let (ch, sh) = fundamental(nu, grid);
        let mut jet = particular(nu, &s, grid);
        jet.axpy(a2, &sh);
        match nu {
            None => {
                // n'(1) = γ₂ + ∫ s must vanish, and γ₁ stays free.
                let mismatch = jet.d1[n].norm();
                let scale = 1.0 + a2.norm();
                sinh_moduli.push(0.0);
                return Err(if mismatch > MARGIN_TOL * scale {
                    SolvabilityError::ObserverIncompatible { lambda, mismatch }
                } else {
                    SolvabilityError::ObserverNotUnique { lambda }
                }
                .into());
            }
            Some(nu) => {
                let sinh = nu.sinh();
                sinh_moduli.push(sinh.norm());
                if !(sinh.norm() >= MARGIN_TOL) {
                    return Err(SolvabilityError::ObserverSpectrumCollision {
                        lambda,
                        modulus: sinh.norm(),
                    }
                    .into());
                }
                let gamma1 = -jet.d1[n] / (nu * sinh);
                jet.axpy(gamma1, &ch);
            }
        }
        modal.push(jet);
    }
    let parts = reassemble(grid, &modal, modes.inverse());
    Ok(ObserverSolution {
        n: parts.iter().map(|j| profile(grid, j.value.clone())).collect(),
        n_prime: parts.iter().map(|j| profile(grid, j.d1.clone())).collect(),
        n_second: parts.iter().map(|j| profile(grid, j.d2.clone())).collect(),
        sinh_moduli,
    })
}

/// Max residuals of the `m` equations: (ODE, `m'(0) - p₂`, `C_e F⁻¹[m] - p_r`).
pub fn m_residuals(
    sol: &RegulatorSolution,
    plant: &PlantSpec,
    kernels: &KernelSet,
    e: &ExosystemSpec,
    c: &ObservationFunctional,
    c_s: f64,
) -> Result<(f64, f64, f64)> {
    let (fg, k0) = m_sources(plant, kernels)?;
    let s = e.s();
    let (p1, p2, pr) = (e.p1(), e.p2(), e.pr());
    let nw = e.n_w();
    let mut ode: f64 = 0.0;
    for x in 0..plant.grid().len() {
        for k in 0..nw {
            let coupling: Complex64 = (0..nw).map(|l| sol.m[l].values()[x] * s[(l, k)]).sum();
            let r = I * sol.m_second[k].values()[x] + coupling + c_s * sol.m[k].values()[x]
                - (fg.values()[x] * p1[k] - I * k0.values()[x] * p2[k]);
            ode = ode.max(r.norm());
        }
    }
    let mut bc: f64 = 0.0;
    let mut nonlocal: f64 = 0.0;
    for k in 0..nw {
        bc = bc.max((sol.m_prime[k].first() - p2[k]).norm());
        let z = apply_inverse(&kernels.k_inv, &sol.m[k])?;
        nonlocal = nonlocal.max((evaluate_ce(c, &z)? - pr[k]).norm());
    }
    Ok((ode, bc, nonlocal))
}

/// Max residuals of the `n` equations: (ODE, `n'(0) - q_d2`, `n'(1)`).
pub fn n_residuals(
    sol: &ObserverSolution,
    plant: &PlantSpec,
    kernels: &KernelSet,
    e: &ExosystemSpec,
    c_o: f64,
) -> Result<(f64, f64, f64)> {
    let gt = apply_observer_inverse(&kernels.p_inv, plant.g())?;
    let s = e.s_d();
    let nd = e.n_d();
    let mut ode: f64 = 0.0;
    for x in 0..plant.grid().len() {
        for k in 0..nd {
            let coupling: Complex64 = (0..nd).map(|l| sol.n[l].values()[x] * s[(l, k)]).sum();
            let r = I * sol.n_second[k].values()[x] + coupling + c_o * sol.n[k].values()[x]
                - gt.values()[x] * e.q_d1()[k];
            ode = ode.max(r.norm());
        }
    }
    let mut left: f64 = 0.0;
    let mut right: f64 = 0.0;
    for k in 0..nd {
        left = left.max((sol.n_prime[k].first() - e.q_d2()[k]).norm());
        right = right.max(sol.n_prime[k].last().norm());
    }
    Ok((ode, left, right))
}

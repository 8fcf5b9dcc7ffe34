//! Spectrum of the open-loop generator `A f = -i f''`, `f'(0) = -iq f(0)`, `f'(1) = 0`,
//! the observer-error spectrum, and a modal strict-properness probe.
//!
//! With `μ = -iλ²` the eigenfunctions are `φ(x) = (λ-iq)/(λ+iq) e^{λx} + e^{-λx}` where
//! `e^{2λ}(λ - iq) = λ + iq`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::grid::{ComplexProfile, SpatialGrid};
use crate::plant::{ObservationFunctional, PlantSpec};
use crate::regulator::complex_eigenvalues;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ROOT_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 60;

/// One eigenpair of `A`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub n: usize,
    /// Auxiliary root with `μ = -iλ²`.
    pub lambda: Complex64,
    pub mu: Complex64,
    /// `|e^{2λ} - (λ + iq)/(λ - iq)|`.
    pub residual: f64,
    pub phi: ComplexProfile,
}

/// `e^{2λ}(λ - iq) - (λ + iq)`.
pub fn characteristic(lambda: Complex64, q: f64) -> Complex64 {
    (2.0 * lambda).exp() * (lambda - I * q) - (lambda + I * q)
}

/// `e^{2λ} - (λ + iq)/(λ - iq)`, the well-conditioned form used for Newton and residuals.
pub fn normalized_characteristic(lambda: Complex64, q: f64) -> Complex64 {
    (2.0 * lambda).exp() - (lambda + I * q) / (lambda - I * q)
}

fn normalized_derivative(lambda: Complex64, q: f64) -> Complex64 {
    let d = lambda - I * q;
    2.0 * (2.0 * lambda).exp() + 2.0 * I * q / (d * d)
}

/// `φ(x)` for the root `λ`.
pub fn eigenfunction(lambda: Complex64, q: f64, x: f64) -> Complex64 {
    let a = (lambda - I * q) / (lambda + I * q);
    a * (lambda * x).exp() + (-lambda * x).exp()
}

fn seed(n: usize, q: f64) -> Complex64 {
    if n == 0 {
        (I * q).sqrt()
    } else {
        let npi = n as f64 * PI;
        Complex64::new(q / npi, npi)
    }
}

fn newton(n: usize, q: f64) -> Result<(Complex64, f64)> {
    let mut lambda = seed(n, q);
    let mut res = normalized_characteristic(lambda, q).norm();
    for _ in 0..MAX_NEWTON {
        if res < ROOT_TOL {
            // One polishing step brings the residual to the round-off floor.
            let polished = lambda - normalized_characteristic(lambda, q) / normalized_derivative(lambda, q);
            let pres = normalized_characteristic(polished, q).norm();
            return Ok(if pres < res { (polished, pres) } else { (lambda, res) });
        }
        lambda -= normalized_characteristic(lambda, q) / normalized_derivative(lambda, q);
        if !lambda.is_finite() {
            break;
        }
        res = normalized_characteristic(lambda, q).norm();
    }
    if res < ROOT_TOL {
        return Ok((lambda, res));
    }
    Err(Error::Spectral(format!("Newton iteration for mode {n} did not converge (residual {res:.3e})")))
}

/// Eigenpairs for the modes `ns`, with a collision check between the converged roots.
pub fn eigenpairs(q: f64, ns: impl IntoIterator<Item = usize>, grid: SpatialGrid) -> Result<Vec<EigenPair>> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Spectral(format!("q must be positive, got {q}")));
    }
    let mut out: Vec<EigenPair> = Vec::new();
    for n in ns {
        let (lambda, residual) = newton(n, q)?;
        if let Some(prev) = out.iter().find(|p| (p.lambda - lambda).norm() < 1e-6) {
            return Err(Error::Spectral(format!(
                "seeds {} and {n} converged to the same root {lambda}",
                prev.n
            )));
        }
        out.push(EigenPair {
            n,
            lambda,
            mu: -I * lambda * lambda,
            residual,
            phi: ComplexProfile::from_fn(grid, |x| eigenfunction(lambda, q, x)),
        });
    }
    Ok(out)
}

/// Eigenpairs `n = 1..=count`.
pub fn eigenvalues_a(q: f64, count: usize, grid: SpatialGrid) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Err(Error::Spectral("count must be at least 1".into()));
    }
    eigenpairs(q, 1..=count, grid)
}

/// Deviation from `μ_n ≈ 2q + i(nπ)²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub q: f64,
    /// `(n, n² |μ_n - 2q - i(nπ)²|)`.
    pub deviations: Vec<(usize, f64)>,
    pub max_deviation: f64,
    pub max_deviation_low: f64,
    pub max_deviation_high: f64,
    /// `max Re μ - min Re μ`.
    pub strip_width: f64,
    pub min_real_part: f64,
    pub max_root_residual: f64,
}

impl AsymptoticsReport {
    /// No growth: the max over `n ≥ 20` exceeds the max over `5 ≤ n < 20` by at most 50%.
    pub fn bounded(&self) -> bool {
        self.max_deviation_high <= 1.5 * self.max_deviation_low
    }
}

pub fn asymptotics_report(pairs: &[EigenPair], q: f64) -> Result<AsymptoticsReport> {
    let used: Vec<&EigenPair> = pairs.iter().filter(|p| p.n >= 5).collect();
    if used.is_empty() {
        return Err(Error::Spectral("asymptotics need modes with n >= 5".into()));
    }
    let deviations: Vec<(usize, f64)> = used
        .iter()
        .map(|p| {
            let n = p.n as f64;
            (p.n, n * n * (p.mu - Complex64::new(2.0 * q, (n * PI).powi(2))).norm())
        })
        .collect();
    let max_in = |lo: usize, hi: usize| {
        deviations
            .iter()
            .filter(|(n, _)| (lo..hi).contains(n))
            .map(|d| d.1)
            .fold(0.0, f64::max)
    };
    let re: Vec<f64> = pairs.iter().map(|p| p.mu.re).collect();
    let max_re = re.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_re = re.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AsymptoticsReport {
        q,
        max_deviation: deviations.iter().map(|d| d.1).fold(0.0, f64::max),
        max_deviation_low: max_in(5, 20),
        max_deviation_high: max_in(20, usize::MAX),
        deviations,
        strip_width: max_re - min_re,
        min_real_part: min_re,
        max_root_residual: pairs.iter().map(|p| p.residual).fold(0.0, f64::max),
    })
}

/// CSV rows `n,re_lambda,im_lambda,re_mu,im_mu,residual,deviation`.
pub fn spectrum_csv(pairs: &[EigenPair], q: f64) -> String {
    let mut out = String::from("n,re_lambda,im_lambda,re_mu,im_mu,residual,deviation\n");
    for p in pairs {
        let n = p.n as f64;
        let dev = n * n * (p.mu - Complex64::new(2.0 * q, (n * PI).powi(2))).norm();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.n,
            fmt17(p.lambda.re),
            fmt17(p.lambda.im),
            fmt17(p.mu.re),
            fmt17(p.mu.im),
            fmt17(p.residual),
            fmt17(dev)
        ));
    }
    out
}

/// Finite part of the observer-error spectrum and the closeness sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObserverSpectrum {
    pub reference: Vec<Complex64>,
    pub disturbance: Vec<Complex64>,
    /// `i j²π² - c_o`, `j = 0..=j_max`.
    pub distributed: Vec<Complex64>,
    pub abscissa: f64,
    /// Partial sums of `Σ_j ‖(A_d - λ_j)^{-1} l_d‖²`.
    pub partial_sums: Vec<f64>,
    pub tail_estimate: f64,
}

impl ObserverSpectrum {
    pub fn closeness_sum(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

pub fn observer_error_spectrum(
    c_o: f64,
    a_r: &DMatrix<f64>,
    a_d: &DMatrix<Complex64>,
    l_d: &[Complex64],
    j_max: usize,
) -> Result<ObserverSpectrum> {
    if a_d.nrows() != l_d.len() || a_d.ncols() != l_d.len() {
        return Err(Error::Dimension("A_d and l_d sizes differ".into()));
    }
    let reference = complex_eigenvalues(&a_r.map(|v| Complex64::new(v, 0.0)))?;
    let disturbance = complex_eigenvalues(a_d)?;
    let distributed: Vec<Complex64> = (0..=j_max)
        .map(|j| Complex64::new(-c_o, (j as f64 * PI).powi(2)))
        .collect();
    let l = DVector::from_column_slice(l_d);
    let nd = l_d.len();
    let mut partial_sums = Vec::with_capacity(j_max + 1);
    let mut acc = 0.0;
    for &lambda in &distributed {
        if nd > 0 {
            let shifted = a_d - DMatrix::<Complex64>::identity(nd, nd) * lambda;
            let x = shifted.lu().solve(&l).ok_or_else(|| {
                Error::Hypothesis(format!("observer pole {lambda} collides with the spectrum of S_d + l_d n(1)^T"))
            })?;
            acc += x.norm_squared();
        }
        partial_sums.push(acc);
    }
    let abscissa = reference
        .iter()
        .chain(&disturbance)
        .map(|p| p.re)
        .fold(-c_o, f64::max);
    let lnorm = l.norm_squared();
    Ok(ObserverSpectrum {
        reference,
        disturbance,
        distributed,
        abscissa,
        partial_sums,
        tail_estimate: lnorm / (3.0 * PI.powi(4) * (j_max.max(1) as f64).powi(3)),
    })
}

/// Boundary input used by the properness probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSide {
    /// `z_x(0) = -iq z(0) + d`.
    Left,
    /// `z_x(1) = u`.
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropernessReport {
    pub s_values: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// `(2√2 m/a) Σ_{k≥0} 1/(θ + k²)` with `a = π²`, `θ = (s - max Re μ)/a`.
    pub bounds: Vec<f64>,
    /// `sup |b_n c_n|`.
    pub m: f64,
    /// Closed-form resolvent values for comparison.
    pub exact: Vec<f64>,
    pub truncation: usize,
    pub tail_estimate: f64,
    pub warning: Option<String>,
}

impl PropernessReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.magnitudes.windows(2).all(|w| w[1] < w[0])
    }

    pub fn below_bound(&self) -> bool {
        self.magnitudes.iter().zip(&self.bounds).all(|(m, b)| m <= b)
    }
}

/// `(e^z - 1)/z` and `(z e^z - e^z + 1)/z²`.
fn exp_moments(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 1e-3 {
        let e1 = 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0));
        let e2 = 0.5 + z * (1.0 / 3.0 + z * (0.125 + z / 30.0));
        (e1, e2)
    } else {
        let ez = z.exp();
        ((ez - 1.0) / z, (z * ez - ez + 1.0) / (z * z))
    }
}

/// `∫₀¹ c(x) e^{κx} dx` for piecewise-linear `c`, exact on each cell.
fn weighted_exp_integral(c: &ComplexProfile, kappa: Complex64) -> Complex64 {
    let grid = c.grid();
    let d = grid.spacing();
    let v = c.values();
    let (e1, e2) = exp_moments(kappa * d);
    (0..grid.n_cells())
        .map(|i| {
            let slope = (v[i + 1] - v[i]) / d;
            (kappa * grid.node(i)).exp() * (v[i] * d * e1 + slope * d * d * e2)
        })
        .sum()
}

/// `∫₀¹ φ²` in closed form.
fn pairing(lambda: Complex64, q: f64) -> Complex64 {
    let a = (lambda - I * q) / (lambda + I * q);
    let e2 = (2.0 * lambda).exp();
    a * a * (e2 - 1.0) / (2.0 * lambda) + 2.0 * a + (1.0 - 1.0 / e2) / (2.0 * lambda)
}

/// `C_e φ` for the root `λ`.
fn observe_mode(c: &ObservationFunctional, lambda: Complex64, q: f64) -> Complex64 {
    let a = (lambda - I * q) / (lambda + I * q);
    c.theta() * eigenfunction(lambda, q, c.x0())
        + a * weighted_exp_integral(c.weight(), lambda)
        + weighted_exp_integral(c.weight(), -lambda)
}

/// Modal coefficients `b_n c_n` of `C(sI - A)^{-1}B` over modes `0..=truncation`.
pub fn modal_products(
    q: f64,
    c: &ObservationFunctional,
    side: InputSide,
    truncation: usize,
) -> Result<Vec<(Complex64, Complex64)>> {
    let pairs = eigenpairs(q, 0..=truncation, SpatialGrid::new(1)?)?;
    Ok(pairs
        .iter()
        .map(|p| {
            let trace = match side {
                InputSide::Left => I * eigenfunction(p.lambda, q, 0.0),
                InputSide::Right => -I * eigenfunction(p.lambda, q, 1.0),
            };
            let b = trace / pairing(p.lambda, q);
            (p.mu, b * observe_mode(c, p.lambda, q))
        })
        .collect())
}

/// `C(sI - A)^{-1}B` from the closed-form resolvent, `κ = √(is)`.
pub fn exact_transfer(q: f64, c: &ObservationFunctional, side: InputSide, s: Complex64) -> Complex64 {
    let kappa = (I * s).sqrt();
    let (ep, em) = (kappa.exp(), (-kappa).exp());
    let plus = weighted_exp_integral(c.weight(), kappa);
    let minus = weighted_exp_integral(c.weight(), -kappa);
    let theta = c.theta();
    let x0 = c.x0();
    match side {
        InputSide::Left => {
            // z = cosh(κ(1-x)) / (iq cosh κ - κ sinh κ)
            let shape = theta * (kappa * (1.0 - x0)).cosh() + 0.5 * (ep * minus + em * plus);
            shape / (I * q * kappa.cosh() - kappa * kappa.sinh())
        }
        InputSide::Right => {
            // z = (cosh κx - (iq/κ) sinh κx) / (κ sinh κ - iq cosh κ)
            let r = I * q / kappa;
            let shape = theta * ((kappa * x0).cosh() - r * (kappa * x0).sinh())
                + 0.5 * (plus + minus)
                - r * 0.5 * (plus - minus);
            shape / (kappa * kappa.sinh() - I * q * kappa.cosh())
        }
    }
}

/// Sum over `k ≥ 0` of `1/(θ + k²)`.
fn shifted_basel(theta: f64) -> f64 {
    let r = theta.sqrt();
    (1.0 + PI * r / (PI * r).tanh()) / (2.0 * theta)
}

/// `|C(sI - A)^{-1}B|` along the real axis by modal truncation.
pub fn strict_properness_probe(
    plant: &PlantSpec,
    c: &ObservationFunctional,
    side: InputSide,
    s_values: &[f64],
    truncation: usize,
) -> Result<PropernessReport> {
    if s_values.is_empty() || s_values.windows(2).any(|w| !(w[1] > w[0])) || !(s_values[0] > 0.0) {
        return Err(Error::Spectral("s values must be positive and increasing".into()));
    }
    let q = plant.q();
    let terms = modal_products(q, c, side, truncation)?;
    let m = terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max);
    let max_re = terms.iter().map(|t| t.0.re).fold(f64::NEG_INFINITY, f64::max);
    let a = PI * PI;
    let magnitudes: Vec<f64> = s_values
        .iter()
        .map(|&s| terms.iter().map(|(mu, bc)| bc / (s - mu)).sum::<Complex64>().norm())
        .collect();
    let bounds: Vec<f64> = s_values
        .iter()
        .map(|&s| {
            let theta = (s - max_re) / a;
            if theta > 0.0 {
                2.0 * 2f64.sqrt() * m / a * shifted_basel(theta)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let exact: Vec<f64> = s_values
        .iter()
        .map(|&s| exact_transfer(q, c, side, Complex64::new(s, 0.0)).norm())
        .collect();
    let tail_estimate = 2f64.sqrt() * m / (a * truncation.max(1) as f64);
    let worst = magnitudes
        .iter()
        .zip(&exact)
        .map(|(m, e)| (m - e).abs() / e.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let warning = (m > 0.0 && worst > 1e-2).then(|| {
        format!(
            "truncation at {truncation} modes: relative deviation {worst:.3e} from the closed-form resolvent (tail bound {tail_estimate:.3e})"
        )
    });
    Ok(PropernessReport {
        s_values: s_values.to_vec(),
        magnitudes,
        bounds,
        m,
        exact,
        truncation,
        tail_estimate,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_agree_across_the_switch() {
        let z = Complex64::new(0.7e-3, 0.6e-3);
        let ez = z.exp();
        let e1 = (ez - 1.0) / z;
        let e2 = (z * ez - ez + 1.0) / (z * z);
        let (s1, s2) = exp_moments(z);
        assert!((s1 - e1).norm() < 1e-12);
        assert!((s2 - e2).norm() < 1e-9);
    }

    #[test]
    fn shifted_basel_matches_direct_sum() {
        let theta = 3.7;
        let direct: f64 = (0..200_000).map(|k| 1.0 / (theta + (k as f64).powi(2))).sum();
        assert!((shifted_basel(theta) - direct).abs() < 1e-5);
    }

    #[test]
    fn pairing_matches_quadrature() {
        let q = 1.0;
        let (lambda, _) = newton(3, q).unwrap();
        let g = SpatialGrid::new(4000).unwrap();
        let sq = ComplexProfile::from_fn(g, |x| eigenfunction(lambda, q, x).powi(2));
        assert!((sq.integral() - pairing(lambda, q)).norm() < 1e-5);
    }
}

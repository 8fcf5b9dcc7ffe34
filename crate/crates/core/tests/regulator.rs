use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use schroreg::exosystem::rotation;
use schroreg::kernels::{KernelGrid, KernelSet, Orientation};
use schroreg::regulator::*;
use schroreg::{
    ComplexProfile, Error, ExosystemSpec, ObservationFunctional, PlantSpec, SolvabilityError, SpatialGrid,
    SpectrumCheck,
};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn grid(n: usize) -> SpatialGrid {
    SpatialGrid::new(n).unwrap()
}

fn empty() -> (DMatrix<f64>, DVector<f64>) {
    (DMatrix::zeros(0, 0), DVector::zeros(0))
}

fn reference_plant(n: usize) -> PlantSpec {
    PlantSpec::uniform(1.0, 0.5, 1.0, grid(n)).unwrap()
}

fn reference_output(n: usize) -> ObservationFunctional {
    let g = grid(n);
    ObservationFunctional::new(c(1.0), 0.3, ComplexProfile::constant(g, c(0.5))).unwrap()
}

fn reference_exosystem() -> ExosystemSpec {
    let mut s_d = DMatrix::zeros(3, 3);
    s_d.view_mut((1, 1), (2, 2)).copy_from(&rotation(2.0));
    ExosystemSpec::new(
        s_d,
        rotation(1.0),
        DVector::from_vec(vec![1.0, 1.0, 0.0]),
        DVector::from_vec(vec![0.5, 0.0, 1.0]),
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![1.0, 1.0, 0.0, 1.0, 0.0]),
    )
    .unwrap()
}

/// Scalar reference `r = w`, `S_r = 0`, no disturbance.
fn constant_reference() -> ExosystemSpec {
    let (z, zv) = empty();
    ExosystemSpec::new(z, DMatrix::zeros(1, 1), zv.clone(), zv, DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0]))
        .unwrap()
}

/// Scalar disturbance `S_d = [s]` entering at `x = 0` only.
fn boundary_disturbance(s: f64, q_d2: f64) -> ExosystemSpec {
    let (z, zv) = empty();
    ExosystemSpec::new(
        DMatrix::from_element(1, 1, s),
        z,
        DVector::from_vec(vec![0.0]),
        DVector::from_vec(vec![q_d2]),
        zv,
        DVector::from_vec(vec![1.0]),
    )
    .unwrap()
}

#[test]
fn margin_is_one_for_evaluation_at_the_origin() {
    let p = reference_plant(100);
    let ks = KernelSet::solve(&p, 1.0, 2.0).unwrap();
    let out = ObservationFunctional::point(0.0, p.grid()).unwrap();
    let eigs = [c(0.0), I * 2.0, -I * 2.0, I * 7.5];
    let margins = check_state_solvability(&out, &ks.k_inv, &eigs, 1.0).unwrap();
    for m in margins {
        assert!((m - 1.0).norm() < 1e-14, "{m}");
    }
}

#[test]
fn degenerate_branch_uses_the_constant() {
    let g = grid(50);
    let zero = KernelGrid::zeros(g, Orientation::Lower);
    let out = ObservationFunctional::new(c(0.0), 0.0, ComplexProfile::constant(g, c(2.0))).unwrap();
    let m = check_state_solvability(&out, &zero, &[c(-1.0)], 1.0).unwrap();
    assert!((m[0] - 2.0).norm() < 1e-14);
}

#[test]
fn distributed_margin_matches_analytic_integral() {
    let g = grid(200);
    let zero = KernelGrid::zeros(g, Orientation::Lower);
    let out = ObservationFunctional::new(c(0.0), 0.0, ComplexProfile::constant(g, c(1.0))).unwrap();
    let m = check_state_solvability(&out, &zero, &[c(0.0)], 1.0).unwrap()[0];
    let nu = I.sqrt();
    let exact = nu.sinh() / nu;
    assert!((m - exact).norm() < 1e-5, "{m} vs {exact}");
}

#[test]
fn vanishing_margin_is_reported() {
    let p = reference_plant(100);
    let e = reference_exosystem();
    let ks = KernelSet::solve(&p, 1.0, 2.0).unwrap();
    let g = p.grid();
    // Margin is affine in the weight constant; choose it to cancel for λ = 2i.
    let lambda = I * 2.0;
    let point = ObservationFunctional::point(0.3, g).unwrap();
    let flat = ObservationFunctional::new(c(0.0), 0.0, ComplexProfile::constant(g, c(1.0))).unwrap();
    let m1 = state_margins(&point, &ks.k_inv, &[lambda], 1.0).unwrap()[0];
    let m2 = state_margins(&flat, &ks.k_inv, &[lambda], 1.0).unwrap()[0];
    let out = ObservationFunctional::new(c(1.0), 0.3, ComplexProfile::constant(g, -m1 / m2)).unwrap();
    match solve_m(&p, &ks, &e, &out, 1.0) {
        Err(Error::Solvability(SolvabilityError::RegulatorMargin { lambda: l, margin })) => {
            assert!((l - lambda).norm() < 1e-9);
            assert!(margin < 1e-8);
        }
        other => panic!("expected a margin failure, got {other:?}"),
    }
}

#[test]
fn zero_data_gives_zero_m() {
    let p = reference_plant(60);
    let ks = KernelSet::solve(&p, 1.0, 2.0).unwrap();
    let (z, zv) = empty();
    let e = ExosystemSpec::new(rotation(1.0), z, DVector::zeros(2), DVector::zeros(2), zv, DVector::zeros(2)).unwrap();
    let sol = solve_m(&p, &ks, &e, &reference_output(60), 1.0).unwrap();
    for (m, mw) in sol.m.iter().zip(&sol.m_w) {
        assert!(m.sup_norm() < 1e-15);
        assert!(mw.norm() < 1e-15);
    }
}

#[test]
fn constant_reference_gives_cosh_profile() {
    let g = grid(100);
    let p = PlantSpec::new(1.0, ComplexProfile::constant(g, c(0.5)), ComplexProfile::zeros(g)).unwrap();
    let ks = KernelSet::solve(&p, 1.0, 2.0).unwrap();
    let out = ObservationFunctional::point(0.0, g).unwrap();
    let sol = solve_m(&p, &ks, &constant_reference(), &out, 1.0).unwrap();
    let nu = I.sqrt();
    let exact = ComplexProfile::from_fn(g, |x| (nu * x).cosh());
    assert!(sol.m[0].sup_distance(&exact).unwrap() < 1e-13);
    assert!((sol.m_w[0] - nu * nu.sinh()).norm() < 1e-13);
}

#[test]
fn boundary_disturbance_gives_closed_form_n() {
    let g = grid(100);
    let p = PlantSpec::new(1.0, ComplexProfile::constant(g, c(0.5)), ComplexProfile::zeros(g)).unwrap();
    let c_o = 2.0;
    let ks = KernelSet::solve(&p, 1.0, c_o).unwrap();
    let sol = solve_n(&p, &ks, &boundary_disturbance(0.0, 1.0), c_o).unwrap();
    let mu = (I * c_o).sqrt();
    let gamma1 = -mu.cosh() / (mu * mu.sinh());
    let exact = ComplexProfile::from_fn(g, |x| gamma1 * (mu * x).cosh() + (mu * x).sinh() / mu);
    assert!(sol.n[0].sup_distance(&exact).unwrap() < 1e-13);
    assert!(sol.n_prime[0].last().norm() < 1e-13);
    assert!((sol.n_prime[0].first() - 1.0).norm() < 1e-13);

    let none = solve_n(&p, &ks, &boundary_disturbance(0.0, 0.0), c_o).unwrap();
    assert!(none.n[0].sup_norm() < 1e-15);
}

#[test]
fn sinh_root_in_disturbance_spectrum_is_rejected() {
    let p = reference_plant(60);
    let c_o = 2.0;
    let ks = KernelSet::solve(&p, 1.0, c_o).unwrap();
    // σ(S_d) = {-c_o ± iπ²} contains π²i - c_o.
    let s_d = DMatrix::from_row_slice(2, 2, &[-c_o, PI * PI, -PI * PI, -c_o]);
    let (z, zv) = empty();
    let e = ExosystemSpec::with_check(
        s_d,
        z,
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0]),
        zv,
        DVector::zeros(2),
        SpectrumCheck::AllowNonNeutralDisturbance,
    )
    .unwrap();
    match solve_n(&p, &ks, &e, c_o) {
        Err(Error::Solvability(SolvabilityError::ObserverSpectrumCollision { lambda, modulus })) => {
            assert!((lambda - (I * PI * PI - c_o)).norm() < 1e-9);
            assert!(modulus < 1e-8);
        }
        other => panic!("expected a collision, got {other:?}"),
    }
}

#[test]
fn degenerate_observer_branch_reports_compatibility() {
    let g = grid(60);
    let p = PlantSpec::new(1.0, ComplexProfile::constant(g, c(0.5)), ComplexProfile::zeros(g)).unwrap();
    let ks = KernelSet::solve(&p, 1.0, 0.0).unwrap();
    assert!(matches!(
        solve_n(&p, &ks, &boundary_disturbance(0.0, 1.0), 0.0),
        Err(Error::Solvability(SolvabilityError::ObserverIncompatible { .. }))
    ));
    assert!(matches!(
        solve_n(&p, &ks, &boundary_disturbance(0.0, 0.0), 0.0),
        Err(Error::Solvability(SolvabilityError::ObserverNotUnique { .. }))
    ));
}

fn reference_gains(n: usize) -> (PlantSpec, ExosystemSpec, ObservationFunctional, GainSet) {
    let p = reference_plant(n);
    let e = reference_exosystem();
    let out = reference_output(n);
    let design = DesignParameters::with_default_poles(1.0, 2.0, e.n_r(), e.n_d());
    let gains = assemble_gains(&p, &e, &out, &design).unwrap();
    (p, e, out, gains)
}

#[test]
fn reference_gains_satisfy_invariants() {
    let (_, e, _, gains) = reference_gains(200);
    let r = gains.residuals;
    for v in [r.m_ode, r.m_boundary, r.n_ode, r.n_left, r.n_right] {
        assert!(v < 1e-8, "{r:?}");
    }
    assert!(r.m_nonlocal < 1e-6, "{r:?}");
    assert_eq!(gains.l0, gains.kernels.p.at(200, 200));
    let eig_r = complex_eigenvalues(&gains.reference_error_matrix(&e).map(c)).unwrap();
    let eig_d = complex_eigenvalues(&gains.disturbance_error_matrix(&e)).unwrap();
    assert!(max_matching_distance(&eig_r, &gains.design.desired_r) < 1e-9);
    assert!(max_matching_distance(&eig_d, &gains.design.desired_d) < 1e-9);
    assert!(eig_r.iter().chain(&eig_d).all(|p| p.re < 0.0));
}

/// Centered-difference residual of `i m'' + mᵀS + c_s m - source` on interior nodes.
fn m_difference_residual(n: usize) -> f64 {
    let (p, e, _, gains) = reference_gains(n);
    let (fg, k0) = m_sources(&p, &gains.kernels).unwrap();
    let d = p.grid().spacing();
    let s = e.s();
    let (p1, p2) = (e.p1(), e.p2());
    let mut worst: f64 = 0.0;
    for x in 1..n {
        for k in 0..e.n_w() {
            let m = gains.m[k].values();
            let m2 = (m[x + 1] - 2.0 * m[x] + m[x - 1]) / (d * d);
            let coupling: Complex64 = (0..e.n_w()).map(|l| gains.m[l].values()[x] * s[(l, k)]).sum();
            let r = I * m2 + coupling + m[x] - (fg.values()[x] * p1[k] - I * k0.values()[x] * p2[k]);
            worst = worst.max(r.norm());
        }
    }
    worst
}

#[test]
fn m_satisfies_the_ode_under_finite_differences() {
    let (r100, r200) = (m_difference_residual(100), m_difference_residual(200));
    assert!(r200 < 1e-3, "{r200}");
    let ratio = r100 / r200;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn observer_gain_closed_form() {
    let g = grid(200);
    let p = PlantSpec::oracle(1.0, ComplexProfile::zeros(g), ComplexProfile::zeros(g)).unwrap();
    let e = constant_reference();
    let out = ObservationFunctional::point(0.3, g).unwrap();
    let design = DesignParameters::with_default_poles(1.0, 0.0, 1, 0);
    let gains = assemble_gains(&p, &e, &out, &design).unwrap();
    assert!((gains.l0 + I).norm() < 1e-12, "{}", gains.l0);
    let exact = ComplexProfile::from_fn(g, |x| -I * (I * (1.0 - x)).exp());
    assert!(gains.l_profile.sup_distance(&exact).unwrap() < 1e-3);
    assert!(gains.l_d.is_empty());
    assert!((gains.l_r[0] + 1.0).abs() < 1e-12);
    assert_eq!(gains.m_w.len(), 1);
}

#[test]
fn coinciding_observer_poles_violate_the_hypothesis() {
    let p = reference_plant(60);
    let e = reference_exosystem();
    let mut design = DesignParameters::with_default_poles(1.0, 2.0, 2, 3);
    design.desired_d = vec![c(-2.0), c(-3.0), c(-4.0)];
    assert!(matches!(assemble_gains(&p, &e, &reference_output(60), &design), Err(Error::Hypothesis(_))));
}

#[test]
fn gain_set_json_round_trip() {
    let (_, _, _, gains) = reference_gains(40);
    let json = gains.to_json().unwrap();
    let back = GainSet::from_json(&json).unwrap();
    assert_eq!(back.to_json().unwrap(), json);
    assert_eq!(back.l_d, gains.l_d);
}

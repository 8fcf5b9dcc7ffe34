use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use schroreg::exosystem::rotation;
use schroreg::regulator::{assemble_gains, DesignParameters, GainSet};
use schroreg::sim::*;
use schroreg::{ComplexProfile, ExosystemSpec, ObservationFunctional, PlantSpec, SpatialGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn grid(n: usize) -> SpatialGrid {
    SpatialGrid::new(n).unwrap()
}

fn free_plant(n: usize, q: f64) -> PlantSpec {
    let g = grid(n);
    PlantSpec::oracle(q, ComplexProfile::zeros(g), ComplexProfile::zeros(g)).unwrap()
}

/// Reference `r = w`, `S_r = 0`, no disturbance, `w ≡ 0`.
fn silent() -> ExosystemSpec {
    ExosystemSpec::new(
        DMatrix::zeros(0, 0),
        DMatrix::zeros(1, 1),
        DVector::zeros(0),
        DVector::zeros(0),
        DVector::from_vec(vec![1.0]),
        DVector::from_vec(vec![0.0]),
    )
    .unwrap()
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

fn reference(n: usize) -> (PlantSpec, ExosystemSpec, ObservationFunctional, GainSet) {
    let p = PlantSpec::uniform(1.0, 0.5, 1.0, grid(n)).unwrap();
    let e = reference_exosystem();
    let out = ObservationFunctional::new(c(1.0), 0.3, ComplexProfile::constant(grid(n), c(0.5))).unwrap();
    let design = DesignParameters::with_default_poles(1.0, 2.0, e.n_r(), e.n_d());
    let gains = assemble_gains(&p, &e, &out, &design).unwrap();
    (p, e, out, gains)
}

fn bump(g: SpatialGrid) -> ComplexProfile {
    ComplexProfile::from_fn(g, |x| c((PI * x).cos() + 0.5) + I * (x * x - x))
}

fn zero_signal(_: f64) -> Complex64 {
    c(0.0)
}

fn cos_error(n: usize, dt: f64) -> f64 {
    let g = grid(n);
    let cfg = SimConfig::new(g, dt, 0.1, 1_000_000).unwrap().with_snapshots();
    let z0 = ComplexProfile::from_real_fn(g, |x| (PI * x).cos());
    let s = simulate_open_loop(&free_plant(n, 0.0), &silent(), &zero_signal, &z0, &cfg).unwrap();
    let t = *s.times.last().unwrap();
    let exact = ComplexProfile::from_fn(g, |x| (I * PI * PI * t).exp() * (PI * x).cos());
    s.snapshots.last().unwrap().sup_distance(&exact).unwrap()
}

#[test]
fn cosine_mode_matches_exact_solution() {
    let fine = cos_error(200, 1e-4);
    let coarse = cos_error(100, 2e-4);
    assert!(fine < 1e-4, "{fine}");
    let ratio = coarse / fine;
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}

#[test]
fn single_step_conserves_norm_without_boundary_flux() {
    let p = free_plant(80, 0.0);
    let zero = ComplexProfile::zeros(p.grid());
    let mut z = bump(p.grid());
    for _ in 0..50 {
        let next = step_schrodinger(&z, &p, c(0.0), c(0.0), &zero, 1e-3).unwrap();
        assert!((next.norm() - z.norm()).abs() < 1e-10);
        z = next;
    }
}

#[test]
fn tiny_step_is_consistent() {
    let p = free_plant(50, 1.0);
    let z = bump(p.grid());
    let next = step_schrodinger(&z, &p, c(0.0), c(0.0), &ComplexProfile::zeros(p.grid()), 1e-12).unwrap();
    assert!(next.sup_distance(&z).unwrap() < 1e-6);
}

#[test]
fn zero_data_stays_zero() {
    let p = PlantSpec::uniform(1.0, 0.5, 1.0, grid(40)).unwrap();
    let cfg = SimConfig::new(p.grid(), 1e-3, 0.2, 10).unwrap();
    let s = simulate_open_loop(&p, &silent(), &zero_signal, &ComplexProfile::zeros(p.grid()), &cfg).unwrap();
    assert!(s.column("norm_z").unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn energy_identity_holds_in_open_loop() {
    let p = free_plant(200, 1.0);
    let dt = 1e-4;
    let cfg = SimConfig::new(p.grid(), dt, 1.0, 1).unwrap();
    let z0 = ComplexProfile::constant(p.grid(), c(1.0));
    let s = simulate_open_loop(&p, &silent(), &zero_signal, &z0, &cfg).unwrap();
    let e = s.column("E").unwrap();
    let b = s.column("z0_sq").unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..e.len() - 1 {
        if s.times[k] < 0.05 {
            continue;
        }
        let rate = (e[k + 1] - e[k - 1]) / (2.0 * dt);
        worst = worst.max((rate - b[k]).abs() / (b[k] + 1e-12));
        assert!(e[k + 1] >= e[k] - 1e-14, "energy must not decrease");
    }
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn target_decays_at_the_damping_rate() {
    let g = grid(200);
    let cfg = SimConfig::new(g, 1e-3, 2.0, 10).unwrap();
    let v0 = bump(g);
    let s = simulate_target(1.5, &v0, &zero_signal, &cfg).unwrap();
    let norm = s.column("norm_v").unwrap();
    for (t, v) in s.times.iter().zip(norm) {
        assert!((v * (1.5 * t).exp() / norm[0] - 1.0).abs() < 1e-3);
    }
    let s = simulate_target(0.0, &v0, &zero_signal, &cfg).unwrap();
    let norm = s.column("norm_v").unwrap();
    assert!(norm.iter().all(|v| (v / norm[0] - 1.0).abs() < 1e-10));
}

#[test]
fn target_cosine_mode() {
    let g = grid(200);
    let cfg = SimConfig::new(g, 1e-4, 0.1, 1_000_000).unwrap().with_snapshots();
    let s = simulate_target(1.0, &ComplexProfile::from_real_fn(g, |x| (PI * x).cos()), &zero_signal, &cfg).unwrap();
    let t = *s.times.last().unwrap();
    let exact = ComplexProfile::from_fn(g, |x| ((I * PI * PI - 1.0) * t).exp() * (PI * x).cos());
    assert!(s.transformed.last().unwrap().sup_distance(&exact).unwrap() < 1e-4);
}

#[test]
fn state_feedback_transformed_norm_decays_exactly() {
    let (p, e, out, gains) = reference(200);
    let e = e.with_initial_state(DVector::zeros(e.n_w())).unwrap();
    let cfg = SimConfig::new(p.grid(), 1e-4, 3.0, 100).unwrap();
    let s = simulate_state_feedback(&p, &e, &gains, &out, &bump(p.grid()), &cfg).unwrap();
    let v = s.column("norm_v_tilde").unwrap();
    let worst = s.times.iter().zip(v).map(|(t, x)| (x * t.exp() / v[0] - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn regulation_manifold_is_invariant() {
    let (p, e, out, gains) = reference(200);
    let z0 = regulation_manifold(&gains, e.w0()).unwrap();
    let cfg = SimConfig::new(p.grid(), 1e-4, 2.0, 100).unwrap();
    let s = simulate_state_feedback(&p, &e, &gains, &out, &z0, &cfg).unwrap();
    let worst = s.column("abs_e_y").unwrap().iter().copied().fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn exact_observer_initialization_has_no_error() {
    let (p, e, _, gains) = reference(100);
    let z0 = bump(p.grid());
    let init = ObserverInit {
        z_hat0: z0.clone(),
        w_hat0: e.w0().map(c),
    };
    let cfg = SimConfig::new(p.grid(), 1e-3, 1.0, 10).unwrap();
    let s = simulate_observer(&p, &e, &gains, ObserverDrive::StateFeedback, &cfg, &z0, &init).unwrap();
    for name in ["norm_z_tilde", "norm_wd_tilde", "norm_wr_tilde", "norm_e_tilde"] {
        let worst = s.column(name).unwrap().iter().copied().fold(0.0, f64::max);
        assert!(worst < 1e-6, "{name}: {worst}");
    }
}

#[test]
fn observer_error_decays_at_the_design_rate() {
    let (p, e, _, gains) = reference(200);
    let z0 = bump(p.grid());
    let z_hat0 = ComplexProfile::from_fn(p.grid(), |x| c(0.3 * (2.0 * PI * x).sin()));
    let w_hat0 = DVector::from_vec(vec![c(0.5), c(0.0), c(1.0), c(0.0), c(0.0)]);
    let cfg = SimConfig::new(p.grid(), 1e-4, 8.0, 100).unwrap();
    let init = ObserverInit { z_hat0, w_hat0 };
    let s = simulate_observer(&p, &e, &gains, ObserverDrive::StateFeedback, &cfg, &z0, &init).unwrap();
    let et = s.column("norm_e_tilde").unwrap();
    let worst = s
        .times
        .iter()
        .zip(et)
        .filter(|(t, _)| **t <= 1.5)
        .map(|(t, x)| (x * (2.0 * t).exp() / et[0] - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst}");
    let fit = decay_fit(&s.pairs("norm_wr_tilde").unwrap(), (4.0, 8.0)).unwrap();
    assert!((fit.rate - 1.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn open_drive_runs_the_observer() {
    let (p, e, _, gains) = reference(60);
    let z0 = bump(p.grid());
    let init = ObserverInit {
        z_hat0: ComplexProfile::zeros(p.grid()),
        w_hat0: DVector::zeros(e.n_w()),
    };
    let cfg = SimConfig::new(p.grid(), 1e-3, 1.0, 10).unwrap();
    let u = |t: f64| c((3.0 * t).sin());
    let s = simulate_observer(&p, &e, &gains, ObserverDrive::Open(&u), &cfg, &z0, &init).unwrap();
    let et = s.column("norm_e_tilde").unwrap();
    let t = *s.times.last().unwrap();
    assert!((et.last().unwrap() * (2.0 * t).exp() / et[0] - 1.0).abs() < 0.05);
    assert!(s.column("abs_u").unwrap().iter().all(|v| *v <= 1.0));
}

#[test]
fn output_feedback_regulates_and_matches_target() {
    let (p, e, out, gains) = reference(100);
    let g = p.grid();
    let z0 = bump(g);
    let init = ObserverInit {
        z_hat0: ComplexProfile::zeros(g),
        w_hat0: DVector::zeros(e.n_w()),
    };
    let cfg = SimConfig::new(g, 2e-4, 10.0, 50).unwrap().with_snapshots();
    let s = simulate_output_feedback(&p, &e, &gains, &out, &cfg, &z0, &init).unwrap();
    let ey = s.column("abs_e_y").unwrap();
    let peak = ey.iter().copied().fold(0.0, f64::max);
    let fit = decay_fit(&s.pairs("abs_e_y").unwrap(), (5.0, 10.0)).unwrap();
    println!("peak {peak} last {} fit {fit:?}", ey.last().unwrap());
    assert!(fit.rate > 0.0 && fit.r_squared > 0.8, "{fit:?}");
    assert!(*ey.last().unwrap() < 1e-2 * peak);

    let b = step_signal(&s.drive, cfg.dt);
    let tcfg = SimConfig::new(g, cfg.dt, 10.0, 50).unwrap().with_snapshots();
    let target = simulate_target(1.0, &s.transformed[0], &b, &tcfg).unwrap();
    let worst = s
        .transformed
        .iter()
        .zip(&target.transformed)
        .map(|(a, b)| a.sup_distance(b).unwrap())
        .fold(0.0, f64::max);
    println!("cross {worst}");
    assert!(worst < 5e-3, "{worst}");
}

#[test]
fn decay_fit_recovers_exact_exponential() {
    let pts: Vec<(f64, f64)> = (0..50).map(|k| {
        let t = k as f64 * 0.1;
        (t, 3.0 * (-2.0 * t).exp())
    }).collect();
    let f = decay_fit(&pts, (0.0, 5.0)).unwrap();
    assert!((f.amplitude - 3.0).abs() < 1e-10 && (f.rate - 2.0).abs() < 1e-10 && (f.r_squared - 1.0).abs() < 1e-10);
    let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 4.0)).collect();
    assert!(decay_fit(&flat, (0.0, 20.0)).unwrap().rate.abs() < 1e-14);
    let wavy: Vec<(f64, f64)> = (0..2000).map(|k| {
        let t = k as f64 * 0.005;
        (t, (-t).exp() * (2.0 + (10.0 * t).cos()))
    }).collect();
    assert!((decay_fit(&wavy, (0.0, 10.0)).unwrap().rate - 1.0).abs() < 0.1);
    assert!(decay_fit(&flat, (0.0, 5.0)).is_err());
}

#[test]
fn divergence_is_reported() {
    let p = free_plant(40, 1.0);
    let cfg = SimConfig::new(p.grid(), 1e-2, 1.0, 10).unwrap();
    let u = |_: f64| c(1e9);
    let err = simulate_open_loop(&p, &silent(), &u, &ComplexProfile::zeros(p.grid()), &cfg).unwrap_err();
    assert!(matches!(err, schroreg::Error::Divergence { .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_evolution_is_unitary(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 0usize..5) {
        let p = free_plant(40, 0.0);
        let z = ComplexProfile::from_fn(p.grid(), |x| c(a) * (k as f64 * PI * x).cos() + I * b * x * x);
        let next = step_schrodinger(&z, &p, c(0.0), c(0.0), &ComplexProfile::zeros(p.grid()), 1e-2).unwrap();
        prop_assert!((next.norm() - z.norm()).abs() < 1e-10 * (1.0 + z.norm()));
    }

    #[test]
    fn energy_never_decreases_without_inputs(q in 0.1f64..3.0) {
        let p = free_plant(30, q);
        let cfg = SimConfig::new(p.grid(), 1e-3, 0.05, 1).unwrap();
        let s = simulate_open_loop(&p, &silent(), &zero_signal, &ComplexProfile::constant(p.grid(), c(1.0)), &cfg).unwrap();
        let e = s.column("E").unwrap();
        prop_assert!(e.windows(2).all(|w| w[1] >= w[0] - 1e-14));
    }
}

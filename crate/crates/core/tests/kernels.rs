use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use schroreg::kernels::*;
use schroreg::{ComplexProfile, PlantSpec, SpatialGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn plant(q: f64, h: f64, n: usize) -> PlantSpec {
    let g = SpatialGrid::new(n).unwrap();
    PlantSpec::oracle(
        q,
        ComplexProfile::constant(g, Complex64::new(h, 0.0)),
        ComplexProfile::constant(g, Complex64::new(1.0, 0.0)),
    )
    .unwrap()
}

fn control_oracle(grid: SpatialGrid, q: f64) -> KernelGrid {
    KernelGrid::from_fn(grid, Orientation::Lower, |x, xi| -I * q * (I * q * (x - xi)).exp())
}

fn observer_oracle(grid: SpatialGrid, q: f64) -> KernelGrid {
    KernelGrid::from_fn(grid, Orientation::Upper, |x, xi| -I * q * (I * q * (xi - x)).exp())
}

/// Random combination of the first few cosine/sine modes, scaled to unit sup norm.
fn random_profile(grid: SpatialGrid, rng: &mut impl Rng) -> ComplexProfile {
    let coef: Vec<(Complex64, Complex64)> = (0..4)
        .map(|_| {
            (
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let z = ComplexProfile::from_fn(grid, |x| {
        coef.iter()
            .enumerate()
            .map(|(k, (a, b))| a * (k as f64 * PI * x).cos() + b * (k as f64 * PI * x).sin())
            .sum()
    });
    let s = z.sup_norm();
    z.scaled(Complex64::new(1.0 / s, 0.0))
}

#[test]
fn control_kernel_matches_closed_form_at_second_order() {
    let err = |n: usize| {
        let p = plant(1.0, 0.0, n);
        let k = solve_control_kernel(&p, 0.0, p.grid()).unwrap();
        k.sup_distance(&control_oracle(p.grid(), 1.0)).unwrap()
    };
    let (e100, e200) = (err(100), err(200));
    assert!(e200 < 5e-4, "error {e200}");
    let ratio = e100 / e200;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn observer_kernel_matches_closed_form_at_second_order() {
    let err = |n: usize| {
        let p = plant(1.0, 0.0, n);
        let k = solve_observer_kernel(&p, 0.0, p.grid()).unwrap();
        assert_eq!(k.orientation(), Orientation::Upper);
        k.sup_distance(&observer_oracle(p.grid(), 1.0)).unwrap()
    };
    let (e100, e200) = (err(100), err(200));
    assert!(e200 < 5e-4, "error {e200}");
    let ratio = e100 / e200;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn vanishing_data_gives_zero_kernels() {
    let p = plant(0.0, 0.0, 32);
    assert_eq!(solve_control_kernel(&p, 0.0, p.grid()).unwrap().sup_norm(), 0.0);
    assert_eq!(solve_observer_kernel(&p, 0.0, p.grid()).unwrap().sup_norm(), 0.0);
}

#[test]
fn diagonal_is_imposed_exactly() {
    let g = SpatialGrid::new(64).unwrap();
    let p = PlantSpec::new(
        0.7,
        ComplexProfile::from_real_fn(g, |x| 0.3 + (3.0 * x).sin()),
        ComplexProfile::constant(g, Complex64::new(1.0, 0.0)),
    )
    .unwrap();
    for c in [0.0, 1.0, 2.5] {
        let expect = diagonal_data(&p, c);
        // Independent cumulative trapezoid of h + c.
        let mut acc = 0.0;
        for i in 0..=64 {
            if i > 0 {
                acc += 0.5 * g.spacing() * (p.h().values()[i - 1].re + p.h().values()[i].re + 2.0 * c);
            }
            let v = Complex64::new(0.0, -0.5 * acc - 0.7);
            assert!((expect.values()[i] - v).norm() < 1e-14);
        }
        let k = solve_control_kernel(&p, c, g).unwrap();
        let pk = solve_observer_kernel(&p, c, g).unwrap();
        assert!(k.diagonal().sup_distance(&expect).unwrap() < 1e-13);
        assert!(pk.diagonal().sup_distance(&expect).unwrap() < 1e-13);
    }
}

#[test]
fn reciprocal_kernel_basics() {
    let g = SpatialGrid::new(40).unwrap();
    for o in [Orientation::Lower, Orientation::Upper] {
        let zero = KernelGrid::zeros(g, o);
        assert_eq!(solve_reciprocal_kernel(&zero).unwrap().sup_norm(), 0.0);
    }
    let p = plant(1.0, 0.5, 40);
    let set = KernelSet::solve(&p, 1.0, 2.0).unwrap();
    assert!(set.k_inv.diagonal().sup_distance(&set.k.diagonal()).unwrap() < 1e-15);
    assert!(set.p_inv.diagonal().sup_distance(&set.p.diagonal()).unwrap() < 1e-15);
    assert_eq!(set.k_inv.orientation(), Orientation::Lower);
    assert_eq!(set.p_inv.orientation(), Orientation::Upper);
}

#[test]
fn forward_transform_oracles() {
    let p = plant(1.0, 0.0, 200);
    let g = p.grid();
    let zero = KernelGrid::zeros(g, Orientation::Lower);
    let z = ComplexProfile::from_fn(g, |x| Complex64::new(x.cos(), x * x));
    assert_eq!(apply_forward(&zero, &z).unwrap(), z);
    assert_eq!(apply_inverse(&zero, &z).unwrap(), z);
    let k = solve_control_kernel(&p, 0.0, g).unwrap();
    let zeros = ComplexProfile::zeros(g);
    assert_eq!(apply_forward(&k, &zeros).unwrap().sup_norm(), 0.0);
    assert_eq!(apply_inverse(&k, &zeros).unwrap().sup_norm(), 0.0);

    // 1 - ∫₀ˣ (-i e^{i(x-ξ)}) dξ = e^{ix}
    let one = ComplexProfile::constant(g, Complex64::new(1.0, 0.0));
    let v = apply_forward(&k, &one).unwrap();
    let expect = ComplexProfile::from_fn(g, |x| (I * x).exp());
    assert!(v.sup_distance(&expect).unwrap() < 1e-5);
}

#[test]
fn observer_transform_oracles() {
    let p = plant(1.0, 0.0, 200);
    let g = p.grid();
    let zero = KernelGrid::zeros(g, Orientation::Upper);
    let e = ComplexProfile::from_fn(g, |x| Complex64::new(x.sin(), 1.0 - x));
    assert_eq!(apply_observer_forward(&zero, &e).unwrap(), e);
    let pk = solve_observer_kernel(&p, 0.0, g).unwrap();
    assert_eq!(apply_observer_forward(&pk, &ComplexProfile::zeros(g)).unwrap().sup_norm(), 0.0);
    // 1 - ∫ₓ¹ (-i e^{i(ξ-x)}) dξ = e^{i(1-x)}
    let one = ComplexProfile::constant(g, Complex64::new(1.0, 0.0));
    let v = apply_observer_forward(&pk, &one).unwrap();
    let expect = ComplexProfile::from_fn(g, |x| (I * (1.0 - x)).exp());
    assert!(v.sup_distance(&expect).unwrap() < 1e-5);
}

#[test]
fn transforms_reject_wrong_orientation_and_grid() {
    let g = SpatialGrid::new(16).unwrap();
    let z = ComplexProfile::zeros(g);
    assert!(apply_forward(&KernelGrid::zeros(g, Orientation::Upper), &z).is_err());
    assert!(apply_observer_forward(&KernelGrid::zeros(g, Orientation::Lower), &z).is_err());
    let other = ComplexProfile::zeros(SpatialGrid::new(17).unwrap());
    assert!(apply_forward(&KernelGrid::zeros(g, Orientation::Lower), &other).is_err());
}

#[test]
fn closed_form_round_trip() {
    let p = plant(1.0, 0.0, 200);
    let k = solve_control_kernel(&p, 0.0, p.grid()).unwrap();
    let k_inv = solve_reciprocal_kernel(&k).unwrap();
    let z = ComplexProfile::from_real_fn(p.grid(), |x| (PI * x).sin());
    let back = apply_inverse(&k_inv, &apply_forward(&k, &z).unwrap()).unwrap();
    assert!(back.sup_distance(&z).unwrap() < 1e-6);
}

#[test]
fn reference_round_trips_on_random_profiles() {
    let p = plant(1.0, 0.5, 200);
    let set = KernelSet::solve(&p, 1.0, 2.0).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(20);
    for _ in 0..20 {
        let z = random_profile(p.grid(), &mut rng);
        let back = apply_inverse(&set.k_inv, &apply_forward(&set.k, &z).unwrap()).unwrap();
        assert!(back.sup_distance(&z).unwrap() < 1e-6);
        let back = apply_observer_inverse(&set.p_inv, &apply_observer_forward(&set.p, &z).unwrap()).unwrap();
        assert!(back.sup_distance(&z).unwrap() < 1e-6);
    }
}

#[test]
fn feedback_trace_oracles() {
    for (c_s, q) in [(1.0, 1.0), (0.4, 2.0)] {
        let p = plant(q, 0.0, 64);
        let k = solve_control_kernel(&p, c_s, p.grid()).unwrap();
        let (k11, _) = kernel_feedback_trace(&k).unwrap();
        assert!((k11 + I * (c_s / 2.0 + q)).norm() < 1e-13);
    }

    let p = plant(1.0, 0.0, 200);
    let k = solve_control_kernel(&p, 0.0, p.grid()).unwrap();
    let (_, kx) = kernel_feedback_trace(&k).unwrap();
    let expect = ComplexProfile::from_fn(p.grid(), |xi| (I * (1.0 - xi)).exp());
    assert!(kx.sup_distance(&expect).unwrap() < 1e-3);

    let zero = KernelGrid::zeros(p.grid(), Orientation::Lower);
    let (k11, kx) = kernel_feedback_trace(&zero).unwrap();
    assert_eq!(k11, Complex64::new(0.0, 0.0));
    assert_eq!(kx.sup_norm(), 0.0);

    let coarse = KernelGrid::zeros(SpatialGrid::new(6).unwrap(), Orientation::Lower);
    assert!(matches!(kernel_feedback_trace(&coarse), Err(schroreg::Error::Grid(_))));
}

#[test]
fn residuals_are_second_order() {
    let p = plant(1.0, 0.0, 200);
    let k = solve_control_kernel(&p, 0.0, p.grid()).unwrap();
    assert!(kernel_residual(&k, &p, 0.0, KernelSide::Control).unwrap() < 1e-3);
    let pk = solve_observer_kernel(&p, 0.0, p.grid()).unwrap();
    assert!(kernel_residual(&pk, &p, 0.0, KernelSide::Observer).unwrap() < 1e-3);

    let z = plant(0.0, 0.0, 50);
    let zero = KernelGrid::zeros(z.grid(), Orientation::Lower);
    assert_eq!(kernel_residual(&zero, &z, 0.0, KernelSide::Control).unwrap(), 0.0);

    let res = |n: usize| {
        let p = plant(1.0, 0.5, n);
        let set = KernelSet::solve(&p, 1.0, 2.0).unwrap();
        (
            kernel_residual(&set.k, &p, 1.0, KernelSide::Control).unwrap(),
            kernel_residual(&set.p, &p, 2.0, KernelSide::Observer).unwrap(),
            kernel_edge_residual(&set.k, &p, KernelSide::Control).unwrap(),
            kernel_edge_residual(&set.p, &p, KernelSide::Observer).unwrap(),
        )
    };
    let (a, b) = (res(100), res(200));
    for (r100, r200) in [(a.0, b.0), (a.1, b.1), (a.2, b.2), (a.3, b.3)] {
        let ratio = r100 / r200;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio} ({r100:e}, {r200:e})");
    }
}

#[test]
fn iteration_counts_are_finite_and_monotone_in_data_size() {
    let mut last = 0;
    for q in [0.25, 0.5, 1.0, 2.0] {
        let p = plant(q, 0.5, 100);
        let (_, stats) = solve_control_kernel_with(&p, 1.0, p.grid(), &SolverOptions::default()).unwrap();
        assert!(stats.iterations < 500 && stats.update < 1e-12);
        assert!(stats.iterations >= last);
        last = stats.iterations;
    }
}

#[test]
fn non_convergence_is_reported() {
    let p = plant(1.0, 0.5, 32);
    let opts = SolverOptions { tolerance: 1e-12, max_iterations: 3 };
    match solve_control_kernel_with(&p, 1.0, p.grid(), &opts) {
        Err(schroreg::Error::KernelSolve { iterations, update }) => {
            assert_eq!(iterations, 3);
            assert!(update > 1e-12);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn coarse_or_mismatched_grids_are_rejected() {
    let p = plant(1.0, 0.0, 6);
    assert!(matches!(solve_control_kernel(&p, 1.0, p.grid()), Err(schroreg::Error::Grid(_))));
    let p = plant(1.0, 0.0, 16);
    assert!(solve_control_kernel(&p, 1.0, SpatialGrid::new(20).unwrap()).is_err());
}

#[test]
fn csv_dump_lists_the_triangle() {
    let p = plant(1.0, 0.0, 8);
    let k = solve_control_kernel(&p, 0.0, p.grid()).unwrap();
    let csv = k.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,xi,re,im");
    assert_eq!(lines.len(), 1 + 9 * 10 / 2);
    assert!(!csv.contains('\r'));
    let fields: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(fields[..2], [0.0, 0.0]);
    assert!((fields[3] + 1.0).abs() < 1e-15);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_within_ten_spacing_squared(
            q in 0.1f64..3.0, h in -1.0f64..2.0, c in 0.0f64..3.0, seed in 0u64..1000,
        ) {
            let p = plant(q, h, 40);
            let set = KernelSet::solve(&p, c, c).unwrap();
            let tol = 10.0 * p.grid().spacing().powi(2);
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let z = random_profile(p.grid(), &mut rng);
            let back = apply_inverse(&set.k_inv, &apply_forward(&set.k, &z).unwrap()).unwrap();
            prop_assert!(back.sup_distance(&z).unwrap() < tol);
            let back = apply_observer_inverse(&set.p_inv, &apply_observer_forward(&set.p, &z).unwrap()).unwrap();
            prop_assert!(back.sup_distance(&z).unwrap() < tol);
        }

        #[test]
        fn transforms_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
            let p = plant(1.0, 0.5, 24);
            let set = KernelSet::solve(&p, 1.0, 2.0).unwrap();
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let x = random_profile(p.grid(), &mut rng);
            let y = random_profile(p.grid(), &mut rng);
            let ca = Complex64::new(a, 0.0);
            let cb = Complex64::new(0.0, b);
            let combo = x.scaled(ca).add_scaled(&y, cb).unwrap();
            let lhs = apply_forward(&set.k, &combo).unwrap();
            let rhs = apply_forward(&set.k, &x).unwrap().scaled(ca)
                .add_scaled(&apply_forward(&set.k, &y).unwrap(), cb).unwrap();
            prop_assert!(lhs.sup_distance(&rhs).unwrap() < 1e-12);
        }
    }
}

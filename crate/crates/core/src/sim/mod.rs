//! Crank–Nicolson simulation of the plant, the closed loops, the observer and the target systems.
//!
//! Boundary conditions use ghost nodes, `z_{-1} = z_1 - 2Δ(-iq z_0 + d₂)` and
//! `z_{N+1} = z_{N-1} + 2Δu`, so boundary data enters rows `0` and `N` as `(2i/Δ) d₂` and
//! `(-2i/Δ) u`. Feedback and output injection are rank-one terms treated implicitly.

mod linear;
mod series;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use series::{decay_fit, profiles_csv, DecayFit, SimConfig, TimeSeries};

use linear::{CrankNicolson, LinearModel, Tridiagonal};

use crate::error::{Error, Result};
use crate::exosystem::ExosystemSpec;
use crate::grid::{corrected_weights, ComplexProfile, SpatialGrid};
use crate::kernels::{apply_forward, apply_inverse, apply_observer_inverse};
use crate::plant::{evaluate_ce, ObservationFunctional, PlantSpec};
use crate::regulator::GainSet;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);
/// Any recorded norm above this aborts the run.
const DIVERGENCE: f64 = 1e6;

/// `-i D + diag(h)` with the Robin row at `x = 0` and the Neumann row at `x = 1`.
fn schrodinger_operator(h: &[C], q: f64, grid: SpatialGrid) -> Tridiagonal {
    let n = grid.n_cells();
    let d = grid.spacing();
    let s = -I / (d * d);
    let mut sub = vec![s; n + 1];
    let mut sup = vec![s; n + 1];
    let mut diag: Vec<C> = h.iter().map(|hv| -2.0 * s + hv).collect();
    sub[0] = ZERO;
    sup[0] = 2.0 * s;
    diag[0] += 2.0 * q / d;
    sub[n] = 2.0 * s;
    sup[n] = ZERO;
    Tridiagonal { sub, diag, sup }
}

/// Coefficient of `d₂` in row 0 and of `u` in row `N`.
fn boundary_gains(grid: SpatialGrid) -> (C, C) {
    let d = grid.spacing();
    (2.0 * I / d, -2.0 * I / d)
}

fn unit(len: usize, idx: usize, value: C) -> DVector<C> {
    let mut v = DVector::zeros(len);
    v[idx] = value;
    v
}

fn embed(len: usize, offset: usize, values: &[C]) -> DVector<C> {
    let mut v = DVector::zeros(len);
    v.rows_mut(offset, values.len()).copy_from_slice(values);
    v
}

fn block(x: &DVector<C>, offset: usize, grid: SpatialGrid) -> ComplexProfile {
    ComplexProfile::new(grid, x.rows(offset, grid.len()).iter().copied().collect()).expect("length")
}

/// Weights `a` with `k(1,1) z(1) + ∫ k_x(1,ξ) z(ξ) dξ = Σ a_j z_j`.
fn feedback_row(gains: &GainSet, grid: SpatialGrid) -> Vec<C> {
    let n = grid.n_cells();
    let d = grid.spacing();
    let w = corrected_weights(n);
    let mut a: Vec<C> = gains.kx1.values().iter().zip(&w).map(|(k, wj)| k * (wj * d)).collect();
    a[n] += gains.k11;
    a
}

fn dot(a: &[C], z: &[C]) -> C {
    a.iter().zip(z).map(|(x, y)| x * y).sum()
}

fn real_dot(a: &[C], w: &DVector<f64>) -> C {
    a.iter().zip(w.iter()).map(|(x, y)| x * *y).sum()
}

fn energy(z: &ComplexProfile) -> f64 {
    0.5 * z.norm().powi(2)
}

fn check_finite(t: f64, quantity: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value < DIVERGENCE) {
        return Err(Error::Divergence {
            time: t,
            quantity: quantity.to_string(),
            value,
        });
    }
    Ok(())
}

fn check_grid(cfg: &SimConfig, plant: &PlantSpec) -> Result<()> {
    cfg.grid.ensure_same(&plant.grid(), "simulation grid")
}

/// Step loop shared by every run; `record` sees `(t, x)` at step 0, every `record_every`
/// steps and at the end, and `each` sees every state.
fn integrate(
    cn: &CrankNicolson,
    x0: DVector<C>,
    cfg: &SimConfig,
    forcing: impl Fn(f64) -> Result<DVector<C>>,
    mut record: impl FnMut(f64, &DVector<C>) -> Result<()>,
    mut each: impl FnMut(f64, &DVector<C>),
) -> Result<DVector<C>> {
    let steps = cfg.steps();
    let dt = cn.dt();
    let mut x = x0;
    let mut f_old = forcing(0.0)?;
    each(0.0, &x);
    record(0.0, &x)?;
    for k in 1..=steps {
        let t = k as f64 * dt;
        let f_new = forcing(t)?;
        let avg = (&f_old + &f_new) * C::new(0.5, 0.0);
        x = cn.step(&x, &avg);
        f_old = f_new;
        each(t, &x);
        let peak = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        check_finite(t, "state", peak)?;
        if k % cfg.record_every == 0 || k == steps {
            record(t, &x)?;
        }
    }
    Ok(x)
}

/// One Crank–Nicolson step of `z_t = -i z_xx + h z + source` with `z_x(0) = -iq z(0) + d₂`
/// and `z_x(1) = u`; boundary data and source are the half-step values.
pub fn step_schrodinger(
    z: &ComplexProfile,
    plant: &PlantSpec,
    bc_left: C,
    bc_right: C,
    source: &ComplexProfile,
    dt: f64,
) -> Result<ComplexProfile> {
    let grid = plant.grid();
    grid.ensure_same(&z.grid(), "step_schrodinger state")?;
    grid.ensure_same(&source.grid(), "step_schrodinger source")?;
    let model = LinearModel {
        pde: vec![schrodinger_operator(plant.h().values(), plant.q(), grid)],
        dense: DMatrix::zeros(0, 0),
        rank_one: Vec::new(),
    };
    let cn = CrankNicolson::new(model, dt)?;
    let (b0, bn) = boundary_gains(grid);
    let mut f = DVector::from_column_slice(source.values());
    f[0] += b0 * bc_left;
    f[grid.n_cells()] += bn * bc_right;
    let x = cn.step(&DVector::from_column_slice(z.values()), &f);
    Ok(block(&x, 0, grid))
}

/// Plant with exosystem inputs and an open-loop control signal.
pub fn simulate_open_loop(
    plant: &PlantSpec,
    e: &ExosystemSpec,
    u: &dyn Fn(f64) -> C,
    z0: &ComplexProfile,
    cfg: &SimConfig,
) -> Result<TimeSeries> {
    check_grid(cfg, plant)?;
    let grid = cfg.grid;
    let n = grid.n_cells();
    let len = grid.len();
    let model = LinearModel {
        pde: vec![schrodinger_operator(plant.h().values(), plant.q(), grid)],
        dense: DMatrix::zeros(0, 0),
        rank_one: Vec::new(),
    };
    let cn = CrankNicolson::new(model, cfg.dt)?;
    let (b0, bn) = boundary_gains(grid);
    let g = DVector::from_column_slice(plant.g().values());
    let forcing = |t: f64| -> Result<DVector<C>> {
        let (d1, d2, _) = e.outputs(&e.state(t)?);
        let mut f = &g * C::new(d1, 0.0);
        f[0] += b0 * d2;
        f[n] += bn * u(t);
        Ok(f)
    };
    let mut series = TimeSeries::with_columns(cfg.dt, &["E", "z0_sq", "abs_y_m", "abs_u", "d1", "d2", "r", "norm_z"]);
    integrate(
        &cn,
        DVector::from_column_slice(z0.values()),
        cfg,
        forcing,
        |t, x| {
            let z = block(x, 0, grid);
            let (d1, d2, r) = e.outputs(&e.state(t)?);
            series.push_row(
                t,
                &[energy(&z), z.first().norm_sqr(), z.last().norm(), u(t).norm(), d1, d2, r, z.norm()],
            )?;
            if cfg.keep_snapshots {
                series.snapshots.push(z);
            }
            Ok(())
        },
        |_, _| {},
    )?;
    let _ = len;
    Ok(series)
}

/// `Σ_j m_j(x) w_j`.
fn manifold_profile(gains: &GainSet, w: &[C], grid: SpatialGrid) -> Result<ComplexProfile> {
    let mut out = ComplexProfile::zeros(grid);
    for (m, wj) in gains.m.iter().zip(w) {
        out = out.add_scaled(m, *wj)?;
    }
    Ok(out)
}

/// `ṽ = F[z] - mᵀ w`.
pub fn transformed_state(gains: &GainSet, z: &ComplexProfile, w: &[C]) -> Result<ComplexProfile> {
    apply_forward(&gains.kernels.k, z)?.add_scaled(&manifold_profile(gains, w, z.grid())?, -ONE)
}

/// `ẽ = F_o⁻¹[z̃] - nᵀ w̃_d`.
pub fn observer_error_state(gains: &GainSet, z_tilde: &ComplexProfile, wd_tilde: &[C]) -> Result<ComplexProfile> {
    let mut out = apply_observer_inverse(&gains.kernels.p_inv, z_tilde)?;
    for (n, w) in gains.n.iter().zip(wd_tilde) {
        out = out.add_scaled(n, -*w)?;
    }
    Ok(out)
}

/// `z = F⁻¹[mᵀ w]`, the point of the regulation manifold above `w`.
pub fn regulation_manifold(gains: &GainSet, w: &DVector<f64>) -> Result<ComplexProfile> {
    let grid = gains.kernels.grid();
    let wc: Vec<C> = w.iter().map(|v| C::new(*v, 0.0)).collect();
    apply_inverse(&gains.kernels.k_inv, &manifold_profile(gains, &wc, grid)?)
}

fn to_complex(w: &DVector<f64>) -> Vec<C> {
    w.iter().map(|v| C::new(*v, 0.0)).collect()
}

/// State feedback `u = k(1,1) z(1) + ∫ k_x(1,ξ) z(ξ) dξ + m_wᵀ w`.
pub fn simulate_state_feedback(
    plant: &PlantSpec,
    e: &ExosystemSpec,
    gains: &GainSet,
    c: &ObservationFunctional,
    z0: &ComplexProfile,
    cfg: &SimConfig,
) -> Result<TimeSeries> {
    check_grid(cfg, plant)?;
    let grid = cfg.grid;
    let n = grid.n_cells();
    let len = grid.len();
    let (b0, bn) = boundary_gains(grid);
    let a = feedback_row(gains, grid);
    let model = LinearModel {
        pde: vec![schrodinger_operator(plant.h().values(), plant.q(), grid)],
        dense: DMatrix::zeros(0, 0),
        rank_one: vec![(unit(len, n, bn), DVector::from_column_slice(&a))],
    };
    let cn = CrankNicolson::new(model, cfg.dt)?;
    let g = DVector::from_column_slice(plant.g().values());
    let forcing = |t: f64| -> Result<DVector<C>> {
        let w = e.state(t)?;
        let (d1, d2, _) = e.outputs(&w);
        let mut f = &g * C::new(d1, 0.0);
        f[0] += b0 * d2;
        f[n] += bn * real_dot(&gains.m_w, &w);
        Ok(f)
    };
    let mut series = TimeSeries::with_columns(
        cfg.dt,
        &[
            "E", "abs_e_y", "re_e_y", "im_e_y", "abs_u", "re_u", "im_u", "d1", "d2", "r", "abs_y_m", "z0_sq", "norm_z",
            "norm_v_tilde",
        ],
    );
    integrate(
        &cn,
        DVector::from_column_slice(z0.values()),
        cfg,
        forcing,
        |t, x| {
            let z = block(x, 0, grid);
            let w = e.state(t)?;
            let (d1, d2, r) = e.outputs(&w);
            let ey = evaluate_ce(c, &z)? - r;
            let u = dot(&a, z.values()) + real_dot(&gains.m_w, &w);
            let v = transformed_state(gains, &z, &to_complex(&w))?;
            series.push_row(
                t,
                &[
                    energy(&z),
                    ey.norm(),
                    ey.re,
                    ey.im,
                    u.norm(),
                    u.re,
                    u.im,
                    d1,
                    d2,
                    r,
                    z.last().norm(),
                    z.first().norm_sqr(),
                    z.norm(),
                    v.norm(),
                ],
            )?;
            series.w.push(w.iter().copied().collect());
            if cfg.keep_snapshots {
                series.snapshots.push(z);
                series.transformed.push(v);
            }
            Ok(())
        },
        |_, _| {},
    )?;
    Ok(series)
}

/// How the plant control is generated during an observer run.
pub enum ObserverDrive<'a> {
    /// Known open-loop signal.
    Open(&'a dyn Fn(f64) -> C),
    /// State feedback from the true `z` and `w`.
    StateFeedback,
}

/// Observer initial condition.
#[derive(Debug, Clone)]
pub struct ObserverInit {
    pub z_hat0: ComplexProfile,
    /// `[ŵ_d; ŵ_r]`.
    pub w_hat0: DVector<C>,
}

/// Shared pieces of the plant + observer model.
struct ObserverModel {
    len: usize,
    n_nodes: usize,
    a: Vec<C>,
    model: LinearModel,
}

fn observer_model(plant: &PlantSpec, e: &ExosystemSpec, gains: &GainSet, grid: SpatialGrid) -> Result<ObserverModel> {
    let n_nodes = grid.len();
    let n = grid.n_cells();
    let (nd, nr) = (e.n_d(), e.n_r());
    let nw = nd + nr;
    let len = 2 * n_nodes + nw;
    let (b0, bn) = boundary_gains(grid);
    let lop = schrodinger_operator(plant.h().values(), plant.q(), grid);

    let mut dense = DMatrix::<C>::zeros(nw, nw);
    dense.view_mut((0, 0), (nd, nd)).copy_from(&e.s_d().map(|v| C::new(v, 0.0)));
    let a_r = gains.reference_error_matrix(e).map(|v| C::new(v, 0.0));
    dense.view_mut((nd, nd), (nr, nr)).copy_from(&a_r);

    let zhat = n_nodes;
    let what = 2 * n_nodes;
    // Output injection ε = ẑ(1) - z(1).
    let mut inj_col = embed(len, zhat, gains.l_profile.values());
    inj_col[zhat + n] += gains.l0 * bn;
    for (k, l) in gains.l_d.iter().enumerate() {
        inj_col[what + k] = *l;
    }
    let mut inj_row = unit(len, zhat + n, ONE);
    inj_row[n] = -ONE;
    // Disturbance estimate driving ẑ.
    let g_col = embed(len, zhat, plant.g().values());
    let mut g_row = DVector::zeros(len);
    let mut b_row = DVector::zeros(len);
    for k in 0..nd {
        g_row[what + k] = C::new(e.q_d1()[k], 0.0);
        b_row[what + k] = C::new(e.q_d2()[k], 0.0);
    }
    let b_col = unit(len, zhat, b0);

    Ok(ObserverModel {
        len,
        n_nodes,
        a: feedback_row(gains, grid),
        model: LinearModel {
            pde: vec![lop.clone(), lop],
            dense,
            rank_one: vec![(inj_col, inj_row), (g_col, g_row), (b_col, b_row)],
        },
    })
}

fn observer_initial(z0: &ComplexProfile, init: &ObserverInit, e: &ExosystemSpec, len: usize) -> Result<DVector<C>> {
    z0.grid().ensure_same(&init.z_hat0.grid(), "observer initial state")?;
    if init.w_hat0.len() != e.n_w() {
        return Err(Error::Dimension(format!(
            "w_hat0 has length {}, expected {}",
            init.w_hat0.len(),
            e.n_w()
        )));
    }
    let n_nodes = z0.grid().len();
    let mut x = DVector::zeros(len);
    x.rows_mut(0, n_nodes).copy_from_slice(z0.values());
    x.rows_mut(n_nodes, n_nodes).copy_from_slice(init.z_hat0.values());
    x.rows_mut(2 * n_nodes, e.n_w()).copy_from(&init.w_hat0);
    Ok(x)
}

struct ObserverSnapshot {
    z: ComplexProfile,
    z_hat: ComplexProfile,
    w: DVector<f64>,
    w_hat: Vec<C>,
    z_tilde: ComplexProfile,
    w_tilde: Vec<C>,
}

fn observer_snapshot(x: &DVector<C>, e: &ExosystemSpec, grid: SpatialGrid, t: f64) -> Result<ObserverSnapshot> {
    let n_nodes = grid.len();
    let z = block(x, 0, grid);
    let z_hat = block(x, n_nodes, grid);
    let w = e.state(t)?;
    let w_hat: Vec<C> = x.rows(2 * n_nodes, e.n_w()).iter().copied().collect();
    let z_tilde = z_hat.add_scaled(&z, -ONE)?;
    let w_tilde: Vec<C> = w_hat.iter().zip(w.iter()).map(|(a, b)| a - b).collect();
    Ok(ObserverSnapshot {
        z,
        z_hat,
        w,
        w_hat,
        z_tilde,
        w_tilde,
    })
}

fn block_norm(v: &[C]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Plant (truth) plus the reference and plant observers driven by `y_m = z(1)` and `r`.
pub fn simulate_observer(
    plant: &PlantSpec,
    e: &ExosystemSpec,
    gains: &GainSet,
    drive: ObserverDrive<'_>,
    cfg: &SimConfig,
    z0: &ComplexProfile,
    init: &ObserverInit,
) -> Result<TimeSeries> {
    check_grid(cfg, plant)?;
    let grid = cfg.grid;
    let n = grid.n_cells();
    let nd = e.n_d();
    let (b0, bn) = boundary_gains(grid);
    let ObserverModel {
        len,
        n_nodes,
        a,
        mut model,
    } = observer_model(plant, e, gains, grid)?;
    let closed = matches!(drive, ObserverDrive::StateFeedback);
    if closed {
        let mut col = unit(len, n, bn);
        col[n_nodes + n] = bn;
        model.rank_one.push((col, embed(len, 0, &a)));
    }
    let cn = CrankNicolson::new(model, cfg.dt)?;
    let g = plant.g().values();
    let l_r: Vec<f64> = gains.l_r.clone();
    let forcing = |t: f64| -> Result<DVector<C>> {
        let w = e.state(t)?;
        let (d1, d2, r) = e.outputs(&w);
        let mut f = embed(len, 0, g) * C::new(d1, 0.0);
        f[0] += b0 * d2;
        let u_ext = match &drive {
            ObserverDrive::Open(u) => u(t),
            ObserverDrive::StateFeedback => real_dot(&gains.m_w, &w),
        };
        f[n] += bn * u_ext;
        f[n_nodes + n] += bn * u_ext;
        for (k, l) in l_r.iter().enumerate() {
            f[2 * n_nodes + nd + k] -= C::new(l * r, 0.0);
        }
        Ok(f)
    };
    let mut series = TimeSeries::with_columns(
        cfg.dt,
        &["E", "norm_z", "norm_z_hat", "norm_z_tilde", "norm_wd_tilde", "norm_wr_tilde", "norm_e_tilde", "abs_u"],
    );
    integrate(
        &cn,
        observer_initial(z0, init, e, len)?,
        cfg,
        forcing,
        |t, x| {
            let s = observer_snapshot(x, e, grid, t)?;
            let et = observer_error_state(gains, &s.z_tilde, &s.w_tilde[..nd])?;
            let u = match &drive {
                ObserverDrive::Open(u) => u(t),
                ObserverDrive::StateFeedback => dot(&a, s.z.values()) + real_dot(&gains.m_w, &s.w),
            };
            series.push_row(
                t,
                &[
                    energy(&s.z),
                    s.z.norm(),
                    s.z_hat.norm(),
                    s.z_tilde.norm(),
                    block_norm(&s.w_tilde[..nd]),
                    block_norm(&s.w_tilde[nd..]),
                    et.norm(),
                    u.norm(),
                ],
            )?;
            series.w.push(s.w.iter().copied().collect());
            series.w_hat.push(s.w_hat);
            if cfg.keep_snapshots {
                series.snapshots.push(s.z);
                series.observer_snapshots.push(s.z_hat);
                series.transformed.push(et);
            }
            Ok(())
        },
        |_, _| {},
    )?;
    Ok(series)
}

/// Output feedback `u = k(1,1) ẑ(1) + ∫ k_x(1,ξ) ẑ(ξ) dξ + m_wᵀ ŵ` with both observers.
///
/// `drive` records `k(1,1) z̃(1) + ∫ k_x(1,ξ) z̃ + m_wᵀ w̃` at every step, the right boundary
/// input of the `ṽ` system.
pub fn simulate_output_feedback(
    plant: &PlantSpec,
    e: &ExosystemSpec,
    gains: &GainSet,
    c: &ObservationFunctional,
    cfg: &SimConfig,
    z0: &ComplexProfile,
    init: &ObserverInit,
) -> Result<TimeSeries> {
    check_grid(cfg, plant)?;
    let grid = cfg.grid;
    let n = grid.n_cells();
    let nd = e.n_d();
    let (b0, bn) = boundary_gains(grid);
    let ObserverModel {
        len,
        n_nodes,
        a,
        mut model,
    } = observer_model(plant, e, gains, grid)?;
    let mut col = unit(len, n, bn);
    col[n_nodes + n] = bn;
    let mut row = embed(len, n_nodes, &a);
    for (k, m) in gains.m_w.iter().enumerate() {
        row[2 * n_nodes + k] = *m;
    }
    model.rank_one.push((col, row));
    let cn = CrankNicolson::new(model, cfg.dt)?;
    let g = plant.g().values();
    let l_r: Vec<f64> = gains.l_r.clone();
    let forcing = |t: f64| -> Result<DVector<C>> {
        let w = e.state(t)?;
        let (d1, d2, r) = e.outputs(&w);
        let mut f = embed(len, 0, g) * C::new(d1, 0.0);
        f[0] += b0 * d2;
        for (k, l) in l_r.iter().enumerate() {
            f[2 * n_nodes + nd + k] -= C::new(l * r, 0.0);
        }
        Ok(f)
    };
    let mut series = TimeSeries::with_columns(
        cfg.dt,
        &[
            "E", "abs_e_y", "re_e_y", "im_e_y", "abs_u", "re_u", "im_u", "d1", "d2", "r", "abs_y_m", "norm_z",
            "norm_z_hat", "norm_w_hat", "norm_z_tilde", "norm_wd_tilde", "norm_wr_tilde", "norm_v_tilde",
            "norm_e_tilde",
        ],
    );
    let mut drive = Vec::with_capacity(cfg.steps() + 1);
    let mut drive_err: Option<Error> = None;
    integrate(
        &cn,
        observer_initial(z0, init, e, len)?,
        cfg,
        forcing,
        |t, x| {
            let s = observer_snapshot(x, e, grid, t)?;
            let (d1, d2, r) = e.outputs(&s.w);
            let ey = evaluate_ce(c, &s.z)? - r;
            let u = dot(&a, s.z_hat.values()) + dot(&gains.m_w, &s.w_hat);
            let v = transformed_state(gains, &s.z, &to_complex(&s.w))?;
            let et = observer_error_state(gains, &s.z_tilde, &s.w_tilde[..nd])?;
            series.push_row(
                t,
                &[
                    energy(&s.z),
                    ey.norm(),
                    ey.re,
                    ey.im,
                    u.norm(),
                    u.re,
                    u.im,
                    d1,
                    d2,
                    r,
                    s.z.last().norm(),
                    s.z.norm(),
                    s.z_hat.norm(),
                    block_norm(&s.w_hat),
                    s.z_tilde.norm(),
                    block_norm(&s.w_tilde[..nd]),
                    block_norm(&s.w_tilde[nd..]),
                    v.norm(),
                    et.norm(),
                ],
            )?;
            series.w.push(s.w.iter().copied().collect());
            series.w_hat.push(s.w_hat);
            if cfg.keep_snapshots {
                series.snapshots.push(s.z);
                series.observer_snapshots.push(s.z_hat);
                series.transformed.push(v);
            }
            Ok(())
        },
        |t, x| match observer_snapshot(x, e, grid, t) {
            Ok(s) => drive.push(dot(&a, s.z_tilde.values()) + dot(&gains.m_w, &s.w_tilde)),
            Err(err) => drive_err = Some(err),
        },
    )?;
    if let Some(err) = drive_err {
        return Err(err);
    }
    series.drive = drive;
    Ok(series)
}

/// `ṽ_t = -i ṽ_xx - c ṽ`, `ṽ_x(0) = 0`, `ṽ_x(1) = boundary_right(t)`.
pub fn simulate_target(
    c: f64,
    v0: &ComplexProfile,
    boundary_right: &dyn Fn(f64) -> C,
    cfg: &SimConfig,
) -> Result<TimeSeries> {
    cfg.grid.ensure_same(&v0.grid(), "target initial state")?;
    if !(c >= 0.0) {
        return Err(Error::Config(format!("damping must be nonnegative (got {c})")));
    }
    let grid = cfg.grid;
    let n = grid.n_cells();
    let h = vec![C::new(-c, 0.0); grid.len()];
    let model = LinearModel {
        pde: vec![schrodinger_operator(&h, 0.0, grid)],
        dense: DMatrix::zeros(0, 0),
        rank_one: Vec::new(),
    };
    let cn = CrankNicolson::new(model, cfg.dt)?;
    let (_, bn) = boundary_gains(grid);
    let forcing = |t: f64| -> Result<DVector<C>> { Ok(unit(grid.len(), n, bn * boundary_right(t))) };
    let mut series = TimeSeries::with_columns(cfg.dt, &["norm_v", "abs_v1"]);
    integrate(
        &cn,
        DVector::from_column_slice(v0.values()),
        cfg,
        forcing,
        |t, x| {
            let v = block(x, 0, grid);
            series.push_row(t, &[v.norm(), v.last().norm()])?;
            if cfg.keep_snapshots {
                series.transformed.push(v);
            }
            Ok(())
        },
        |_, _| {},
    )?;
    Ok(series)
}

/// Piecewise-linear interpolation of a per-step signal.
pub fn step_signal(values: &[C], dt: f64) -> impl Fn(f64) -> C + '_ {
    move |t: f64| {
        if values.is_empty() {
            return ZERO;
        }
        let s = (t / dt).max(0.0);
        let k = (s.floor() as usize).min(values.len() - 1);
        if k + 1 >= values.len() {
            return values[values.len() - 1];
        }
        let frac = s - k as f64;
        values[k] * (1.0 - frac) + values[k + 1] * frac
    }
}

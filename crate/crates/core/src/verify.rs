//! The acceptance suite: twelve property checks with measured values and thresholds.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolvabilityError};
use crate::exosystem::ExosystemSpec;
use crate::grid::{ComplexProfile, SpatialGrid};
use crate::kernels::*;
use crate::plant::{ObservationFunctional, PlantSpec};
use crate::regulator::{assemble_gains, GainSet};
use crate::scenario::{BuiltScenario, Scenario};
use crate::sim::*;
use crate::spectral::{asymptotics_report, eigenvalues_a, strict_properness_probe, InputSide};

/// One sub-check of a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            pass: measured < threshold,
        }
    }

    fn above(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            pass: measured > threshold,
        }
    }

    fn within(name: &str, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: format!("{name} in [{lo}, {hi}]"),
            measured,
            threshold: hi,
            pass: (lo..=hi).contains(&measured),
        }
    }

    /// Informational value, always passes.
    fn report(name: &str, measured: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold: f64::INFINITY,
            pass: measured.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub description: String,
    /// Headline value; the first check.
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall time, kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub criteria: Vec<Criterion>,
    pub exit_hint: i32,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        // Non-finite values (informational thresholds, failed runs) serialize as null.
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `criterion <id>: PASS|FAIL  <description>  measured=.. threshold=..` per line.
    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| {
                format!(
                    "criterion {:>2}: {}  {}  measured={:.3e} threshold={:.3e}{}",
                    c.id,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.description,
                    c.measured,
                    c.threshold,
                    c.error.as_ref().map(|e| format!("  error: {e}")).unwrap_or_default()
                )
            })
            .collect()
    }
}

fn criterion(id: u32, description: &str, run: impl FnOnce() -> Result<Vec<Check>>) -> Criterion {
    let start = Instant::now();
    let outcome = run();
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(checks) => {
            let head = checks.first().cloned().unwrap_or_else(|| Check::report("none", f64::NAN));
            Criterion {
                id,
                description: description.into(),
                measured: head.measured,
                threshold: head.threshold,
                pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
                checks,
                error: None,
                seconds,
            }
        }
        Err(e) => Criterion {
            id,
            description: description.into(),
            measured: f64::NAN,
            threshold: f64::NAN,
            pass: false,
            checks: Vec::new(),
            error: Some(e.to_string()),
            seconds,
        },
    }
}

/// Shared state for the scenario-dependent criteria.
struct Context {
    scenario: Scenario,
    built: BuiltScenario,
    gains: GainSet,
}

impl Context {
    fn new(scenario: &Scenario) -> Result<Self> {
        let built = scenario.build()?;
        let gains = assemble_gains(&built.plant, &built.exosystem, &built.observation, &built.design)?;
        Ok(Self {
            scenario: scenario.clone(),
            built,
            gains,
        })
    }

    fn cfg(&self, horizon: f64) -> Result<SimConfig> {
        let s = &self.built.sim;
        SimConfig::new(s.grid, s.dt, horizon, s.record_every)
    }
}

fn oracle_plant(grid: SpatialGrid) -> Result<PlantSpec> {
    PlantSpec::new(
        1.0,
        ComplexProfile::zeros(grid),
        ComplexProfile::constant(grid, Complex64::new(1.0, 0.0)),
    )
}

fn kernel_oracle() -> Result<Vec<Check>> {
    const I: Complex64 = Complex64::new(0.0, 1.0);
    let errors = |n: usize| -> Result<(f64, f64)> {
        let g = SpatialGrid::new(n)?;
        let p = oracle_plant(g)?;
        let k = solve_control_kernel(&p, 0.0, g)?;
        let pk = solve_observer_kernel(&p, 0.0, g)?;
        let k_exact = KernelGrid::from_fn(g, Orientation::Lower, |x, xi| -I * (I * (x - xi)).exp());
        let p_exact = KernelGrid::from_fn(g, Orientation::Upper, |x, xi| -I * (I * (xi - x)).exp());
        Ok((k.sup_distance(&k_exact)?, pk.sup_distance(&p_exact)?))
    };
    let (k100, p100) = errors(100)?;
    let (k200, p200) = errors(200)?;
    Ok(vec![
        Check::below("sup error, n_cells=200", k200.max(p200), 5e-4),
        Check::within("control error ratio 100/200", k100 / k200, 3.0, 5.0),
        Check::within("observer error ratio 100/200", p100 / p200, 3.0, 5.0),
    ])
}

fn round_trip(ctx: &Context) -> Result<Vec<Check>> {
    let ks = &ctx.gains.kernels;
    let grid = ks.grid();
    let mut rng = rand::rngs::StdRng::seed_from_u64(20);
    let (mut worst_c, mut worst_o) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let coef: Vec<(Complex64, Complex64)> = (0..4)
            .map(|_| {
                let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (c(), c())
            })
            .collect();
        let z = ComplexProfile::from_fn(grid, |x| {
            coef.iter()
                .enumerate()
                .map(|(k, (a, b))| a * (k as f64 * PI * x).cos() + b * (k as f64 * PI * x).sin())
                .sum()
        });
        let z = z.scaled(Complex64::new(1.0 / z.sup_norm(), 0.0));
        let back = apply_inverse(&ks.k_inv, &apply_forward(&ks.k, &z)?)?;
        worst_c = worst_c.max(back.sup_distance(&z)?);
        let back = apply_observer_inverse(&ks.p_inv, &apply_observer_forward(&ks.p, &z)?)?;
        worst_o = worst_o.max(back.sup_distance(&z)?);
    }
    Ok(vec![
        Check::below("control round trip", worst_c, 1e-6),
        Check::below("observer round trip", worst_o, 1e-6),
    ])
}

fn spectrum() -> Result<Vec<Check>> {
    let q = 1.0;
    let pairs: Vec<_> = eigenvalues_a(q, 50, SpatialGrid::new(10)?)?.into_iter().filter(|p| p.n >= 5).collect();
    let rep = asymptotics_report(&pairs, q)?;
    Ok(vec![
        Check::below("max root residual, n=5..50", rep.max_root_residual, 1e-12),
        Check::above("min Re mu_n", rep.min_real_part, 0.0),
        Check::below(
            "growth: max dev (n>=20) / max dev (5<=n<20)",
            rep.max_deviation_high / rep.max_deviation_low,
            1.5,
        ),
    ])
}

fn residuals(ctx: &Context) -> Result<Vec<Check>> {
    let r = ctx.gains.residuals;
    Ok(vec![
        Check::below("max ODE/boundary residual", [r.m_ode, r.m_boundary, r.n_ode, r.n_left, r.n_right].into_iter().fold(0.0, f64::max), 1e-8),
        Check::below("nonlocal condition", r.m_nonlocal, 1e-6),
    ])
}

fn silent_exosystem() -> Result<ExosystemSpec> {
    ExosystemSpec::new(
        nalgebra::DMatrix::zeros(0, 0),
        nalgebra::DMatrix::zeros(1, 1),
        DVector::zeros(0),
        DVector::zeros(0),
        DVector::from_vec(vec![1.0]),
        DVector::from_vec(vec![0.0]),
    )
}

fn energy(ctx: &Context) -> Result<Vec<Check>> {
    let grid = ctx.built.sim.grid;
    let q = ctx.scenario.plant.q;
    let dt = ctx.built.sim.dt;
    let plant = PlantSpec::new(q, ComplexProfile::zeros(grid), ComplexProfile::zeros(grid))?;
    let cfg = SimConfig::new(grid, dt, 1.0, 1)?;
    let z0 = ComplexProfile::constant(grid, Complex64::new(1.0, 0.0));
    let s = simulate_open_loop(&plant, &silent_exosystem()?, &|_| Complex64::new(0.0, 0.0), &z0, &cfg)?;
    let e = s.column("E")?;
    let b = s.column("z0_sq")?;
    let mut worst: f64 = 0.0;
    for k in 1..e.len() - 1 {
        if s.times[k] >= 0.05 {
            let rate = (e[k + 1] - e[k - 1]) / (s.times[k + 1] - s.times[k - 1]);
            worst = worst.max((rate - q * b[k]).abs() / (q * b[k] + 1e-12));
        }
    }
    Ok(vec![Check::below("max relative error of dE/dt vs q|z(0)|^2", worst, 0.02)])
}

fn target_decay(ctx: &Context) -> Result<Vec<Check>> {
    let c_s = ctx.built.design.c_s;
    if c_s <= 0.0 {
        return Err(Error::Config("target decay needs c_s > 0".into()));
    }
    let b = &ctx.built;
    let e = b.exosystem.with_initial_state(DVector::zeros(b.exosystem.n_w()))?;
    let s = simulate_state_feedback(&b.plant, &e, &ctx.gains, &b.observation, &b.z0, &ctx.cfg(3.0 / c_s)?)?;
    let v = s.column("norm_v_tilde")?;
    let worst = s.times.iter().zip(v).map(|(t, x)| (x * (c_s * t).exp() / v[0] - 1.0).abs()).fold(0.0, f64::max);
    Ok(vec![Check::below("max |‖v(t)‖e^{c_s t}/‖v(0)‖ - 1|", worst, 0.01)])
}

fn manifold(ctx: &Context) -> Result<Vec<Check>> {
    let b = &ctx.built;
    let z0 = regulation_manifold(&ctx.gains, b.exosystem.w0())?;
    let s = simulate_state_feedback(&b.plant, &b.exosystem, &ctx.gains, &b.observation, &z0, &ctx.cfg(5.0)?)?;
    let worst = s.column("abs_e_y")?.iter().copied().fold(0.0, f64::max);
    Ok(vec![Check::below("max |e_y| on the manifold", worst, 1e-3)])
}

fn observer_decay(ctx: &Context) -> Result<Vec<Check>> {
    let b = &ctx.built;
    let c_o = b.design.c_o;
    if c_o <= 0.0 {
        return Err(Error::Config("observer decay needs c_o > 0".into()));
    }
    let slowest = b.design.desired_r.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
    if !(slowest < 0.0) {
        return Err(Error::Config("reference observer poles must be stable".into()));
    }
    let rate = -slowest;
    let window = (4.0 / rate, 8.0 / rate);
    let horizon = window.1.max(3.0 / c_o);
    let s = simulate_observer(
        &b.plant,
        &b.exosystem,
        &ctx.gains,
        ObserverDrive::StateFeedback,
        &ctx.cfg(horizon)?,
        &b.z0,
        &b.observer_init,
    )?;
    let et = s.column("norm_e_tilde")?;
    let worst = s
        .times
        .iter()
        .zip(et)
        .filter(|(t, _)| **t <= 3.0 / c_o + 1e-12)
        .map(|(t, x)| (x * (c_o * t).exp() / et[0] - 1.0).abs())
        .fold(0.0, f64::max);
    let fit = decay_fit(&s.pairs("norm_wr_tilde")?, window)?;
    Ok(vec![
        Check::below("max |‖e(t)‖e^{c_o t}/‖e(0)‖ - 1|", worst, 0.02),
        Check::below("relative error of fitted w_r decay vs slowest pole", (fit.rate - rate).abs() / rate, 0.1),
    ])
}

/// Output-feedback run shared by criteria 9 and 11.
fn output_feedback(ctx: &Context) -> Result<TimeSeries> {
    let b = &ctx.built;
    let cfg = ctx.cfg(b.sim.horizon)?.with_snapshots();
    simulate_output_feedback(&b.plant, &b.exosystem, &ctx.gains, &b.observation, &cfg, &b.z0, &b.observer_init)
}

fn regulation(ctx: &Context, s: &TimeSeries) -> Result<Vec<Check>> {
    let b = &ctx.built;
    let horizon = *s.times.last().unwrap_or(&0.0);
    let fit = decay_fit(&s.pairs("abs_e_y")?, (0.5 * horizon, horizon))?;
    let ey = s.column("abs_e_y")?;
    let peak = ey.iter().copied().fold(0.0, f64::max);
    let last = *ey.last().unwrap_or(&f64::NAN);
    let scale = b.z0.norm().max(b.exosystem.w0().norm()).max(1.0);
    let mut largest: f64 = 0.0;
    for name in ["norm_z", "norm_z_hat", "norm_w_hat", "norm_z_tilde", "norm_v_tilde", "norm_e_tilde", "abs_u"] {
        largest = largest.max(s.column(name)?.iter().copied().fold(0.0, f64::max));
    }
    // ∫ e^{-2αt}|e_y|² with α = -μ/2.
    let weighted: f64 = s
        .times
        .windows(2)
        .zip(ey.windows(2))
        .map(|(t, y)| {
            let f = |k: usize| (fit.rate * t[k]).exp() * y[k] * y[k];
            0.5 * (t[1] - t[0]) * (f(0) + f(1))
        })
        .sum::<f64>()
        .sqrt();
    Ok(vec![
        Check::above("fitted decay rate of |e_y| (second half)", fit.rate, 0.0),
        Check::above("fit r^2", fit.r_squared, 0.8),
        Check::below("terminal |e_y| / peak |e_y|", last / peak, 1e-2),
        Check::below("max internal norm / initial scale", largest / scale, 1e3),
        Check::report("weighted L2 norm of e_y, alpha = -mu/2", weighted),
    ])
}

fn cross_validation(ctx: &Context, s: &TimeSeries) -> Result<Vec<Check>> {
    let drive = s.drive.clone();
    let dt = s.dt;
    let boundary = step_signal(&drive, dt);
    let horizon = *s.times.last().unwrap_or(&dt);
    let b = &ctx.built;
    let cfg = SimConfig::new(b.sim.grid, dt, horizon, b.sim.record_every)?.with_snapshots();
    let v0 = s.transformed.first().ok_or_else(|| Error::Numeric("no snapshots recorded".into()))?;
    let t = simulate_target(b.design.c_s, v0, &boundary, &cfg)?;
    let mut worst: f64 = 0.0;
    for (a, bb) in s.transformed.iter().zip(&t.transformed) {
        worst = worst.max(a.sup_distance(bb)?);
    }
    Ok(vec![Check::below("sup |F[z] - m^T w - v_target|", worst, 5e-3)])
}

fn properness(ctx: &Context) -> Result<Vec<Check>> {
    let s = [50.0, 100.0, 200.0, 400.0, 800.0];
    // Admissible point observation at the actuated-disturbance end.
    let point = ObservationFunctional::point(0.0, ctx.built.plant.grid())?;
    let rep = strict_properness_probe(&ctx.built.plant, &point, InputSide::Left, &s, 2000)?;
    let ratio = rep.magnitudes.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let excess = rep.magnitudes.iter().zip(&rep.bounds).map(|(m, b)| m / b).fold(0.0, f64::max);
    Ok(vec![
        Check::below("max |G(s_{k+1})| / |G(s_k)|", ratio, 1.0),
        Check::below("max |G(s)| / bound", excess, 1.0 + 1e-12),
        Check::report("m = sup |b_n c_n|", rep.m),
    ])
}

fn gate(scenario: Result<Scenario>, expect: fn(&Error) -> bool, code: i32) -> Result<bool> {
    let outcome = scenario.and_then(|s| {
        let b = s.build()?;
        assemble_gains(&b.plant, &b.exosystem, &b.observation, &b.design).map(|_| ())
    });
    Ok(match outcome {
        Err(e) => expect(&e) && e.exit_code() == code,
        Ok(()) => false,
    })
}

fn solvability_gates() -> Result<Vec<Check>> {
    let flag = |ok: bool| if ok { 1.0 } else { 0.0 };
    let margin = gate(
        Scenario::vanishing_regulator_margin(),
        |e| matches!(e, Error::Solvability(SolvabilityError::RegulatorMargin { .. })),
        3,
    )?;
    let collision = gate(
        Ok(Scenario::observer_spectrum_collision()),
        |e| matches!(e, Error::Solvability(SolvabilityError::ObserverSpectrumCollision { .. })),
        3,
    )?;
    let unobservable = gate(
        Ok(Scenario::unobservable_reference()),
        |e| matches!(e, Error::Exosystem(msg) if msg.contains("not observable")),
        2,
    )?;
    let hits = [margin, collision, unobservable].iter().filter(|b| **b).count() as f64;
    Ok(vec![
        Check::above("gates triggered (of 3)", hits, 2.5),
        Check::above("vanishing regulator margin -> exit 3", flag(margin), 0.5),
        Check::above("sinh root in spectrum of S_d -> exit 3", flag(collision), 0.5),
        Check::above("unobservable (q_r, S_r) -> exit 2", flag(unobservable), 0.5),
    ])
}

pub const DESCRIPTIONS: [&str; 12] = [
    "kernel oracle: closed-form kernels at second order",
    "transform round trip on random smooth profiles",
    "spectrum: root residuals, right half-plane, bounded asymptotic deviation",
    "regulator and observer equation residuals",
    "open-loop energy identity",
    "exact decay of the transformed state under state feedback",
    "regulation manifold invariance",
    "observer error decay rates",
    "output regulation under output feedback",
    "strict properness probe",
    "transformed closed loop vs target system",
    "solvability gates",
];

/// Run all twelve criteria on `scenario`.
pub fn run_verification(scenario: &Scenario) -> Report {
    run_selected(scenario, &(1..=12).collect::<Vec<_>>())
}

/// Run the listed criteria (ids 1..=12) on `scenario`.
pub fn run_selected(scenario: &Scenario, ids: &[u32]) -> Report {
    let ctx = Context::new(scenario);
    let want = |id: u32| ids.contains(&id);
    let mut criteria = Vec::new();
    let with_ctx = |id: u32, f: &dyn Fn(&Context) -> Result<Vec<Check>>| {
        criterion(id, DESCRIPTIONS[id as usize - 1], || match &ctx {
            Ok(c) => f(c),
            Err(e) => Err(Error::Config(format!("scenario setup failed: {e}"))),
        })
    };
    if want(1) {
        criteria.push(criterion(1, DESCRIPTIONS[0], kernel_oracle));
    }
    if want(2) {
        criteria.push(with_ctx(2, &round_trip));
    }
    if want(3) {
        criteria.push(criterion(3, DESCRIPTIONS[2], spectrum));
    }
    if want(4) {
        criteria.push(with_ctx(4, &residuals));
    }
    if want(5) {
        criteria.push(with_ctx(5, &energy));
    }
    if want(6) {
        criteria.push(with_ctx(6, &target_decay));
    }
    if want(7) {
        criteria.push(with_ctx(7, &manifold));
    }
    if want(8) {
        criteria.push(with_ctx(8, &observer_decay));
    }
    if want(9) || want(11) {
        let start = Instant::now();
        let run = ctx.as_ref().map_err(|e| e.to_string()).and_then(|c| output_feedback(c).map_err(|e| e.to_string()));
        let shared = start.elapsed().as_secs_f64();
        let on_run = |id: u32, f: &dyn Fn(&Context, &TimeSeries) -> Result<Vec<Check>>| {
            let mut c = criterion(id, DESCRIPTIONS[id as usize - 1], || match (&ctx, &run) {
                (Ok(c), Ok(s)) => f(c, s),
                (Err(e), _) => Err(Error::Config(format!("scenario setup failed: {e}"))),
                (_, Err(e)) => Err(Error::Numeric(format!("output-feedback run failed: {e}"))),
            });
            c.seconds += shared;
            c
        };
        if want(9) {
            criteria.push(on_run(9, &regulation));
        }
        if want(11) {
            criteria.push(on_run(11, &cross_validation));
        }
    }
    if want(10) {
        criteria.push(with_ctx(10, &properness));
    }
    if want(12) {
        criteria.push(criterion(12, DESCRIPTIONS[11], solvability_gates));
    }
    criteria.sort_by_key(|c| c.id);
    let exit_hint = if criteria.iter().all(|c| c.pass) { 0 } else { 1 };
    Report {
        scenario: scenario.name.clone(),
        criteria,
        exit_hint,
    }
}

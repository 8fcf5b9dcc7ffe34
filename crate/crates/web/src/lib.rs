//! Browser demo: spectrum of the open-loop generator, feedback gains and a short closed-loop run.
//!
//! Every export returns a JSON string so the page needs no extra glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use schroreg::kernels::{kernel_feedback_trace, solve_control_kernel};
use schroreg::regulator::assemble_gains;
use schroreg::scenario::{FunctionSpec, Scenario};
use schroreg::sim::simulate_output_feedback;
use schroreg::spectral::eigenvalues_a;
use schroreg::{PlantSpec, SpatialGrid};

/// Largest grid the page may request; keeps a run interactive.
const MAX_CELLS: usize = 120;

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct Mode {
    n: usize,
    re: f64,
    im: f64,
}

/// Eigenvalues `μ_n`, `n = 1..=count`, of `-i d²/dx²` with `f'(0) = -iq f(0)`, `f'(1) = 0`.
pub fn spectrum_json(q: f64, count: usize) -> Result<String, String> {
    let pairs = eigenvalues_a(q, count.clamp(1, 200), SpatialGrid::new(10).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let modes: Vec<Mode> = pairs
        .iter()
        .map(|p| Mode {
            n: p.n,
            re: p.mu.re,
            im: p.mu.im,
        })
        .collect();
    serde_json::to_string(&modes).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Gain {
    x: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    k11: [f64; 2],
}

/// Feedback weights `k_x(1, ξ)` and `k(1, 1)` for constant `h`.
pub fn gain_json(q: f64, h: f64, c_s: f64, n_cells: usize) -> Result<String, String> {
    let grid = SpatialGrid::new(n_cells.clamp(10, MAX_CELLS)).map_err(|e| e.to_string())?;
    let plant = PlantSpec::uniform(q, h, 1.0, grid).map_err(|e| e.to_string())?;
    let k = solve_control_kernel(&plant, c_s, grid).map_err(|e| e.to_string())?;
    let (k11, kx1) = kernel_feedback_trace(&k).map_err(|e| e.to_string())?;
    let gain = Gain {
        x: grid.nodes().collect(),
        re: kx1.values().iter().map(|v| v.re).collect(),
        im: kx1.values().iter().map(|v| v.im).collect(),
        k11: [k11.re, k11.im],
    };
    serde_json::to_string(&gain).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Run {
    t: Vec<f64>,
    abs_e_y: Vec<f64>,
    norm_z: Vec<f64>,
    norm_e_tilde: Vec<f64>,
}

/// Output-feedback run of the reference scenario on a coarse grid.
pub fn closed_loop_json(q: f64, h: f64, c_s: f64, c_o: f64, horizon: f64) -> Result<String, String> {
    let mut s = Scenario::reference().with_numerics(Some(40), Some(2e-3), Some(horizon.clamp(0.1, 20.0)));
    s.plant.q = q;
    s.plant.h = FunctionSpec::constant(h);
    s.tuning.c_s = c_s;
    s.tuning.c_o = c_o;
    s.numerics.record_every = 10;
    let b = s.build().map_err(|e| e.to_string())?;
    let g = assemble_gains(&b.plant, &b.exosystem, &b.observation, &b.design).map_err(|e| e.to_string())?;
    let r = simulate_output_feedback(&b.plant, &b.exosystem, &g, &b.observation, &b.sim, &b.z0, &b.observer_init)
        .map_err(|e| e.to_string())?;
    let col = |name: &str| r.column(name).map(<[f64]>::to_vec).map_err(|e| e.to_string());
    let run = Run {
        t: r.times.clone(),
        abs_e_y: col("abs_e_y")?,
        norm_z: col("norm_z")?,
        norm_e_tilde: col("norm_e_tilde")?,
    };
    serde_json::to_string(&run).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn spectrum(q: f64, count: usize) -> Result<String, JsValue> {
    spectrum_json(q, count).map_err(js)
}

#[wasm_bindgen]
pub fn feedback_gain(q: f64, h: f64, c_s: f64, n_cells: usize) -> Result<String, JsValue> {
    gain_json(q, h, c_s, n_cells).map_err(js)
}

#[wasm_bindgen]
pub fn closed_loop(q: f64, h: f64, c_s: f64, c_o: f64, horizon: f64) -> Result<String, JsValue> {
    closed_loop_json(q, h, c_s, c_o, horizon).map_err(js)
}

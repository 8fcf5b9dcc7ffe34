use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use schroreg::kernels::{kernel_edge_residual, kernel_residual, KernelSide};
use schroreg::regulator::{assemble_gains, GainSet};
use schroreg::scenario::{BuiltScenario, Mode, Scenario};
use schroreg::sim::*;
use schroreg::spectral::{asymptotics_report, eigenvalues_a, spectrum_csv, strict_properness_probe, InputSide};
use schroreg::verify::run_verification;
use schroreg::{Error, ObservationFunctional, Result};

use crate::plot::{emit_plot, Scale};

/// What a run produced: exit status and lines for the terminal.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub exit_code: i32,
    pub lines: Vec<String>,
    pub files: Vec<String>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }

    fn plot(&mut self, name: &str, series: &TimeSeries, columns: &[&str], scale: Scale) -> Result<()> {
        emit_plot(series, columns, &self.dir.join(name), scale)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn gains(b: &BuiltScenario) -> Result<GainSet> {
    assemble_gains(&b.plant, &b.exosystem, &b.observation, &b.design)
}

/// Fit over the second half of the recorded horizon, if the series allows one.
fn tail_fit(series: &TimeSeries, column: &str) -> Result<Option<DecayFit>> {
    let t_end = *series.times.last().unwrap_or(&0.0);
    match decay_fit(&series.pairs(column)?, (0.5 * t_end, t_end)) {
        Ok(f) => Ok(Some(f)),
        Err(Error::Fit(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// About eleven evenly spaced snapshots.
fn sparse_profiles(series: &TimeSeries, profiles: &[schroreg::ComplexProfile]) -> String {
    let stride = (profiles.len() / 10).max(1);
    let idx: Vec<usize> = (0..profiles.len()).step_by(stride).collect();
    let times: Vec<f64> = idx.iter().map(|k| series.times[*k]).collect();
    let picked: Vec<_> = idx.iter().map(|k| profiles[*k].clone()).collect();
    profiles_csv(&times, &picked)
}

fn kernels(b: &BuiltScenario, w: &mut Writer, out: &mut Outcome) -> Result<()> {
    let g = gains(b)?;
    let ks = &g.kernels;
    w.text("kernel_k.csv", &ks.k.to_csv())?;
    w.text("kernel_K.csv", &ks.k_inv.to_csv())?;
    w.text("kernel_p.csv", &ks.p.to_csv())?;
    w.text("kernel_P.csv", &ks.p_inv.to_csv())?;
    let report = json!({
        "c_s": ks.c_s,
        "c_o": ks.c_o,
        "control_pde_residual": kernel_residual(&ks.k, &b.plant, ks.c_s, KernelSide::Control)?,
        "observer_pde_residual": kernel_residual(&ks.p, &b.plant, ks.c_o, KernelSide::Observer)?,
        "control_edge_residual": kernel_edge_residual(&ks.k, &b.plant, KernelSide::Control)?,
        "observer_edge_residual": kernel_edge_residual(&ks.p, &b.plant, KernelSide::Observer)?,
        "control_iterations": ks.control_stats.iterations,
        "observer_iterations": ks.observer_stats.iterations,
        "k11": [g.k11.re, g.k11.im],
        "l0": [g.l0.re, g.l0.im],
    });
    w.json("kernel_residuals.json", &report)?;
    out.lines.push(format!(
        "kernels: control residual {:.3e}, observer residual {:.3e}",
        report["control_pde_residual"].as_f64().unwrap_or(f64::NAN),
        report["observer_pde_residual"].as_f64().unwrap_or(f64::NAN)
    ));
    Ok(())
}

fn spectrum(b: &BuiltScenario, w: &mut Writer, out: &mut Outcome) -> Result<()> {
    let q = b.plant.q();
    let pairs = eigenvalues_a(q, 50, b.plant.grid())?;
    w.text("spectrum.csv", &spectrum_csv(&pairs, q))?;
    let asym = asymptotics_report(&pairs, q)?;
    w.json("asymptotics.json", &asym)?;
    let point = ObservationFunctional::point(0.0, b.plant.grid())?;
    let probe = strict_properness_probe(&b.plant, &point, InputSide::Left, &[50.0, 100.0, 200.0, 400.0, 800.0], 2000)?;
    w.json("properness.json", &probe)?;
    out.lines.push(format!(
        "spectrum: {} roots, max residual {:.3e}, min Re mu {:.4}, deviation bounded: {}",
        pairs.len(),
        asym.max_root_residual,
        asym.min_real_part,
        asym.bounded()
    ));
    Ok(())
}

fn regulate(b: &BuiltScenario, w: &mut Writer, out: &mut Outcome) -> Result<()> {
    let g = gains(b)?;
    w.text("gains.json", &(g.to_json()? + "\n"))?;
    let s = simulate_state_feedback(&b.plant, &b.exosystem, &g, &b.observation, &b.z0, &b.sim.with_snapshots())?;
    w.text("regulate.csv", &s.to_csv())?;
    w.text("regulate_profiles.csv", &sparse_profiles(&s, &s.snapshots))?;
    let fit = tail_fit(&s, "abs_e_y")?;
    let fit_v = tail_fit(&s, "norm_v_tilde")?;
    w.json("regulate.json", &json!({ "e_y_fit": fit, "v_tilde_fit": fit_v, "c_s": b.design.c_s }))?;
    w.plot("regulate_e_y.svg", &s, &["abs_e_y", "norm_v_tilde"], Scale::Log)?;
    w.plot("regulate_energy.svg", &s, &["E"], Scale::Linear)?;
    if let Some(f) = fit {
        out.lines.push(format!("regulate: |e_y| decay rate {:.4} (r^2 {:.4}), c_s = {}", f.rate, f.r_squared, b.design.c_s));
    }
    Ok(())
}

fn observe(b: &BuiltScenario, w: &mut Writer, out: &mut Outcome) -> Result<()> {
    let g = gains(b)?;
    let s = simulate_observer(
        &b.plant,
        &b.exosystem,
        &g,
        ObserverDrive::StateFeedback,
        &b.sim,
        &b.z0,
        &b.observer_init,
    )?;
    w.text("observe.csv", &s.to_csv())?;
    let fit_e = tail_fit(&s, "norm_e_tilde")?;
    let fit_wr = tail_fit(&s, "norm_wr_tilde")?;
    let fit_wd = tail_fit(&s, "norm_wd_tilde")?;
    w.json(
        "observe.json",
        &json!({ "e_tilde_fit": fit_e, "w_r_tilde_fit": fit_wr, "w_d_tilde_fit": fit_wd, "c_o": b.design.c_o }),
    )?;
    w.plot("observe_errors.svg", &s, &["norm_z_tilde", "norm_e_tilde", "norm_wd_tilde", "norm_wr_tilde"], Scale::Log)?;
    if let Some(f) = fit_e {
        out.lines.push(format!("observe: transformed error decay rate {:.4}, c_o = {}", f.rate, b.design.c_o));
    }
    Ok(())
}

fn closedloop(b: &BuiltScenario, w: &mut Writer, out: &mut Outcome) -> Result<()> {
    let g = gains(b)?;
    let s = simulate_output_feedback(
        &b.plant,
        &b.exosystem,
        &g,
        &b.observation,
        &b.sim.with_snapshots(),
        &b.z0,
        &b.observer_init,
    )?;
    w.text("closedloop.csv", &s.to_csv())?;
    w.text("closedloop_profiles.csv", &sparse_profiles(&s, &s.snapshots))?;
    let fit = tail_fit(&s, "abs_e_y")?;
    let ey = s.column("abs_e_y")?;
    let peak = ey.iter().copied().fold(0.0, f64::max);
    let weighted = fit.map(|f| {
        s.times
            .windows(2)
            .zip(ey.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * ((f.rate * t[0]).exp() * y[0] * y[0] + (f.rate * t[1]).exp() * y[1] * y[1]))
            .sum::<f64>()
            .sqrt()
    });
    let mut maxima = serde_json::Map::new();
    for name in s.column_names() {
        let m = s.column(name)?.iter().map(|v| v.abs()).fold(0.0, f64::max);
        maxima.insert(name.clone(), json!(m));
    }
    w.json(
        "closedloop.json",
        &json!({
            "e_y_fit": fit,
            "peak_e_y": peak,
            "terminal_e_y": ey.last(),
            "weighted_norm_alpha": fit.map(|f| -f.rate / 2.0),
            "weighted_norm": weighted,
            "maxima": maxima,
            "bounded": true,
        }),
    )?;
    w.plot("closedloop_e_y.svg", &s, &["abs_e_y"], Scale::Log)?;
    w.plot("closedloop_errors.svg", &s, &["norm_z_tilde", "norm_e_tilde", "norm_v_tilde"], Scale::Log)?;
    out.lines.push(match fit {
        Some(f) => format!(
            "closedloop: |e_y| peak {:.3e}, terminal {:.3e}, decay rate {:.4} (r^2 {:.4})",
            peak,
            ey.last().unwrap_or(&f64::NAN),
            f.rate,
            f.r_squared
        ),
        None => format!("closedloop: |e_y| peak {peak:.3e} (horizon too short to fit)"),
    });
    Ok(())
}

fn verify(scenario: &Scenario, w: &mut Writer, out: &mut Outcome) -> Result<()> {
    let report = run_verification(scenario);
    let mut body = report.to_json();
    body.push('\n');
    w.text("report.json", &body)?;
    for (line, c) in report.summary_lines().into_iter().zip(&report.criteria) {
        out.lines.push(format!("{line}  ({:.2} s)", c.seconds));
    }
    out.exit_code = report.exit_hint;
    Ok(())
}

/// Run `mode` on `scenario`, writing artifacts into `out_dir`.
pub fn run(mode: Mode, scenario: &Scenario, out_dir: &Path) -> Result<Outcome> {
    let built = scenario.build()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
    };
    let mut out = Outcome::default();
    match mode {
        Mode::Kernels => kernels(&built, &mut w, &mut out)?,
        Mode::Spectrum => spectrum(&built, &mut w, &mut out)?,
        Mode::Regulate => regulate(&built, &mut w, &mut out)?,
        Mode::Observe => observe(&built, &mut w, &mut out)?,
        Mode::Closedloop => closedloop(&built, &mut w, &mut out)?,
        Mode::Verify => verify(scenario, &mut w, &mut out)?,
    }
    out.files = w.files;
    Ok(out)
}

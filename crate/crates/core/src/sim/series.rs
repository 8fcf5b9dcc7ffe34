use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::grid::{ComplexProfile, SpatialGrid};

/// Time stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: SpatialGrid,
    pub dt: f64,
    pub horizon: f64,
    /// Record every this many steps.
    pub record_every: usize,
    /// Keep profile snapshots at the record points.
    pub keep_snapshots: bool,
}

impl SimConfig {
    pub fn new(grid: SpatialGrid, dt: f64, horizon: f64, record_every: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive (got {dt})")));
        }
        if !(horizon >= dt && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon {horizon} must be at least dt = {dt}")));
        }
        if record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        Ok(Self {
            grid,
            dt,
            horizon,
            record_every,
            keep_snapshots: false,
        })
    }

    pub fn with_snapshots(mut self) -> Self {
        self.keep_snapshots = true;
        self
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Recorded trajectory: named scalar columns plus optional profiles.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub times: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    /// Plant state `z` at the record points.
    pub snapshots: Vec<ComplexProfile>,
    /// Observer state `ẑ`.
    pub observer_snapshots: Vec<ComplexProfile>,
    /// Transformed state (`ṽ` or `ẽ`).
    pub transformed: Vec<ComplexProfile>,
    pub w: Vec<Vec<f64>>,
    pub w_hat: Vec<Vec<Complex64>>,
    /// Right boundary drive of the `ṽ` system at every step (output feedback only).
    pub drive: Vec<Complex64>,
}

impl TimeSeries {
    pub fn with_columns(dt: f64, names: &[&str]) -> Self {
        Self {
            dt,
            names: names.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); names.len()],
            ..Self::default()
        }
    }

    pub fn push_row(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::Dimension(format!("row has {} values for {} columns", row.len(), self.names.len())));
        }
        self.times.push(t);
        for (col, v) in self.columns.iter_mut().zip(row) {
            col.push(*v);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| Error::Config(format!("unknown column {name}")))
    }

    /// `(t, value)` pairs for a column.
    pub fn pairs(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        Ok(self.times.iter().copied().zip(self.column(name)?.iter().copied()).collect())
    }

    /// Header `t,<columns>` and one row per record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (r, t) in self.times.iter().enumerate() {
            out.push_str(&fmt17(*t));
            for col in &self.columns {
                out.push(',');
                out.push_str(&fmt17(col[r]));
            }
            out.push('\n');
        }
        out
    }
}

/// Long-format CSV `t,x,re,im` of recorded profiles.
pub fn profiles_csv(times: &[f64], profiles: &[ComplexProfile]) -> String {
    let mut out = String::from("t,x,re,im\n");
    for (t, p) in times.iter().zip(profiles) {
        for (i, v) in p.values().iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", fmt17(*t), fmt17(p.grid().node(i)), fmt17(v.re), fmt17(v.im)));
        }
    }
    out
}

/// Log-linear fit `value ≈ M e^{-μ t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    /// Positive means decay.
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|&(t, v)| (t, v.abs().max(1e-14).ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::Fit(format!(
            "{} samples in window [{}, {}], need at least 10",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(stt > 0.0) {
        return Err(Error::Fit("window has no time spread".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 1e-300 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        amplitude: intercept.exp(),
        rate: -slope,
        r_squared,
        samples: pts.len(),
    })
}

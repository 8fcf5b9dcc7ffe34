//! JSON scenario files: plant, exosystem, observation, tuning and numerics in one document.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exosystem::{rotation, ExosystemSpec, SpectrumCheck};
use crate::grid::{ComplexProfile, SpatialGrid};
use crate::kernels::KernelSet;
use crate::plant::{ObservationFunctional, PlantSpec};
use crate::regulator::{default_poles, state_margins, DesignParameters};
use crate::sim::{ObserverInit, SimConfig};

/// A real function on `[0, 1]`, optionally with an imaginary part for constants and samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionSpec {
    Constant {
        value: f64,
        #[serde(default)]
        imag: f64,
    },
    /// `offset + amplitude sin(2π frequency x + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude exp(-(x - center)² / (2 width²))`.
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    /// Equispaced samples on `[0, 1]`, linearly interpolated onto the grid.
    Samples {
        values: Vec<f64>,
        #[serde(default)]
        imag: Vec<f64>,
    },
}

impl FunctionSpec {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value, imag: 0.0 }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{what}: {msg}")));
        match self {
            Self::Constant { value, imag } if !(value.is_finite() && imag.is_finite()) => bad("non-finite constant".into()),
            Self::Sinusoid { amplitude, frequency, phase, offset }
                if ![amplitude, frequency, phase, offset].iter().all(|v| v.is_finite()) =>
            {
                bad("non-finite sinusoid parameter".into())
            }
            Self::GaussianBump { width, .. } if !(*width > 0.0 && width.is_finite()) => {
                bad(format!("width must be positive (got {width})"))
            }
            Self::Samples { values, .. } if values.len() < 2 => bad("need at least two samples".into()),
            Self::Samples { values, imag } if !imag.is_empty() && imag.len() != values.len() => {
                bad(format!("imag has {} samples, values has {}", imag.len(), values.len()))
            }
            Self::Samples { values, imag } if !values.iter().chain(imag).all(|v| v.is_finite()) => {
                bad("non-finite sample".into())
            }
            _ => Ok(()),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Self::Constant { imag, .. } => *imag == 0.0,
            Self::Samples { imag, .. } => imag.iter().all(|v| *v == 0.0),
            _ => true,
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Self::Constant { value, imag } => Complex64::new(*value, *imag),
            Self::Sinusoid { amplitude, frequency, phase, offset } => {
                Complex64::new(offset + amplitude * (2.0 * PI * frequency * x + phase).sin(), 0.0)
            }
            Self::GaussianBump { amplitude, center, width } => {
                Complex64::new(amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp(), 0.0)
            }
            Self::Samples { values, imag } => {
                let n = values.len() - 1;
                let s = (x.clamp(0.0, 1.0) * n as f64).min(n as f64);
                let k = (s.floor() as usize).min(n - 1);
                let f = s - k as f64;
                let lerp = |v: &[f64]| v[k] * (1.0 - f) + v[k + 1] * f;
                let im = if imag.is_empty() { 0.0 } else { lerp(imag) };
                Complex64::new(lerp(values), im)
            }
        }
    }

    pub fn sample(&self, grid: SpatialGrid) -> ComplexProfile {
        ComplexProfile::from_fn(grid, |x| self.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub q: f64,
    pub h: FunctionSpec,
    pub g: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExosystemConfig {
    /// Row-major square matrices.
    pub s_d: Vec<Vec<f64>>,
    pub s_r: Vec<Vec<f64>>,
    pub q_d1: Vec<f64>,
    pub q_d2: Vec<f64>,
    pub q_r: Vec<f64>,
    pub w0: Vec<f64>,
    /// Admit `S_d` with eigenvalues off the imaginary axis.
    #[serde(default)]
    pub allow_non_neutral_disturbance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    /// `[re, im]`.
    pub theta: Complex64,
    pub x0: f64,
    pub c: FunctionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub c_s: f64,
    pub c_o: f64,
    /// Eigenvalues of `S_r + l_r q_rᵀ`; defaults to `-1, -2, ..`.
    #[serde(default)]
    pub poles_r: Option<Vec<Complex64>>,
    /// Eigenvalues of `S_d + l_d n(1)ᵀ`; defaults to `-1.5, -2.5, ..`.
    #[serde(default)]
    pub poles_d: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    pub n_cells: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub z0: FunctionSpec,
    #[serde(default = "zero_function")]
    pub z_hat0: FunctionSpec,
    /// Defaults to zero.
    #[serde(default)]
    pub w_hat0: Option<Vec<f64>>,
}

fn zero_function() -> FunctionSpec {
    FunctionSpec::constant(0.0)
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            z0: FunctionSpec::GaussianBump {
                amplitude: 1.0,
                center: 0.5,
                width: 0.1,
            },
            z_hat0: zero_function(),
            w_hat0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Kernels,
    Spectrum,
    Regulate,
    Observe,
    Closedloop,
    Verify,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantConfig,
    pub exosystem: ExosystemConfig,
    pub observation: ObservationConfig,
    pub tuning: TuningConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub mode: Option<Mode>,
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub plant: PlantSpec,
    pub exosystem: ExosystemSpec,
    pub observation: ObservationFunctional,
    pub design: DesignParameters,
    pub sim: SimConfig,
    pub z0: ComplexProfile,
    pub observer_init: ObserverInit,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what} must be square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// q = 1, h = 0.5, g = 1, c_s = 1, c_o = 2, `C_e z = z(0.3) + ∫ 0.5 z`,
    /// `S_d = 0 ⊕ rotation(2)`, `S_r = rotation(1)`.
    pub fn reference() -> Self {
        let mut s_d = DMatrix::zeros(3, 3);
        s_d.view_mut((1, 1), (2, 2)).copy_from(&rotation(2.0));
        Self {
            name: "reference".into(),
            plant: PlantConfig {
                q: 1.0,
                h: FunctionSpec::constant(0.5),
                g: FunctionSpec::constant(1.0),
            },
            exosystem: ExosystemConfig {
                s_d: rows(&s_d),
                s_r: rows(&rotation(1.0)),
                q_d1: vec![1.0, 1.0, 0.0],
                q_d2: vec![0.5, 0.0, 1.0],
                q_r: vec![1.0, 0.0],
                w0: vec![1.0, 1.0, 0.0, 1.0, 0.0],
                allow_non_neutral_disturbance: false,
            },
            observation: ObservationConfig {
                theta: Complex64::new(1.0, 0.0),
                x0: 0.3,
                c: FunctionSpec::constant(0.5),
            },
            tuning: TuningConfig {
                c_s: 1.0,
                c_o: 2.0,
                poles_r: None,
                poles_d: None,
            },
            numerics: NumericsConfig {
                n_cells: 200,
                dt: 1e-4,
                horizon: 10.0,
                record_every: 100,
            },
            initial: InitialConfig::default(),
            mode: None,
        }
    }

    /// Reference data with an unobservable reference pair (`q_r = 0`).
    pub fn unobservable_reference() -> Self {
        let mut s = Self::reference();
        s.name = "unobservable-reference".into();
        s.exosystem.q_r = vec![0.0, 0.0];
        s
    }

    /// Disturbance spectrum `{-c_o ± iπ²}` containing the root `iπ² - c_o` of the n-equation.
    pub fn observer_spectrum_collision() -> Self {
        let mut s = Self::reference();
        s.name = "observer-spectrum-collision".into();
        let c_o = s.tuning.c_o;
        s.exosystem.s_d = vec![vec![-c_o, PI * PI], vec![-PI * PI, -c_o]];
        s.exosystem.q_d1 = vec![1.0, 0.0];
        s.exosystem.q_d2 = vec![0.0, 1.0];
        s.exosystem.w0 = vec![1.0, 0.0, 1.0, 0.0];
        s.exosystem.allow_non_neutral_disturbance = true;
        s
    }

    /// Reference data with the weight of `C_e` set to the constant that cancels the regulator
    /// margin at `λ = 2i`.
    pub fn vanishing_regulator_margin() -> Result<Self> {
        let mut s = Self::reference();
        s.name = "vanishing-regulator-margin".into();
        let b = s.build()?;
        let grid = b.plant.grid();
        let ks = KernelSet::solve(&b.plant, s.tuning.c_s, s.tuning.c_o)?;
        let lambda = Complex64::new(0.0, 2.0);
        let point = ObservationFunctional::new(s.observation.theta, s.observation.x0, ComplexProfile::zeros(grid))?;
        let flat = ObservationFunctional::new(
            Complex64::new(0.0, 0.0),
            0.0,
            ComplexProfile::constant(grid, Complex64::new(1.0, 0.0)),
        )?;
        let m1 = state_margins(&point, &ks.k_inv, &[lambda], s.tuning.c_s)?[0];
        let m2 = state_margins(&flat, &ks.k_inv, &[lambda], s.tuning.c_s)?[0];
        let w = -m1 / m2;
        s.observation.c = FunctionSpec::Constant { value: w.re, imag: w.im };
        Ok(s)
    }

    /// Apply command-line overrides.
    pub fn with_numerics(mut self, n_cells: Option<usize>, dt: Option<f64>, horizon: Option<f64>) -> Self {
        if let Some(n) = n_cells {
            self.numerics.n_cells = n;
        }
        if let Some(dt) = dt {
            self.numerics.dt = dt;
        }
        if let Some(h) = horizon {
            self.numerics.horizon = h;
        }
        self
    }

    pub fn exosystem_spec(&self) -> Result<ExosystemSpec> {
        let x = &self.exosystem;
        let check = if x.allow_non_neutral_disturbance {
            SpectrumCheck::AllowNonNeutralDisturbance
        } else {
            SpectrumCheck::Neutral
        };
        ExosystemSpec::with_check(
            matrix(&x.s_d, "s_d")?,
            matrix(&x.s_r, "s_r")?,
            DVector::from_column_slice(&x.q_d1),
            DVector::from_column_slice(&x.q_d2),
            DVector::from_column_slice(&x.q_r),
            DVector::from_column_slice(&x.w0),
            check,
        )
    }

    /// Validate and sample everything on the scenario grid.
    pub fn build(&self) -> Result<BuiltScenario> {
        let grid = SpatialGrid::new(self.numerics.n_cells)?;
        for (f, what) in [
            (&self.plant.h, "plant.h"),
            (&self.plant.g, "plant.g"),
            (&self.observation.c, "observation.c"),
            (&self.initial.z0, "initial.z0"),
            (&self.initial.z_hat0, "initial.z_hat0"),
        ] {
            f.validate(what)?;
        }
        if !self.plant.h.is_real() {
            return Err(Error::Config("plant.h must be real-valued".into()));
        }
        for (v, what) in [(self.tuning.c_s, "c_s"), (self.tuning.c_o, "c_o")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{what} must be nonnegative (got {v})")));
            }
        }
        let plant = PlantSpec::new(self.plant.q, self.plant.h.sample(grid), self.plant.g.sample(grid))?;
        let exosystem = self.exosystem_spec()?;
        let observation = ObservationFunctional::new(self.observation.theta, self.observation.x0, self.observation.c.sample(grid))?;
        let design = DesignParameters {
            c_s: self.tuning.c_s,
            c_o: self.tuning.c_o,
            desired_r: self.tuning.poles_r.clone().unwrap_or_else(|| default_poles(exosystem.n_r(), 1.0)),
            desired_d: self.tuning.poles_d.clone().unwrap_or_else(|| default_poles(exosystem.n_d(), 1.5)),
            solver: Default::default(),
        };
        let sim = SimConfig::new(grid, self.numerics.dt, self.numerics.horizon, self.numerics.record_every)?;
        let w_hat0 = match &self.initial.w_hat0 {
            Some(v) if v.len() != exosystem.n_w() => {
                return Err(Error::Config(format!(
                    "initial.w_hat0 has length {}, expected {}",
                    v.len(),
                    exosystem.n_w()
                )))
            }
            Some(v) => DVector::from_iterator(v.len(), v.iter().map(|x| Complex64::new(*x, 0.0))),
            None => DVector::zeros(exosystem.n_w()),
        };
        Ok(BuiltScenario {
            z0: self.initial.z0.sample(grid),
            observer_init: ObserverInit {
                z_hat0: self.initial.z_hat0.sample(grid),
                w_hat0,
            },
            plant,
            exosystem,
            observation,
            design,
            sim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips_through_json() {
        let s = Scenario::reference();
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn samples_interpolate() {
        let f = FunctionSpec::Samples {
            values: vec![0.0, 1.0, 0.0],
            imag: vec![],
        };
        assert_eq!(f.eval(0.25).re, 0.5);
        assert_eq!(f.eval(1.0).re, 0.0);
        assert_eq!(f.eval(0.5).re, 1.0);
    }

    #[test]
    fn modes_parse() {
        assert_eq!("closedloop".parse::<Mode>().unwrap(), Mode::Closedloop);
        assert!("loop".parse::<Mode>().is_err());
    }
}

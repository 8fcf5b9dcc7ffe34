//! Plant data `(q, h, g)` and the observation functional `C_e`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexProfile, SpatialGrid};

/// Boundary parameter `q`, potential `h` and disturbance shape `g` of
/// `z_t = -i z_xx + h z + g d1`, `z_x(0) = -iq z(0) + d2`, `z_x(1) = u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    q: f64,
    h: ComplexProfile,
    g: ComplexProfile,
}

impl PlantSpec {
    pub fn new(q: f64, h: ComplexProfile, g: ComplexProfile) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Plant(format!("q must be positive (got {q})")));
        }
        Self::oracle(q, h, g)
    }

    /// Like [`PlantSpec::new`] but also admits `q = 0` (used by verification oracles).
    pub fn oracle(q: f64, h: ComplexProfile, g: ComplexProfile) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::Plant(format!("q must be nonnegative (got {q})")));
        }
        h.grid().ensure_same(&g.grid(), "plant h and g")?;
        if h.values().iter().any(|v| v.im.abs() > 1e-12 || !v.re.is_finite()) {
            return Err(Error::Plant("potential h must be real-valued and finite".into()));
        }
        if g.values().iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Plant("g must be finite".into()));
        }
        Ok(Self { q, h, g })
    }

    /// Constant `h` and `g` on `grid`.
    pub fn uniform(q: f64, h: f64, g: f64, grid: SpatialGrid) -> Result<Self> {
        Self::new(
            q,
            ComplexProfile::constant(grid, Complex64::new(h, 0.0)),
            ComplexProfile::constant(grid, Complex64::new(g, 0.0)),
        )
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn h(&self) -> &ComplexProfile {
        &self.h
    }

    pub fn g(&self) -> &ComplexProfile {
        &self.g
    }

    pub fn grid(&self) -> SpatialGrid {
        self.h.grid()
    }
}

/// `C_e z = θ z(x0) + ∫₀¹ c(x) z(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFunctional {
    theta: Complex64,
    x0: f64,
    c: ComplexProfile,
}

impl ObservationFunctional {
    pub fn new(theta: Complex64, x0: f64, c: ComplexProfile) -> Result<Self> {
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::Config(format!("observation point x0 = {x0} outside [0, 1]")));
        }
        Ok(Self { theta, x0, c })
    }

    pub fn point(x0: f64, grid: SpatialGrid) -> Result<Self> {
        Self::new(Complex64::new(1.0, 0.0), x0, ComplexProfile::zeros(grid))
    }

    pub fn theta(&self) -> Complex64 {
        self.theta
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn weight(&self) -> &ComplexProfile {
        &self.c
    }

    pub fn grid(&self) -> SpatialGrid {
        self.c.grid()
    }

    pub fn evaluate(&self, z: &ComplexProfile) -> Result<Complex64> {
        evaluate_ce(self, z)
    }
}

/// Apply `C_e` to a sampled profile (linear interpolation at `x0`, trapezoid for the integral).
pub fn evaluate_ce(c: &ObservationFunctional, z: &ComplexProfile) -> Result<Complex64> {
    c.c.grid().ensure_same(&z.grid(), "evaluate_ce")?;
    let dist: Vec<Complex64> = c
        .c
        .values()
        .iter()
        .zip(z.values())
        .map(|(a, b)| a * b)
        .collect();
    Ok(c.theta * z.interpolate(c.x0) + crate::grid::trapezoid(&dist, z.grid().spacing()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_evaluation_at_origin() {
        let g = SpatialGrid::new(64).unwrap();
        let obs = ObservationFunctional::point(0.0, g).unwrap();
        let z = ComplexProfile::from_real_fn(g, |x| (1.3 * x).cosh() + 0.25);
        assert!((evaluate_ce(&obs, &z).unwrap() - c(1.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn distributed_constant() {
        let g = SpatialGrid::new(10).unwrap();
        let obs = ObservationFunctional::new(c(0.0, 0.0), 0.2, ComplexProfile::constant(g, c(1.0, 0.0))).unwrap();
        let z = ComplexProfile::constant(g, c(1.0, 0.0));
        assert!((evaluate_ce(&obs, &z).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn point_plus_distributed() {
        let g = SpatialGrid::new(200).unwrap();
        let obs = ObservationFunctional::new(c(1.0, 0.0), 0.5, ComplexProfile::constant(g, c(1.0, 0.0))).unwrap();
        let z = ComplexProfile::from_real_fn(g, |x| x);
        assert!((evaluate_ce(&obs, &z).unwrap() - c(1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn off_node_point_uses_linear_interpolation() {
        let g = SpatialGrid::new(10).unwrap();
        let obs = ObservationFunctional::point(0.33, g).unwrap();
        let z = ComplexProfile::from_real_fn(g, |x| x * x);
        // Nodes 0.3 and 0.4 bracket 0.33.
        let expect = 0.7 * 0.09 + 0.3 * 0.16;
        assert!((evaluate_ce(&obs, &z).unwrap().re - expect).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let g = SpatialGrid::new(10).unwrap();
        assert!(PlantSpec::uniform(0.0, 0.0, 0.0, g).is_err());
        assert!(PlantSpec::uniform(-1.0, 0.0, 0.0, g).is_err());
        assert!(PlantSpec::oracle(0.0, ComplexProfile::zeros(g), ComplexProfile::zeros(g)).is_ok());
        let g2 = SpatialGrid::new(12).unwrap();
        assert!(PlantSpec::new(1.0, ComplexProfile::zeros(g), ComplexProfile::zeros(g2)).is_err());
        assert!(PlantSpec::new(1.0, ComplexProfile::constant(g, c(0.0, 1.0)), ComplexProfile::zeros(g)).is_err());
        assert!(ObservationFunctional::point(1.5, g).is_err());
    }
}

//! Backstepping output regulation for a boundary-controlled anti-stable Schrödinger equation
//!
//! ```text
//! z_t = -i z_xx + h z + g d1,   z_x(0) = -iq z(0) + d2,   z_x(1) = u,
//! y = C_e z,   y_m = z(1),   w' = S w.
//! ```
//!
//! The crate solves the kernel problems, the regulator equations and the observer design,
//! and simulates every closed loop with Crank–Nicolson.

pub mod error;
pub mod exosystem;
pub mod format;
pub mod grid;
pub mod kernels;
pub mod plant;
pub mod regulator;
pub mod scenario;
pub mod sim;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result, SolvabilityError};
pub use exosystem::{exosystem_state, ExosystemSpec, ModalDecomposition, SpectrumCheck};
pub use grid::{l2_inner, ComplexProfile, SpatialGrid};
pub use plant::{evaluate_ce, ObservationFunctional, PlantSpec};

pub use num_complex::Complex64;

//! Massive ODE/IM correspondence for the Bullough-Dodd model.
//!
//! The crate solves the modified Bullough-Dodd equation on a cone, transports
//! the associated 3x3 linear problem from infinity to the origin to extract
//! Q-functions, and checks the quantum Wronskian and Bethe Ansatz equations.
//! The conformal limit is implemented independently as a cross-check.

pub mod bethe;
pub mod conformal;
pub mod error;
pub mod field;
pub mod io;
pub mod massive;
pub mod numerics;
pub mod params;
pub mod qtriple;

pub use error::{Error, Result};
pub use params::{omega, potential, scaling_map, ModelParams, SpectralPoint, C64};
pub use qtriple::{Gauge, QTriple, Which};
pub use bethe::{MassiveSource, ConformalSource, QSource, SourceKind, SpectralScan};
pub use conformal::{ConformalOptions, ConformalParams};
pub use field::{solve_field, FieldConfig, FieldSolution};
pub use massive::{compute_q_triple, to_chi_gauge, MassiveOptions};

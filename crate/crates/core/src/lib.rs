//! Lattice Bose-Hubbard mean-field dynamics with analog-spacetime diagnostics.
//!
//! The crate evolves a complex mean field and its linearized fluctuations on a
//! cubic lattice (1 to 3 dimensions), reduces them to hydrodynamic
//! density/phase variables, and extracts the effective acoustic geometry:
//! metric fields, horizon crossings, cosmological scale factors, and wave
//! perturbations. Everything is generic over the float width through
//! [`scalar::Real`]; the aliases at the crate root pin `f64`, which all
//! shipped scenarios use.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hydro;
pub mod lattice;
pub mod scalar;
pub mod scenario;
pub mod spectra;

pub use error::{Error, Result};
pub use scalar::Real;

/// Complex amplitude at the default precision.
pub type Complex64 = scalar::C<f64>;
/// Grid specialized to the default precision.
pub type Grid = lattice::LatticeGrid<f64>;
pub type RealField64 = lattice::RealField<f64>;
pub type ComplexField64 = lattice::ComplexField<f64>;
pub type VectorField64 = lattice::VectorField<f64>;
pub type BhParams64 = dynamics::BhParams<f64>;
pub type EvolutionState64 = dynamics::EvolutionState<f64>;
pub type IntegratorConfig64 = dynamics::IntegratorConfig<f64>;
pub type HydroState64 = hydro::HydroState<f64>;
pub type FluctHydro64 = hydro::FluctHydro<f64>;
pub type MetricField64 = geometry::MetricField<f64>;

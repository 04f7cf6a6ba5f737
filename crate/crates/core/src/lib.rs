//! Thermal free-surface lattice Boltzmann simulation of electron-beam powder-bed hatching.

pub mod analysis;
pub mod beam;
pub mod config;
pub mod domain;
pub mod error;
pub mod free_surface;
pub mod hydro;
pub mod io;
pub mod lattice;
pub mod powder;
pub mod run;
pub mod scalar;
pub mod sim;
pub mod thermal;
pub mod units;

pub use error::{ConfigIssue, Error, Result};
pub use scalar::Real;

/// Double-precision aliases of the generic core.
pub type Field = domain::Field3D<f64>;
pub type Simulation = sim::Simulation<f64>;
pub type EnergyMap = thermal::EnergyTemperatureMap<f64>;
pub type HydroParams = hydro::HydroParams<f64>;
pub type ThermalParams = thermal::ThermalParams<f64>;

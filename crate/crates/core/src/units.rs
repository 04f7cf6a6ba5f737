//! Physical ↔ lattice unit conversion, relaxation times and beam shape arithmetic.
//!
//! All configuration is in SI units. Conversion to lattice units happens once
//! during setup; the kernels only ever see lattice values.

use crate::error::{Error, Result};
use crate::lattice::CS2;
use crate::thermal::MaterialModel;

/// Stability guard on the hydrodynamic relaxation time.
pub const MIN_TAU: f64 = 0.505;

/// Kind of physical quantity, used to pick the conversion factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Length,
    Time,
    Velocity,
    Acceleration,
    /// Kinematic viscosity or thermal diffusivity [m²/s].
    Diffusivity,
    Density,
    /// Energy density or pressure [J/m³].
    EnergyDensity,
    Energy,
    Power,
    /// Volumetric power density [W/m³].
    PowerDensity,
    SurfaceTension,
    Volume,
}

impl Quantity {
    pub const ALL: [Quantity; 12] = [
        Quantity::Length,
        Quantity::Time,
        Quantity::Velocity,
        Quantity::Acceleration,
        Quantity::Diffusivity,
        Quantity::Density,
        Quantity::EnergyDensity,
        Quantity::Energy,
        Quantity::Power,
        Quantity::PowerDensity,
        Quantity::SurfaceTension,
        Quantity::Volume,
    ];
}

/// Lattice spacing, time step and reference density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeScaling {
    dx: f64,
    dt: f64,
    rho0: f64,
}

impl LatticeScaling {
    pub fn new(dx: f64, dt: f64, rho0: f64) -> Result<Self> {
        for (name, v) in [("dx", dx), ("dt", dt), ("rho0", rho0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { dx, dt, rho0 })
    }

    /// Δx = 5 µm, Δt = 0.175 µs.
    pub fn full(rho0: f64) -> Result<Self> {
        Self::new(5e-6, 1.75e-7, rho0)
    }

    /// Every conversion factor is one.
    pub fn unit() -> Self {
        Self { dx: 1.0, dt: 1.0, rho0: 1.0 }
    }

    /// Coarsened copy: `factor` times the spacing and `factor²` times the step.
    pub fn coarsened(&self, factor: f64) -> Result<Self> {
        Self::new(self.dx * factor, self.dt * factor * factor, self.rho0)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx * self.dx * self.dx
    }

    /// Size of one lattice unit of `q`, expressed in SI.
    pub fn factor(&self, q: Quantity) -> f64 {
        let (dx, dt, rho) = (self.dx, self.dt, self.rho0);
        let energy_density = rho * dx * dx / (dt * dt);
        match q {
            Quantity::Length => dx,
            Quantity::Time => dt,
            Quantity::Velocity => dx / dt,
            Quantity::Acceleration => dx / (dt * dt),
            Quantity::Diffusivity => dx * dx / dt,
            Quantity::Density => rho,
            Quantity::EnergyDensity => energy_density,
            Quantity::Energy => energy_density * dx * dx * dx,
            Quantity::Power => energy_density * dx * dx * dx / dt,
            Quantity::PowerDensity => energy_density / dt,
            Quantity::SurfaceTension => energy_density * dx,
            Quantity::Volume => dx * dx * dx,
        }
    }

    pub fn to_lattice(&self, q: Quantity, value: f64) -> f64 {
        value / self.factor(q)
    }

    pub fn to_physical(&self, q: Quantity, value: f64) -> f64 {
        value * self.factor(q)
    }
}

/// Gaussian electron beam: spread and electrical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamShape {
    sigma: f64,
    acceleration_voltage: f64,
    current: f64,
}

impl BeamShape {
    pub fn new(sigma: f64, acceleration_voltage: f64, current: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("beam sigma must be positive, got {sigma}")));
        }
        if !(acceleration_voltage > 0.0) || !(current >= 0.0) {
            return Err(Error::domain("beam voltage must be positive and current non-negative"));
        }
        Ok(Self { sigma, acceleration_voltage, current })
    }

    /// Beam with the current chosen so that `U·I` equals `power`.
    pub fn with_power(sigma: f64, acceleration_voltage: f64, power: f64) -> Result<Self> {
        if !(acceleration_voltage > 0.0) {
            return Err(Error::domain("acceleration voltage must be positive"));
        }
        Self::new(sigma, acceleration_voltage, power / acceleration_voltage)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn fwhm(&self) -> f64 {
        FWHM_PER_SIGMA * self.sigma
    }

    pub fn power(&self) -> f64 {
        self.acceleration_voltage * self.current
    }

    pub fn acceleration_voltage(&self) -> f64 {
        self.acceleration_voltage
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn set_sigma(&mut self, sigma: f64) -> Result<()> {
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("beam sigma must be positive, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(())
    }

    pub fn set_fwhm(&mut self, fwhm: f64) -> Result<()> {
        self.set_sigma(fwhm_to_sigma(fwhm)?)
    }

    pub fn set_power(&mut self, power: f64) -> Result<()> {
        if !(power >= 0.0) {
            return Err(Error::domain(format!("beam power must be non-negative, got {power}")));
        }
        self.current = power / self.acceleration_voltage;
        Ok(())
    }
}

/// `2·sqrt(2·ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn sigma_to_fwhm(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(FWHM_PER_SIGMA * sigma)
}

pub fn fwhm_to_sigma(fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) {
        return Err(Error::domain(format!("FWHM must be positive, got {fwhm}")));
    }
    Ok(fwhm / FWHM_PER_SIGMA)
}

/// Standard deviation of a beam whose footprint area grows by `area_increase`
/// (0.5 means +50 %). Area scales with σ².
pub fn scaled_sigma(base_sigma: f64, area_increase: f64) -> Result<f64> {
    if !(area_increase >= 0.0) {
        return Err(Error::domain(format!(
            "area increase must be non-negative, got {area_increase}"
        )));
    }
    if !(base_sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {base_sigma}")));
    }
    Ok(base_sigma * (1.0 + area_increase).sqrt())
}

/// Beam power from line energy [J/m] and scan speed [m/s].
pub fn beam_power(line_energy: f64, scan_speed: f64) -> Result<f64> {
    if !(line_energy >= 0.0) || !(scan_speed >= 0.0) {
        return Err(Error::domain(format!(
            "line energy and scan speed must be non-negative, got {line_energy} J/m at {scan_speed} m/s"
        )));
    }
    Ok(line_energy * scan_speed)
}

/// BGK relaxation time for a kinematic viscosity given in m²/s.
pub fn relaxation_time_hydro(nu: f64, scaling: &LatticeScaling) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::domain(format!("viscosity must be positive, got {nu} m^2/s")));
    }
    let nu_lattice = scaling.to_lattice(Quantity::Diffusivity, nu);
    let tau = nu_lattice / CS2 + 0.5;
    if tau <= MIN_TAU {
        return Err(Error::domain(format!(
            "viscosity {nu} m^2/s gives tau_f = {tau:.5} <= {MIN_TAU}; reduce dx or increase dt"
        )));
    }
    Ok(tau)
}

/// Relaxation time of the energy populations at temperature `temperature`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalTau {
    pub tau: f64,
    /// The temperature was outside the property tables and got clamped.
    pub clamped: bool,
}

pub fn relaxation_time_thermal(
    temperature: f64,
    material: &MaterialModel,
    scaling: &LatticeScaling,
) -> ThermalTau {
    let (t, clamped) = material.clamp_to_table(temperature);
    let k = material.diffusivity(t);
    let k_lattice = scaling.to_lattice(Quantity::Diffusivity, k);
    ThermalTau { tau: k_lattice / CS2 + 0.5, clamped }
}

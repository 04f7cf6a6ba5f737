//! Time stepping of the coupled beam, flow, heat and free-surface model.

use std::time::Instant;

use crate::beam::{deposit_energy, AbsorptionModel, Deposition, HatchPath};
use crate::domain::{CellFlag, Field3D};
use crate::error::{Error, Result};
use crate::free_surface::{
    boundary_density, convert_cells, surface_geometry, update_fill_levels, update_phase_state,
    SurfaceParams,
};
use crate::hydro::{collide_stream_hydro, HydroParams};
use crate::scalar::Real;
use crate::thermal::{collide_stream_thermal, EnergyTemperatureMap, MaterialModel, ThermalParams};
use crate::units::{relaxation_time_hydro, LatticeScaling, Quantity};

/// Physical settings of the coupled model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Gravitational acceleration along -z [m/s²].
    pub gravity: f64,
    /// Kinematic viscosity of the melt [m²/s].
    pub viscosity: f64,
    /// [N/m]
    pub surface_tension: f64,
    /// [deg]
    pub contact_angle: f64,
    /// Bound on the interface curvature [1/cells].
    pub max_curvature: Option<f64>,
    pub negative_tolerance: f64,
    pub mach_limit: f64,
    /// Temperature held at the bottom plate [K]; `None` is adiabatic.
    pub bottom_temperature: Option<f64>,
}

impl ModelParams {
    pub fn for_material(material: &MaterialModel, preheat: f64) -> Self {
        Self {
            gravity: 9.81,
            viscosity: material.nu_liquid,
            surface_tension: material.surface_tension,
            contact_angle: material.contact_angle,
            max_curvature: None,
            negative_tolerance: -1e-12,
            mach_limit: 0.3,
            bottom_temperature: Some(preheat),
        }
    }
}

/// The beam as seen by one simulation.
#[derive(Debug, Clone)]
pub struct BeamDrive {
    pub path: HatchPath,
    pub sigma: f64,
    pub absorption: AbsorptionModel,
}

/// What happened in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub deposition: Option<Deposition>,
    pub max_speed: f64,
    pub filled: usize,
    pub emptied: usize,
    pub solidified: usize,
    pub melted: usize,
}

/// Running totals used to check conservation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Ledger {
    pub initial_mass: f64,
    pub initial_energy: f64,
    /// Σ of beam source densities entering the lattice.
    pub deposited_lattice: f64,
    pub boundary_inflow: f64,
    /// Energy advected across the free surface.
    pub surface_advection: f64,
    pub conversion_energy: f64,
    /// Mass held back by conversions that found no neighbour.
    pub parked_mass: f64,
    /// Absorbed beam energy [J].
    pub deposited_joules: f64,
    pub lost_joules: f64,
}

/// Wall-clock seconds spent in each part of the step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub beam: f64,
    pub geometry: f64,
    pub hydro: f64,
    pub thermal: f64,
    pub surface: f64,
    pub phase: f64,
}

pub struct Simulation<T: Real> {
    pub field: Field3D<T>,
    pub map: EnergyTemperatureMap<T>,
    pub scaling: LatticeScaling,
    pub hydro: HydroParams<T>,
    pub thermal: ThermalParams<T>,
    pub surface: SurfaceParams<T>,
    pub step: u64,
    pub time: f64,
    pub ledger: Ledger,
    pub timings: PhaseTimings,
    /// Allowed per-step energy imbalance relative to the step's deposit.
    pub energy_tolerance: f64,
    last_residual: f64,
    source: Vec<T>,
    mass_delta: Vec<T>,
}

impl<T: Real> Simulation<T> {
    pub fn new(
        field: Field3D<T>,
        map: EnergyTemperatureMap<T>,
        scaling: LatticeScaling,
        model: &ModelParams,
    ) -> Result<Self> {
        let tau = relaxation_time_hydro(model.viscosity, &scaling)?;
        let g = scaling.to_lattice(Quantity::Acceleration, model.gravity);
        let mut hydro = HydroParams::new(T::lit(tau), [T::zero(), T::zero(), T::lit(-g)])?;
        hydro.negative_tolerance = T::lit(model.negative_tolerance);
        hydro.mach_limit = T::lit(model.mach_limit);
        let thermal = match model.bottom_temperature {
            Some(t) => ThermalParams::with_bottom(&map, T::lit(t)),
            None => ThermalParams::adiabatic(),
        };
        let sigma = scaling.to_lattice(Quantity::SurfaceTension, model.surface_tension);
        let mut surface = SurfaceParams::new(T::lit(sigma), model.contact_angle);
        surface.max_curvature = model.max_curvature.map(T::lit);
        let n = field.grid.len();
        let mut sim = Self {
            field,
            map,
            scaling,
            hydro,
            thermal,
            surface,
            step: 0,
            time: 0.0,
            ledger: Ledger::default(),
            timings: PhaseTimings::default(),
            energy_tolerance: 1e-8f64.max(1e4 * T::epsilon().as_f64()),
            last_residual: 0.0,
            source: vec![T::zero(); n],
            mass_delta: vec![T::zero(); n],
        };
        sim.ledger.initial_mass = sim.field.total_mass().as_f64();
        sim.ledger.initial_energy = sim.field.total_energy().as_f64();
        Ok(sim)
    }

    /// Advances one time step; the beam, if any, deposits during `[time, time + dt]`.
    pub fn advance(&mut self, beam: Option<&BeamDrive>) -> Result<StepReport> {
        let dt = self.scaling.dt();
        let mut clock = Instant::now();
        let mut lap = || {
            let now = Instant::now();
            let d = (now - clock).as_secs_f64();
            clock = now;
            d
        };
        let deposition = match beam {
            Some(b) if b.path.power > 0.0 && self.time < b.path.end_time() => Some(deposit_energy(
                &self.field,
                &b.path,
                b.sigma,
                self.time,
                dt,
                &b.absorption,
                &self.scaling,
                &mut self.source,
            )),
            _ => None,
        };
        let heated = deposition.as_ref().is_some_and(|d| d.deposited > 0.0);
        if let Some(d) = &deposition {
            self.ledger.deposited_joules += d.deposited;
            self.ledger.lost_joules += d.lost;
        }

        self.timings.beam += lap();

        let mobile = (0..self.field.grid.len()).any(|i| self.field.is_mobile(i));
        let mut max_speed = 0.0;
        if mobile {
            let geometry = surface_geometry(&self.field, self.surface.contact_angle, self.surface.max_curvature);
            let rho_b = boundary_density(&self.field, Some(&geometry), &self.surface);
            self.timings.geometry += lap();
            self.mass_delta.iter_mut().for_each(|m| *m = T::zero());
            let rep = collide_stream_hydro(&mut self.field, &self.hydro, Some(&rho_b), &mut self.mass_delta, self.step)?;
            max_speed = rep.max_speed.as_f64();
            self.timings.hydro += lap();
        }

        let source = heated.then_some(&self.source[..]);
        let th = collide_stream_thermal(&mut self.field, &self.map, source, &self.thermal, self.step)?;
        self.ledger.deposited_lattice += th.deposited.as_f64();
        self.ledger.boundary_inflow += th.boundary_inflow.as_f64();
        self.ledger.surface_advection += th.surface_advection.as_f64();
        self.timings.thermal += lap();

        let (mut filled, mut emptied) = (0, 0);
        if mobile {
            update_fill_levels(&mut self.field, &self.mass_delta);
            let conv = convert_cells(&mut self.field, &self.map, self.surface.epsilon);
            self.ledger.conversion_energy += conv.energy_delta.as_f64();
            self.ledger.parked_mass += conv.parked.as_f64();
            filled = conv.filled.len();
            emptied = conv.emptied.len();
        }
        self.timings.surface += lap();
        let phase = update_phase_state(&mut self.field, &self.map);
        self.timings.phase += lap();
        self.check_energy(th.deposited.as_f64())?;

        self.step += 1;
        self.time = self.step as f64 * dt;
        Ok(StepReport {
            deposition,
            max_speed,
            filled,
            emptied,
            solidified: phase.solidified,
            melted: phase.melted,
        })
    }

    /// Material mass including parked mass, lattice units.
    pub fn total_mass(&self) -> f64 {
        self.field.total_mass().as_f64() + self.ledger.parked_mass
    }

    /// Σ E now minus Σ E expected from the initial value and all recorded fluxes.
    pub fn energy_residual(&self) -> f64 {
        let expected = self.ledger.initial_energy
            + self.ledger.deposited_lattice
            + self.ledger.boundary_inflow
            + self.ledger.surface_advection
            + self.ledger.conversion_energy;
        self.field.total_energy().as_f64() - expected
    }

    /// Fails if this step's change of the residual exceeds the tolerance; steps
    /// without deposit are measured against 1e-4 of the total energy.
    fn check_energy(&mut self, deposited: f64) -> Result<()> {
        let r = self.energy_residual();
        let scale = deposited.abs().max(1e-4 * self.field.total_energy().as_f64().abs());
        let d = r - self.last_residual;
        self.last_residual = r;
        if !(d.abs() <= self.energy_tolerance * scale) {
            return Err(Error::EnergyBalance { step: self.step, residual: d, deposited });
        }
        Ok(())
    }

    /// Relative mass drift since the start.
    pub fn mass_drift(&self) -> f64 {
        (self.total_mass() - self.ledger.initial_mass) / self.ledger.initial_mass
    }

    pub fn max_temperature(&self) -> f64 {
        self.temperature_range().1
    }

    /// Lowest and highest temperature over material cells [K].
    pub fn temperature_range(&self) -> (f64, f64) {
        let f = &self.field;
        (0..f.grid.len())
            .filter(|&i| f.flags[i].is_material())
            .map(|i| f.temperature[i].as_f64())
            .fold((f64::MAX, f64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)))
    }

    /// Number of cells in each state: (liquid, mobile interface, frozen interface, solid).
    pub fn census(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for i in 0..self.field.grid.len() {
            match self.field.flags[i] {
                CellFlag::Liquid => c[0] += 1,
                CellFlag::Interface if !self.field.frozen[i] => c[1] += 1,
                CellFlag::Interface => c[2] += 1,
                CellFlag::Solid => c[3] += 1,
                _ => {}
            }
        }
        c
    }
}

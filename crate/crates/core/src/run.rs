//! Single runs and process-window sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::analysis::{
    averaged_max_temp, classify, melt_pool_max_temperature, melt_pool_volume, relative_density, RunMetrics, Sample,
};
use crate::beam::{build_hatch_path, HatchVariant};
use crate::config::RunConfig;
use crate::domain::{init_domain, DomainSpec};
use crate::error::{Error, Result};
use crate::io::{self, SweepRow};
use crate::powder::{generate_bed, voxelize, SphereBed};
use crate::scalar::Real;
use crate::sim::{BeamDrive, ModelParams, PhaseTimings, Simulation};
use crate::thermal::{build_energy_map, MaterialModel};

/// Cells kept free above the highest particle.
pub const HEADROOM_CELLS: usize = 4;

pub fn material_for(cfg: &RunConfig) -> Result<MaterialModel> {
    let m = MaterialModel::ti6al4v();
    match &cfg.material_file {
        Some(p) => m.with_tables_from_file(p),
        None => Ok(m),
    }
}

/// The configured bed file, or a freshly generated bed.
pub fn load_or_generate_bed(cfg: &RunConfig) -> Result<SphereBed> {
    let d = &cfg.domain;
    match &cfg.bed_file {
        Some(p) => {
            let f = fs::File::open(p).map_err(|source| Error::File { path: p.clone(), source })?;
            SphereBed::read_csv(f, [d.extent[0], d.extent[1]], d.substrate_height)
        }
        None => generate_bed(d, &cfg.powder),
    }
}

/// Raises the box so the bed plus headroom fits; whole cells only.
pub fn fit_domain(spec: &DomainSpec, bed_top: f64, dx: f64) -> DomainSpec {
    let need = ((bed_top / dx).ceil() as usize + HEADROOM_CELLS) as f64 * dx;
    let mut s = *spec;
    if need > s.extent[2] {
        s.extent[2] = need;
    }
    s
}

pub fn model_params(cfg: &RunConfig, m: &MaterialModel) -> ModelParams {
    let o = &cfg.model;
    let mut p = ModelParams::for_material(m, cfg.domain.preheat_temperature);
    p.gravity = o.gravity;
    p.negative_tolerance = o.negative_pdf_tolerance;
    p.mach_limit = o.mach_limit;
    p.viscosity = o.viscosity.unwrap_or(m.nu_liquid);
    p.surface_tension = o.surface_tension.unwrap_or(m.surface_tension) * o.surface_tension_scale;
    p.contact_angle = o.contact_angle.unwrap_or(m.contact_angle);
    p.max_curvature = o.max_curvature;
    p
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub metrics: RunMetrics,
    pub summary: String,
    pub steps: u64,
    pub grid: [usize; 3],
    /// Relative density of the untouched bed.
    pub initial_density: f64,
    pub mass_drift: f64,
    /// Coldest and hottest material cell at the end [K].
    pub temperature_range: (f64, f64),
    pub timings: PhaseTimings,
}

/// Runs one configuration in double precision and writes its artifacts.
pub fn run_single(cfg: &RunConfig) -> Result<RunReport> {
    run_single_with::<f64>(cfg)
}

/// Bed → voxelization → beam time loop → cooling → analysis.
///
/// Writes `series.csv` and `summary.csv` (and snapshots) into the output
/// directory; a fault leaves `fault.vtk` there.
pub fn run_single_with<T: Real>(cfg: &RunConfig) -> Result<RunReport> {
    let material = material_for(cfg)?;
    let scaling = cfg.scaling(material.rho0)?;
    let dx = scaling.dx();
    cfg.strategy.validate(cfg.max_power)?;
    cfg.absorption.validate()?;
    let sigma = cfg.strategy.sigma(cfg.beam_sigma)?;
    let path = build_hatch_path(&cfg.strategy, [cfg.domain.extent[0], cfg.domain.extent[1]])?;

    let bed = load_or_generate_bed(cfg)?;
    let spec = fit_domain(&cfg.domain, bed.top(), dx);
    let map = build_energy_map::<T>(&material, &scaling)?;
    let mut field = init_domain(&spec, &scaling, &map)?;
    let t0 = T::lit(spec.preheat_temperature);
    voxelize(&bed, &mut field, dx, t0, &map);
    let mbox = spec.measurement_box(&field.grid, dx);
    let initial_density = relative_density(&field, &mbox);
    let grid = [field.grid.nx, field.grid.ny, field.grid.nz];
    info!(
        "grid {}x{}x{}, {} spheres, bed density {initial_density:.4}, power {} W",
        grid[0],
        grid[1],
        grid[2],
        bed.spheres.len(),
        path.power
    );

    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|source| Error::File { path: out.clone(), source })?;
    let model = model_params(cfg, &material);
    let mut sim = Simulation::new(field, map, scaling, &model)?;
    let liquidus = sim.map.liquidus();
    let beam = BeamDrive { path, sigma, absorption: cfg.absorption };
    let end = beam.path.end_time() + cfg.cooling_time;
    let dt = scaling.dt();
    let mut series = vec![Sample { t: 0.0, melt_volume: 0.0, max_temp: None }];

    while sim.time + 0.5 * dt < end {
        if let Err(e) = sim.advance(Some(&beam)) {
            let p = out.join("fault.vtk");
            if let Err(w) = io::write_vtk_file(&sim.field, dx, &format!("fault at step {}: {e}", sim.step), &p) {
                warn!("could not write {}: {w}", p.display());
            }
            return Err(e);
        }
        if sim.step % cfg.sample_every == 0 {
            series.push(Sample {
                t: sim.time,
                melt_volume: melt_pool_volume(&sim.field, liquidus, dx),
                max_temp: melt_pool_max_temperature(&sim.field, liquidus),
            });
        }
        if cfg.vtk_every > 0 && sim.step % cfg.vtk_every == 0 {
            let p = out.join(format!("snap_{:07}.vtk", sim.step));
            if let Err(w) = io::write_vtk_file(&sim.field, dx, &format!("step {}", sim.step), &p) {
                warn!("could not write {}: {w}", p.display());
            }
        }
    }

    let density = relative_density(&sim.field, &mbox);
    let avg = averaged_max_temp(&series, &beam.path.line_windows(), spec.preheat_temperature);
    let metrics = RunMetrics {
        relative_density: density,
        averaged_max_temp: avg,
        series,
        deposited_energy: sim.ledger.deposited_joules,
        classification: classify(density, avg.value, &cfg.thresholds),
    };
    let summary = io::summary_line(
        cfg.strategy.line_energy,
        cfg.strategy.scan_speed,
        &cfg.strategy.variant.label(),
        &metrics,
    );
    io::write_series_file(&metrics.series, &out.join("series.csv"))?;
    io::write_summary_file(&summary, &out.join("summary.csv"))?;
    let tm = sim.timings;
    info!(
        "{summary} after {} steps; seconds in beam {:.1}, geometry {:.1}, flow {:.1}, heat {:.1}, surface {:.1}, phase {:.1}",
        sim.step, tm.beam, tm.geometry, tm.hydro, tm.thermal, tm.surface, tm.phase
    );
    Ok(RunReport {
        metrics,
        summary,
        steps: sim.step,
        grid,
        initial_density,
        mass_drift: sim.mass_drift(),
        temperature_range: sim.temperature_range(),
        timings: sim.timings,
    })
}

/// Configurations of a process-window sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    /// [J/m]
    pub energies: Vec<f64>,
    /// [m/s]
    pub speeds: Vec<f64>,
    pub variant: HatchVariant,
    /// Runs per configuration, seeded `seed, seed + 1, …`.
    pub replicates: usize,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.energies.is_empty() || self.speeds.is_empty() || self.replicates == 0 {
            return Err(Error::domain("sweep needs energies, speeds and at least one replicate"));
        }
        if self.speeds.iter().any(|v| !(*v > 0.0)) || self.energies.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::domain("sweep speeds must be positive and energies non-negative"));
        }
        Ok(())
    }

    /// Every (energy, speed, seed) in row order.
    pub fn points(&self, base_seed: u64) -> Vec<(f64, f64, u64)> {
        let mut v = Vec::new();
        for &e in &self.energies {
            for &s in &self.speeds {
                for r in 0..self.replicates {
                    v.push((e, s, base_seed + r as u64));
                }
            }
        }
        v
    }
}

fn run_dir(base: &Path, variant: &HatchVariant, e: f64, v: f64, seed: u64) -> PathBuf {
    base.join(format!("{}_{e}_{v}_s{seed}", variant.label().replace(':', "-")))
}

/// Runs every configuration on `workers` threads; failures become fault rows.
/// Writes `sweep.csv` and `window.csv` into the base output directory.
pub fn run_sweep(base: &RunConfig, grid: &SweepGrid, workers: usize) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
    let points = grid.points(base.seed);
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&(e, v, seed)| {
                let mut cfg = base.clone().with_strategy(grid.variant, e, v).with_seed(seed);
                cfg.output_dir = run_dir(&base.output_dir, &grid.variant, e, v, seed);
                let outcome = run_single(&cfg).map(|r| r.metrics).map_err(|err| {
                    warn!("run E_L={e} v={v} seed={seed} failed: {err}");
                    format!("{}: {err}", err.kind())
                });
                SweepRow { line_energy: e, scan_speed: v, strategy: grid.variant.label(), seed, outcome }
            })
            .collect()
    });
    io::write_sweep_files(&rows, &base.output_dir)?;
    Ok(rows)
}

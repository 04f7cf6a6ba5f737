//! Analytic reference problems and small run setups shared by the integration tests.
#![allow(dead_code)]

use std::fmt;
use std::path::Path;

use hatchlbm::config::{parse_config, Preset, RunConfig};
use hatchlbm::domain::{CellFlag, Field3D, Grid};
use hatchlbm::hydro::{collide_stream_hydro, HydroParams};
use hatchlbm::sim::{ModelParams, Simulation};
use hatchlbm::thermal::{build_energy_map, collide_stream_thermal, reset_thermal_equilibrium, MaterialModel, ThermalParams};
use hatchlbm::units::LatticeScaling;

pub const BASIC_CFG: &str = include_str!("../../../../configs/basic.cfg");

/// Measured error of a reference problem against its limit.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub error: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.limit
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: error {:.3e} (limit {:.0e}) {}", self.name, self.error, self.limit, self.detail)
    }
}

pub fn erf(x: f64) -> f64 {
    // Taylor series near zero, continued fraction in the tail
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        let mut sum = x;
        let mut term = x;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -x * x / n;
            sum += term / (2.0 * n + 1.0);
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    } else {
        1.0 - erfc_cf(x)
    }
}

fn erfc_cf(x: f64) -> f64 {
    let mut f = 0.0;
    for k in (1..60).rev() {
        f = (k as f64 / 2.0) / (x + f);
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / (x + f)
}

/// ρ = c_p = 1 material with diffusivity 1/6 (τ = 1), melting at 1000–1001 K.
pub fn unit_material(latent: f64) -> MaterialModel {
    MaterialModel::constant(1.0, 1.0, 1.0 / 6.0, latent, 1000.0, 1001.0).unwrap()
}

pub fn unit_map(latent: f64) -> hatchlbm::EnergyMap {
    build_energy_map::<f64>(&unit_material(latent), &LatticeScaling::unit()).unwrap()
}

/// Body-force driven flow between two plates; error relative to the peak speed.
pub fn poiseuille() -> Check {
    let nz = 16;
    let g = Grid::new(1, 1, nz).unwrap();
    let mut f = Field3D::<f64>::uniform(g, CellFlag::Liquid, 0.0, 1.0);
    let (tau, force) = (0.8, 1e-6);
    let nu = (tau - 0.5) / 3.0;
    let p = HydroParams::new(tau, [force, 0.0, 0.0]).unwrap();
    let mut dm = vec![0.0; g.len()];
    for step in 0..20_000 {
        collide_stream_hydro(&mut f, &p, None, &mut dm, step).unwrap();
    }
    // the closed ends act as half-way bounce-back walls at z = -1/2 and nz - 1/2
    let umax = force / (2.0 * nu) * (nz as f64 / 2.0).powi(2);
    let err = (0..nz)
        .map(|z| {
            let zc = z as f64 + 0.5;
            (f.vel[z][0] - force / (2.0 * nu) * zc * (nz as f64 - zc)).abs()
        })
        .fold(0.0, f64::max);
    Check { name: "poiseuille", error: err / umax, limit: 0.01, detail: format!("u_max {umax:.3e}") }
}

pub fn rod(nz: usize, t0: f64, map: &hatchlbm::EnergyMap) -> Field3D<f64> {
    let g = Grid::new(1, 1, nz).unwrap();
    let mut f = Field3D::uniform(g, CellFlag::Solid, 0.0, t0);
    f.flags[0] = CellFlag::DirichletBottom;
    reset_thermal_equilibrium(&mut f, map);
    f
}

/// Semi-infinite rod after a sudden change of the wall temperature.
pub fn conduction() -> Check {
    let map = unit_map(0.0);
    let (t0, tw) = (300.0, 700.0);
    let mut f = rod(200, t0, &map);
    let p = ThermalParams::with_bottom(&map, tw);
    let steps = 1500;
    for s in 0..steps {
        collide_stream_thermal(&mut f, &map, None, &p, s).unwrap();
    }
    let l = 2.0 * (steps as f64 / 6.0).sqrt();
    let err = (0..60)
        .map(|z| (f.temperature[z] - (tw + (t0 - tw) * erf((z as f64 + 0.5) / l))).abs())
        .fold(0.0, f64::max);
    Check { name: "conduction", error: err / (tw - t0), limit: 0.01, detail: format!("after {steps} steps") }
}

/// Root of λ·exp(λ²)·erf(λ) = St/√π by bisection.
pub fn neumann_lambda(stefan: f64) -> f64 {
    let g = |l: f64| l * (l * l).exp() * erf(l) - stefan / std::f64::consts::PI.sqrt();
    let (mut a, mut b) = (1e-6, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Melting of a rod held at the melting point by a hot wall.
pub fn stefan() -> Check {
    let latent = 100.0;
    let map = unit_map(latent);
    let (tm, tw) = (1000.0, 1100.0);
    let mut f = rod(120, tm, &map);
    let p = ThermalParams::with_bottom(&map, tw);
    // liquid fraction from the energy between the solidus and the fully molten state at 1001 K
    let (e_s, e_l) = (map.energy_at(1000.0), map.energy_at(1001.0));
    let lambda = neumann_lambda((tw - tm) / latent);
    let mut step = 0;
    let mut err: f64 = 0.0;
    let mut detail = String::new();
    for check in [2000u64, 5000] {
        while step < check {
            collide_stream_thermal(&mut f, &map, None, &p, step).unwrap();
            step += 1;
        }
        let front: f64 = f.energy.iter().map(|&e| ((e - e_s) / (e_l - e_s)).clamp(0.0, 1.0)).sum();
        let want = 2.0 * lambda * (step as f64 / 6.0).sqrt();
        err = err.max((front - want).abs() / want);
        detail += &format!("front {front:.2}/{want:.2} ");
    }
    Check { name: "stefan", error: err, limit: 0.03, detail }
}

/// Closed box with a droplet of radius `r` cells, above the liquidus.
pub fn droplet(n: usize, r: f64, map: &hatchlbm::EnergyMap) -> Field3D<f64> {
    let g = Grid::new(n, n, n).unwrap();
    let mut f = Field3D::uniform(g, CellFlag::Gas, 0.0, 2000.0);
    let c = n as f64 / 2.0;
    let sub = 8;
    for i in 0..g.len() {
        let [x, y, z] = g.coords(i);
        let mut inside = 0;
        for a in 0..sub {
            for b in 0..sub {
                for d in 0..sub {
                    let p = |k: usize, o: usize| k as f64 + (o as f64 + 0.5) / sub as f64 - c;
                    let (px, py, pz) = (p(x, a), p(y, b), p(z, d));
                    if px * px + py * py + pz * pz < r * r {
                        inside += 1;
                    }
                }
            }
        }
        let phi = inside as f64 / (sub * sub * sub) as f64;
        if phi >= 1.0 {
            f.flags[i] = CellFlag::Liquid;
        } else if phi > 0.0 {
            f.flags[i] = CellFlag::Interface;
        }
        f.fill[i] = phi;
        f.mass[i] = phi;
    }
    f.close_interface_layer();
    reset_thermal_equilibrium(&mut f, map);
    f
}

pub fn droplet_model(sigma: f64) -> ModelParams {
    ModelParams {
        gravity: 0.0,
        viscosity: 0.1,
        surface_tension: sigma,
        contact_angle: 90.0,
        max_curvature: None,
        negative_tolerance: -1e-12,
        mach_limit: 0.3,
        bottom_temperature: None,
    }
}

/// Pressure jump across a resting droplet against 2σ/R.
pub fn laplace() -> Check {
    let map = unit_map(0.0);
    let f = droplet(32, 10.0, &map);
    let sigma = 2e-3;
    let mut sim = Simulation::new(f, map, LatticeScaling::unit(), &droplet_model(sigma)).unwrap();
    for _ in 0..3000 {
        sim.advance(None).unwrap();
    }
    let f = &sim.field;
    let volume: f64 = (0..f.grid.len())
        .filter(|&i| f.flags[i].is_material())
        .map(|i| if f.flags[i] == CellFlag::Interface { f.fill[i] } else { 1.0 })
        .sum();
    let r = (3.0 * volume / (4.0 * std::f64::consts::PI)).cbrt();
    // mean density of the core, well inside the interface
    let core: Vec<f64> = (0..f.grid.len())
        .filter(|&i| {
            let p = f.grid.coords(i).map(|k| k as f64 + 0.5 - 16.0);
            (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() < r - 3.0
        })
        .map(|i| f.rho[i])
        .collect();
    let dp = (core.iter().sum::<f64>() / core.len() as f64 - 1.0) / 3.0;
    let want = 2.0 * sigma / r;
    Check {
        name: "laplace",
        error: (dp - want).abs() / want,
        limit: 0.05,
        detail: format!("dp {dp:.4e} vs {want:.4e} at R {r:.2}"),
    }
}

/// Column with a Gaussian temperature bump, moving at `u` along z.
///
/// The column runs along z because x and y are periodic: a single-cell row
/// along x would see the closed z ends reflect its diagonal populations.
pub fn gaussian_row(n: usize, s0: f64, u: f64, map: &hatchlbm::EnergyMap) -> Field3D<f64> {
    let g = Grid::new(1, 1, n).unwrap();
    let mut f = Field3D::uniform(g, CellFlag::Liquid, 0.0, 300.0);
    for i in 0..n {
        let x = i as f64 - n as f64 / 2.0;
        f.temperature[i] = 300.0 + 100.0 * (-x * x / (2.0 * s0 * s0)).exp();
        f.vel[i] = [0.0, 0.0, u];
    }
    reset_thermal_equilibrium(&mut f, map);
    f
}

/// Centre and variance of the excess temperature.
pub fn spread(f: &Field3D<f64>) -> (f64, f64) {
    spread_within(f, 0..f.temperature.len())
}

/// [`spread`] over the cells of `window` only.
pub fn spread_within(f: &Field3D<f64>, window: std::ops::Range<usize>) -> (f64, f64) {
    let w: Vec<(f64, f64)> = window.map(|i| (i as f64, f.temperature[i] - 300.0)).collect();
    let m0: f64 = w.iter().map(|p| p.1).sum();
    let m1: f64 = w.iter().map(|(x, v)| x * v).sum::<f64>() / m0;
    let m2: f64 = w.iter().map(|(x, v)| (x - m1).powi(2) * v).sum::<f64>() / m0;
    (m1, m2)
}

/// Small desk-preset run: one short line over a narrow box.
pub fn small_run(out: &Path, line_energy: f64) -> RunConfig {
    let mut cfg = parse_config(BASIC_CFG).unwrap().with_preset(Preset::Desk);
    cfg.domain.extent[0] = 0.32e-3;
    cfg.domain.extent[1] = 0.16e-3;
    cfg.domain.margin = 0.04e-3;
    cfg.strategy.line_energy = line_energy;
    cfg.strategy.n_lines = 2;
    cfg.strategy.line_offset = 0.06e-3;
    cfg.strategy.edge_offset = 0.05e-3;
    cfg.cooling_time = 0.05e-3;
    cfg.output_dir = out.to_path_buf();
    cfg
}

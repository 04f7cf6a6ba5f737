//! Isothermal D3Q19 BGK step with Guo body forcing and free-surface links.

use rayon::prelude::*;

use crate::domain::{CellFlag, Field3D, Grid};
use crate::error::{Error, Result};
use crate::free_surface::reconstruct_population;
use crate::lattice::{self, C, OPP, Q};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroParams<T> {
    pub tau: T,
    /// Body acceleration in lattice units.
    pub gravity: [T; 3],
    /// Post-collision populations below this value abort the run.
    pub negative_tolerance: T,
    /// Largest admissible lattice speed.
    pub mach_limit: T,
}

impl<T: Real> HydroParams<T> {
    pub fn new(tau: T, gravity: [T; 3]) -> Result<Self> {
        if !(tau > T::lit(0.5)) {
            return Err(Error::domain(format!("tau_f = {tau} must exceed 0.5")));
        }
        let g = gravity.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
        if !(g < 1e-4) {
            return Err(Error::domain(format!("lattice gravity {g:e} is not small against 1e-4")));
        }
        Ok(Self {
            tau,
            gravity,
            negative_tolerance: T::lit(-1e-12),
            mach_limit: T::lit(0.3),
        })
    }
}

/// What a mobile cell sees when pulling along one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    /// Regular fluid neighbour; mass crosses with this weight code.
    Fluid,
    /// Missing population must be rebuilt from the gas pressure.
    Gas,
    /// Half-way bounce-back.
    Wall,
}

/// Classifies the neighbour `j` of a mobile cell; `None` is outside the domain.
#[inline(always)]
pub fn classify_link(flags: &[CellFlag], frozen: &[bool], j: Option<usize>) -> Link {
    match j {
        None => Link::Wall,
        Some(j) => match flags[j] {
            CellFlag::Liquid => Link::Fluid,
            CellFlag::Interface if !frozen[j] => Link::Fluid,
            CellFlag::Gas => Link::Gas,
            _ => Link::Wall,
        },
    }
}

/// Weight of the mass carried across the link between mobile cell `i` and fluid neighbour `j`.
#[inline(always)]
pub fn exchange_weight<T: Real>(flags: &[CellFlag], fill: &[T], i: usize, j: usize) -> T {
    match (flags[i], flags[j]) {
        (CellFlag::Interface, CellFlag::Interface) => T::lit(0.5) * (fill[i] + fill[j]),
        _ => T::one(),
    }
}

/// Mass each interface cell gains when the current post-collision populations stream.
///
/// Mass lost by one cell over a link is gained by the other, so the deltas sum to zero.
pub fn mass_deltas<T: Real>(field: &Field3D<T>) -> Vec<T> {
    let g = field.grid;
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            if field.flags[i] != CellFlag::Interface || field.frozen[i] {
                return T::zero();
            }
            let mut dm = T::zero();
            for q in 1..Q {
                let j = pull_source(&g, i, q);
                if classify_link(&field.flags, &field.frozen, j) == Link::Fluid {
                    let j = j.unwrap();
                    let w = exchange_weight(&field.flags, &field.fill, i, j);
                    dm = dm + w * (field.f[j * Q + q] - field.f[i * Q + OPP[q]]);
                }
            }
            dm
        })
        .collect()
}

/// Cell the population travelling along `q` is pulled from.
#[inline(always)]
pub fn pull_source(grid: &Grid, i: usize, q: usize) -> Option<usize> {
    let c = C[q];
    grid.offset(i, [-c[0], -c[1], -c[2]])
}

/// Guo source term for direction `q`.
#[inline(always)]
fn guo_term<T: Real>(q: usize, u: [T; 3], force: [T; 3], pref: T) -> T {
    let c = C[q];
    let cu = lattice::cdot(q, u);
    let nine = T::lit(9.0);
    let three = T::lit(3.0);
    let mut s = T::zero();
    for d in 0..3 {
        let cd = T::lit(c[d] as f64);
        s = s + (three * (cd - u[d]) + nine * cu * cd) * force[d];
    }
    pref * lattice::weight::<T>(q) * s
}

/// Result of one hydrodynamic step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HydroReport<T> {
    pub max_speed: T,
    /// Populations rebuilt from gas links.
    pub reconstructed_links: usize,
}

/// Pull-stream then BGK collide of every mobile cell.
///
/// `gas_density[i]` is the boundary density used to rebuild populations
/// arriving from gas neighbours of interface cell `i` (reference plus the
/// Laplace term). The mass exchanged by each interface cell is written to
/// `mass_delta`. Non-mobile cells are left untouched in both buffers.
pub fn collide_stream_hydro<T: Real>(
    field: &mut Field3D<T>,
    params: &HydroParams<T>,
    gas_density: Option<&[T]>,
    mass_delta: &mut [T],
    step: u64,
) -> Result<HydroReport<T>> {
    let Field3D { grid, flags, frozen, fill, f, f_next, rho, vel, .. } = field;
    let grid = *grid;
    let nx = grid.nx;
    let (flags, frozen, fill) = (&flags[..], &frozen[..], &fill[..]);
    let src = &f[..];
    let omega = T::one() / params.tau;
    let pref = T::one() - T::lit(0.5) * omega;
    let half = T::lit(0.5);

    struct Row<T> {
        max_speed: T,
        links: usize,
        fault: Option<Error>,
    }

    let rows: Vec<Row<T>> = f_next
        .par_chunks_mut(nx * Q)
        .zip(rho.par_chunks_mut(nx))
        .zip(vel.par_chunks_mut(nx))
        .zip(mass_delta.par_chunks_mut(nx))
        .enumerate()
        .map(|(row, (((fn_row, rho_row), vel_row), dm_row))| {
            let mut acc = Row { max_speed: T::zero(), links: 0, fault: None };
            let pull = grid.row_stencil(row, -1);
            let mut fq = [T::zero(); Q];
            let mut feq = [T::zero(); Q];
            for x in 0..nx {
                let i = row * nx + x;
                let flag = flags[i];
                let mobile = match flag {
                    CellFlag::Liquid => true,
                    CellFlag::Interface => !frozen[i],
                    _ => false,
                };
                if !mobile {
                    dm_row[x] = T::zero();
                    continue;
                }
                let interface = flag == CellFlag::Interface;
                let own = &src[i * Q..(i + 1) * Q];
                let u_old = vel_row[x];
                let rho_gas = gas_density.map_or(T::one(), |g| g[i]);
                let mut dm = T::zero();
                fq[0] = own[0];
                for q in 1..Q {
                    let j = pull[q].map(|r| r + grid.wrap_x(x, -C[q][0]));
                    fq[q] = match classify_link(flags, frozen, j) {
                        Link::Fluid => {
                            let j = j.unwrap();
                            let incoming = src[j * Q + q];
                            if interface {
                                let w = exchange_weight(flags, fill, i, j);
                                dm = dm + w * (incoming - own[OPP[q]]);
                            }
                            incoming
                        }
                        Link::Gas if interface => {
                            acc.links += 1;
                            reconstruct_population(q, rho_gas, u_old, own[OPP[q]])
                        }
                        _ => own[OPP[q]],
                    };
                }
                dm_row[x] = dm;

                let (r, j) = lattice::moments(&fq);
                let force = [r * params.gravity[0], r * params.gravity[1], r * params.gravity[2]];
                let u = [
                    (j[0] + half * force[0]) / r,
                    (j[1] + half * force[1]) / r,
                    (j[2] + half * force[2]) / r,
                ];
                lattice::equilibrium_f_into(r, u, &mut feq);
                let out = &mut fn_row[x * Q..(x + 1) * Q];
                let mut worst = T::zero();
                for q in 0..Q {
                    let v = fq[q] - omega * (fq[q] - feq[q]) + guo_term(q, u, force, pref);
                    out[q] = v;
                    worst = worst.min(v);
                }
                let speed = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                if acc.fault.is_none() {
                    if !r.is_finite() || !speed.is_finite() {
                        acc.fault = Some(Error::Integrity { cell: grid.coords(i), step });
                    } else if worst < params.negative_tolerance {
                        acc.fault = Some(Error::Stability {
                            cell: grid.coords(i),
                            step,
                            value: worst.as_f64(),
                            mach: speed.as_f64() / lattice::CS2.sqrt(),
                        });
                    } else if speed > params.mach_limit {
                        acc.fault = Some(Error::Mach {
                            cell: grid.coords(i),
                            step,
                            speed: speed.as_f64(),
                            limit: params.mach_limit.as_f64(),
                        });
                    }
                }
                acc.max_speed = acc.max_speed.max(speed);
                rho_row[x] = r;
                vel_row[x] = u;
            }
            acc
        })
        .collect();

    let mut report = HydroReport::<T>::default();
    for r in rows {
        if let Some(e) = r.fault {
            return Err(e);
        }
        report.max_speed = report.max_speed.max(r.max_speed);
        report.reconstructed_links += r.links;
    }
    // non-mobile cells hold identical data in both buffers, so swapping is safe
    std::mem::swap(f, f_next);
    Ok(report)
}

/// Largest velocity magnitude over mobile cells.
pub fn mach_guard<T: Real>(field: &Field3D<T>) -> T {
    (0..field.grid.len())
        .into_par_iter()
        .filter(|&i| field.is_mobile(i))
        .map(|i| {
            let u = field.vel[i];
            (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
        })
        .reduce(T::zero, |a, b| a.max(b))
}

/// Writes rest-state populations of density `rho` into both buffers of cell `i`.
pub fn freeze_cell<T: Real>(field: &mut Field3D<T>, i: usize) {
    let r = field.rho[i];
    set_populations(field, i, r, [T::zero(); 3]);
}

/// Writes equilibrium populations into both buffers of cell `i`.
pub fn set_populations<T: Real>(field: &mut Field3D<T>, i: usize, rho: T, u: [T; 3]) {
    lattice::equilibrium_f_into(rho, u, &mut field.f[i * Q..(i + 1) * Q]);
    let (a, b) = (&field.f[i * Q..(i + 1) * Q], &mut field.f_next[i * Q..(i + 1) * Q]);
    b.copy_from_slice(a);
    field.rho[i] = rho;
    field.vel[i] = u;
}

/// Total momentum Σ ρu over mobile cells.
pub fn total_momentum<T: Real>(field: &Field3D<T>) -> [T; 3] {
    let mut m = [T::zero(); 3];
    for d in 0..3 {
        let per: Vec<T> = (0..field.grid.len())
            .map(|i| if field.is_mobile(i) { field.rho[i] * field.vel[i][d] } else { T::zero() })
            .collect();
        m[d] = crate::scalar::block_sum(&per);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn liquid_box(nx: usize, ny: usize, nz: usize) -> Field3D<f64> {
        Field3D::uniform(Grid::new(nx, ny, nz).unwrap(), CellFlag::Liquid, 1.0, 1.0)
    }

    #[test]
    fn rest_fluid_is_a_fixed_point() {
        let mut f = liquid_box(4, 4, 4);
        let before = f.f.clone();
        let p = HydroParams::new(0.8, [0.0; 3]).unwrap();
        let mut dm = vec![0.0; f.grid.len()];
        for s in 0..50 {
            collide_stream_hydro(&mut f, &p, None, &mut dm, s).unwrap();
        }
        for (a, b) in f.f.iter().zip(&before) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gravity_adds_momentum_away_from_walls() {
        let mut f = liquid_box(6, 5, 12);
        let g = 1e-6;
        let p = HydroParams::new(0.7, [g, 0.0, 0.0]).unwrap();
        let mut dm = vec![0.0; f.grid.len()];
        let grid = f.grid;
        let layer = |f: &Field3D<f64>| -> f64 {
            (0..grid.len())
                .filter(|&i| (4..8).contains(&grid.coords(i)[2]))
                .map(|i| f.rho[i] * f.vel[i][0])
                .sum()
        };
        let mut prev = 0.0;
        for s in 0..4 {
            collide_stream_hydro(&mut f, &p, None, &mut dm, s).unwrap();
            let m: f64 = (0..grid.len())
                .filter(|&i| (4..8).contains(&grid.coords(i)[2]))
                .map(|i| f.rho[i])
                .sum();
            // the reported velocity already carries half a force step
            let want = if s == 0 { 0.5 * m * g } else { m * g };
            let now = layer(&f);
            assert!((now - prev - want).abs() < 1e-6 * want, "step {s}");
            prev = now;
        }
    }

    #[test]
    fn hydrostatic_box_has_no_net_momentum() {
        let mut f = liquid_box(2, 2, 24);
        let g = 1e-5;
        let p = HydroParams::new(1.0, [0.0, 0.0, -g]).unwrap();
        let mut dm = vec![0.0; f.grid.len()];
        for s in 0..30_000 {
            collide_stream_hydro(&mut f, &p, None, &mut dm, s).unwrap();
        }
        let m = total_momentum(&f);
        for d in 0..3 {
            assert!(m[d].abs() < 1e-10, "{m:?}");
        }
        // dp/dz = -ρ g with p = ρ/3
        let g_ = f.grid;
        let slope = (f.rho[g_.idx(0, 0, 16)] - f.rho[g_.idx(0, 0, 8)]) / 8.0;
        assert!((slope + 3.0 * g).abs() < 0.02 * 3.0 * g, "slope {slope}");
    }

    #[test]
    fn mach_guard_reports_the_fastest_cell() {
        let mut f = liquid_box(3, 3, 3);
        assert_eq!(mach_guard(&f), 0.0);
        f.vel[5] = [0.1, 0.0, 0.0];
        assert!((mach_guard(&f) - 0.1).abs() < 1e-15);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut oracle: f64 = 0.0;
        for v in f.vel.iter_mut() {
            *v = [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
            oracle = oracle.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        }
        assert_eq!(mach_guard(&f), oracle);
    }

    #[test]
    fn speed_above_limit_aborts_with_mach_fault() {
        let mut f = liquid_box(3, 3, 3);
        let u = [0.35, 0.0, 0.0];
        for i in 0..f.grid.len() {
            set_populations(&mut f, i, 1.0, u);
        }
        let mut p = HydroParams::new(1.0, [0.0; 3]).unwrap();
        p.negative_tolerance = -1.0;
        let mut dm = vec![0.0; f.grid.len()];
        match collide_stream_hydro(&mut f, &p, None, &mut dm, 3) {
            Err(Error::Mach { step: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_population_is_a_stability_fault() {
        let mut f = liquid_box(3, 3, 3);
        f.f[13 * Q + 7] = -0.5;
        let p = HydroParams::new(1.0, [0.0; 3]).unwrap();
        let mut dm = vec![0.0; f.grid.len()];
        assert!(matches!(
            collide_stream_hydro(&mut f, &p, None, &mut dm, 0),
            Err(Error::Stability { .. })
        ));
    }

    #[test]
    fn solid_cells_are_not_touched() {
        let mut f = liquid_box(4, 4, 4);
        for i in 0..16 {
            f.flags[i] = CellFlag::Solid;
        }
        f.f[3 * Q + 2] += 0.01;
        f.f_next[3 * Q + 2] += 0.01;
        let snapshot: Vec<f64> = f.f[..16 * Q].to_vec();
        let p = HydroParams::new(0.9, [0.0, 0.0, -1e-6]).unwrap();
        let mut dm = vec![0.0; f.grid.len()];
        for s in 0..10 {
            collide_stream_hydro(&mut f, &p, None, &mut dm, s).unwrap();
        }
        assert_eq!(&f.f[..16 * Q], &snapshot[..]);
    }

    #[test]
    fn read_buffer_is_not_modified() {
        let mut f = liquid_box(5, 4, 3);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for i in 0..f.grid.len() {
            let u = [rng.random_range(-0.02..0.02), 0.0, rng.random_range(-0.02..0.02)];
            set_populations(&mut f, i, 1.0 + rng.random_range(0.0..0.01), u);
        }
        let read: Vec<f64> = f.f.clone();
        let p = HydroParams::new(0.9, [0.0; 3]).unwrap();
        let mut dm = vec![0.0; f.grid.len()];
        collide_stream_hydro(&mut f, &p, None, &mut dm, 0).unwrap();
        // after the swap the old read buffer is the write target; the sweep itself only read it
        let checksum_read: f64 = read.iter().sum();
        let mut g = liquid_box(5, 4, 3);
        g.f = read.clone();
        g.f_next = vec![0.0; read.len()];
        collide_stream_hydro(&mut g, &p, None, &mut dm, 0).unwrap();
        assert_eq!(g.f_next.iter().sum::<f64>(), checksum_read);
        assert_eq!(g.f_next, read);
    }
}

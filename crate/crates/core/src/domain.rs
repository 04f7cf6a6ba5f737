//! Structured grid, cell flags and the per-cell field storage.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::lattice::{self, C, Q};
use crate::scalar::Real;
use crate::thermal::EnergyTemperatureMap;
use crate::units::LatticeScaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellFlag {
    Gas,
    Interface,
    Liquid,
    Solid,
    WallNoSlip,
    /// Material cell of the bottom layer: no-slip below and fixed temperature at the bottom face.
    DirichletBottom,
}

impl CellFlag {
    /// Cells that carry material and take part in heat conduction.
    #[inline]
    pub fn is_material(self) -> bool {
        matches!(
            self,
            CellFlag::Interface | CellFlag::Liquid | CellFlag::Solid | CellFlag::DirichletBottom
        )
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Cell counts of a periodic-in-x,y box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::domain("grid dimensions must be non-zero"));
        }
        nx.checked_mul(ny)
            .and_then(|n| n.checked_mul(nz))
            .and_then(|n| n.checked_mul(Q * 2 * 2 * std::mem::size_of::<f64>()))
            .ok_or_else(|| Error::domain(format!("grid {nx}x{ny}x{nz} overflows memory sizing")))?;
        Ok(Self { nx, ny, nz })
    }

    #[inline(always)]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline(always)]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline(always)]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline(always)]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.nx;
        let r = i / self.nx;
        [x, r % self.ny, r / self.ny]
    }

    /// Cell at offset `d` from `i`; periodic in x and y, `None` beyond the z range.
    #[inline(always)]
    pub fn offset(&self, i: usize, d: [i32; 3]) -> Option<usize> {
        let [x, y, z] = self.coords(i);
        let zz = z as i64 + d[2] as i64;
        if zz < 0 || zz >= self.nz as i64 {
            return None;
        }
        let xx = wrap(x, d[0], self.nx);
        let yy = wrap(y, d[1], self.ny);
        Some(self.idx(xx, yy, zz as usize))
    }

    /// Neighbour along lattice direction `q`.
    #[inline(always)]
    pub fn neighbor(&self, i: usize, q: usize) -> Option<usize> {
        self.offset(i, C[q])
    }

    /// Index of the first cell of the x-row `row` shifted by `(dy, dz)`.
    #[inline(always)]
    pub fn shifted_row(&self, row: usize, dy: i32, dz: i32) -> Option<usize> {
        let (y, z) = (row % self.ny, row / self.ny);
        let zz = z as i64 + dz as i64;
        if zz < 0 || zz >= self.nz as i64 {
            return None;
        }
        Some((wrap(y, dy, self.ny) + self.ny * zz as usize) * self.nx)
    }

    /// Row starts of the cells reached from `row` along `sign · c_q` for every direction.
    #[inline]
    pub fn row_stencil(&self, row: usize, sign: i32) -> [Option<usize>; Q] {
        let mut out = [None; Q];
        for (q, o) in out.iter_mut().enumerate() {
            *o = self.shifted_row(row, sign * C[q][1], sign * C[q][2]);
        }
        out
    }

    /// Periodic x coordinate `x + d`.
    #[inline(always)]
    pub fn wrap_x(&self, x: usize, d: i32) -> usize {
        wrap(x, d, self.nx)
    }

    /// All 19 neighbours of `i` (index 0 is the cell itself).
    #[inline]
    pub fn neighbors(&self, i: usize) -> [Option<usize>; Q] {
        let [x, y, z] = self.coords(i);
        // wrapped coordinates for offsets -1, 0, +1
        let xs = [wrap(x, -1, self.nx), x, wrap(x, 1, self.nx)];
        let ys = [wrap(y, -1, self.ny), y, wrap(y, 1, self.ny)].map(|v| v * self.nx);
        let plane = self.nx * self.ny;
        let zs = [z.checked_sub(1), Some(z), Some(z + 1).filter(|&v| v < self.nz)].map(|v| v.map(|v| v * plane));
        let mut out = [None; Q];
        for (q, o) in out.iter_mut().enumerate() {
            let c = C[q];
            *o = zs[(c[2] + 1) as usize].map(|zp| zp + ys[(c[1] + 1) as usize] + xs[(c[0] + 1) as usize]);
        }
        out
    }
}

#[inline(always)]
fn wrap(x: usize, d: i32, n: usize) -> usize {
    let v = x as i64 + d as i64;
    let n = n as i64;
    (if v < 0 {
        if v >= -n { v + n } else { v.rem_euclid(n) }
    } else if v >= n {
        if v < 2 * n { v - n } else { v.rem_euclid(n) }
    } else {
        v
    }) as usize
}

/// Physical description of the simulated box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    /// Extents in x, y, z [m].
    pub extent: [f64; 3],
    /// Height of the dense substrate [m].
    pub substrate_height: f64,
    /// Effective thickness of the powder layer [m].
    pub layer_thickness: f64,
    /// Border excluded from measurements on x and y [m].
    pub margin: f64,
    /// Build chamber temperature [K].
    pub preheat_temperature: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            extent: [1.44e-3, 0.64e-3, 0.24e-3],
            substrate_height: 0.12e-3,
            layer_thickness: 0.10e-3,
            margin: 0.1e-3,
            preheat_temperature: 923.15,
        }
    }
}

/// Integer cell count for `length`, which must be a whole multiple of `dx`.
pub fn cells_for(length: f64, dx: f64, what: &str) -> Result<usize> {
    let n = length / dx;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::domain(format!(
            "{what} {length:e} m is not a whole number of cells of {dx:e} m"
        )));
    }
    Ok(r as usize)
}

impl DomainSpec {
    pub fn validate(&self, dx: f64) -> Result<Grid> {
        if self.extent.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::domain("domain extents must be positive"));
        }
        if !(self.substrate_height >= 0.0) || !(self.layer_thickness >= 0.0) {
            return Err(Error::domain("substrate height and layer thickness must be non-negative"));
        }
        if self.substrate_height + self.layer_thickness > self.extent[2] * (1.0 + 1e-12) {
            return Err(Error::domain("substrate plus layer thickness exceed the domain height"));
        }
        if !(self.preheat_temperature > 0.0) {
            return Err(Error::domain("preheat temperature must be positive"));
        }
        if 2.0 * self.margin >= self.extent[0].min(self.extent[1]) {
            return Err(Error::domain("measurement margins leave no interior"));
        }
        Grid::new(
            cells_for(self.extent[0], dx, "domain x extent")?,
            cells_for(self.extent[1], dx, "domain y extent")?,
            cells_for(self.extent[2], dx, "domain z extent")?,
        )
    }

    pub fn substrate_cells(&self, dx: f64) -> usize {
        (self.substrate_height / dx).round() as usize
    }

    /// Cell ranges of the box used for density measurements.
    pub fn measurement_box(&self, grid: &Grid, dx: f64) -> MeasurementBox {
        let m = (self.margin / dx).round() as usize;
        let z0 = self.substrate_cells(dx);
        let z1 = (z0 + (self.layer_thickness / dx).round() as usize).min(grid.nz);
        MeasurementBox {
            x: m.min(grid.nx)..grid.nx.saturating_sub(m),
            y: m.min(grid.ny)..grid.ny.saturating_sub(m),
            z: z0.min(grid.nz)..z1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementBox {
    pub x: Range<usize>,
    pub y: Range<usize>,
    pub z: Range<usize>,
}

impl MeasurementBox {
    pub fn cell_count(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }

    pub fn contains(&self, c: [usize; 3]) -> bool {
        self.x.contains(&c[0]) && self.y.contains(&c[1]) && self.z.contains(&c[2])
    }
}

/// All per-cell state of one simulation.
///
/// Populations are stored cell-major (`19` values per cell) in two buffers;
/// `f`/`h` hold the post-collision values of the last completed step.
#[derive(Debug, Clone)]
pub struct Field3D<T> {
    pub grid: Grid,
    pub flags: Vec<CellFlag>,
    /// Interface cells below the solidus are rigid; they keep their flag but do not flow.
    pub frozen: Vec<bool>,
    pub fill: Vec<T>,
    pub mass: Vec<T>,
    pub rho: Vec<T>,
    pub vel: Vec<[T; 3]>,
    pub energy: Vec<T>,
    pub temperature: Vec<T>,
    pub f: Vec<T>,
    pub f_next: Vec<T>,
    pub h: Vec<T>,
    pub h_next: Vec<T>,
}

impl<T: Real> Field3D<T> {
    /// Uniform field of a single flag, at rest with unit density.
    pub fn uniform(grid: Grid, flag: CellFlag, energy: T, temperature: T) -> Self {
        let n = grid.len();
        let fill = if flag.is_material() { T::one() } else { T::zero() };
        let feq = lattice::equilibrium_f(T::one(), [T::zero(); 3]);
        let heq = lattice::equilibrium_h(energy, [T::zero(); 3]);
        let f: Vec<T> = (0..n).flat_map(|_| feq).collect();
        let h: Vec<T> = (0..n).flat_map(|_| heq).collect();
        Self {
            grid,
            flags: vec![flag; n],
            frozen: vec![false; n],
            fill: vec![fill; n],
            mass: vec![fill; n],
            rho: vec![T::one(); n],
            vel: vec![[T::zero(); 3]; n],
            energy: vec![energy; n],
            temperature: vec![temperature; n],
            f_next: f.clone(),
            f,
            h_next: h.clone(),
            h,
        }
    }

    #[inline(always)]
    pub fn is_mobile(&self, i: usize) -> bool {
        match self.flags[i] {
            CellFlag::Liquid => true,
            CellFlag::Interface => !self.frozen[i],
            _ => false,
        }
    }

    pub fn f_cell(&self, i: usize) -> &[T] {
        &self.f[i * Q..(i + 1) * Q]
    }

    pub fn h_cell(&self, i: usize) -> &[T] {
        &self.h[i * Q..(i + 1) * Q]
    }

    /// Overwrites the current populations of cell `i` with equilibria.
    pub fn set_equilibrium(&mut self, i: usize, rho: T, u: [T; 3], energy: T, sensible: T) {
        lattice::equilibrium_f_into(rho, u, &mut self.f[i * Q..(i + 1) * Q]);
        lattice::equilibrium_h_phase_into(energy, sensible, u, &mut self.h[i * Q..(i + 1) * Q]);
        self.rho[i] = rho;
        self.vel[i] = u;
        self.energy[i] = energy;
    }

    /// Re-initialises cell `i` at rest at temperature `t`.
    pub fn set_rest_state(&mut self, i: usize, rho: T, t: T, map: &EnergyTemperatureMap<T>) {
        let e = map.energy_at(t);
        let st = map.lookup(e);
        self.set_equilibrium(i, rho, [T::zero(); 3], e, st.sensible);
        self.temperature[i] = t;
    }

    /// Total material mass: ρ of full cells plus tracked mass of interface cells.
    pub fn total_mass(&self) -> T {
        let per: Vec<T> = (0..self.grid.len())
            .map(|i| match self.flags[i] {
                CellFlag::Interface => self.mass[i],
                CellFlag::Liquid | CellFlag::Solid | CellFlag::DirichletBottom => self.rho[i],
                _ => T::zero(),
            })
            .collect();
        crate::scalar::block_sum(&per)
    }

    /// Σ E over material cells, the quantity the energy populations conserve.
    pub fn total_energy(&self) -> T {
        let per: Vec<T> = (0..self.grid.len())
            .map(|i| if self.flags[i].is_material() { self.energy[i] } else { T::zero() })
            .collect();
        crate::scalar::block_sum(&per)
    }

    /// Returns the first Gas cell that touches Liquid or Solid material, if any.
    pub fn closed_layer_violation(&self) -> Option<[usize; 3]> {
        for i in 0..self.grid.len() {
            if self.flags[i] != CellFlag::Gas {
                continue;
            }
            for q in 1..Q {
                if let Some(j) = self.grid.neighbor(i, q) {
                    if matches!(self.flags[j], CellFlag::Liquid | CellFlag::Solid) {
                        return Some(self.grid.coords(i));
                    }
                }
            }
        }
        None
    }

    /// Reflags Liquid/Solid cells that touch Gas as interface cells with unit fill.
    pub fn close_interface_layer(&mut self) {
        let n = self.grid.len();
        let mut to_interface = Vec::new();
        for i in 0..n {
            if !matches!(self.flags[i], CellFlag::Liquid | CellFlag::Solid) {
                continue;
            }
            let touches_gas = (1..Q).any(|q| {
                self.grid
                    .neighbor(i, q)
                    .is_some_and(|j| self.flags[j] == CellFlag::Gas)
            });
            if touches_gas {
                to_interface.push(i);
            }
        }
        for i in to_interface {
            self.frozen[i] = self.flags[i] == CellFlag::Solid;
            self.flags[i] = CellFlag::Interface;
            self.fill[i] = T::one();
            self.mass[i] = self.rho[i];
        }
    }
}

/// Builds the initial field: dense substrate at the bottom, gas above, all at preheat.
pub fn init_domain<T: Real>(
    spec: &DomainSpec,
    scaling: &LatticeScaling,
    map: &EnergyTemperatureMap<T>,
) -> Result<Field3D<T>> {
    let grid = spec.validate(scaling.dx())?;
    let t0 = T::lit(spec.preheat_temperature);
    let e0 = map.energy_at(t0);
    let s0 = map.lookup(e0).sensible;
    let mut field = Field3D::uniform(grid, CellFlag::Gas, e0, t0);
    let n_sub = spec.substrate_cells(scaling.dx()).min(grid.nz);
    let mut heq = [T::zero(); Q];
    lattice::equilibrium_h_phase_into(e0, s0, [T::zero(); 3], &mut heq);
    for i in 0..grid.len() {
        let z = grid.coords(i)[2];
        if z < n_sub {
            field.flags[i] = if z == 0 { CellFlag::DirichletBottom } else { CellFlag::Solid };
            field.fill[i] = T::one();
            field.mass[i] = T::one();
        }
        field.h[i * Q..(i + 1) * Q].copy_from_slice(&heq);
    }
    field.h_next.copy_from_slice(&field.h);
    field.close_interface_layer();
    Ok(field)
}

/// Density, velocity and energy of one cell computed from its populations.
pub fn macroscopics_from_pdfs<T: Real>(field: &Field3D<T>, i: usize) -> Result<(T, [T; 3], T)> {
    let (rho, j) = lattice::moments(field.f_cell(i));
    let e: T = field.h_cell(i).iter().copied().sum();
    if !rho.is_finite() || !e.is_finite() || j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrity { cell: field.grid.coords(i), step: 0 });
    }
    let u = match field.flags[i] {
        CellFlag::Solid | CellFlag::DirichletBottom | CellFlag::WallNoSlip => [T::zero(); 3],
        _ if field.frozen[i] => [T::zero(); 3],
        _ => [j[0] / rho, j[1] / rho, j[2] / rho],
    };
    Ok((rho, u, e))
}

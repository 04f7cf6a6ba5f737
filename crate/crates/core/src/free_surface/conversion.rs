//! Fill-level bookkeeping, interface cell conversion and melting/solidification flags.

use std::collections::BTreeSet;

use crate::domain::{CellFlag, Field3D};
use crate::free_surface::geometry;
use crate::hydro::{freeze_cell, set_populations};
use crate::lattice::{self, Q};
use crate::scalar::Real;
use crate::thermal::EnergyTemperatureMap;

/// Adds the streamed mass to every mobile interface cell and refreshes its fill.
pub fn update_fill_levels<T: Real>(field: &mut Field3D<T>, deltas: &[T]) {
    for i in 0..field.grid.len() {
        if field.flags[i] == CellFlag::Interface && !field.frozen[i] {
            field.mass[i] = field.mass[i] + deltas[i];
            field.fill[i] = field.mass[i] / field.rho[i];
        }
    }
}

/// What one conversion pass did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConversionReport<T> {
    pub filled: Vec<usize>,
    pub emptied: Vec<usize>,
    /// Gas cells that became interface cells.
    pub created: Vec<usize>,
    /// Change of Σ E from cells joining or leaving the material.
    pub energy_delta: T,
    /// Mass that found no interface neighbour during this pass.
    pub parked: T,
}

/// Interface cells leave the band `[-ε, 1 + ε]` and turn into liquid or gas.
///
/// Processing is sequential in linear cell order so the outcome does not
/// depend on threading. Excess (or missing) mass is handed to neighbouring
/// mobile interface cells weighted by `|n·c|`; if there are none it is
/// returned as parked mass.
pub fn convert_cells<T: Real>(
    field: &mut Field3D<T>,
    map: &EnergyTemperatureMap<T>,
    epsilon: T,
) -> ConversionReport<T> {
    let g = field.grid;
    let mut report = ConversionReport { energy_delta: T::zero(), parked: T::zero(), ..Default::default() };
    let hi = T::one() + epsilon;
    let mut filled = Vec::new();
    let mut emptied = BTreeSet::new();
    for i in 0..g.len() {
        if field.flags[i] != CellFlag::Interface || field.frozen[i] {
            continue;
        }
        if field.mass[i] > hi * field.rho[i] {
            filled.push(i);
        } else if field.mass[i] < -epsilon * field.rho[i] {
            emptied.insert(i);
        }
    }
    if filled.is_empty() && emptied.is_empty() {
        return report;
    }
    let ind = geometry::indicator(field);

    let mut new_interface = BTreeSet::new();
    for &i in &filled {
        field.flags[i] = CellFlag::Liquid;
        for q in 1..Q {
            let Some(j) = g.neighbor(i, q) else { continue };
            emptied.remove(&j);
            if field.flags[j] == CellFlag::Gas {
                field.flags[j] = CellFlag::Interface;
                field.frozen[j] = false;
                new_interface.insert(j);
            }
        }
    }
    for &j in &new_interface {
        init_from_neighbors(field, map, j, &new_interface, &mut report);
    }
    let emptied: Vec<usize> = emptied.into_iter().collect();
    for &i in &emptied {
        field.flags[i] = CellFlag::Gas;
        for q in 1..Q {
            let Some(j) = g.neighbor(i, q) else { continue };
            match field.flags[j] {
                CellFlag::Liquid => {
                    field.flags[j] = CellFlag::Interface;
                    field.fill[j] = T::one();
                    field.mass[j] = field.rho[j];
                }
                CellFlag::Solid => {
                    field.flags[j] = CellFlag::Interface;
                    field.frozen[j] = true;
                    field.fill[j] = T::one();
                    field.mass[j] = field.rho[j];
                }
                _ => {}
            }
        }
    }

    let receiving = |field: &Field3D<T>, j: usize| {
        field.flags[j] == CellFlag::Interface && !field.frozen[j]
    };
    let mut transfers: Vec<(usize, T)> = Vec::new();
    for (&i, full) in filled.iter().map(|i| (i, true)).chain(emptied.iter().map(|i| (i, false))) {
        let excess = if full { field.mass[i] - field.rho[i] } else { field.mass[i] };
        let n = geometry::raw_normal(field, &ind, i);
        let mut targets: Vec<(usize, T)> = Vec::new();
        for q in 1..Q {
            let Some(j) = g.neighbor(i, q) else { continue };
            let skip = filled.binary_search(&j).is_ok() || emptied.binary_search(&j).is_ok();
            if !skip && receiving(field, j) {
                targets.push((j, lattice::cdot(q, n).abs()));
            }
        }
        let wsum: T = targets.iter().map(|t| t.1).sum();
        if targets.is_empty() {
            report.parked = report.parked + excess;
        } else if wsum > T::lit(1e-12) {
            transfers.extend(targets.iter().map(|&(j, w)| (j, excess * w / wsum)));
        } else {
            let share = excess / T::lit(targets.len() as f64);
            transfers.extend(targets.iter().map(|&(j, _)| (j, share)));
        }
        if full {
            field.mass[i] = field.rho[i];
            field.fill[i] = T::one();
        } else {
            field.mass[i] = T::zero();
            field.fill[i] = T::zero();
            report.energy_delta = report.energy_delta - field.energy[i];
            field.vel[i] = [T::zero(); 3];
        }
    }
    for (j, dm) in transfers {
        field.mass[j] = field.mass[j] + dm;
        field.fill[j] = field.mass[j] / field.rho[j];
    }
    report.filled = filled;
    report.emptied = emptied;
    report.created = new_interface.into_iter().collect();
    report
}

/// Gives a new interface cell the averaged state of its mobile neighbours.
fn init_from_neighbors<T: Real>(
    field: &mut Field3D<T>,
    map: &EnergyTemperatureMap<T>,
    i: usize,
    fresh: &BTreeSet<usize>,
    report: &mut ConversionReport<T>,
) {
    let g = field.grid;
    let (mut n, mut rho, mut e) = (0usize, T::zero(), T::zero());
    let mut u = [T::zero(); 3];
    let (mut n_mat, mut e_mat) = (0usize, T::zero());
    for q in 1..Q {
        let Some(j) = g.neighbor(i, q) else { continue };
        if fresh.contains(&j) {
            continue;
        }
        if field.flags[j].is_material() {
            n_mat += 1;
            e_mat = e_mat + field.energy[j];
        }
        let mobile = field.flags[j] == CellFlag::Liquid
            || (field.flags[j] == CellFlag::Interface && !field.frozen[j]);
        if mobile {
            n += 1;
            rho = rho + field.rho[j];
            e = e + field.energy[j];
            for d in 0..3 {
                u[d] = u[d] + field.vel[j][d];
            }
        }
    }
    let (rho, e, u) = if n > 0 {
        let k = T::lit(n as f64);
        (rho / k, e / k, u.map(|v| v / k))
    } else if n_mat > 0 {
        (T::one(), e_mat / T::lit(n_mat as f64), [T::zero(); 3])
    } else {
        (T::one(), field.energy[i], [T::zero(); 3])
    };
    let st = map.lookup(e);
    field.fill[i] = T::zero();
    field.mass[i] = T::zero();
    set_populations(field, i, rho, u);
    lattice::equilibrium_h_phase_into(e, st.sensible, u, &mut field.h[i * Q..(i + 1) * Q]);
    let (a, b) = (&field.h[i * Q..(i + 1) * Q], &mut field.h_next[i * Q..(i + 1) * Q]);
    b.copy_from_slice(a);
    field.energy[i] = e;
    field.temperature[i] = st.temperature;
    report.energy_delta = report.energy_delta + e;
}

/// Counts of cells that changed phase in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseReport {
    pub solidified: usize,
    pub melted: usize,
}

/// Freezes material below the solidus and releases material above the liquidus.
///
/// Cells inside the mushy interval keep their previous state.
pub fn update_phase_state<T: Real>(field: &mut Field3D<T>, map: &EnergyTemperatureMap<T>) -> PhaseReport {
    let (ts, tl) = (map.solidus(), map.liquidus());
    let mut report = PhaseReport::default();
    for i in 0..field.grid.len() {
        let t = field.temperature[i];
        match field.flags[i] {
            CellFlag::Liquid if t < ts => {
                field.flags[i] = CellFlag::Solid;
                freeze_cell(field, i);
                report.solidified += 1;
            }
            CellFlag::Interface if !field.frozen[i] && t < ts => {
                field.frozen[i] = true;
                freeze_cell(field, i);
                report.solidified += 1;
            }
            CellFlag::Solid if t > tl => {
                field.flags[i] = CellFlag::Liquid;
                release_cell(field, i);
                report.melted += 1;
            }
            CellFlag::Interface if field.frozen[i] && t > tl => {
                field.frozen[i] = false;
                release_cell(field, i);
                field.fill[i] = field.mass[i] / field.rho[i];
                report.melted += 1;
            }
            _ => {}
        }
    }
    report
}

/// Equilibrium populations at the cell density and the mean velocity of mobile neighbours.
fn release_cell<T: Real>(field: &mut Field3D<T>, i: usize) {
    let g = field.grid;
    let mut u = [T::zero(); 3];
    let mut n = 0usize;
    for q in 1..Q {
        if let Some(j) = g.neighbor(i, q) {
            if field.is_mobile(j) {
                n += 1;
                for d in 0..3 {
                    u[d] = u[d] + field.vel[j][d];
                }
            }
        }
    }
    if n > 0 {
        u = u.map(|v| v / T::lit(n as f64));
    }
    let r = field.rho[i];
    set_populations(field, i, r, u);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use crate::thermal::{build_energy_map, MaterialModel};
    use crate::units::LatticeScaling;

    fn map() -> EnergyTemperatureMap<f64> {
        build_energy_map(&MaterialModel::ti6al4v(), &LatticeScaling::unit()).unwrap()
    }

    /// Liquid slab below z = 4, interface layer at z = 4, gas above.
    fn slab() -> Field3D<f64> {
        let g = Grid::new(6, 6, 10).unwrap();
        let mut f = Field3D::uniform(g, CellFlag::Gas, 1.0, 2500.0);
        for i in 0..g.len() {
            let z = g.coords(i)[2];
            if z < 4 {
                f.flags[i] = CellFlag::Liquid;
                f.fill[i] = 1.0;
                f.mass[i] = 1.0;
            } else if z == 4 {
                f.flags[i] = CellFlag::Interface;
                f.fill[i] = 0.5;
                f.mass[i] = 0.5;
            }
        }
        f
    }

    #[test]
    fn below_threshold_nothing_converts() {
        let m = map();
        let mut f = slab();
        let i = f.grid.idx(2, 2, 4);
        f.mass[i] = 1.0005;
        f.fill[i] = 1.0005;
        let r = convert_cells(&mut f, &m, 1e-3);
        assert!(r.filled.is_empty() && r.emptied.is_empty());
        assert_eq!(f.flags[i], CellFlag::Interface);
    }

    #[test]
    fn overfull_cell_becomes_liquid_and_mass_is_kept() {
        let m = map();
        let mut f = slab();
        let i = f.grid.idx(2, 2, 4);
        f.mass[i] = 1.01;
        f.fill[i] = 1.01;
        let before = f.total_mass();
        let r = convert_cells(&mut f, &m, 1e-3);
        assert_eq!(r.filled, vec![i]);
        assert_eq!(f.flags[i], CellFlag::Liquid);
        assert_eq!(r.parked, 0.0);
        assert!((f.total_mass() - before).abs() < 1e-12);
        // the gas cell above joined the interface layer
        let up = f.grid.idx(2, 2, 5);
        assert_eq!(f.flags[up], CellFlag::Interface);
        assert!(r.created.contains(&up));
        assert!(f.closed_layer_violation().is_none());
    }

    #[test]
    fn emptied_cell_becomes_gas_and_layer_stays_closed() {
        let m = map();
        let mut f = slab();
        let i = f.grid.idx(0, 0, 4);
        f.mass[i] = -0.002;
        f.fill[i] = -0.002;
        let before = f.total_mass();
        let r = convert_cells(&mut f, &m, 1e-3);
        assert_eq!(r.emptied, vec![i]);
        assert_eq!(f.flags[i], CellFlag::Gas);
        assert!(f.closed_layer_violation().is_none());
        assert_eq!(f.flags[f.grid.idx(0, 0, 3)], CellFlag::Interface);
        assert!((f.total_mass() - before).abs() < 1e-12);
    }

    #[test]
    fn isolated_excess_is_parked() {
        let m = map();
        let g = Grid::new(5, 5, 5).unwrap();
        let mut f = Field3D::uniform(g, CellFlag::Gas, 1.0, 2500.0);
        let i = g.idx(2, 2, 2);
        f.flags[i] = CellFlag::Interface;
        f.mass[i] = -0.01;
        f.fill[i] = -0.01;
        let r = convert_cells(&mut f, &m, 1e-3);
        assert_eq!(r.parked, -0.01);
        assert!((f.total_mass() + r.parked - (-0.01)).abs() < 1e-15);
    }

    #[test]
    fn fill_update_applies_deltas_to_mobile_interface_only() {
        let mut f = slab();
        let g = f.grid;
        let mut d = vec![0.1; g.len()];
        let fz = g.idx(1, 1, 4);
        f.frozen[fz] = true;
        d[g.idx(0, 0, 0)] = 5.0;
        update_fill_levels(&mut f, &d);
        assert!((f.fill[g.idx(3, 3, 4)] - 0.6).abs() < 1e-15);
        assert_eq!(f.fill[fz], 0.5);
        assert_eq!(f.mass[g.idx(0, 0, 0)], 1.0);
    }

    #[test]
    fn phase_flags_follow_temperature() {
        let m = map();
        let mut f = slab();
        for t in f.temperature.iter_mut() {
            *t = 1500.0;
        }
        let r = update_phase_state(&mut f, &m);
        assert!(r.solidified > 0);
        assert!((0..f.grid.len()).all(|i| !f.is_mobile(i)));
        for t in f.temperature.iter_mut() {
            *t = 2500.0;
        }
        update_phase_state(&mut f, &m);
        assert!(f.flags.iter().all(|&fl| fl != CellFlag::Solid));
        assert!(f.closed_layer_violation().is_none());
        // mushy temperatures keep the current state
        let i = f.grid.idx(1, 1, 1);
        f.temperature[i] = 1900.0;
        update_phase_state(&mut f, &m);
        assert_eq!(f.flags[i], CellFlag::Liquid);
    }
}

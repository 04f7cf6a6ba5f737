//! Volume-of-fluid free surface: interface geometry, gas-side boundary condition,
//! cell conversion and phase flags.

pub mod conversion;
pub mod geometry;

pub use conversion::{convert_cells, update_fill_levels, update_phase_state, ConversionReport, PhaseReport};
pub use geometry::{curvature, surface_geometry, SurfaceGeometry};

use crate::domain::{CellFlag, Field3D};
use crate::lattice;
use crate::scalar::Real;

/// Conversion band half width.
pub const DEFAULT_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceParams<T> {
    /// Surface tension in lattice units.
    pub surface_tension: T,
    /// Static contact angle on solids [rad].
    pub contact_angle: f64,
    /// Optional bound on |κ| in 1/cells.
    pub max_curvature: Option<T>,
    pub epsilon: T,
}

impl<T: Real> SurfaceParams<T> {
    pub fn new(surface_tension: T, contact_angle_deg: f64) -> Self {
        Self {
            surface_tension,
            contact_angle: contact_angle_deg.to_radians(),
            max_curvature: None,
            epsilon: T::lit(DEFAULT_EPSILON),
        }
    }
}

/// Population arriving from a gas cell along `q`, rebuilt so the interface
/// feels density `rho_b`: `f_q = f_eq_q + f_eq_q̄ − f_q̄`.
#[inline(always)]
pub fn reconstruct_population<T: Real>(q: usize, rho_b: T, u: [T; 3], f_opp: T) -> T {
    lattice::equilibrium_f_single(q, rho_b, u) + lattice::equilibrium_f_single(lattice::OPP[q], rho_b, u)
        - f_opp
}

/// Boundary density of each mobile interface cell: gas reference (1) plus `3 σ κ`.
pub fn boundary_density<T: Real>(
    field: &Field3D<T>,
    geometry: Option<&SurfaceGeometry<T>>,
    params: &SurfaceParams<T>,
) -> Vec<T> {
    let three = T::lit(3.0);
    (0..field.grid.len())
        .map(|i| match geometry {
            Some(g) if field.flags[i] == CellFlag::Interface => {
                T::one() + three * params.surface_tension * g.curvature[i]
            }
            _ => T::one(),
        })
        .collect()
}

/// All missing populations of interface cell `i`, i.e. those pulled from gas neighbours.
pub fn reconstruct_interface_pdfs<T: Real>(field: &Field3D<T>, i: usize, rho_b: T) -> Vec<(usize, T)> {
    let g = field.grid;
    let u = field.vel[i];
    (1..lattice::Q)
        .filter_map(|q| {
            let j = crate::hydro::pull_source(&g, i, q)?;
            (field.flags[j] == CellFlag::Gas)
                .then(|| (q, reconstruct_population(q, rho_b, u, field.f[i * lattice::Q + lattice::OPP[q]])))
        })
        .collect()
}

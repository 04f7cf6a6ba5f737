//! Interface normals and curvature from a smoothed fill field.

use rayon::prelude::*;

use crate::domain::{CellFlag, Field3D, Grid};
use crate::lattice::{self, C, Q};
use crate::scalar::Real;

/// Binomial kernel of radius two.
const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Material indicator used for normals: fill in interface cells, 1 in full material, 0 in gas.
pub fn indicator<T: Real>(field: &Field3D<T>) -> Vec<T> {
    field
        .flags
        .par_iter()
        .zip(field.fill.par_iter())
        .map(|(&flag, &phi)| match flag {
            CellFlag::Gas => T::zero(),
            CellFlag::Interface => phi.max(T::zero()).min(T::one()),
            _ => T::one(),
        })
        .collect()
}

/// Separable binomial smoothing; periodic in x and y, edge values repeated in z.
pub fn smooth<T: Real>(grid: &Grid, values: &[T]) -> Vec<T> {
    let k: [T; 5] = KERNEL.map(T::lit);
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let pass = |src: &[T], axis: usize| -> Vec<T> {
        let mut out = vec![T::zero(); src.len()];
        out.par_chunks_mut(nx).enumerate().for_each(|(row, dst)| {
            let (y, z) = (row % ny, row / ny);
            if axis == 0 {
                let line = &src[row * nx..(row + 1) * nx];
                for (x, d) in dst.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (o, w) in (-2i32..=2).zip(k) {
                        acc = acc + w * line[grid.wrap_x(x, o)];
                    }
                    *d = acc;
                }
                return;
            }
            let starts: [usize; 5] = std::array::from_fn(|m| {
                let o = m as i64 - 2;
                let r = if axis == 1 {
                    (y as i64 + o).rem_euclid(ny as i64) as usize + ny * z
                } else {
                    y + ny * (z as i64 + o).clamp(0, nz as i64 - 1) as usize
                };
                r * nx
            });
            for (x, d) in dst.iter_mut().enumerate() {
                let mut acc = T::zero();
                for m in 0..5 {
                    acc = acc + k[m] * src[starts[m] + x];
                }
                *d = acc;
            }
        });
        out
    };
    let a = pass(values, 0);
    let b = pass(&a, 1);
    pass(&b, 2)
}

/// Isotropic lattice gradient `3 Σ w_q c_q v(x + c_q)`; neighbours beyond z count as the cell itself.
#[inline]
pub fn gradient<T: Real>(grid: &Grid, values: &[T], i: usize) -> [T; 3] {
    let nbs = grid.neighbors(i);
    let mut g = [T::zero(); 3];
    for q in 1..Q {
        let v = values[nbs[q].unwrap_or(i)] * lattice::weight::<T>(q);
        for d in 0..3 {
            if C[q][d] != 0 {
                g[d] = g[d] + T::lit(C[q][d] as f64) * v;
            }
        }
    }
    g.map(|v| v * T::lit(3.0))
}

#[inline]
fn normalized<T: Real>(v: [T; 3]) -> Option<[T; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > T::lit(1e-8) {
        Some([v[0] / n, v[1] / n, v[2] / n])
    } else {
        None
    }
}

/// Outward unit normals (pointing into the gas) of every cell with a usable gradient.
pub fn normals<T: Real>(grid: &Grid, smoothed: &[T]) -> Vec<[T; 3]> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| normal_at(grid, smoothed, i))
        .collect()
}

#[inline]
fn normal_at<T: Real>(grid: &Grid, smoothed: &[T], i: usize) -> [T; 3] {
    let g = gradient(grid, smoothed, i);
    normalized([-g[0], -g[1], -g[2]]).unwrap_or([T::zero(); 3])
}

/// Marks every lattice neighbour (and the cell itself) of the given cells.
fn dilate(grid: &Grid, cells: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; grid.len()];
    for &i in cells {
        for j in grid.neighbors(i).into_iter().flatten() {
            mark[j] = true;
        }
    }
    (0..grid.len()).filter(|&i| mark[i]).collect()
}

#[inline]
fn is_obstacle<T: Real>(field: &Field3D<T>, j: usize) -> bool {
    match field.flags[j] {
        CellFlag::Solid | CellFlag::WallNoSlip | CellFlag::DirichletBottom => true,
        CellFlag::Interface => field.frozen[j],
        _ => false,
    }
}

/// Bends the normal of contact-line cells so the surface meets solids at `theta`.
///
/// With `n_w` the wall normal pointing out of the solid and `t` the tangential
/// part of the free normal, the prescribed normal is `n_w cos θ + t sin θ`.
pub fn apply_contact_angle<T: Real>(field: &Field3D<T>, normal: &mut [[T; 3]], theta: f64) {
    let mobile: Vec<usize> = (0..field.grid.len())
        .filter(|&i| field.flags[i] == CellFlag::Interface && !field.frozen[i])
        .collect();
    contact_angle_at(field, &mobile, normal, theta);
}

/// [`apply_contact_angle`] restricted to the given mobile interface cells.
fn contact_angle_at<T: Real>(field: &Field3D<T>, mobile: &[usize], normal: &mut [[T; 3]], theta: f64) {
    let g = field.grid;
    let (ct, st) = (T::lit(theta.cos()), T::lit(theta.sin()));
    let contact: Vec<(usize, [T; 3])> = mobile
        .par_iter()
        .filter_map(|&i| {
            let mut touches_gas = false;
            let mut s = [T::zero(); 3];
            let mut touches_solid = false;
            let nbs = g.neighbors(i);
            for q in 1..Q {
                let (obst, gas) = match nbs[q] {
                    None => (C[q][2] < 0, false),
                    Some(j) => (is_obstacle(field, j), field.flags[j] == CellFlag::Gas),
                };
                touches_gas |= gas;
                if obst {
                    touches_solid = true;
                    for d in 0..3 {
                        s[d] = s[d] + T::lit(C[q][d] as f64) * lattice::weight::<T>(q);
                    }
                }
            }
            if !(touches_gas && touches_solid) {
                return None;
            }
            let nw = normalized([-s[0], -s[1], -s[2]])?;
            let n = normal[i];
            let dot = n[0] * nw[0] + n[1] * nw[1] + n[2] * nw[2];
            let t = normalized([n[0] - dot * nw[0], n[1] - dot * nw[1], n[2] - dot * nw[2]])
                .unwrap_or([T::zero(); 3]);
            let m = [
                nw[0] * ct + t[0] * st,
                nw[1] * ct + t[1] * st,
                nw[2] * ct + t[2] * st,
            ];
            Some((i, normalized(m).unwrap_or(nw)))
        })
        .collect();
    for (i, n) in contact {
        normal[i] = n;
    }
}

/// Total curvature `∇·n` at cell `i` (a sphere of radius R gives 2/R).
pub fn curvature_at<T: Real>(grid: &Grid, normal: &[[T; 3]], i: usize) -> T {
    let nbs = grid.neighbors(i);
    let mut k = T::zero();
    for q in 1..Q {
        let n = normal[nbs[q].unwrap_or(i)];
        k = k + lattice::weight::<T>(q) * lattice::cdot(q, n);
    }
    k * T::lit(3.0)
}

/// Normals and curvature of the current interface.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry<T> {
    /// Outward normals on the curvature stencil of mobile cells, zero elsewhere.
    pub normal: Vec<[T; 3]>,
    /// Curvature of mobile interface cells, zero elsewhere.
    pub curvature: Vec<T>,
    /// Interface cells whose fill gradient vanished.
    pub missing_normals: usize,
}

pub fn surface_geometry<T: Real>(
    field: &Field3D<T>,
    contact_angle: f64,
    max_curvature: Option<T>,
) -> SurfaceGeometry<T> {
    let g = field.grid;
    // only mobile cells carry curvature, so normals are needed on their stencil alone
    let mobile: Vec<usize> = (0..g.len())
        .filter(|&i| field.flags[i] == CellFlag::Interface && !field.frozen[i])
        .collect();
    let with_normal = dilate(&g, &mobile);
    let psi = smooth(&g, &indicator(field));
    let mut normal = vec![[T::zero(); 3]; g.len()];
    let values: Vec<[T; 3]> = with_normal.par_iter().map(|&i| normal_at(&g, &psi, i)).collect();
    for (&i, n) in with_normal.iter().zip(values) {
        normal[i] = n;
    }
    contact_angle_at(field, &mobile, &mut normal, contact_angle);
    let normal_ref = &normal;
    let mut curvature = vec![T::zero(); g.len()];
    let curv: Vec<Option<T>> = mobile
        .par_iter()
        .map(|&i| {
            if normal_ref[i] == [T::zero(); 3] {
                return None;
            }
            let k = curvature_at(&g, normal_ref, i);
            Some(match max_curvature {
                Some(cap) => k.max(-cap).min(cap),
                None => k,
            })
        })
        .collect();
    let mut missing_normals = 0;
    for (&i, k) in mobile.iter().zip(curv) {
        match k {
            Some(k) => curvature[i] = k,
            None => missing_normals += 1,
        }
    }
    SurfaceGeometry { normal, curvature, missing_normals }
}
/// Curvature of a single cell, computing the smoothed field from scratch.
pub fn curvature<T: Real>(field: &Field3D<T>, i: usize) -> T {
    let g = field.grid;
    let psi = smooth(&g, &indicator(field));
    let n = normals(&g, &psi);
    if n[i] == [T::zero(); 3] {
        return T::zero();
    }
    curvature_at(&g, &n, i)
}

/// Outward normal of cell `i` from the unsmoothed indicator, used to weight mass redistribution.
pub fn raw_normal<T: Real>(field: &Field3D<T>, indicator: &[T], i: usize) -> [T; 3] {
    let g = gradient(&field.grid, indicator, i);
    normalized([-g[0], -g[1], -g[2]]).unwrap_or([T::zero(); 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fill of a cell from 8³ sub-samples of the implicit shape `inside`.
    fn sampled_fill(center: [f64; 3], inside: &dyn Fn([f64; 3]) -> bool) -> f64 {
        let n = 8;
        let mut k = 0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let p = [
                        center[0] - 0.5 + (a as f64 + 0.5) / n as f64,
                        center[1] - 0.5 + (b as f64 + 0.5) / n as f64,
                        center[2] - 0.5 + (c as f64 + 0.5) / n as f64,
                    ];
                    if inside(p) {
                        k += 1;
                    }
                }
            }
        }
        k as f64 / (n * n * n) as f64
    }

    pub(crate) fn shape_field(dims: [usize; 3], inside: &dyn Fn([f64; 3]) -> bool) -> Field3D<f64> {
        let g = Grid::new(dims[0], dims[1], dims[2]).unwrap();
        let mut f = Field3D::uniform(g, CellFlag::Gas, 1.0, 1.0);
        for i in 0..g.len() {
            let c = g.coords(i).map(|v| v as f64);
            let phi = sampled_fill(c, inside);
            f.fill[i] = phi;
            f.mass[i] = phi;
            f.flags[i] = if phi >= 1.0 {
                CellFlag::Liquid
            } else if phi > 0.0 {
                CellFlag::Interface
            } else {
                CellFlag::Gas
            };
        }
        f.close_interface_layer();
        f
    }

    fn interface_curvatures(f: &Field3D<f64>, band: &dyn Fn([f64; 3]) -> bool) -> Vec<f64> {
        let geo = surface_geometry(f, 0.0, None);
        (0..f.grid.len())
            .filter(|&i| {
                f.flags[i] == CellFlag::Interface
                    && f.fill[i] > 0.2
                    && f.fill[i] < 0.8
                    && band(f.grid.coords(i).map(|v| v as f64))
            })
            .map(|i| geo.curvature[i])
            .collect()
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn sphere_curvature() {
        let r = 10.0;
        let c = [20.0, 20.0, 20.0];
        let f = shape_field([41, 41, 41], &|p| {
            (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2) < r * r
        });
        let k = interface_curvatures(&f, &|_| true);
        let m = mean(&k);
        assert!((m - 2.0 / r).abs() < 0.1 * 2.0 / r, "mean curvature {m}");
    }

    #[test]
    fn cylinder_curvature() {
        let r = 10.0;
        let f = shape_field([41, 6, 41], &|p| (p[0] - 20.0).powi(2) + (p[2] - 20.0).powi(2) < r * r);
        let k = interface_curvatures(&f, &|_| true);
        let m = mean(&k);
        assert!((m - 1.0 / r).abs() < 0.1 / r, "mean curvature {m}");
    }

    #[test]
    fn plane_has_no_curvature() {
        let f = shape_field([8, 8, 20], &|p| p[2] < 9.3);
        let k = interface_curvatures(&f, &|_| true);
        assert!(!k.is_empty());
        assert!(k.iter().all(|v| v.abs() < 0.02), "{k:?}");
    }

    #[test]
    fn plane_normal_points_into_gas() {
        let f = shape_field([6, 6, 16], &|p| p[2] < 7.5);
        let geo = surface_geometry(&f, 0.0, None);
        let i = f.grid.idx(2, 3, 7);
        let n = geo.normal[i];
        assert!((n[2] - 1.0).abs() < 1e-12 && n[0].abs() < 1e-12);
        let norm: f64 = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_preserves_constants_and_sum() {
        let g = Grid::new(7, 5, 6).unwrap();
        let ones = vec![1.0f64; g.len()];
        assert!(smooth(&g, &ones).iter().all(|v| (v - 1.0).abs() < 1e-14));
        let mut spike = vec![0.0; g.len()];
        spike[g.idx(3, 2, 3)] = 1.0;
        let s: f64 = smooth(&g, &spike).iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stencil_normals_match_whole_grid_normals() {
        let c = [9.0, 8.0, 7.0];
        let mut f = shape_field([18, 16, 16], &|p| {
            (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2) < 30.0
        });
        // freeze the lower half: its cells keep no curvature
        for i in 0..f.grid.len() {
            if f.grid.coords(i)[2] < 7 && f.flags[i] == CellFlag::Interface {
                f.frozen[i] = true;
            }
        }
        let theta = 60.0f64.to_radians();
        let geo = surface_geometry(&f, theta, None);
        let psi = smooth(&f.grid, &indicator(&f));
        let mut n = normals(&f.grid, &psi);
        apply_contact_angle(&f, &mut n, theta);
        let mut checked = 0;
        for i in 0..f.grid.len() {
            if f.flags[i] == CellFlag::Interface && !f.frozen[i] {
                checked += 1;
                assert!((geo.curvature[i] - curvature_at(&f.grid, &n, i)).abs() < 1e-12);
            } else if f.frozen[i] {
                assert_eq!(geo.curvature[i], 0.0);
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn isolated_cell_reports_zero_curvature() {
        let g = Grid::new(5, 5, 5).unwrap();
        let f = Field3D::<f64>::uniform(g, CellFlag::Gas, 1.0, 1.0);
        assert_eq!(curvature(&f, 62), 0.0);
    }
}

//! Powder bed: particle size sampling, settling of spheres on the substrate and voxelization.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, InverseGaussian};

use crate::domain::{CellFlag, DomainSpec, Field3D};
use crate::error::{Error, Result};
use crate::lattice::Q;
use crate::scalar::Real;
use crate::thermal::EnergyTemperatureMap;

/// Sub-samples per cell edge used for fill levels.
pub const SUBSAMPLES: usize = 4;

/// Largest sphere overlap allowed after settling, relative to the smaller radius.
pub const OVERLAP_TOLERANCE: f64 = 1e-4;

const MAX_SPHERES: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowderSpec {
    pub d_min: f64,
    pub d_max: f64,
    /// Mean of the truncated diameter distribution [m].
    pub mean: f64,
    pub skewness: f64,
    /// Deposited volume per unit area the bed must reach [m].
    pub layer_thickness: f64,
    pub seed: u64,
}

impl Default for PowderSpec {
    fn default() -> Self {
        Self {
            d_min: 0.045e-3,
            d_max: 0.105e-3,
            mean: 0.061e-3,
            skewness: 0.809,
            layer_thickness: 0.10e-3,
            seed: 1,
        }
    }
}

impl PowderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min < self.mean && self.mean < self.d_max) {
            return Err(Error::Powder(format!(
                "need 0 < d_min < mean < d_max, got {} / {} / {}",
                self.d_min, self.mean, self.d_max
            )));
        }
        if !(self.skewness > 0.0) {
            return Err(Error::Powder("skewness must be positive".into()));
        }
        if !(self.layer_thickness >= 0.0) {
            return Err(Error::Powder("layer thickness must be non-negative".into()));
        }
        Ok(())
    }
}

/// Inverse-Gaussian shape parameter with the given mean and skewness (`γ = 3 sqrt(μ/λ)`).
pub fn shape_from_skewness(mean: f64, skewness: f64) -> f64 {
    9.0 * mean / (skewness * skewness)
}

fn ig_pdf(x: f64, mu: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (lambda / (2.0 * PI * x * x * x)).sqrt() * (-lambda * (x - mu).powi(2) / (2.0 * mu * mu * x)).exp()
}

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Probability mass and mean of an inverse Gaussian restricted to `[a, b]`.
pub fn truncated_moments(mu: f64, lambda: f64, a: f64, b: f64) -> (f64, f64) {
    let mass = simpson(a, b, 4000, |x| ig_pdf(x, mu, lambda));
    let first = simpson(a, b, 4000, |x| x * ig_pdf(x, mu, lambda));
    (mass, first / mass)
}

/// Parent mean whose truncation to `[d_min, d_max]` has mean `spec.mean`; the skewness is kept.
pub fn parent_mean(spec: &PowderSpec) -> Result<f64> {
    spec.validate()?;
    let trunc_mean = |mu: f64| truncated_moments(mu, shape_from_skewness(mu, spec.skewness), spec.d_min, spec.d_max).1;
    let (mut lo, mut hi) = (0.2 * spec.mean, 3.0 * spec.mean);
    let (flo, fhi) = (trunc_mean(lo) - spec.mean, trunc_mean(hi) - spec.mean);
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::Powder(format!(
            "no inverse Gaussian with skewness {} has truncated mean {}",
            spec.skewness, spec.mean
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if trunc_mean(mid) < spec.mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Draws diameters from the truncated inverse Gaussian by rejection.
#[derive(Debug, Clone)]
pub struct DiameterSampler {
    dist: InverseGaussian<f64>,
    d_min: f64,
    d_max: f64,
    /// Fraction of parent draws that fall inside the bounds.
    pub acceptance: f64,
}

impl DiameterSampler {
    pub fn new(spec: &PowderSpec) -> Result<Self> {
        let mu = parent_mean(spec)?;
        Self::with_parent(mu, spec.skewness, spec.d_min, spec.d_max)
    }

    /// Sampler around an explicit parent mean.
    pub fn with_parent(mu: f64, skewness: f64, d_min: f64, d_max: f64) -> Result<Self> {
        let lambda = shape_from_skewness(mu, skewness);
        let dist = InverseGaussian::new(mu, lambda)
            .map_err(|e| Error::Powder(format!("invalid inverse Gaussian: {e}")))?;
        let (acceptance, _) = truncated_moments(mu, lambda, d_min, d_max);
        if acceptance < 0.01 {
            return Err(Error::Powder(format!(
                "only {:.3} % of diameters fall inside [{d_min}, {d_max}]",
                100.0 * acceptance
            )));
        }
        Ok(Self { dist, d_min, d_max, acceptance })
    }

    /// A diameter from the parent distribution, ignoring the bounds.
    pub fn sample_untruncated<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let d = self.dist.sample(rng);
            if d >= self.d_min && d <= self.d_max {
                return d;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Sphere {
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.radius.powi(3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereBed {
    pub spheres: Vec<Sphere>,
    /// Lateral periodic extent [m].
    pub extent: [f64; 2],
    /// Height of the plate the spheres rest on [m].
    pub floor: f64,
    /// Sphere volume over the slab between the floor and the mean top surface.
    pub packing_fraction: f64,
    pub mean_diameter: f64,
}

impl SphereBed {
    pub fn total_volume(&self) -> f64 {
        self.spheres.iter().map(Sphere::volume).sum()
    }

    /// Deposited volume per unit area [m].
    pub fn deposited_thickness(&self) -> f64 {
        self.total_volume() / (self.extent[0] * self.extent[1])
    }

    pub fn top(&self) -> f64 {
        self.spheres.iter().map(|s| s.center[2] + s.radius).fold(self.floor, f64::max)
    }

    /// Sphere volume inside the horizontal slab `[z0, z1]` divided by the slab volume.
    pub fn slab_fraction(&self, z0: f64, z1: f64) -> f64 {
        let v: f64 = self.spheres.iter().map(|s| cap_volume(s, z0, z1)).sum();
        v / ((z1 - z0) * self.extent[0] * self.extent[1])
    }

    /// Mean height of the topmost surface over a regular lateral sample grid.
    pub fn mean_surface_height(&self, samples: usize) -> f64 {
        let idx = LateralIndex::build(&self.spheres, self.extent, max_radius(&self.spheres));
        let mut total = 0.0;
        for a in 0..samples {
            for b in 0..samples {
                let x = (a as f64 + 0.5) / samples as f64 * self.extent[0];
                let y = (b as f64 + 0.5) / samples as f64 * self.extent[1];
                let mut top = self.floor;
                idx.for_near(x, y, |j| {
                    let s = &self.spheres[j];
                    let [dx, dy] = idx.min_image(x - s.center[0], y - s.center[1]);
                    let h = s.radius * s.radius - dx * dx - dy * dy;
                    if h >= 0.0 {
                        top = top.max(s.center[2] + h.sqrt());
                    }
                });
                total += top;
            }
        }
        total / (samples * samples) as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "r"])?;
        for s in &self.spheres {
            w.write_record(
                [s.center[0], s.center[1], s.center[2], s.radius].map(|v| format!("{v:e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads spheres written by [`SphereBed::write_csv`] into a bed over `extent` resting on `floor`.
    pub fn read_csv<R: Read>(input: R, extent: [f64; 2], floor: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut spheres = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Powder(format!("bad bed row {:?}: {e}", rec.position())))?;
            if v.len() != 4 || !(v[3] > 0.0) {
                return Err(Error::Powder(format!("bed rows need x,y,z,r with r > 0, got {v:?}")));
            }
            spheres.push(Sphere { center: [v[0], v[1], v[2]], radius: v[3] });
        }
        Ok(finish_bed(spheres, extent, floor))
    }
}

/// Volume of a sphere between the planes `z0 < z1`.
pub fn cap_volume(s: &Sphere, z0: f64, z1: f64) -> f64 {
    let r = s.radius;
    let a = (z0 - s.center[2]).clamp(-r, r);
    let b = (z1 - s.center[2]).clamp(-r, r);
    // ∫ π (r² − t²) dt
    let prim = |t: f64| PI * (r * r * t - t * t * t / 3.0);
    (prim(b) - prim(a)).max(0.0)
}

fn max_radius(spheres: &[Sphere]) -> f64 {
    spheres.iter().map(|s| s.radius).fold(0.0, f64::max)
}

fn finish_bed(spheres: Vec<Sphere>, extent: [f64; 2], floor: f64) -> SphereBed {
    let n = spheres.len();
    let mean_diameter = if n == 0 { 0.0 } else { spheres.iter().map(|s| 2.0 * s.radius).sum::<f64>() / n as f64 };
    let mut bed = SphereBed { spheres, extent, floor, packing_fraction: 0.0, mean_diameter };
    if n > 0 {
        let h = bed.mean_surface_height(64) - floor;
        if h > 0.0 {
            bed.packing_fraction = bed.total_volume() / (h * extent[0] * extent[1]);
        }
    }
    bed
}

/// Periodic lateral bucket grid over sphere centres.
struct LateralIndex {
    extent: [f64; 2],
    n: [usize; 2],
    cell: [f64; 2],
    buckets: Vec<Vec<usize>>,
}

impl LateralIndex {
    fn new(extent: [f64; 2], reach: f64) -> Self {
        let n = [0, 1].map(|a| ((extent[a] / reach.max(1e-300)).floor() as usize).clamp(1, 4096));
        let cell = [extent[0] / n[0] as f64, extent[1] / n[1] as f64];
        Self { extent, n, cell, buckets: vec![Vec::new(); n[0] * n[1]] }
    }

    fn build(spheres: &[Sphere], extent: [f64; 2], r_max: f64) -> Self {
        let mut idx = Self::new(extent, 2.0 * r_max);
        for (k, s) in spheres.iter().enumerate() {
            idx.insert(k, s.center[0], s.center[1]);
        }
        idx
    }

    fn bucket(&self, x: f64, y: f64) -> [usize; 2] {
        [
            ((x.rem_euclid(self.extent[0]) / self.cell[0]) as usize).min(self.n[0] - 1),
            ((y.rem_euclid(self.extent[1]) / self.cell[1]) as usize).min(self.n[1] - 1),
        ]
    }

    fn insert(&mut self, k: usize, x: f64, y: f64) {
        let [a, b] = self.bucket(x, y);
        self.buckets[a + self.n[0] * b].push(k);
    }

    fn min_image(&self, dx: f64, dy: f64) -> [f64; 2] {
        [
            dx - self.extent[0] * (dx / self.extent[0]).round(),
            dy - self.extent[1] * (dy / self.extent[1]).round(),
        ]
    }

    /// Calls `f` for every sphere whose centre may lie within `reach` of `(x, y)`.
    fn for_near(&self, x: f64, y: f64, mut f: impl FnMut(usize)) {
        let [a, b] = self.bucket(x, y);
        let range = |c: usize, n: usize| -> Vec<usize> {
            if n < 3 {
                (0..n).collect()
            } else {
                vec![(c + n - 1) % n, c, (c + 1) % n]
            }
        };
        for bb in range(b, self.n[1]) {
            for aa in range(a, self.n[0]) {
                for &k in &self.buckets[aa + self.n[0] * bb] {
                    f(k);
                }
            }
        }
    }
}

/// Sequential drop-and-settle: each sphere falls vertically at a random lateral
/// position until it first touches the floor or a resting sphere, then descends
/// while staying out of contact until it rests in a local height minimum.
pub fn generate_bed(domain: &DomainSpec, powder: &PowderSpec) -> Result<SphereBed> {
    if powder.layer_thickness <= 0.0 {
        return Ok(finish_bed(Vec::new(), [domain.extent[0], domain.extent[1]], domain.substrate_height));
    }
    let sampler = DiameterSampler::new(powder)?;
    generate_bed_with(domain, powder.layer_thickness, powder.seed, powder.d_max, |rng| sampler.sample(rng))
}

/// Same settling with diameters drawn by `diameter`, none larger than `d_max`.
pub fn generate_bed_with(
    domain: &DomainSpec,
    layer_thickness: f64,
    seed: u64,
    d_max: f64,
    mut diameter: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> Result<SphereBed> {
    let extent = [domain.extent[0], domain.extent[1]];
    let floor = domain.substrate_height;
    let mut spheres: Vec<Sphere> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_volume = layer_thickness * extent[0] * extent[1];
    let mut index = LateralIndex::new(extent, d_max);
    let mut volume = 0.0;
    while volume < target_volume {
        if spheres.len() >= MAX_SPHERES {
            return Err(Error::Powder(format!(
                "bed reached only {:.3e} m of {:.3e} m",
                volume / (extent[0] * extent[1]),
                layer_thickness
            )));
        }
        let r = 0.5 * diameter(&mut rng);
        if !(r > 0.0 && 2.0 * r <= d_max * (1.0 + 1e-12)) {
            return Err(Error::Powder(format!("diameter {} outside (0, {d_max}]", 2.0 * r)));
        }
        let x = rng.random::<f64>() * extent[0];
        let y = rng.random::<f64>() * extent[1];
        let c = settle(&spheres, &index, floor, [x, y], r);
        let s = Sphere { center: c, radius: r };
        index.insert(spheres.len(), c[0], c[1]);
        volume += s.volume();
        spheres.push(s);
    }
    Ok(finish_bed(spheres, extent, floor))
}

fn settle(spheres: &[Sphere], index: &LateralIndex, floor: f64, xy: [f64; 2], r: f64) -> [f64; 3] {
    // first contact of the vertical fall
    let mut z = floor + r;
    index.for_near(xy[0], xy[1], |j| {
        let s = &spheres[j];
        let [dx, dy] = index.min_image(xy[0] - s.center[0], xy[1] - s.center[1]);
        let reach = r + s.radius;
        let h = reach * reach - dx * dx - dy * dy;
        if h > 0.0 {
            z = z.max(s.center[2] + h.sqrt());
        }
    });
    let mut pos = [xy[0], xy[1], z];
    let mut step = 0.5 * r;
    let min_step = 1e-4 * r;
    for _ in 0..4000 {
        if step < min_step {
            break;
        }
        let normals = contact_normals(spheres, index, floor, r, &pos, 1e-3 * r);
        let Some(d) = downhill(&normals) else { break };
        let mut trial = [pos[0] + step * d[0], pos[1] + step * d[1], pos[2] + step * d[2]];
        if project(spheres, index, floor, r, &mut trial) && trial[2] < pos[2] - 1e-3 * min_step {
            pos = trial;
            step = (step * 1.5).min(0.5 * r);
        } else {
            step *= 0.5;
        }
    }
    pos[0] = pos[0].rem_euclid(index.extent[0]);
    pos[1] = pos[1].rem_euclid(index.extent[1]);
    pos
}

/// Unit normals (pointing at `p`) of every contact closer than `gap`; the floor gives `+z`.
fn contact_normals(
    spheres: &[Sphere],
    index: &LateralIndex,
    floor: f64,
    r: f64,
    p: &[f64; 3],
    gap: f64,
) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    if p[2] - r - floor < gap {
        out.push([0.0, 0.0, 1.0]);
    }
    index.for_near(p[0], p[1], |j| {
        let s = &spheres[j];
        let [dx, dy] = index.min_image(p[0] - s.center[0], p[1] - s.center[1]);
        let dz = p[2] - s.center[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d - (r + s.radius) < gap && d > 0.0 {
            out.push([dx / d, dy / d, dz / d]);
        }
    });
    out
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalized(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = dot(v, v).sqrt();
    (n > 1e-9).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

/// Steepest feasible descent under gravity: free fall, sliding on one contact
/// or rolling along two; `None` when the contacts support the sphere.
fn downhill(normals: &[[f64; 3]]) -> Option<[f64; 3]> {
    if normals.is_empty() {
        return Some([0.0, 0.0, -1.0]);
    }
    let separates = |d: [f64; 3], skip: &[usize]| {
        normals.iter().enumerate().all(|(k, n)| skip.contains(&k) || dot(d, *n) >= -1e-9)
    };
    let mut best: Option<[f64; 3]> = None;
    let mut consider = |d: [f64; 3]| {
        if d[2] < -1e-6 && best.is_none_or(|b| d[2] < b[2]) {
            best = Some(d);
        }
    };
    for (i, n) in normals.iter().enumerate() {
        let t = [n[2] * n[0], n[2] * n[1], n[2] * n[2] - 1.0];
        if let Some(d) = normalized(t) {
            if separates(d, &[i]) {
                consider(d);
            }
        }
    }
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            let (a, b) = (normals[i], normals[j]);
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            if let Some(mut d) = normalized(c) {
                if d[2] > 0.0 {
                    d = [-d[0], -d[1], -d[2]];
                }
                if separates(d, &[i, j]) {
                    consider(d);
                }
            }
        }
    }
    best
}

/// Pushes `p` out of all overlaps; returns whether a feasible position was found.
fn project(spheres: &[Sphere], index: &LateralIndex, floor: f64, r: f64, p: &mut [f64; 3]) -> bool {
    for _ in 0..50 {
        let mut worst = 0.0f64;
        p[2] = p[2].max(floor + r);
        index.for_near(p[0], p[1], |j| {
            let s = &spheres[j];
            let [dx, dy] = index.min_image(p[0] - s.center[0], p[1] - s.center[1]);
            let dz = p[2] - s.center[2];
            let d = (dx * dx + dy * dy + dz * dz).sqrt();
            let reach = r + s.radius;
            if d < reach {
                let over = reach - d;
                worst = worst.max(over / r.min(s.radius));
                if d > 1e-12 * reach {
                    let k = over / d;
                    p[0] += dx * k;
                    p[1] += dy * k;
                    p[2] += dz * k;
                } else {
                    p[2] += over;
                }
            }
        });
        if p[2] < floor + r {
            worst = worst.max((floor + r - p[2]) / r);
        }
        if worst <= 0.1 * OVERLAP_TOLERANCE {
            p[2] = p[2].max(floor + r);
            return true;
        }
    }
    false
}

/// Largest relative overlap between any two spheres (minimum-image in x/y).
pub fn max_overlap(bed: &SphereBed) -> f64 {
    let idx = LateralIndex::build(&bed.spheres, bed.extent, max_radius(&bed.spheres));
    let mut worst = 0.0f64;
    for (k, a) in bed.spheres.iter().enumerate() {
        idx.for_near(a.center[0], a.center[1], |j| {
            if j <= k {
                return;
            }
            let b = &bed.spheres[j];
            let [dx, dy] = idx.min_image(a.center[0] - b.center[0], a.center[1] - b.center[1]);
            let dz = a.center[2] - b.center[2];
            let d = (dx * dx + dy * dy + dz * dz).sqrt();
            worst = worst.max((a.radius + b.radius - d) / a.radius.min(b.radius));
        });
    }
    worst
}

/// Summary of a voxelization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voxelization {
    /// Σ fill · cell volume of the newly placed material [m³].
    pub volume: f64,
    pub solid_cells: usize,
    pub interface_cells: usize,
}

/// Writes the bed into the gas region of `field`: fully covered cells become
/// Solid, partially covered ones frozen Interface cells; all at temperature `t0`.
pub fn voxelize<T: Real>(
    bed: &SphereBed,
    field: &mut Field3D<T>,
    dx: f64,
    t0: T,
    map: &EnergyTemperatureMap<T>,
) -> Voxelization {
    let g = field.grid;
    let mut bits = vec![0u64; g.len()];
    let s = SUBSAMPLES as f64;
    let (lx, ly) = (g.nx as f64 * dx, g.ny as f64 * dx);
    for sp in &bed.spheres {
        let r2 = sp.radius * sp.radius;
        let lo = |c: f64| ((c - sp.radius) / dx).floor() as i64;
        let hi = |c: f64| ((c + sp.radius) / dx).floor() as i64;
        let (z0, z1) = (lo(sp.center[2]).max(0), hi(sp.center[2]).min(g.nz as i64 - 1));
        for cz in z0..=z1 {
            for cy in lo(sp.center[1])..=hi(sp.center[1]) {
                let jy = cy.rem_euclid(g.ny as i64) as usize;
                for cx in lo(sp.center[0])..=hi(sp.center[0]) {
                    let jx = cx.rem_euclid(g.nx as i64) as usize;
                    let i = g.idx(jx, jy, cz as usize);
                    if field.flags[i] != CellFlag::Gas {
                        continue;
                    }
                    let mut mask = 0u64;
                    let mut bit = 0;
                    for a in 0..SUBSAMPLES {
                        let pz = (cz as f64 + (a as f64 + 0.5) / s) * dx - sp.center[2];
                        for b in 0..SUBSAMPLES {
                            let mut py = (cy as f64 + (b as f64 + 0.5) / s) * dx - sp.center[1];
                            py -= ly * (py / ly).round();
                            for c in 0..SUBSAMPLES {
                                let mut px = (cx as f64 + (c as f64 + 0.5) / s) * dx - sp.center[0];
                                px -= lx * (px / lx).round();
                                if px * px + py * py + pz * pz <= r2 {
                                    mask |= 1 << bit;
                                }
                                bit += 1;
                            }
                        }
                    }
                    bits[i] |= mask;
                }
            }
        }
    }
    let total = (SUBSAMPLES * SUBSAMPLES * SUBSAMPLES) as f64;
    let mut out = Voxelization { volume: 0.0, solid_cells: 0, interface_cells: 0 };
    for i in 0..g.len() {
        if bits[i] == 0 {
            continue;
        }
        let phi = bits[i].count_ones() as f64 / total;
        out.volume += phi * dx * dx * dx;
        field.set_rest_state(i, T::one(), t0, map);
        if phi >= 1.0 {
            field.flags[i] = CellFlag::Solid;
            field.frozen[i] = false;
            field.fill[i] = T::one();
            field.mass[i] = T::one();
        } else {
            field.flags[i] = CellFlag::Interface;
            field.frozen[i] = true;
            field.fill[i] = T::lit(phi);
            field.mass[i] = T::lit(phi);
        }
        let n = i * Q;
        let (f, fnext) = (&field.f[n..n + Q].to_vec(), &mut field.f_next[n..n + Q]);
        fnext.copy_from_slice(f);
        let h = field.h[n..n + Q].to_vec();
        field.h_next[n..n + Q].copy_from_slice(&h);
    }
    // full interface cells that no longer see gas are plain solid
    for i in 0..g.len() {
        if field.flags[i] == CellFlag::Interface && field.frozen[i] && field.fill[i] >= T::one() {
            let sees_gas = (1..Q).any(|q| g.neighbor(i, q).is_some_and(|j| field.flags[j] == CellFlag::Gas));
            if !sees_gas {
                field.flags[i] = CellFlag::Solid;
                field.frozen[i] = false;
            }
        }
    }
    field.close_interface_layer();
    for i in 0..g.len() {
        match (field.flags[i], field.fill[i] >= T::one()) {
            (CellFlag::Solid, _) => out.solid_cells += 1,
            (CellFlag::Interface, _) => out.interface_cells += 1,
            _ => {}
        }
    }
    out
}

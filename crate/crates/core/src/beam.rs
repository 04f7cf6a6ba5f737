//! Electron beam: hatch scan paths, the Gaussian spot and Lambert–Beer absorption.

use std::f64::consts::PI;
use std::io::Write;

use num_traits::Num;

use crate::domain::{CellFlag, Field3D};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::{self, BeamShape, LatticeScaling, Quantity};

/// Spot truncation radius in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HatchVariant {
    Basic,
    /// Spot area enlarged by the given fraction (0.5 = +50 %).
    WidenedBeam(f64),
    HalvedOffset,
}

impl HatchVariant {
    /// Parses `basic`, `halved` or `widened:<percent>`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "basic" => Ok(Self::Basic),
            "halved" => Ok(Self::HalvedOffset),
            _ => {
                let pct = s
                    .strip_prefix("widened:")
                    .and_then(|p| p.trim().trim_end_matches('%').parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::domain(format!("unknown strategy `{s}` (basic | widened:<pct> | halved)"))
                    })?;
                if !(pct >= 0.0) {
                    return Err(Error::domain("widened strategy needs a non-negative percentage"));
                }
                Ok(Self::WidenedBeam(pct / 100.0))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Basic => "basic".into(),
            Self::HalvedOffset => "halved".into(),
            Self::WidenedBeam(f) => format!("widened:{}", f * 100.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Hatch geometry and process parameters of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatchStrategy {
    pub variant: HatchVariant,
    pub line_offset: f64,
    pub n_lines: usize,
    pub edge_offset: f64,
    pub scan_speed: f64,
    pub line_energy: f64,
    pub line_direction: Axis,
}

impl HatchStrategy {
    /// Seven lines 0.1 mm apart, 0.02 mm from the edge.
    pub fn new(variant: HatchVariant, line_energy: f64, scan_speed: f64) -> Self {
        let (line_offset, n_lines) = match variant {
            HatchVariant::HalvedOffset => (0.05e-3, 13),
            _ => (0.1e-3, 7),
        };
        Self {
            variant,
            line_offset,
            n_lines,
            edge_offset: 0.02e-3,
            scan_speed,
            line_energy,
            line_direction: Axis::X,
        }
    }

    pub fn basic(line_energy: f64, scan_speed: f64) -> Self {
        Self::new(HatchVariant::Basic, line_energy, scan_speed)
    }

    pub fn power(&self) -> f64 {
        self.line_energy * self.scan_speed
    }

    /// Spot standard deviation for this variant given the basic one.
    pub fn sigma(&self, base_sigma: f64) -> Result<f64> {
        match self.variant {
            HatchVariant::WidenedBeam(a) => units::scaled_sigma(base_sigma, a),
            _ => Ok(base_sigma),
        }
    }

    pub fn validate(&self, max_power: f64) -> Result<()> {
        if !(self.scan_speed > 0.0) {
            return Err(Error::domain(format!("scan speed must be positive, got {}", self.scan_speed)));
        }
        if !(self.line_energy >= 0.0) {
            return Err(Error::domain("line energy must be non-negative"));
        }
        if self.n_lines == 0 || !(self.line_offset > 0.0) || !(self.edge_offset >= 0.0) {
            return Err(Error::domain("hatch needs at least one line and a positive line offset"));
        }
        let p = self.power();
        if p > max_power {
            return Err(Error::domain(format!(
                "beam power {p:.1} W exceeds the gun maximum of {max_power:.1} W"
            )));
        }
        Ok(())
    }

    /// Same beam power with half the line offset: twice the speed, half the line energy.
    pub fn halved_counterpart(&self) -> Self {
        Self::new(HatchVariant::HalvedOffset, self.line_energy / 2.0, self.scan_speed * 2.0)
    }
}

/// Beam absorption in the material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionModel {
    pub absorptivity: f64,
    /// e-folding depth [m].
    pub penetration_depth: f64,
}

impl Default for AbsorptionModel {
    fn default() -> Self {
        Self { absorptivity: 0.9, penetration_depth: 12.5e-6 }
    }
}

impl AbsorptionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.absorptivity > 0.0 && self.absorptivity <= 1.0) || !(self.penetration_depth > 0.0) {
            return Err(Error::domain("absorptivity must lie in (0, 1] and penetration depth be positive"));
        }
        Ok(())
    }
}

/// One straight scan line traversed at constant speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HatchPath {
    pub segments: Vec<ScanSegment>,
    pub power: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanState {
    pub position: [f64; 2],
    pub active: bool,
    /// Index of the line being scanned.
    pub line: Option<usize>,
}

/// Serpentine hatch over the domain: lines along x, spaced in y from the edge offset.
pub fn build_hatch_path(strategy: &HatchStrategy, extent: [f64; 2]) -> Result<HatchPath> {
    if strategy.line_direction != Axis::X {
        return Err(Error::domain("only scan lines along x are supported"));
    }
    if !(strategy.scan_speed > 0.0) {
        return Err(Error::domain("scan speed must be positive"));
    }
    let last_y = strategy.edge_offset + (strategy.n_lines.saturating_sub(1)) as f64 * strategy.line_offset;
    if strategy.n_lines == 0 || last_y >= extent[1] {
        return Err(Error::domain(format!(
            "{} lines {} m apart starting at {} m do not fit a {} m wide domain",
            strategy.n_lines, strategy.line_offset, strategy.edge_offset, extent[1]
        )));
    }
    let length = extent[0];
    let line_time = length / strategy.scan_speed;
    let segments = (0..strategy.n_lines)
        .map(|k| {
            let y = strategy.edge_offset + k as f64 * strategy.line_offset;
            let (x0, x1) = if k % 2 == 0 { (0.0, length) } else { (length, 0.0) };
            ScanSegment {
                start: [x0, y],
                end: [x1, y],
                t_start: k as f64 * line_time,
                t_end: (k + 1) as f64 * line_time,
            }
        })
        .collect();
    Ok(HatchPath { segments, power: strategy.power(), speed: strategy.scan_speed })
}

impl HatchPath {
    pub fn active_time(&self) -> f64 {
        self.segments.iter().map(|s| s.t_end - s.t_start).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn line_windows(&self) -> Vec<(f64, f64)> {
        self.segments.iter().map(|s| (s.t_start, s.t_end)).collect()
    }

    pub fn scan_state(&self, t: f64) -> ScanState {
        for (k, s) in self.segments.iter().enumerate() {
            if t >= s.t_start && t < s.t_end {
                let a = (t - s.t_start) / (s.t_end - s.t_start);
                return ScanState {
                    position: [
                        s.start[0] + a * (s.end[0] - s.start[0]),
                        s.start[1] + a * (s.end[1] - s.start[1]),
                    ],
                    active: true,
                    line: Some(k),
                };
            }
        }
        let last = self.segments.last().map_or([0.0; 2], |s| s.end);
        ScanState { position: last, active: false, line: None }
    }

    /// Writes `t,x,y,power` rows sampled every `interval` seconds plus every line end.
    pub fn write_csv<W: Write>(&self, out: W, interval: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y", "power"])?;
        for s in &self.segments {
            let n = (((s.t_end - s.t_start) / interval).ceil() as usize).max(1);
            for k in 0..=n {
                let t = s.t_start + (s.t_end - s.t_start) * k as f64 / n as f64;
                let a = k as f64 / n as f64;
                let x = s.start[0] + a * (s.end[0] - s.start[0]);
                let y = s.start[1] + a * (s.end[1] - s.start[1]);
                let p = if k == n { 0.0 } else { self.power };
                w.write_record([t.to_string(), x.to_string(), y.to_string(), p.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Areal power density of the Gaussian spot at squared radius `r2`.
pub fn gaussian_flux(r2: f64, beam: &BeamShape) -> f64 {
    let s2 = beam.sigma() * beam.sigma();
    beam.power() / (2.0 * PI * s2) * (-r2 / (2.0 * s2)).exp()
}

/// Time to hatch a rectangular area with parallel lines: `(width / offset) · length / speed`.
pub fn hatch_time<N: Num + Copy>(width: N, length: N, line_offset: N, speed: N) -> N {
    width / line_offset * length / speed
}

/// Time to trace a contour of the given length.
pub fn contour_time<N: Num + Copy>(length: N, speed: N) -> N {
    length / speed
}

/// Energy delivered to the field in one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Deposition {
    /// Energy absorbed by material [J].
    pub deposited: f64,
    /// Energy that hit columns without any material [J].
    pub lost: f64,
    pub substeps: usize,
}

/// Fraction of material width `[d0, d0 + w]` (in units of the penetration depth) absorbed there.
#[inline]
fn band_fraction(d0: f64, w: f64) -> f64 {
    (-d0).exp() - (-(d0 + w)).exp()
}

/// Fills `source` with the energy density (lattice units per cell) absorbed during `[t, t + dt]`.
///
/// The spot is moved in sub-steps of at most half a cell. Each column first
/// collects its areal energy; that is then spread over the material cells
/// below the local surface as `exp(-d/δ)/δ`, where `d` counts material depth
/// only. Interface cells receive energy in proportion to their fill and store
/// it per unit of material.
#[allow(clippy::too_many_arguments)]
pub fn deposit_energy<T: Real>(
    field: &Field3D<T>,
    path: &HatchPath,
    sigma: f64,
    t: f64,
    dt: f64,
    absorption: &AbsorptionModel,
    scaling: &LatticeScaling,
    source: &mut [T],
) -> Deposition {
    source.iter_mut().for_each(|s| *s = T::zero());
    let g = field.grid;
    let dx = scaling.dx();
    let nsub = ((path.speed * dt / (0.5 * dx)).ceil() as usize).max(1);
    let mut result = Deposition { deposited: 0.0, lost: 0.0, substeps: nsub };
    if path.power <= 0.0 {
        return result;
    }
    let (nx, ny) = (g.nx, g.ny);
    let mut column = vec![0.0f64; nx * ny];
    let s2 = sigma * sigma;
    let reach = (TRUNCATION_SIGMAS * sigma / dx).ceil() as i64;
    let cut2 = (TRUNCATION_SIGMAS * sigma).powi(2);
    let sub_dt = dt / nsub as f64;
    let peak = path.power * sub_dt / (2.0 * PI * s2) * dx * dx;
    let mut any = false;
    for k in 0..nsub {
        let st = path.scan_state(t + (k as f64 + 0.5) * sub_dt);
        if !st.active {
            continue;
        }
        any = true;
        let [px, py] = st.position;
        let cx = (px / dx - 0.5).round() as i64;
        let cy = (py / dx - 0.5).round() as i64;
        // periodic images: a spot wider than the domain wraps onto itself
        for oy in -reach..=reach {
            let jy = (cy + oy).rem_euclid(ny as i64) as usize;
            let ry = ((cy + oy) as f64 + 0.5) * dx - py;
            for ox in -reach..=reach {
                let jx = (cx + ox).rem_euclid(nx as i64) as usize;
                let rx = ((cx + ox) as f64 + 0.5) * dx - px;
                let r2 = rx * rx + ry * ry;
                if r2 <= cut2 {
                    column[jx + nx * jy] += peak * (-r2 / (2.0 * s2)).exp();
                }
            }
        }
    }
    if !any {
        return result;
    }
    let eta = absorption.absorptivity;
    let delta = absorption.penetration_depth / dx;
    let e_unit = scaling.factor(Quantity::Energy);
    let mut deposited = 0.0;
    let mut lost = 0.0;
    for jy in 0..ny {
        for jx in 0..nx {
            let areal = column[jx + nx * jy];
            if areal <= 0.0 {
                continue;
            }
            let energy = eta * areal;
            let mut depth = 0.0;
            let mut last: Option<(usize, f64)> = None;
            let mut given = 0.0;
            for z in (0..g.nz).rev() {
                let i = g.idx(jx, jy, z);
                let flag = field.flags[i];
                if !flag.is_material() {
                    continue;
                }
                let phi = match flag {
                    CellFlag::Interface => field.fill[i].as_f64().clamp(0.0, 1.0),
                    _ => 1.0,
                };
                if phi < 1e-6 {
                    continue;
                }
                let frac = band_fraction(depth / delta, phi / delta);
                let q = energy * frac;
                source[i] = source[i] + T::lit(q / e_unit / phi);
                given += q;
                depth += phi;
                last = Some((i, phi));
                if depth > 40.0 * delta {
                    break;
                }
            }
            match last {
                Some((i, phi)) => {
                    let rest = energy - given;
                    source[i] = source[i] + T::lit(rest / e_unit / phi);
                    deposited += energy;
                }
                None => lost += energy,
            }
        }
    }
    result.deposited = deposited;
    result.lost = lost;
    result
}

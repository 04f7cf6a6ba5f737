//! Flat `key = value` run configuration.
//!
//! Lines hold one `key = value` pair, `#` starts a comment, all values are SI.
//! Parsing collects every problem it finds instead of stopping at the first.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::analysis::Thresholds;
use crate::beam::{AbsorptionModel, HatchStrategy, HatchVariant};
use crate::domain::DomainSpec;
use crate::error::{ConfigIssue, Error, Result};
use crate::powder::PowderSpec;
use crate::units::LatticeScaling;

pub const REQUIRED_KEYS: [&str; 13] = [
    "domain_x",
    "domain_y",
    "domain_z",
    "substrate_height",
    "layer_thickness",
    "dx",
    "dt",
    "preheat_temperature",
    "strategy",
    "line_energy",
    "scan_speed",
    "beam_sigma",
    "seed",
];

pub const OPTIONAL_KEYS: [&str; 28] = [
    "margin",
    "acceleration_voltage",
    "max_power",
    "absorptivity",
    "penetration_depth",
    "line_offset",
    "n_lines",
    "edge_offset",
    "cooling_time",
    "powder_d_min",
    "powder_d_max",
    "powder_mean",
    "powder_skewness",
    "material_file",
    "bed_file",
    "output_dir",
    "vtk_every",
    "sample_every",
    "density_threshold",
    "temperature_threshold",
    "gravity",
    "negative_pdf_tolerance",
    "mach_limit",
    "viscosity",
    "surface_tension",
    "surface_tension_scale",
    "contact_angle",
    "max_curvature",
];

/// Physics settings that override the material defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOverrides {
    pub gravity: f64,
    pub negative_pdf_tolerance: f64,
    pub mach_limit: f64,
    pub viscosity: Option<f64>,
    pub surface_tension: Option<f64>,
    /// Factor applied on top of the surface tension in use.
    pub surface_tension_scale: f64,
    pub contact_angle: Option<f64>,
    /// Bound on |κ| [1/cells].
    pub max_curvature: Option<f64>,
}

impl Default for ModelOverrides {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            negative_pdf_tolerance: -1e-12,
            mach_limit: 0.3,
            viscosity: None,
            surface_tension: None,
            surface_tension_scale: 1.0,
            contact_angle: None,
            max_curvature: None,
        }
    }
}

/// Resolution presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Full,
    /// Half resolution: Δx × 2, Δt × 4, same physical box.
    Desk,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "desk" => Ok(Self::Desk),
            _ => Err(Error::domain(format!("unknown preset `{s}` (full | desk)"))),
        }
    }
}

/// Surface tension factor and curvature bound used by the desk preset.
pub const DESK_SURFACE_TENSION_SCALE: f64 = 0.1;
pub const DESK_MAX_CURVATURE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub dx: f64,
    pub dt: f64,
    pub strategy: HatchStrategy,
    /// σ of the basic beam [m]; the widened variant scales it.
    pub beam_sigma: f64,
    pub acceleration_voltage: f64,
    pub max_power: f64,
    pub absorption: AbsorptionModel,
    pub powder: PowderSpec,
    pub cooling_time: f64,
    pub material_file: Option<PathBuf>,
    pub bed_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Snapshot cadence in steps, 0 disables snapshots.
    pub vtk_every: u64,
    pub sample_every: u64,
    pub thresholds: Thresholds,
    pub model: ModelOverrides,
    pub seed: u64,
}

impl RunConfig {
    pub fn scaling(&self, rho0: f64) -> Result<LatticeScaling> {
        LatticeScaling::new(self.dx, self.dt, rho0)
    }

    /// Applies a resolution preset; extents are snapped to the new cell size.
    pub fn with_preset(mut self, preset: Preset) -> Self {
        if preset == Preset::Desk {
            self.dx *= 2.0;
            self.dt *= 4.0;
            let snap = |v: f64, dx: f64| (v / dx).round().max(1.0) * dx;
            for e in self.domain.extent.iter_mut() {
                *e = snap(*e, self.dx);
            }
            self.domain.substrate_height = (self.domain.substrate_height / self.dx).round() * self.dx;
            self.model.surface_tension_scale *= DESK_SURFACE_TENSION_SCALE;
            self.model.max_curvature.get_or_insert(DESK_MAX_CURVATURE);
        }
        self
    }

    /// Same configuration with a different seed for both the powder and the run.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.powder.seed = seed;
        self
    }

    /// Same configuration with another beam setting. The configured line
    /// geometry is kept for the same variant and reverts to the variant's
    /// defaults otherwise.
    pub fn with_strategy(mut self, variant: HatchVariant, line_energy: f64, scan_speed: f64) -> Self {
        if variant == self.strategy.variant {
            self.strategy.line_energy = line_energy;
            self.strategy.scan_speed = scan_speed;
        } else {
            self.strategy = HatchStrategy::new(variant, line_energy, scan_speed);
        }
        self
    }

    pub fn beam_power(&self) -> f64 {
        self.strategy.power()
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, line: Option<usize>, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue { line, key: key.to_string(), message: message.into() });
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get(key).map(|e| (e.line, e.value.clone()))
    }

    fn number(&mut self, key: &str, check: Range) -> Option<f64> {
        let (line, v) = self.raw(key)?;
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => {
                if let Some(msg) = check.violation(x) {
                    self.issue(Some(line), key, msg);
                    None
                } else {
                    Some(x)
                }
            }
            _ => {
                self.issue(Some(line), key, format!("`{v}` is not a number"));
                None
            }
        }
    }

    fn integer(&mut self, key: &str) -> Option<u64> {
        let (line, v) = self.raw(key)?;
        match v.parse::<u64>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.issue(Some(line), key, format!("`{v}` is not a non-negative integer"));
                None
            }
        }
    }

    fn path(&mut self, key: &str, must_exist: bool) -> Option<PathBuf> {
        let (line, v) = self.raw(key)?;
        let p = PathBuf::from(&v);
        if must_exist && !p.exists() {
            self.issue(Some(line), key, format!("file `{v}` does not exist"));
            return None;
        }
        Some(p)
    }
}

#[derive(Clone, Copy)]
enum Range {
    Positive,
    NonNegative,
    Fraction,
    NonPositive,
    Any,
}

impl Range {
    fn violation(self, x: f64) -> Option<String> {
        let ok = match self {
            Range::Positive => x > 0.0,
            Range::NonNegative => x >= 0.0,
            Range::Fraction => x > 0.0 && x <= 1.0,
            Range::NonPositive => x <= 0.0,
            Range::Any => true,
        };
        (!ok).then(|| {
            match self {
                Range::Positive => "must be positive",
                Range::NonNegative => "must not be negative",
                Range::Fraction => "must lie in (0, 1]",
                Range::NonPositive => "must not be positive",
                Range::Any => "",
            }
            .to_string()
        })
    }
}

/// Parses and validates a configuration; all issues are returned together.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut r = Reader { entries: BTreeMap::new(), issues: Vec::new() };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            r.issue(Some(line), content, "expected `key = value`");
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !REQUIRED_KEYS.contains(&k) && !OPTIONAL_KEYS.contains(&k) {
            r.issue(Some(line), k, "unknown key");
            continue;
        }
        if v.is_empty() {
            r.issue(Some(line), k, "missing value");
            continue;
        }
        if let Some(prev) = r.entries.get(k) {
            let msg = format!("duplicate key, first set on line {}", prev.line);
            r.issue(Some(line), k, msg);
            continue;
        }
        r.entries.insert(k.to_string(), Entry { line, value: v.to_string() });
    }
    for key in REQUIRED_KEYS {
        if !r.entries.contains_key(key) {
            r.issue(None, key, "missing required key");
        }
    }

    use Range::*;
    let dx = r.number("dx", Positive);
    let dt = r.number("dt", Positive);
    let ext = [r.number("domain_x", Positive), r.number("domain_y", Positive), r.number("domain_z", Positive)];
    let substrate = r.number("substrate_height", NonNegative);
    let layer = r.number("layer_thickness", NonNegative);
    let preheat = r.number("preheat_temperature", Positive);
    let line_energy = r.number("line_energy", NonNegative);
    let scan_speed = r.number("scan_speed", Positive);
    let beam_sigma = r.number("beam_sigma", Positive);
    let seed = r.integer("seed");
    let variant = r.raw("strategy").and_then(|(line, v)| match HatchVariant::parse(&v) {
        Ok(s) => Some(s),
        Err(e) => {
            r.issue(Some(line), "strategy", e.to_string());
            None
        }
    });

    let defaults = DomainSpec::default();
    let margin = r.number("margin", NonNegative).unwrap_or(defaults.margin);
    let acceleration_voltage = r.number("acceleration_voltage", Positive).unwrap_or(60e3);
    let max_power = r.number("max_power", Positive).unwrap_or(10e3);
    let absorb = AbsorptionModel::default();
    let absorptivity = r.number("absorptivity", Fraction).unwrap_or(absorb.absorptivity);
    let penetration = r.number("penetration_depth", Positive).unwrap_or(absorb.penetration_depth);
    let line_offset = r.number("line_offset", Positive);
    let n_lines = r.integer("n_lines");
    let edge_offset = r.number("edge_offset", NonNegative);
    let cooling_time = r.number("cooling_time", NonNegative).unwrap_or(1e-3);
    let pd = PowderSpec::default();
    let d_min = r.number("powder_d_min", Positive).unwrap_or(pd.d_min);
    let d_max = r.number("powder_d_max", Positive).unwrap_or(pd.d_max);
    let mean = r.number("powder_mean", Positive).unwrap_or(pd.mean);
    let skewness = r.number("powder_skewness", Positive).unwrap_or(pd.skewness);
    let material_file = r.path("material_file", true);
    let bed_file = r.path("bed_file", true);
    let output_dir = r.path("output_dir", false).unwrap_or_else(|| PathBuf::from("out"));
    let vtk_every = r.integer("vtk_every").unwrap_or(0);
    let sample_every = r.integer("sample_every").unwrap_or(1);
    let th = Thresholds::default();
    let density_min = r.number("density_threshold", Fraction).unwrap_or(th.density_min);
    let temp_max = r.number("temperature_threshold", Positive).unwrap_or(th.temp_max);
    let mo = ModelOverrides::default();
    let model = ModelOverrides {
        gravity: r.number("gravity", NonNegative).unwrap_or(mo.gravity),
        negative_pdf_tolerance: r.number("negative_pdf_tolerance", NonPositive).unwrap_or(mo.negative_pdf_tolerance),
        mach_limit: r.number("mach_limit", Positive).unwrap_or(mo.mach_limit),
        viscosity: r.number("viscosity", Positive),
        surface_tension: r.number("surface_tension", NonNegative),
        surface_tension_scale: r.number("surface_tension_scale", NonNegative).unwrap_or(1.0),
        contact_angle: r.number("contact_angle", Any),
        max_curvature: r.number("max_curvature", Positive),
    };
    if sample_every == 0 {
        let line = r.entries.get("sample_every").map(|e| e.line);
        r.issue(line, "sample_every", "must be at least 1");
    }

    // cross-field checks only once the fields themselves are fine
    if !(d_min < mean && mean < d_max) {
        let line = r.entries.get("powder_mean").map(|e| e.line);
        r.issue(line, "powder_mean", "need powder_d_min < powder_mean < powder_d_max");
    }
    if let (Some(e), Some(v)) = (line_energy, scan_speed) {
        if e * v > max_power {
            let line = r.entries.get("line_energy").map(|e| e.line);
            r.issue(line, "line_energy", format!("beam power {} W exceeds max_power {max_power} W", e * v));
        }
    }
    if let ([Some(_), Some(_), Some(z)], Some(s), Some(l)) = (ext, substrate, layer) {
        if s + l > z * (1.0 + 1e-12) {
            let line = r.entries.get("substrate_height").map(|e| e.line);
            r.issue(line, "substrate_height", "substrate plus layer thickness exceed domain_z");
        }
    }

    if !r.issues.is_empty() {
        r.issues.sort_by_key(|i| (i.line.unwrap_or(0), i.key.clone()));
        return Err(Error::Config(r.issues));
    }

    let (dx, dt, preheat, seed) = (dx.unwrap(), dt.unwrap(), preheat.unwrap(), seed.unwrap());
    let domain = DomainSpec {
        extent: [ext[0].unwrap(), ext[1].unwrap(), ext[2].unwrap()],
        substrate_height: substrate.unwrap(),
        layer_thickness: layer.unwrap(),
        margin,
        preheat_temperature: preheat,
    };
    let mut strategy = HatchStrategy::new(variant.unwrap(), line_energy.unwrap(), scan_speed.unwrap());
    if let Some(v) = line_offset {
        strategy.line_offset = v;
    }
    if let Some(n) = n_lines {
        strategy.n_lines = n as usize;
    }
    if let Some(v) = edge_offset {
        strategy.edge_offset = v;
    }
    Ok(RunConfig {
        domain,
        dx,
        dt,
        strategy,
        beam_sigma: beam_sigma.unwrap(),
        acceleration_voltage,
        max_power,
        absorption: AbsorptionModel { absorptivity, penetration_depth: penetration },
        powder: PowderSpec { d_min, d_max, mean, skewness, layer_thickness: domain.layer_thickness, seed },
        cooling_time,
        material_file,
        bed_file,
        output_dir,
        vtk_every,
        sample_every,
        thresholds: Thresholds { density_min, temp_max },
        model,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = include_str!("../../../configs/basic.cfg");

    #[test]
    fn shipped_file_holds_setup_values() {
        let c = parse_config(BASIC).unwrap();
        assert_eq!(c.domain.extent, [1.44e-3, 0.64e-3, 0.24e-3]);
        assert_eq!(c.domain.substrate_height, 0.12e-3);
        assert_eq!(c.dx, 5e-6);
        assert_eq!(c.dt, 1.75e-7);
        assert_eq!(c.beam_sigma, 0.1e-3);
        assert_eq!(c.strategy.n_lines, 7);
        assert_eq!(c.strategy.line_offset, 0.1e-3);
        assert_eq!(c.domain.preheat_temperature, 923.15);
        assert_eq!(c.powder.mean, 0.061e-3);
    }

    #[test]
    fn empty_file_names_every_required_key() {
        let Err(Error::Config(issues)) = parse_config("") else { panic!() };
        let keys: Vec<&str> = issues.iter().map(|i| i.key.as_str()).collect();
        for k in REQUIRED_KEYS {
            assert!(keys.contains(&k), "{k} not reported");
        }
        assert_eq!(issues.len(), REQUIRED_KEYS.len());
    }

    #[test]
    fn negative_speed_is_reported_at_its_line() {
        let text = BASIC.replace("scan_speed = 5", "scan_speed = -1");
        let line = text.lines().position(|l| l.starts_with("scan_speed")).unwrap() + 1;
        let Err(Error::Config(issues)) = parse_config(&text) else { panic!() };
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, Some(line));
        assert_eq!(issues[0].key, "scan_speed");
    }

    #[test]
    fn all_problems_are_collected() {
        let text = format!("{BASIC}\nbogus = 1\ndx = 3\ngravity = -1\n");
        let Err(Error::Config(issues)) = parse_config(&text) else { panic!() };
        let keys: Vec<&str> = issues.iter().map(|i| i.key.as_str()).collect();
        assert_eq!(keys, ["bogus", "dx", "gravity"]);
        assert!(issues.iter().all(|i| i.line.is_some()));
    }

    #[test]
    fn power_above_gun_limit_is_rejected() {
        let text = format!("{}\nmax_power = 1000\n", BASIC);
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn desk_preset_keeps_the_box() {
        let c = parse_config(BASIC).unwrap().with_preset(Preset::Desk);
        assert_eq!(c.dx, 1e-5);
        assert!((c.dt - 7e-7).abs() < 1e-20);
        let g = c.domain.validate(c.dx).unwrap();
        assert_eq!((g.nx, g.ny, g.nz), (144, 64, 24));
        assert_eq!(c.model.max_curvature, Some(DESK_MAX_CURVATURE));
    }
}

use std::path::Path;

use crate::error::{Error, Result};

/// Temperature range every property table must cover [K].
pub const TABLE_MIN_T: f64 = 273.0;
pub const TABLE_MAX_T: f64 = 10_000.0;

/// Piecewise-linear property of temperature, constant outside its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    temps: Vec<f64>,
    values: Vec<f64>,
}

impl PropertyTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("property table is empty"));
        }
        let (temps, values): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if temps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("property table temperatures must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain("property table values must be positive"));
        }
        Ok(Self { temps, values })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![(TABLE_MIN_T, value), (TABLE_MAX_T, value)])
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }

    pub fn min_t(&self) -> f64 {
        self.temps[0]
    }

    pub fn max_t(&self) -> f64 {
        *self.temps.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.temps.len();
        if t <= self.temps[0] {
            return self.values[0];
        }
        if t >= self.temps[n - 1] {
            return self.values[n - 1];
        }
        let k = self.temps.partition_point(|&x| x <= t) - 1;
        let s = (t - self.temps[k]) / (self.temps[k + 1] - self.temps[k]);
        self.values[k] + s * (self.values[k + 1] - self.values[k])
    }

    /// ∫₀ᵗ of the table, treating it as constant below its first sample.
    pub fn integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.temps.len();
        let t0 = self.temps[0];
        if t <= t0 {
            return self.values[0] * t;
        }
        let mut acc = self.values[0] * t0;
        for k in 0..n - 1 {
            let (a, b) = (self.temps[k], self.temps[k + 1]);
            if t <= a {
                return acc;
            }
            let hi = t.min(b);
            let va = self.values[k];
            let vhi = self.eval(hi);
            acc += 0.5 * (va + vhi) * (hi - a);
            if t <= b {
                return acc;
            }
        }
        acc + self.values[n - 1] * (t - self.temps[n - 1])
    }
}

/// Temperature dependent thermophysical data of the processed alloy.
///
/// Defaults are Ti-6Al-4V handbook values. They are calibration inputs and
/// can be replaced by loading a property table file.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    /// Reference density [kg/m³].
    pub rho0: f64,
    /// Specific heat capacity [J/(kg K)].
    pub cp: PropertyTable,
    /// Heat conductivity [W/(m K)].
    pub lambda: PropertyTable,
    /// Latent heat of fusion [J/kg].
    pub latent_heat: f64,
    pub solidus: f64,
    pub liquidus: f64,
    /// Kinematic viscosity of the melt [m²/s].
    pub nu_liquid: f64,
    /// Surface tension [N/m].
    pub surface_tension: f64,
    /// Static contact angle on solid material [deg].
    pub contact_angle: f64,
}

/// Default `T cp lambda` table shipped with the crate.
pub const TI64_TABLE: &str = include_str!("ti6al4v.txt");

impl MaterialModel {
    pub fn ti6al4v() -> Self {
        let (cp, lambda) = parse_property_table(TI64_TABLE).expect("bundled table is valid");
        let m = Self {
            rho0: 4122.0,
            cp,
            lambda,
            latent_heat: 2.9e5,
            solidus: 1878.0,
            liquidus: 1928.0,
            nu_liquid: 1.25e-6,
            surface_tension: 1.5,
            contact_angle: 0.0,
        };
        m.validate().expect("bundled material is valid");
        m
    }

    /// Material with constant properties, mostly for verification problems.
    pub fn constant(
        rho0: f64,
        cp: f64,
        lambda: f64,
        latent_heat: f64,
        solidus: f64,
        liquidus: f64,
    ) -> Result<Self> {
        let m = Self {
            rho0,
            cp: PropertyTable::constant(cp)?,
            lambda: PropertyTable::constant(lambda)?,
            latent_heat,
            solidus,
            liquidus,
            nu_liquid: 1e-6,
            surface_tension: 0.0,
            contact_angle: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) {
            return Err(Error::domain("material density must be positive"));
        }
        if !(self.solidus < self.liquidus) {
            return Err(Error::domain(format!(
                "solidus {} K must lie below liquidus {} K",
                self.solidus, self.liquidus
            )));
        }
        if !(self.latent_heat >= 0.0) {
            return Err(Error::domain("latent heat must be non-negative"));
        }
        for (name, t) in [("c_p", &self.cp), ("lambda", &self.lambda)] {
            if t.min_t() > TABLE_MIN_T || t.max_t() < TABLE_MAX_T {
                return Err(Error::domain(format!(
                    "{name} table covers [{}, {}] K, needs [{TABLE_MIN_T}, {TABLE_MAX_T}] K",
                    t.min_t(),
                    t.max_t()
                )));
            }
        }
        if !(self.surface_tension >= 0.0) || !(0.0..=180.0).contains(&self.contact_angle) {
            return Err(Error::domain("surface tension must be >= 0 and contact angle in [0, 180] deg"));
        }
        Ok(())
    }

    /// Thermal diffusivity λ/(ρ c_p) [m²/s].
    pub fn diffusivity(&self, t: f64) -> f64 {
        self.lambda.eval(t) / (self.rho0 * self.cp.eval(t))
    }

    /// Returns the temperature clamped into the tabulated range and whether clamping happened.
    pub fn clamp_to_table(&self, t: f64) -> (f64, bool) {
        let lo = self.cp.min_t().max(self.lambda.min_t());
        let hi = self.cp.max_t().min(self.lambda.max_t());
        if t < lo {
            (lo, true)
        } else if t > hi {
            (hi, true)
        } else {
            (t, false)
        }
    }

    /// Latent enthalpy released so far, ramping linearly over the mushy interval [J/kg].
    pub fn latent(&self, t: f64) -> f64 {
        if t <= self.solidus {
            0.0
        } else if t >= self.liquidus {
            self.latent_heat
        } else {
            self.latent_heat * (t - self.solidus) / (self.liquidus - self.solidus)
        }
    }

    /// Sensible enthalpy density ∫₀ᵀ ρ c_p dT' [J/m³].
    pub fn sensible_enthalpy(&self, t: f64) -> f64 {
        self.rho0 * self.cp.integral(t)
    }

    /// Total energy density including latent heat [J/m³].
    pub fn energy_density(&self, t: f64) -> f64 {
        self.sensible_enthalpy(t) + self.rho0 * self.latent(t)
    }

    pub fn with_tables_from_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        let (cp, lambda) = parse_property_table(&text)?;
        self.cp = cp;
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }
}

/// Parses `T_kelvin cp lambda` lines; `#` starts a comment.
pub fn parse_property_table(text: &str) -> Result<(PropertyTable, PropertyTable)> {
    let mut cp = Vec::new();
    let mut lambda = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::domain(format!(
                "property table line {}: expected `T cp lambda`, got `{line}`",
                n + 1
            )));
        }
        let mut v = [0.0; 3];
        for (slot, c) in v.iter_mut().zip(&cols) {
            *slot = c.parse().map_err(|_| {
                Error::domain(format!("property table line {}: `{c}` is not a number", n + 1))
            })?;
        }
        cp.push((v[0], v[1]));
        lambda.push((v[0], v[2]));
    }
    Ok((PropertyTable::new(cp)?, PropertyTable::new(lambda)?))
}

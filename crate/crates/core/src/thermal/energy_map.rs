use crate::error::{Error, Result};
use crate::lattice::CS2;
use crate::scalar::Real;
use crate::thermal::material::{MaterialModel, TABLE_MAX_T};
use crate::units::{LatticeScaling, Quantity};

/// Thermal state recovered from an energy density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState<T> {
    /// Temperature [K].
    pub temperature: T,
    /// Sensible part of the energy density [lattice].
    pub sensible: T,
    /// Relaxation time of the energy populations at this temperature.
    pub tau: T,
    /// Temperature lies outside the tabulated property range.
    pub clamped: bool,
}

/// Sampled monotone curve E(T) and its inverse, in lattice energy units.
///
/// Samples sit on a 1 K grid plus every table breakpoint and the solidus and
/// liquidus, so linear interpolation is exact at all kinks. Above the last
/// sample the curve continues with its final slope.
#[derive(Debug, Clone)]
pub struct EnergyTemperatureMap<T> {
    temps: Vec<T>,
    energy: Vec<T>,
    sensible: Vec<T>,
    tau: Vec<T>,
    buckets: Vec<u32>,
    bucket_scale: f64,
    table_range: (f64, f64),
    solidus: T,
    liquidus: T,
    /// Energy density per kelvin of a fully molten cell at the upper end, for extrapolation.
    top_slope: T,
}

pub fn build_energy_map<T: Real>(
    material: &MaterialModel,
    scaling: &LatticeScaling,
) -> Result<EnergyTemperatureMap<T>> {
    material.validate()?;
    let mut samples: Vec<f64> = (0..=TABLE_MAX_T as usize).map(|t| t as f64).collect();
    samples.extend(material.cp.temps());
    samples.extend(material.lambda.temps());
    samples.push(material.solidus);
    samples.push(material.liquidus);
    samples.retain(|t| (0.0..=TABLE_MAX_T).contains(t));
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let e_ref = scaling.factor(Quantity::EnergyDensity);
    let energy_f: Vec<f64> = samples.iter().map(|&t| material.energy_density(t) / e_ref).collect();
    if energy_f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("energy density is not strictly increasing in temperature"));
    }
    let sensible_f: Vec<f64> =
        samples.iter().map(|&t| material.sensible_enthalpy(t) / e_ref).collect();
    let tau_f: Vec<f64> = samples
        .iter()
        .map(|&t| {
            let (tc, _) = material.clamp_to_table(t);
            scaling.to_lattice(Quantity::Diffusivity, material.diffusivity(tc)) / CS2 + 0.5
        })
        .collect();

    let e_max = *energy_f.last().unwrap();
    let nb = samples.len();
    let bucket_scale = nb as f64 / e_max;
    let mut buckets = vec![0u32; nb + 1];
    let mut k = 0usize;
    for (b, slot) in buckets.iter_mut().enumerate() {
        let e = b as f64 / bucket_scale;
        while k + 1 < nb && energy_f[k + 1] <= e {
            k += 1;
        }
        *slot = k as u32;
    }

    let top_slope = material.rho0 * material.cp.eval(TABLE_MAX_T) / e_ref;
    let lo = material.cp.min_t().max(material.lambda.min_t());
    let hi = material.cp.max_t().min(material.lambda.max_t());
    Ok(EnergyTemperatureMap {
        temps: samples.iter().map(|&t| T::lit(t)).collect(),
        energy: energy_f.into_iter().map(T::lit).collect(),
        sensible: sensible_f.into_iter().map(T::lit).collect(),
        tau: tau_f.into_iter().map(T::lit).collect(),
        buckets,
        bucket_scale,
        table_range: (lo, hi),
        solidus: T::lit(material.solidus),
        liquidus: T::lit(material.liquidus),
        top_slope: T::lit(top_slope),
    })
}

impl<T: Real> EnergyTemperatureMap<T> {
    pub fn solidus(&self) -> T {
        self.solidus
    }

    pub fn liquidus(&self) -> T {
        self.liquidus
    }

    /// Energy density at temperature `t` [lattice].
    pub fn energy_at(&self, t: T) -> T {
        let n = self.temps.len();
        if t <= T::zero() {
            return T::zero();
        }
        if t >= self.temps[n - 1] {
            return self.energy[n - 1] + self.top_slope * (t - self.temps[n - 1]);
        }
        let k = self.temps.partition_point(|&x| x <= t) - 1;
        let s = (t - self.temps[k]) / (self.temps[k + 1] - self.temps[k]);
        self.energy[k] + s * (self.energy[k + 1] - self.energy[k])
    }

    /// Sensible energy density at temperature `t` [lattice].
    pub fn sensible_at(&self, t: T) -> T {
        self.lookup(self.energy_at(t)).sensible
    }

    #[inline]
    fn segment(&self, e: T) -> usize {
        let n = self.energy.len();
        let b = (e.as_f64() * self.bucket_scale) as usize;
        let mut k = self.buckets[b.min(self.buckets.len() - 1)] as usize;
        while k + 2 < n && self.energy[k + 1] <= e {
            k += 1;
        }
        k
    }

    /// Temperature, sensible energy and relaxation time for energy density `e`.
    #[inline]
    pub fn lookup(&self, e: T) -> ThermalState<T> {
        let n = self.energy.len();
        let (temperature, sensible, tau) = if e <= T::zero() {
            (T::zero(), T::zero(), self.tau[0])
        } else if e >= self.energy[n - 1] {
            let dt = (e - self.energy[n - 1]) / self.top_slope;
            (self.temps[n - 1] + dt, self.sensible[n - 1] + (e - self.energy[n - 1]), self.tau[n - 1])
        } else {
            let k = self.segment(e);
            let s = (e - self.energy[k]) / (self.energy[k + 1] - self.energy[k]);
            (
                self.temps[k] + s * (self.temps[k + 1] - self.temps[k]),
                self.sensible[k] + s * (self.sensible[k + 1] - self.sensible[k]),
                self.tau[k] + s * (self.tau[k + 1] - self.tau[k]),
            )
        };
        let tf = temperature.as_f64();
        ThermalState {
            temperature,
            sensible,
            tau,
            clamped: tf < self.table_range.0 || tf > self.table_range.1,
        }
    }

    pub fn temperature_at(&self, e: T) -> T {
        self.lookup(e).temperature
    }
}

//! Quality metrics of a finished run and the porous / good / uneven classification.

use std::fmt;

use crate::domain::{CellFlag, Field3D, MeasurementBox};
use crate::scalar::Real;

/// Material volume in the measurement box over the box volume.
pub fn relative_density<T: Real>(field: &Field3D<T>, mbox: &MeasurementBox) -> f64 {
    let n = mbox.cell_count();
    if n == 0 {
        return 0.0;
    }
    let g = field.grid;
    let mut sum = 0.0;
    for z in mbox.z.clone() {
        for y in mbox.y.clone() {
            for x in mbox.x.clone() {
                let i = g.idx(x, y, z);
                sum += material_fill(field, i);
            }
        }
    }
    (sum / n as f64).clamp(0.0, 1.0)
}

#[inline]
fn material_fill<T: Real>(field: &Field3D<T>, i: usize) -> f64 {
    match field.flags[i] {
        CellFlag::Interface => field.fill[i].as_f64().clamp(0.0, 1.0),
        f if f.is_material() => 1.0,
        _ => 0.0,
    }
}

/// Σ fill · dx³ over cells at or above the liquidus [m³].
pub fn melt_pool_volume<T: Real>(field: &Field3D<T>, liquidus: T, dx: f64) -> f64 {
    let cells: f64 = (0..field.grid.len())
        .filter(|&i| field.flags[i].is_material() && field.temperature[i] >= liquidus)
        .map(|i| material_fill(field, i))
        .sum();
    cells * dx * dx * dx
}

/// Highest temperature among melt-pool cells, `None` without a melt pool.
pub fn melt_pool_max_temperature<T: Real>(field: &Field3D<T>, liquidus: T) -> Option<f64> {
    (0..field.grid.len())
        .filter(|&i| field.flags[i].is_material() && field.temperature[i] >= liquidus)
        .map(|i| field.temperature[i].as_f64())
        .fold(None, |m, t| Some(m.map_or(t, |m: f64| m.max(t))))
}

/// One sample of the melt-pool time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub melt_volume: f64,
    pub max_temp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedTemperature {
    pub value: f64,
    /// No melt pool existed in any averaging window.
    pub no_melt: bool,
    /// Per-line maxima that entered the mean.
    pub lines_used: usize,
}

/// Mean over scan lines (first one excluded) of the melt-pool maximum reached
/// while that line was scanned; windows are half-open `[t0, t1)`.
///
/// Lines whose window holds no melt pool are skipped; if none remain the
/// preheat temperature is returned with `no_melt` set.
pub fn averaged_max_temp(series: &[Sample], windows: &[(f64, f64)], preheat: f64) -> AveragedTemperature {
    let maxima: Vec<f64> = windows
        .iter()
        .skip(1)
        .filter_map(|&(t0, t1)| {
            series
                .iter()
                .filter(|s| s.t >= t0 && s.t < t1)
                .filter_map(|s| s.max_temp)
                .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
        })
        .collect();
    if maxima.is_empty() {
        return AveragedTemperature { value: preheat, no_melt: true, lines_used: 0 };
    }
    AveragedTemperature {
        value: maxima.iter().sum::<f64>() / maxima.len() as f64,
        no_melt: false,
        lines_used: maxima.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub density_min: f64,
    pub temp_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { density_min: 0.995, temp_max: 7500.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Porous,
    Good,
    Uneven,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Porous => "porous",
            Class::Good => "good",
            Class::Uneven => "uneven",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label plus every violated criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub class: Class,
    pub porous: bool,
    pub uneven: bool,
}

impl Classification {
    /// `porous|uneven`, `porous`, `uneven` or empty.
    pub fn flags(&self) -> String {
        let mut v = Vec::new();
        if self.porous {
            v.push("porous");
        }
        if self.uneven {
            v.push("uneven");
        }
        v.join("|")
    }
}

/// Too hot is uneven regardless of density; otherwise too little density is porous.
pub fn classify(density: f64, avg_max_temp: f64, th: &Thresholds) -> Classification {
    let uneven = avg_max_temp > th.temp_max;
    let porous = density < th.density_min;
    let class = if uneven {
        Class::Uneven
    } else if porous {
        Class::Porous
    } else {
        Class::Good
    };
    Classification { class, porous, uneven }
}

/// Everything computed for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub relative_density: f64,
    pub averaged_max_temp: AveragedTemperature,
    pub series: Vec<Sample>,
    /// Beam energy absorbed by the material [J].
    pub deposited_energy: f64,
    pub classification: Classification,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use proptest::prelude::*;

    fn boxed(n: usize) -> (Field3D<f64>, MeasurementBox) {
        let g = Grid::new(n, n, n).unwrap();
        let f = Field3D::uniform(g, CellFlag::Gas, 1.0, 900.0);
        (f, MeasurementBox { x: 1..n - 1, y: 1..n - 1, z: 1..n - 1 })
    }

    #[test]
    fn dense_box_and_half_box() {
        let (mut f, b) = boxed(6);
        for i in 0..f.grid.len() {
            f.flags[i] = CellFlag::Solid;
        }
        assert_eq!(relative_density(&f, &b), 1.0);
        for i in 0..f.grid.len() {
            if f.grid.coords(i)[0] < 3 {
                f.flags[i] = CellFlag::Gas;
            }
        }
        assert_eq!(relative_density(&f, &b), 0.5);
    }

    #[test]
    fn melt_volume_of_one_cell() {
        let (mut f, _) = boxed(4);
        assert_eq!(melt_pool_volume(&f, 1928.0, 5e-6), 0.0);
        f.flags[5] = CellFlag::Liquid;
        f.temperature[5] = 2500.0;
        let v = melt_pool_volume(&f, 1928.0, 5e-6);
        assert!((v - 1.25e-16).abs() < 1e-30);
        assert_eq!(melt_pool_max_temperature(&f, 1928.0), Some(2500.0));
    }

    fn series(f: impl Fn(f64) -> Option<f64>, n: usize, dt: f64) -> Vec<Sample> {
        (0..n).map(|k| Sample { t: k as f64 * dt, melt_volume: 0.0, max_temp: f(k as f64 * dt) }).collect()
    }

    #[test]
    fn averaged_max_examples() {
        let w = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)];
        let s = series(|_| Some(5000.0), 301, 0.01);
        assert_eq!(averaged_max_temp(&s, &w, 923.15).value, 5000.0);
        let s = series(|t| Some(if t < 2.0 { 7000.0 } else { 8000.0 }), 301, 0.01);
        assert_eq!(averaged_max_temp(&s, &w, 923.15).value, 7500.0);
        let none = series(|_| None, 301, 0.01);
        let a = averaged_max_temp(&none, &w, 923.15);
        assert!(a.no_melt);
        assert_eq!(a.value, 923.15);
    }

    #[test]
    fn classification_examples() {
        let th = Thresholds::default();
        assert_eq!(classify(0.994, 5000.0, &th).class, Class::Porous);
        assert_eq!(classify(0.999, 5000.0, &th).class, Class::Good);
        assert_eq!(classify(0.999, 8000.0, &th).class, Class::Uneven);
        let both = classify(0.9, 8000.0, &th);
        assert_eq!(both.class, Class::Uneven);
        assert_eq!(both.flags(), "porous|uneven");
    }

    proptest! {
        #[test]
        fn sawtooth_matches_window_scan(period in 3usize..40, lines in 2usize..8, amp in 10.0f64..3000.0) {
            let n = lines * 100;
            let s: Vec<Sample> = (0..n)
                .map(|k| Sample { t: k as f64, melt_volume: 0.0, max_temp: Some(2000.0 + amp * (k % period) as f64 + k as f64) })
                .collect();
            let windows: Vec<(f64, f64)> = (0..lines).map(|l| ((l * 100) as f64, ((l + 1) * 100) as f64)).collect();
            let mut acc = 0.0;
            for l in 1..lines {
                let mut m = f64::MIN;
                for k in l * 100..l * 100 + 100 {
                    m = m.max(s[k].max_temp.unwrap());
                }
                acc += m;
            }
            let want = acc / (lines - 1) as f64;
            let got = averaged_max_temp(&s, &windows, 923.15).value;
            prop_assert!((got - want).abs() <= 1e-9 * want);
        }

        #[test]
        fn density_matches_masked_sum(fills in proptest::collection::vec(0.0f64..=1.0, 216)) {
            let (mut f, b) = boxed(6);
            for (i, &phi) in fills.iter().enumerate() {
                f.flags[i] = if phi > 0.5 { CellFlag::Interface } else { CellFlag::Gas };
                f.fill[i] = phi;
            }
            let mut want = 0.0;
            for i in 0..216 {
                if b.contains(f.grid.coords(i)) && f.flags[i] == CellFlag::Interface {
                    want += fills[i];
                }
            }
            want /= b.cell_count() as f64;
            prop_assert!((relative_density(&f, &b) - want).abs() < 1e-12);
        }
    }
}

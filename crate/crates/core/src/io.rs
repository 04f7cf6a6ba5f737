//! Output files: legacy VTK snapshots and the frozen CSV layouts.
//!
//! Column orders:
//! - time series: `t,melt_volume,max_temp` (max_temp empty without melt pool)
//! - summary: `line_energy,scan_speed,strategy,density,avg_max_temp,class`
//! - sweep rows: `line_energy,scan_speed,strategy,power,seed,density,avg_max_temp,class,flags,status,message`
//! - window: first column `line_energy`, one column per speed, cells hold the class

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::{RunMetrics, Sample};
use crate::domain::Field3D;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const SERIES_HEADER: [&str; 3] = ["t", "melt_volume", "max_temp"];
pub const SUMMARY_HEADER: [&str; 6] = ["line_energy", "scan_speed", "strategy", "density", "avg_max_temp", "class"];
pub const SWEEP_HEADER: [&str; 11] = [
    "line_energy",
    "scan_speed",
    "strategy",
    "power",
    "seed",
    "density",
    "avg_max_temp",
    "class",
    "flags",
    "status",
    "message",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::File { path: path.to_path_buf(), source })
}

fn file_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::File { path: path.to_path_buf(), source }
}

/// Legacy ASCII structured-points file with fill, temperature, flag and speed.
pub fn write_vtk<T: Real, W: Write>(field: &Field3D<T>, dx: f64, title: &str, mut w: W) -> std::io::Result<()> {
    let g = field.grid;
    let n = g.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", g.nx, g.ny, g.nz)?;
    writeln!(w, "ORIGIN {} {} {}", 0.5 * dx, 0.5 * dx, 0.5 * dx)?;
    writeln!(w, "SPACING {dx} {dx} {dx}")?;
    writeln!(w, "POINT_DATA {n}")?;
    let mut scalars = |name: &str, ty: &str, value: &dyn Fn(usize) -> String| -> std::io::Result<()> {
        writeln!(w, "SCALARS {name} {ty} 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for i in 0..n {
            writeln!(w, "{}", value(i))?;
        }
        Ok(())
    };
    scalars("fill", "double", &|i| field.fill[i].as_f64().to_string())?;
    scalars("temperature", "double", &|i| field.temperature[i].as_f64().to_string())?;
    scalars("flag", "int", &|i| field.flags[i].code().to_string())?;
    scalars("speed", "double", &|i| {
        let u = field.vel[i];
        (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt().as_f64().to_string()
    })?;
    w.flush()
}

pub fn write_vtk_file<T: Real>(field: &Field3D<T>, dx: f64, title: &str, path: &Path) -> Result<()> {
    let w = create(path)?;
    write_vtk(field, dx, title, w).map_err(file_err(path))
}

pub fn write_series<W: Write>(series: &[Sample], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(SERIES_HEADER)?;
    for s in series {
        let t = s.max_temp.map(|t| t.to_string()).unwrap_or_default();
        csv.write_record([s.t.to_string(), s.melt_volume.to_string(), t])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_series_file(series: &[Sample], path: &Path) -> Result<()> {
    write_series(series, create(path)?)
}

/// One summary line (no header), as also printed by the CLI.
pub fn summary_line(line_energy: f64, scan_speed: f64, strategy: &str, m: &RunMetrics) -> String {
    format!(
        "{line_energy},{scan_speed},{strategy},{:.6},{:.2},{}",
        m.relative_density, m.averaged_max_temp.value, m.classification.class
    )
}

pub fn write_summary_file(line: &str, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", SUMMARY_HEADER.join(",")).map_err(file_err(path))?;
    writeln!(w, "{line}").map_err(file_err(path))?;
    w.flush().map_err(file_err(path))
}

/// Outcome of one configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub line_energy: f64,
    pub scan_speed: f64,
    pub strategy: String,
    pub seed: u64,
    pub outcome: std::result::Result<RunMetrics, String>,
}

impl SweepRow {
    pub fn record(&self) -> [String; 11] {
        let power = (self.line_energy * self.scan_speed).to_string();
        let head = [self.line_energy.to_string(), self.scan_speed.to_string(), self.strategy.clone(), power];
        match &self.outcome {
            Ok(m) => {
                let [a, b, c, d] = head;
                [
                    a,
                    b,
                    c,
                    d,
                    self.seed.to_string(),
                    format!("{:.6}", m.relative_density),
                    format!("{:.2}", m.averaged_max_temp.value),
                    m.classification.class.to_string(),
                    m.classification.flags(),
                    "ok".into(),
                    String::new(),
                ]
            }
            Err(msg) => {
                let [a, b, c, d] = head;
                [a, b, c, d, self.seed.to_string(), String::new(), String::new(), String::new(), String::new(), "fault".into(), msg.clone()]
            }
        }
    }
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(SWEEP_HEADER)?;
    for r in rows {
        csv.write_record(r.record())?;
    }
    csv.flush()?;
    Ok(())
}

/// Classes pivoted to rows of line energy and columns of speed; replicates are
/// joined with `/`, faults show as `fault`.
pub fn write_window<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let key = |v: f64| v.to_bits();
    let mut energies: Vec<f64> = Vec::new();
    let mut speeds: Vec<f64> = Vec::new();
    let (mut seen_e, mut seen_v) = (BTreeSet::new(), BTreeSet::new());
    for r in rows {
        if seen_e.insert(key(r.line_energy)) {
            energies.push(r.line_energy);
        }
        if seen_v.insert(key(r.scan_speed)) {
            speeds.push(r.scan_speed);
        }
    }
    energies.sort_by(f64::total_cmp);
    speeds.sort_by(f64::total_cmp);
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["line_energy".to_string()];
    header.extend(speeds.iter().map(|v| v.to_string()));
    csv.write_record(&header)?;
    for &e in &energies {
        let mut rec = vec![e.to_string()];
        for &v in &speeds {
            let cell: Vec<String> = rows
                .iter()
                .filter(|r| r.line_energy == e && r.scan_speed == v)
                .map(|r| match &r.outcome {
                    Ok(m) => m.classification.class.to_string(),
                    Err(_) => "fault".to_string(),
                })
                .collect();
            rec.push(cell.join("/"));
        }
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_sweep_files(rows: &[SweepRow], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(file_err(dir))?;
    write_sweep(rows, create(&dir.join("sweep.csv"))?)?;
    write_window(rows, create(&dir.join("window.csv"))?)
}

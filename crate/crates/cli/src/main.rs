use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hatchlbm::beam::HatchVariant;
use hatchlbm::config::{parse_config, Preset, RunConfig};
use hatchlbm::io::SUMMARY_HEADER;
use hatchlbm::run::{load_or_generate_bed, run_single, run_sweep, SweepGrid};
use hatchlbm::{Error, Result};
use log::info;

#[derive(Parser)]
#[command(name = "hatchlbm", version, about = "Electron-beam powder-bed hatching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// `full` or `desk` (half resolution)
        #[arg(long, default_value = "full")]
        preset: String,
        #[arg(long)]
        vtk_every: Option<u64>,
        /// Output directory, overrides the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of line energies [J/m] and scan speeds [m/s].
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        energies: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        speeds: Vec<f64>,
        /// basic | widened:<pct> | halved
        #[arg(long, default_value = "basic")]
        strategy: String,
        /// Reuse one exported powder bed for every run
        #[arg(long)]
        bed: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[arg(long, default_value = "full")]
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the powder bed and write it as `x,y,z,r` CSV.
    Bed {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, preset: &str) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::File { path: path.to_path_buf(), source })?;
    Ok(parse_config(&text)?.with_preset(Preset::parse(preset)?))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, preset, vtk_every, out } => {
            let mut cfg = load(&config, &preset)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(n) = vtk_every {
                cfg.vtk_every = n;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let report = run_single(&cfg)?;
            println!("{}", SUMMARY_HEADER.join(","));
            println!("{}", report.summary);
        }
        Command::Sweep { config, energies, speeds, strategy, bed, workers, replicates, preset, out } => {
            let mut cfg = load(&config, &preset)?;
            if bed.is_some() {
                cfg.bed_file = bed;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let grid = SweepGrid { energies, speeds, variant: HatchVariant::parse(&strategy)?, replicates };
            let rows = run_sweep(&cfg, &grid, workers)?;
            let faults = rows.iter().filter(|r| r.outcome.is_err()).count();
            info!("{} runs, {faults} faults", rows.len());
            print!("{}", fs::read_to_string(cfg.output_dir.join("window.csv"))?);
        }
        Command::Bed { config, out, seed } => {
            let mut cfg = load(&config, "full")?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let bed = load_or_generate_bed(&cfg)?;
            let f = fs::File::create(&out).map_err(|source| Error::File { path: out.clone(), source })?;
            bed.write_csv(f)?;
            println!(
                "{} spheres, packing {:.4}, top {:e} m",
                bed.spheres.len(),
                bed.packing_fraction,
                bed.top()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

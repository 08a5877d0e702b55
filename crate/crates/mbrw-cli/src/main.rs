use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use mbrw_cli::config::{
    ClassifyConfig, ClassifyModeConfig, Experiment, EstimateExponentConfig, FitMomentsConfig,
    Overrides, RunConfig, SampleFieldConfig, SimulateLbmConfig, SuiteLevel,
    ValidateCovarianceConfig, ValidateSuiteConfig, CONFIG_VERSION,
};
use mbrw_cli::registry::run_experiment;

/// Simulation lab for a log-correlated Gaussian field on the torus, its
/// multiplicative chaos measure, and the associated time-changed diffusion.
#[derive(Parser)]
#[command(name = "mbrw", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fast,
    Slow,
    VeryFast,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit the covariance decomposition over a log-spaced distance grid.
    ValidateCovariance {
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a field realization to the binary layer format.
    SampleField {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        grid: usize,
        /// Truncation scale; defaults to the grid budget.
        #[arg(long)]
        w: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output field file path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the moment scaling of the chaos measure.
    FitMoments {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        replicas: usize,
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Ball centers per replica (spatial variance reduction; correlated
        /// within a replica).
        #[arg(long, default_value_t = 1)]
        centers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV path (JSON sidecar written next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the time-changed diffusion to a target time.
    SimulateLbm {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify points of a box as fast / slow / very fast.
    Classify {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        grid: usize,
        /// Points per side of the classified grid.
        #[arg(long, default_value_t = 8)]
        points: usize,
        /// Inner Monte Carlo paths per point.
        #[arg(long, default_value_t = mbrw::classify::DEFAULT_INNER_PATHS)]
        inner: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the crossing-time and measure-scaling exponents.
    EstimateExponent {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        k: u32,
        /// Comma-separated scale indices, e.g. 1,2,3.
        #[arg(long, value_delimiter = ',')]
        scales: Vec<u32>,
        #[arg(long)]
        replicas: usize,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Field replicas for the measure part (0 skips it).
        #[arg(long, default_value_t = 200)]
        measure_replicas: usize,
        #[arg(long, default_value_t = 1024)]
        measure_grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (per-scale CSVs plus report.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the validation suite.
    ValidateSuite {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (criterion CSVs plus report.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute a persisted run config.
    Run {
        /// TOML config path.
        #[arg(long)]
        config: PathBuf,
    },
}

fn build_config(cmd: Cmd) -> Result<RunConfig> {
    let (seed, threads, experiment) = match cmd {
        Cmd::ValidateCovariance {
            k,
            samples,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::ValidateCovariance(ValidateCovarianceConfig { k, samples, out }),
        ),
        Cmd::SampleField {
            k,
            grid,
            w,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::SampleField(SampleFieldConfig { k, grid, w, out }),
        ),
        Cmd::FitMoments {
            gamma,
            q,
            grid,
            replicas,
            k,
            centers,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::FitMoments(FitMomentsConfig {
                gamma,
                q,
                grid,
                replicas,
                k,
                radii: None,
                centers,
                out,
            }),
        ),
        Cmd::SimulateLbm {
            gamma,
            k,
            grid,
            t,
            replicas,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::SimulateLbm(SimulateLbmConfig {
                gamma,
                k,
                grid,
                t,
                replicas,
                clock_cap_factor: 50.0,
                out,
            }),
        ),
        Cmd::Classify {
            mode,
            k,
            r,
            gamma,
            delta,
            grid,
            points,
            inner,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::Classify(ClassifyConfig {
                mode: match mode {
                    ModeArg::Fast => ClassifyModeConfig::Fast,
                    ModeArg::Slow => ClassifyModeConfig::Slow,
                    ModeArg::VeryFast => ClassifyModeConfig::VeryFast,
                },
                k,
                r,
                gamma,
                delta,
                grid,
                points,
                inner,
                y_offset: (0.1, 0.0),
                beta_prime: 0.5,
                out,
            }),
        ),
        Cmd::EstimateExponent {
            gamma,
            k,
            scales,
            replicas,
            grid,
            measure_replicas,
            measure_grid,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::EstimateExponent(EstimateExponentConfig {
                gamma,
                k,
                scales,
                replicas,
                grid,
                measure_replicas,
                measure_grid,
                out,
            }),
        ),
        Cmd::ValidateSuite {
            level,
            seed,
            threads,
            out,
        } => (
            seed,
            threads,
            Experiment::ValidateSuite(ValidateSuiteConfig {
                level: match level {
                    LevelArg::Quick => SuiteLevel::Quick,
                    LevelArg::Full => SuiteLevel::Full,
                },
                out,
            }),
        ),
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)?;
            return RunConfig::from_toml(&text);
        }
    };
    Ok(RunConfig {
        version: CONFIG_VERSION,
        seed,
        threads,
        overrides: Overrides::default(),
        experiment,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(cli.cmd) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run_experiment(&config) {
        Ok(outcome) => {
            for path in &outcome.outputs {
                println!("wrote {}", path.display());
            }
            println!("manifest {}", outcome.manifest_path.display());
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!(
                "known experiments: {}",
                Experiment::registry().join(", ")
            );
            ExitCode::from(1)
        }
    }
}

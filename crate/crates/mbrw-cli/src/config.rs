//! Run configuration: a versioned TOML schema in which unknown keys are hard
//! errors — a silent typo in `gamma` or `k` would invalidate the science.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Current config schema version.
pub const CONFIG_VERSION: u32 = 1;

/// A fully serializable run description: the same config re-executes to
/// bit-identical outputs on the same build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Master seed; all job streams derive from it.
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Overrides for constants the theory leaves unpinned.
    #[serde(default, skip_serializing_if = "Overrides::is_default")]
    pub overrides: Overrides,
    pub experiment: Experiment,
}

/// Unpinned-constant and tolerance overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Crossing/blocking ceiling constant `c` (theory: some `c >= 2`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Slow-threshold constant `C₃`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    /// Slope tolerance used when flagging exponent reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,
}

impl Overrides {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ValidateCovariance(ValidateCovarianceConfig),
    SampleField(SampleFieldConfig),
    FitMoments(FitMomentsConfig),
    SimulateLbm(SimulateLbmConfig),
    Classify(ClassifyConfig),
    EstimateExponent(EstimateExponentConfig),
    ValidateSuite(ValidateSuiteConfig),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ValidateCovariance(_) => "validate-covariance",
            Self::SampleField(_) => "sample-field",
            Self::FitMoments(_) => "fit-moments",
            Self::SimulateLbm(_) => "simulate-lbm",
            Self::Classify(_) => "classify",
            Self::EstimateExponent(_) => "estimate-exponent",
            Self::ValidateSuite(_) => "validate-suite",
        }
    }

    /// Registry of runnable experiment names, for error messages.
    pub fn registry() -> &'static [&'static str] {
        &[
            "validate-covariance",
            "sample-field",
            "fit-moments",
            "simulate-lbm",
            "classify",
            "estimate-exponent",
            "validate-suite",
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateCovarianceConfig {
    pub k: u32,
    /// Number of log-spaced distances in the emitted CSV.
    pub samples: usize,
    /// Output CSV path.
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFieldConfig {
    pub k: u32,
    pub grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<u32>,
    /// Output binary field path.
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMomentsConfig {
    pub gamma: f64,
    pub q: f64,
    pub grid: usize,
    pub replicas: usize,
    #[serde(default = "default_k")]
    pub k: u32,
    /// Ball radii; defaults to six log-spaced values spanning the valid
    /// window `(8Δ, 1/2]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Ball centers per field replica (spatial variance reduction; samples
    /// within a replica are correlated, the replica mean stays unbiased).
    #[serde(default = "default_centers")]
    pub centers: usize,
    /// Output CSV path; a JSON sidecar lands next to it.
    pub out: PathBuf,
}

fn default_k() -> u32 {
    1
}

fn default_centers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateLbmConfig {
    pub gamma: f64,
    pub k: u32,
    pub grid: usize,
    /// Target Liouville time.
    pub t: f64,
    pub replicas: usize,
    /// Brownian clock cap as a multiple of `t`.
    #[serde(default = "default_clock_cap")]
    pub clock_cap_factor: f64,
    pub out: PathBuf,
}

fn default_clock_cap() -> f64 {
    50.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyModeConfig {
    Fast,
    Slow,
    VeryFast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub mode: ClassifyModeConfig,
    pub k: u32,
    pub r: u32,
    pub gamma: f64,
    pub delta: f64,
    pub grid: usize,
    /// Points per box side in the classified grid.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Inner Monte Carlo paths per point.
    #[serde(default = "default_inner")]
    pub inner: usize,
    /// Very-fast geometry: target offset inside the box and ball exponent.
    #[serde(default = "default_y_offset")]
    pub y_offset: (f64, f64),
    #[serde(default = "default_beta_prime")]
    pub beta_prime: f64,
    pub out: PathBuf,
}

fn default_points() -> usize {
    8
}

fn default_inner() -> usize {
    mbrw::classify::DEFAULT_INNER_PATHS
}

fn default_y_offset() -> (f64, f64) {
    (0.1, 0.0)
}

fn default_beta_prime() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateExponentConfig {
    pub gamma: f64,
    pub k: u32,
    pub scales: Vec<u32>,
    pub replicas: usize,
    pub grid: usize,
    /// Field replicas for the measure-scaling part (0 skips it).
    #[serde(default = "default_measure_replicas")]
    pub measure_replicas: usize,
    #[serde(default = "default_measure_grid")]
    pub measure_grid: usize,
    /// Output directory: per-scale CSVs plus `report.json`.
    pub out: PathBuf,
}

fn default_measure_replicas() -> usize {
    200
}

fn default_measure_grid() -> usize {
    512
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteLevel {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSuiteConfig {
    pub level: SuiteLevel,
    /// Output directory: criterion CSVs plus `report.json`.
    pub out: PathBuf,
}

impl RunConfig {
    /// Validate every precondition a run depends on, naming the violated one.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(
                "config version {} unsupported; this build speaks version {CONFIG_VERSION}",
                self.version
            );
        }
        let check_gamma = |gamma: f64| -> Result<()> {
            if !(0.0..0.5).contains(&gamma) {
                bail!("gamma must lie in the L2 phase [0, 0.5): got {gamma}");
            }
            Ok(())
        };
        let check_grid = |n: usize| -> Result<()> {
            mbrw::grid::GridSpec::new(n)
                .map(|_| ())
                .map_err(|e| anyhow::anyhow!("grid side must be a power of two >= 8: {e}"))
        };
        let check_k = |k: u32| -> Result<()> {
            if k == 0 {
                bail!("coarseness k must be a positive integer");
            }
            Ok(())
        };
        match &self.experiment {
            Experiment::ValidateCovariance(c) => {
                check_k(c.k)?;
                if c.samples == 0 {
                    bail!("samples must be positive");
                }
            }
            Experiment::SampleField(c) => {
                check_k(c.k)?;
                check_grid(c.grid)?;
                let grid = mbrw::grid::GridSpec::new(c.grid)?;
                let budget = grid.max_resolved_scale(c.k).unwrap_or(0);
                if let Some(w) = c.w {
                    if w > budget {
                        bail!(
                            "grid {} resolves scales only up to w = {budget} at k = {} \
                             (requested w = {w}); refine the grid or lower w",
                            c.grid,
                            c.k
                        );
                    }
                }
            }
            Experiment::FitMoments(c) => {
                check_gamma(c.gamma)?;
                check_k(c.k)?;
                check_grid(c.grid)?;
                if c.replicas < 200 {
                    bail!("fit-moments needs at least 200 replicas: got {}", c.replicas);
                }
            }
            Experiment::SimulateLbm(c) => {
                check_gamma(c.gamma)?;
                check_k(c.k)?;
                check_grid(c.grid)?;
                if !(c.t > 0.0) {
                    bail!("target time t must be positive");
                }
            }
            Experiment::Classify(c) => {
                check_gamma(c.gamma)?;
                check_k(c.k)?;
                check_grid(c.grid)?;
                if c.r == 0 {
                    bail!("scale index r must be >= 1");
                }
                if !(c.delta > 0.0) {
                    bail!("delta must be positive");
                }
                if c.points < 8 {
                    bail!("point grid must be at least 8 per side: got {}", c.points);
                }
            }
            Experiment::EstimateExponent(c) => {
                check_gamma(c.gamma)?;
                check_k(c.k)?;
                check_grid(c.grid)?;
                if c.scales.len() < 3 {
                    bail!("need at least 3 scales: got {:?}", c.scales);
                }
                if c.scales.iter().any(|&r| r == 0) {
                    bail!("scale indices must be >= 1");
                }
                if c.measure_replicas > 0 {
                    check_grid(c.measure_grid)?;
                    if c.measure_replicas < 200 {
                        bail!(
                            "measure_replicas must be 0 (skip) or >= 200: got {}",
                            c.measure_replicas
                        );
                    }
                }
            }
            Experiment::ValidateSuite(_) => {}
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing config")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).context("parsing config")?;
        config.validate()?;
        Ok(config)
    }
}

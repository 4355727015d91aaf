//! Run configuration: a single JSON document per run, with every field
//! overridable from the command line (flags win). Paths inside a config are
//! resolved relative to the config file's directory so runs can be committed
//! next to their data.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use christoffel::hilbert::{CompactSet, HPoint};
use christoffel::measures::MeasureSpec;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: Option<u32>,
    pub n: Option<u32>,
    pub ridge: Option<f64>,
    pub rank_tol: Option<f64>,
    /// `full` or `pseudo`.
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    /// Shortcut for an empirical measure over a points file.
    pub data: Option<String>,
    pub measure: Option<MeasureSpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Track the Christoffel value at an explicit atom along a schedule.
    Atom {
        z: Vec<f64>,
        #[serde(default)]
        schedule: Option<Vec<(u32, u32)>>,
        /// Shorthand for a `d = n` schedule.
        #[serde(default)]
        diagonal: Option<Vec<u32>>,
    },
    /// Check the growth floor of the CD polynomial outside a support set.
    Outside {
        z: Vec<f64>,
        n: u32,
        d_from: u32,
        d_to: u32,
        support: SupportSpec,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Ellipsoid { exponent: f64 },
    HilbertCube,
}

impl SupportSpec {
    pub fn build(&self) -> Result<CompactSet, String> {
        match self {
            SupportSpec::Ball { center, radius } => {
                CompactSet::ball(HPoint::new(center.clone()), *radius)
                    .map_err(|e| e.to_string())
            }
            SupportSpec::Ellipsoid { exponent } => {
                CompactSet::ellipsoid(*exponent).map_err(|e| e.to_string())
            }
            SupportSpec::HilbertCube => Ok(CompactSet::hilbert_cube()),
        }
    }
}

/// A config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn empty() -> Self {
        Self {
            config: RunConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        let base_dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

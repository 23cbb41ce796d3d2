use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tfim_front::disorder::{critical_field, CouplingKind};
use tfim_front::dynamics::DEFAULT_DT;
use tfim_front::ed::MAX_ED_SITES;
use tfim_front::profile::{DEFAULT_G_FINAL, DEFAULT_G_INITIAL};
use tfim_front::spectral::{BulkWindow, DEFAULT_EDGE_MARGIN, DEFAULT_POSITIONS_PER_SITE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SpectralScan,
    GapCollapse,
    Quench,
    Landscape,
    KzmSweep,
    OracleCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SpectralScan => "spectral-scan",
            Experiment::GapCollapse => "gap-collapse",
            Experiment::Quench => "quench",
            Experiment::Landscape => "landscape",
            Experiment::KzmSweep => "kzm-sweep",
            Experiment::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BulkRule {
    Edges,
    Critical,
}

/// Everything a run needs. Unset keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n_sites: usize,
    pub alphas: Vec<f64>,
    /// Total ramp times. Mutually exclusive with `velocities`.
    pub times: Vec<f64>,
    pub velocities: Vec<f64>,
    pub g_i: f64,
    pub g_f: f64,
    pub dt: f64,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub output: PathBuf,
    pub clean: bool,
    /// Adds homogeneous ramps of the same durations (quench and landscape).
    pub include_homogeneous: bool,
    pub fidelity: bool,
    /// Cross-check every quench against exact diagonalization (N <= 12).
    pub oracle: bool,
    pub bulk_rule: BulkRule,
    pub bulk_margin: f64,
    /// Field half-band around g_c for the critical rule.
    pub bulk_band: f64,
    pub positions_per_site: f64,
    pub write_trajectories: bool,
    pub taus: Vec<f64>,
    pub theta_min: f64,
    pub theta_max: f64,
    pub bins: usize,
    /// Sizes of uniform critical chains for the collapse prefactor fit.
    pub critical_sizes: Vec<usize>,
    pub critical_samples: usize,
    pub oracle_sizes: Vec<usize>,
    pub oracle_positions: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Quench,
            n_sites: 64,
            alphas: vec![1.0 / 32.0],
            times: vec![],
            velocities: vec![],
            g_i: DEFAULT_G_INITIAL,
            g_f: DEFAULT_G_FINAL,
            dt: DEFAULT_DT,
            n_realizations: 1,
            base_seed: 0,
            output: PathBuf::from("out"),
            clean: false,
            include_homogeneous: false,
            fidelity: true,
            oracle: false,
            bulk_rule: BulkRule::Edges,
            bulk_margin: DEFAULT_EDGE_MARGIN,
            bulk_band: 0.5,
            positions_per_site: DEFAULT_POSITIONS_PER_SITE,
            write_trajectories: true,
            taus: vec![],
            theta_min: -1.5,
            theta_max: 0.5,
            bins: 80,
            critical_sizes: vec![],
            critical_samples: 0,
            oracle_sizes: vec![2, 4, 6, 8],
            oracle_positions: 5,
        }
    }
}

/// Config problem, with the line of the offending key when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(p), Some(l)) => write!(f, "{}:{}: {}", p.display(), l, self.message),
            (Some(p), None) => write!(f, "{}: {}", p.display(), self.message),
            (None, _) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A config together with the text it came from, for line lookups.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: Option<PathBuf>,
    source: Option<String>,
    /// Keys set on the command line; they have no line in the file.
    overridden: Vec<String>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line where `key = ...` is set.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

impl LoadedConfig {
    pub fn from_str(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            file: path.map(Path::to_path_buf),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        Ok(Self {
            config,
            path: path.map(Path::to_path_buf),
            source: Some(text.to_string()),
            overridden: Vec::new(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: Some(path.to_path_buf()),
            line: None,
            message: e.to_string(),
        })?;
        Self::from_str(&text, Some(path))
    }

    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            config: RunConfig::for_experiment(experiment),
            path: None,
            source: None,
            overridden: Vec::new(),
        }
    }

    pub fn from_config(config: RunConfig) -> Self {
        Self {
            config,
            path: None,
            source: None,
            overridden: Vec::new(),
        }
    }

    pub fn mark_overridden(&mut self, key: &str) {
        self.overridden.push(key.to_string());
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        if self.overridden.iter().any(|k| k == key) {
            return ConfigError {
                file: None,
                line: None,
                message: format!("--{} (command line): {}", key.replace('_', "-"), message.into()),
            };
        }
        ConfigError {
            file: self.path.clone(),
            line: self.source.as_deref().and_then(|s| key_line(s, key)),
            message: format!("{key}: {}", message.into()),
        }
    }

    /// Checks every constraint the downstream modules impose.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.config.check().map_err(|(key, msg)| self.error(key, msg))
    }
}

type Check = Result<(), (&'static str, String)>;

fn positive_list(key: &'static str, xs: &[f64]) -> Check {
    match xs.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        Some(x) => Err((key, format!("entries must be positive and finite, found {x}"))),
        None => Ok(()),
    }
}

fn require(key: &'static str, ok: bool, msg: impl Into<String>) -> Check {
    if ok {
        Ok(())
    } else {
        Err((key, msg.into()))
    }
}

impl RunConfig {
    /// Defaults with sensible per-experiment grids.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            ..Self::default()
        };
        match experiment {
            Experiment::SpectralScan => Self {
                alphas: vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0],
                n_sites: 128,
                ..base
            },
            Experiment::GapCollapse => Self {
                n_sites: 256,
                alphas: vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 128.0],
                n_realizations: 20,
                bulk_rule: BulkRule::Critical,
                ..base
            },
            Experiment::Quench => Self {
                times: vec![1000.0],
                ..base
            },
            Experiment::Landscape => Self {
                n_sites: 32,
                alphas: (0..=6).map(|k| 2f64.powi(-k)).collect(),
                times: vec![100.0, 1000.0],
                n_realizations: 10,
                include_homogeneous: true,
                fidelity: false,
                dt: 0.05,
                ..base
            },
            Experiment::KzmSweep => Self {
                n_sites: 128,
                alphas: vec![],
                clean: true,
                taus: vec![10.0, 30.0, 100.0, 300.0],
                fidelity: false,
                dt: 0.05,
                ..base
            },
            Experiment::OracleCheck => Self {
                n_sites: 6,
                alphas: vec![0.5],
                times: vec![50.0],
                n_realizations: 20,
                dt: 0.005,
                ..base
            },
        }
    }

    pub fn kind(&self) -> CouplingKind {
        if self.clean {
            CouplingKind::Clean
        } else {
            CouplingKind::Disordered
        }
    }

    pub fn bulk_window(&self) -> BulkWindow {
        match self.bulk_rule {
            BulkRule::Edges => BulkWindow::Edges {
                margin: self.bulk_margin,
            },
            BulkRule::Critical => BulkWindow::Critical {
                margin: self.bulk_margin,
                band: self.bulk_band,
                g_c: critical_field(self.kind(), None),
            },
        }
    }

    fn check(&self) -> Check {
        require("n_sites", self.n_sites >= 2, format!("need at least 2 sites, got {}", self.n_sites))?;
        require("g_i", self.g_i.is_finite() && self.g_f.is_finite(), "fields must be finite")?;
        require("g_f", self.g_i > self.g_f, format!("g_f = {} must be below g_i = {}", self.g_f, self.g_i))?;
        require("dt", self.dt.is_finite() && self.dt > 0.0, format!("time step must be positive, got {}", self.dt))?;
        require("n_realizations", self.n_realizations >= 1, "need at least one realization")?;
        require("bulk_margin", self.bulk_margin >= 0.0, "margin must be non-negative")?;
        require("bulk_band", self.bulk_band > 0.0, "band must be positive")?;
        require(
            "positions_per_site",
            self.positions_per_site.is_finite() && self.positions_per_site > 0.0,
            "must be positive",
        )?;
        positive_list("alphas", &self.alphas)?;
        positive_list("times", &self.times)?;
        positive_list("velocities", &self.velocities)?;
        positive_list("taus", &self.taus)?;
        let front_ramps = |c: &Self| -> Check {
            require("alphas", !c.alphas.is_empty(), "at least one slope is required")?;
            require(
                "times",
                c.times.is_empty() != c.velocities.is_empty(),
                "set exactly one of `times` and `velocities`",
            )
        };
        match self.experiment {
            Experiment::SpectralScan => {
                require("alphas", !self.alphas.is_empty(), "at least one slope is required")?;
            }
            Experiment::GapCollapse => {
                require("alphas", !self.alphas.is_empty(), "at least one slope is required")?;
                require("bins", self.bins >= 1, "need at least one bin")?;
                require("theta_max", self.theta_max > self.theta_min, "theta_max must exceed theta_min")?;
                require(
                    "critical_samples",
                    self.critical_sizes.is_empty() || self.critical_samples > 0,
                    "critical_sizes needs critical_samples > 0",
                )?;
                for a in &self.alphas {
                    let p = tfim_front::profile::FrontProfile::new(self.g_i, self.g_f, *a, 1.0)
                        .map_err(|e| ("alphas", e.to_string()))?;
                    require(
                        "alphas",
                        self.bulk_window().bounds(self.n_sites, &p).is_some(),
                        format!("bulk window is empty for alpha = {a} at N = {}", self.n_sites),
                    )?;
                }
            }
            Experiment::Quench => {
                front_ramps(self)?;
                require(
                    "include_homogeneous",
                    !self.include_homogeneous || !self.times.is_empty(),
                    "homogeneous ramps need `times`",
                )?;
                require(
                    "oracle",
                    !self.oracle || self.n_sites <= MAX_ED_SITES,
                    format!("exact diagonalization is limited to N <= {MAX_ED_SITES}"),
                )?;
            }
            Experiment::Landscape => {
                require("alphas", !self.alphas.is_empty() || self.include_homogeneous, "empty grid")?;
                require("times", !self.times.is_empty(), "landscapes are indexed by ramp time")?;
                require("velocities", self.velocities.is_empty(), "landscapes take `times`, not `velocities`")?;
            }
            Experiment::KzmSweep => {
                require("taus", self.taus.len() >= 2, "need at least two quench times to fit")?;
            }
            Experiment::OracleCheck => {
                require("oracle_sizes", !self.oracle_sizes.is_empty(), "need at least one size")?;
                if let Some(n) = self.oracle_sizes.iter().find(|&&n| !(2..=MAX_ED_SITES).contains(&n)) {
                    return Err(("oracle_sizes", format!("sizes must lie in 2..={MAX_ED_SITES}, got {n}")));
                }
                require(
                    "n_sites",
                    self.n_sites <= MAX_ED_SITES,
                    format!("exact diagonalization is limited to N <= {MAX_ED_SITES}"),
                )?;
                require("oracle_positions", self.oracle_positions >= 1, "need at least one front position")?;
                front_ramps(self)?;
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for e in [
            Experiment::SpectralScan,
            Experiment::GapCollapse,
            Experiment::Quench,
            Experiment::Landscape,
            Experiment::KzmSweep,
            Experiment::OracleCheck,
        ] {
            let c = RunConfig::for_experiment(e);
            let back = LoadedConfig::from_str(&c.to_toml(), None).unwrap().config;
            assert_eq!(back, c);
        }
    }

    #[test]
    fn defaults_validate() {
        for e in [
            Experiment::SpectralScan,
            Experiment::GapCollapse,
            Experiment::Quench,
            Experiment::Landscape,
            Experiment::KzmSweep,
            Experiment::OracleCheck,
        ] {
            LoadedConfig::defaults(e).validate().unwrap();
        }
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "experiment = \"quench\"\nn_sites = 8\nbogus = 1\n";
        let err = LoadedConfig::from_str(text, Some(Path::new("a.toml"))).unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.to_string().starts_with("a.toml:3:"));
    }

    #[test]
    fn validation_errors_carry_lines() {
        let text = "experiment = \"quench\"\ntimes = [100.0]\n\ndt = -0.1\n";
        let cfg = LoadedConfig::from_str(text, Some(Path::new("b.toml"))).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("dt"));
    }

    #[test]
    fn times_and_velocities_are_exclusive() {
        let text = "experiment = \"quench\"\ntimes = [100.0]\nvelocities = [0.1]\n";
        let err = LoadedConfig::from_str(text, None).unwrap().validate().unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn oracle_size_limit() {
        let text = "experiment = \"quench\"\nn_sites = 40\ntimes = [10.0]\noracle = true\n";
        let err = LoadedConfig::from_str(text, None).unwrap().validate().unwrap_err();
        assert_eq!(err.line, Some(4));
    }
}

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use relaxfd::convergence::{Coupling, RefinementPlan};
use relaxfd::scheme::{SchemeVariant, NEWTON_DEFAULT_MAX_ITER, NEWTON_DEFAULT_TOL};
use serde::{Deserialize, Serialize};

/// A rejected configuration value.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn reject(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum VariantKind {
    Brfd,
    Mbrfd,
    BrfdSuboptimalInit,
    CrankNicolsonNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum CouplingKind {
    Proportional,
    TimeOnly,
    SpaceOnly,
}

/// Everything a solve or study needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub problem: String,
    pub mode: usize,
    pub x_a: f64,
    pub x_b: f64,
    pub t_final: f64,
    /// `J`, the interior node count (of the coarsest level for studies).
    #[serde(alias = "J")]
    pub interior: usize,
    /// `N` (of the coarsest level; unused by proportional coupling).
    #[serde(alias = "N")]
    pub steps: usize,
    pub levels: usize,
    pub coupling: CouplingKind,
    pub tau_ratio: f64,
    pub variant: VariantKind,
    pub delta: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub record_stride: usize,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            problem: "mms_exp_sine_gsin".into(),
            mode: 1,
            x_a: 0.0,
            x_b: 1.0,
            t_final: 1.0,
            interior: 19,
            steps: 20,
            levels: 4,
            coupling: CouplingKind::Proportional,
            tau_ratio: 1.0,
            variant: VariantKind::Brfd,
            delta: None,
            newton_tol: NEWTON_DEFAULT_TOL,
            newton_max_iter: NEWTON_DEFAULT_MAX_ITER,
            record_stride: 1,
            csv: None,
            json: None,
        }
    }
}

/// Flags shared by `solve` and `study`; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Problem name from the built-in catalog
    #[arg(long)]
    pub problem: Option<String>,
    /// Mode number for linear_heat_mode_k
    #[arg(long)]
    pub mode: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_final: Option<f64>,
    /// Interior node count J
    #[arg(long, short = 'J', allow_hyphen_values = true)]
    pub interior: Option<i64>,
    /// Time step count N
    #[arg(long, short = 'N', allow_hyphen_values = true)]
    pub steps: Option<i64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long = "tau-coupling", value_enum)]
    pub coupling: Option<CouplingKind>,
    /// τ / h under proportional coupling
    #[arg(long, allow_hyphen_values = true)]
    pub tau_ratio: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub newton_max_iter: Option<usize>,
    /// Record every k-th time level
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn count(field: &str, v: i64) -> Result<usize, ConfigError> {
    usize::try_from(v).map_err(|_| reject(field, format!("must be nonnegative, got {v}")))
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| reject("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| reject("config", format!("{}: {e}", path.display())))
    }

    pub fn resolve(flags: &Overrides) -> Result<Self, ConfigError> {
        let mut c = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = &flags.problem {
            c.problem = v.clone();
        }
        if let Some(v) = flags.mode {
            c.mode = v;
        }
        if let Some(v) = flags.x_a {
            c.x_a = v;
        }
        if let Some(v) = flags.x_b {
            c.x_b = v;
        }
        if let Some(v) = flags.t_final {
            c.t_final = v;
        }
        if let Some(v) = flags.interior {
            c.interior = count("interior", v)?;
        }
        if let Some(v) = flags.steps {
            c.steps = count("steps", v)?;
        }
        if let Some(v) = flags.levels {
            c.levels = v;
        }
        if let Some(v) = flags.coupling {
            c.coupling = v;
        }
        if let Some(v) = flags.tau_ratio {
            c.tau_ratio = v;
        }
        if let Some(v) = flags.variant {
            c.variant = v;
        }
        if flags.delta.is_some() {
            c.delta = flags.delta;
        }
        if let Some(v) = flags.newton_tol {
            c.newton_tol = v;
        }
        if let Some(v) = flags.newton_max_iter {
            c.newton_max_iter = v;
        }
        if let Some(v) = flags.stride {
            c.record_stride = v;
        }
        if flags.csv.is_some() {
            c.csv = flags.csv.clone();
        }
        if flags.json.is_some() {
            c.json = flags.json.clone();
        }
        Ok(c)
    }

    /// Checks the fields a single solve depends on.
    pub fn validate_solve(&self) -> Result<(), ConfigError> {
        if !(self.x_a.is_finite() && self.x_b.is_finite() && self.x_b > self.x_a) {
            return Err(reject("x_b", format!("need finite x_a < x_b, got [{}, {}]", self.x_a, self.x_b)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(reject("t_final", format!("must be positive, got {}", self.t_final)));
        }
        if self.interior == 0 {
            return Err(reject("interior", "J must be at least 1"));
        }
        if self.steps == 0 {
            return Err(reject("steps", "N must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(reject("record_stride", "must be at least 1"));
        }
        if self.mode == 0 {
            return Err(reject("mode", "must be at least 1"));
        }
        self.variant()?;
        Ok(())
    }

    pub fn validate_study(&self) -> Result<(), ConfigError> {
        self.validate_solve()?;
        if self.levels < 2 {
            return Err(reject("levels", format!("need at least 2, got {}", self.levels)));
        }
        if !(self.tau_ratio.is_finite() && self.tau_ratio > 0.0) {
            return Err(reject("tau_ratio", format!("must be positive, got {}", self.tau_ratio)));
        }
        if self.levels > 16 {
            return Err(reject("levels", "at most 16 levels are supported"));
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<SchemeVariant, ConfigError> {
        match self.variant {
            VariantKind::Brfd => Ok(SchemeVariant::Brfd),
            VariantKind::BrfdSuboptimalInit => Ok(SchemeVariant::BrfdSuboptimalInit),
            VariantKind::Mbrfd => match self.delta {
                Some(d) if d.is_finite() && d > 0.0 => Ok(SchemeVariant::Mbrfd { delta: d }),
                Some(d) => Err(reject("delta", format!("must be positive, got {d}"))),
                None => Err(reject("delta", "required by the mbrfd variant")),
            },
            VariantKind::CrankNicolsonNewton => {
                if !(self.newton_tol > 0.0) {
                    return Err(reject("newton_tol", format!("must be positive, got {}", self.newton_tol)));
                }
                if self.newton_max_iter == 0 {
                    return Err(reject("newton_max_iter", "must be at least 1"));
                }
                Ok(SchemeVariant::CrankNicolsonNewton { tol: self.newton_tol, max_iter: self.newton_max_iter })
            }
        }
    }

    pub fn plan(&self) -> RefinementPlan {
        RefinementPlan {
            x_a: self.x_a,
            x_b: self.x_b,
            t_final: self.t_final,
            base_interior: self.interior,
            base_steps: self.steps,
            levels: self.levels,
            coupling: match self.coupling {
                CouplingKind::Proportional => Coupling::Proportional { ratio: self.tau_ratio },
                CouplingKind::TimeOnly => Coupling::TimeOnly,
                CouplingKind::SpaceOnly => Coupling::SpaceOnly,
            },
        }
    }
}

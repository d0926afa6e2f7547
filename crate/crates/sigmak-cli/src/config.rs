//! Run configuration: the JSON schema, per-subcommand defaults and validation.
//!
//! Every field of the file is optional. [`RawConfig::resolve`] fills the
//! defaults of the chosen subcommand and validates the result against the
//! library preconditions, naming the offending field on failure.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sigmak::grid::StencilOrder;
use sigmak::neck::{BackgroundModel, NeckConfig};
use sigmak::solver::{Scheme, SolveConfig};
use sigmak::symfun::Dimensions;

use crate::Subcommand;

/// A configuration value that fails validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDims {
    pub n: Option<usize>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub nt: Option<usize>,
    pub nphi: Option<usize>,
    pub order: Option<StencilOrder>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModes {
    pub jmax: Option<usize>,
    /// Modes whose DtN value must reach its limit at the smallest `ε`.
    pub limit_modes: Option<Vec<usize>>,
    pub limit_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub scheme: Option<Scheme>,
    pub refine_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    #[default]
    RoundCaps,
    Cosh,
    Flat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBackground {
    pub model: Option<BackgroundKind>,
    /// Amplitude `A` of `b = A ε² cosh(2t)`; only used by the `cosh` model.
    pub amplitude: Option<f64>,
}

/// The configuration file as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dims: Option<RawDims>,
    pub eps: Option<f64>,
    pub eps_sweep: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub grid: Option<RawGrid>,
    pub modes: Option<RawModes>,
    pub solver: Option<RawSolver>,
    pub background: Option<RawBackground>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub nt: usize,
    pub nphi: usize,
    pub order: StencilOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesConfig {
    pub jmax: usize,
    pub limit_modes: Vec<usize>,
    pub limit_tol: f64,
}

/// Fully resolved configuration, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dims: Dimensions,
    pub eps: f64,
    pub eps_sweep: Vec<f64>,
    pub delta: f64,
    pub grid: GridConfig,
    pub modes: ModesConfig,
    pub solver: SolveConfig,
    pub background: BackgroundModel,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    /// Neck parameters at a given `ε`.
    pub fn neck(&self, eps: f64) -> NeckConfig {
        NeckConfig::new(self.dims, eps, self.delta, self.background)
            .expect("neck parameters are validated in resolve")
    }
}

fn default_sweep(sub: Subcommand) -> Vec<f64> {
    match sub {
        Subcommand::ErrorScaling => [1.0, 1.5, 2.0, 2.5, 3.0]
            .iter()
            .map(|e| 10f64.powf(-e))
            .collect(),
        _ => vec![1e-1, 1e-2, 1e-3, 1e-4],
    }
}

fn default_nt(sub: Subcommand) -> usize {
    match sub {
        Subcommand::DtnConverge | Subcommand::MatchDemo | Subcommand::ErrorScaling => 4001,
        _ => 2001,
    }
}

fn positive(field: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::new(
            field,
            format!("{x} must be positive and finite"),
        ))
    }
}

fn check_eps(field: &str, eps: f64) -> Result<f64, ConfigError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(eps)
    } else {
        Err(ConfigError::new(field, format!("{eps} must lie in (0, 1)")))
    }
}

impl RawConfig {
    /// Parses a JSON document; unknown or mistyped fields are config errors.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field"))
                .unwrap_or("<document>")
                .to_string();
            ConfigError::new(field, msg)
        })
    }

    /// Applies the defaults of `sub` and validates every field.
    pub fn resolve(
        &self,
        sub: Subcommand,
        out: Option<PathBuf>,
        seed: u64,
    ) -> Result<RunConfig, ConfigError> {
        let d = self.dims.clone().unwrap_or_default();
        let n = d.n.unwrap_or(8);
        let k = d.k.unwrap_or(3);
        if k == 0 {
            return Err(ConfigError::new("dims.k", "k must be at least 1"));
        }
        let dims = Dimensions::new(n, k).map_err(|e| ConfigError::new("dims", e))?;

        let eps = check_eps("eps", self.eps.unwrap_or(1e-2))?;
        let eps_sweep = self.eps_sweep.clone().unwrap_or_else(|| default_sweep(sub));
        if eps_sweep.is_empty() {
            return Err(ConfigError::new("eps_sweep", "the sweep is empty"));
        }
        for (i, &e) in eps_sweep.iter().enumerate() {
            check_eps(&format!("eps_sweep[{i}]"), e)?;
        }
        if eps_sweep.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ConfigError::new(
                "eps_sweep",
                "values must be strictly decreasing",
            ));
        }
        let delta = self.delta.unwrap_or(0.0);
        if !delta.is_finite() || !(-1.0..1.0).contains(&delta) {
            return Err(ConfigError::new(
                "delta",
                format!("{delta} must lie in (-1, 1)"),
            ));
        }

        let g = self.grid.clone().unwrap_or_default();
        let grid = GridConfig {
            nt: g.nt.unwrap_or_else(|| default_nt(sub)),
            nphi: g.nphi.unwrap_or(1),
            order: g.order.unwrap_or_default(),
        };
        if grid.nt < 11 {
            return Err(ConfigError::new(
                "grid.nt",
                format!("{} is below the minimum 11", grid.nt),
            ));
        }
        if grid.nt.is_multiple_of(2)
            && matches!(
                sub,
                Subcommand::DtnConverge | Subcommand::MatchDemo | Subcommand::All
            )
        {
            return Err(ConfigError::new(
                "grid.nt",
                "half-neck problems need an odd node count",
            ));
        }
        if grid.nphi != 1 && grid.nphi < 5 {
            return Err(ConfigError::new(
                "grid.nphi",
                "use 1 for radial runs or at least 5 angular nodes",
            ));
        }

        let m = self.modes.clone().unwrap_or_default();
        let modes = ModesConfig {
            jmax: m.jmax.unwrap_or(8),
            limit_modes: m.limit_modes.unwrap_or_else(|| vec![0, 1]),
            limit_tol: positive("modes.limit_tol", m.limit_tol.unwrap_or(1e-3))?,
        };
        if let Some(&j) = modes.limit_modes.iter().find(|&&j| j > modes.jmax) {
            return Err(ConfigError::new(
                "modes.limit_modes",
                format!("mode {j} exceeds jmax = {}", modes.jmax),
            ));
        }

        let s = self.solver.clone().unwrap_or_default();
        let solver = SolveConfig {
            scheme: s.scheme.unwrap_or(Scheme::FullNewton),
            tol: positive("solver.tol", s.tol.unwrap_or(1e-10))?,
            max_iter: s.max_iter.unwrap_or(30),
            refine_steps: s.refine_steps.unwrap_or(4),
            ..SolveConfig::default()
        };
        if solver.max_iter == 0 {
            return Err(ConfigError::new("solver.max_iter", "must be at least 1"));
        }

        let b = self.background.clone().unwrap_or_default();
        let background = match b.model.unwrap_or_default() {
            BackgroundKind::RoundCaps => BackgroundModel::RoundCaps,
            BackgroundKind::Flat => BackgroundModel::Flat,
            BackgroundKind::Cosh => {
                let amplitude = b.amplitude.unwrap_or(0.0);
                if !amplitude.is_finite() {
                    return Err(ConfigError::new("background.amplitude", "must be finite"));
                }
                BackgroundModel::CoshPerturbation { amplitude }
            }
        };
        if b.amplitude.is_some() && !matches!(background, BackgroundModel::CoshPerturbation { .. })
        {
            return Err(ConfigError::new(
                "background.amplitude",
                "only the `cosh` model takes an amplitude",
            ));
        }
        for (field, e) in std::iter::once(("eps".to_string(), eps)).chain(
            eps_sweep
                .iter()
                .enumerate()
                .map(|(i, &e)| (format!("eps_sweep[{i}]"), e)),
        ) {
            NeckConfig::new(dims, e, delta, background)
                .map_err(|err| ConfigError::new(field, err))?;
        }

        let output_dir = out
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(RunConfig {
            dims,
            eps,
            eps_sweep,
            delta,
            grid,
            modes,
            solver,
            background,
            output_dir,
            seed,
        })
    }
}

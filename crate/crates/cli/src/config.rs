//! Run configuration: defaults, JSON file, then command-line overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ou_bounds::capacity::alpha_is_typical;
use ou_bounds::mmse::DEFAULT_QUAD_ORDER;
use ou_bounds::report::default_n_grid;
use ou_bounds::{OuParams, PowerLaw};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError(format!("invalid {field}: {reason}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sigma: f64,
    pub eta: f64,
    pub t0: f64,
    pub power: PowerLaw,
    /// Power laws tabulated by `regimes`.
    pub powers: Vec<PowerLaw>,
    pub h: f64,
    pub alpha: f64,
    pub n_grid: Vec<usize>,
    pub quad_order: usize,
    pub trials: usize,
    pub seed: u64,
    pub out_path: PathBuf,
    /// Sensor count for the Monte Carlo check in `validate`.
    pub validate_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            eta: 1.0,
            t0: 1.0,
            power: PowerLaw::Constant { p_tot: 1.0 },
            powers: vec![
                PowerLaw::Constant { p_tot: 1.0 },
                PowerLaw::LinearPerNode { p_ind: 1.0 },
            ],
            h: 1.0,
            alpha: 2.0,
            n_grid: default_n_grid(),
            quad_order: DEFAULT_QUAD_ORDER,
            trials: 2000,
            seed: 42,
            out_path: PathBuf::from("bounds.csv"),
            validate_n: 64,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn ou_params(&self) -> Result<OuParams, ConfigError> {
        OuParams::new(self.sigma, self.eta, self.t0).map_err(|e| ConfigError(e.to_string()))
    }

    /// Checks everything that does not need a numeric computation. Returns
    /// warnings that should be shown but do not stop the run.
    pub fn check(&self) -> Result<Vec<String>, ConfigError> {
        self.ou_params()?;
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(bad(
                "alpha",
                format!("path-loss exponent must be positive, got {}", self.alpha),
            ));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(bad("h", format!("channel gain must be positive, got {}", self.h)));
        }
        self.power.validate().map_err(|e| bad("power", e))?;
        for pl in &self.powers {
            pl.validate().map_err(|e| bad("powers", e))?;
        }
        if self.n_grid.is_empty() {
            return Err(bad("n_grid", "must not be empty"));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 2) {
            return Err(bad("n_grid", format!("every N must be at least 2, got {n}")));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("n_grid", "must be strictly ascending"));
        }
        if self.quad_order < 2 {
            return Err(bad(
                "quad_order",
                format!("must be at least 2, got {}", self.quad_order),
            ));
        }
        if self.validate_n < 2 {
            return Err(bad(
                "validate_n",
                format!("must be at least 2, got {}", self.validate_n),
            ));
        }
        let mut warnings = Vec::new();
        if !alpha_is_typical(self.alpha) {
            warnings.push(format!("alpha = {} is outside the typical range [2, 6]", self.alpha));
        }
        Ok(warnings)
    }
}

/// Parses `constant:P`, `linear:P`, `power:C:E`, `exp-root:R` or `exp-root-power:C:R:E`.
pub fn parse_power(s: &str) -> Result<PowerLaw, String> {
    let mut parts = s.split(':');
    let form = parts.next().unwrap_or_default();
    let nums: Vec<f64> = parts
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let pl = match (form, nums.as_slice()) {
        ("constant", &[p_tot]) => PowerLaw::Constant { p_tot },
        ("linear", &[p_ind]) => PowerLaw::LinearPerNode { p_ind },
        ("power", &[coefficient, exponent]) => PowerLaw::PowerOfN { coefficient, exponent },
        ("exp-root", &[root_exponent]) => PowerLaw::ExpRootOverN { root_exponent },
        ("exp-root-power", &[coefficient, root_exponent, n_exponent]) => PowerLaw::ExpRootPower {
            coefficient,
            root_exponent,
            n_exponent,
        },
        _ => {
            return Err(format!(
                "unrecognised power law '{s}'; expected constant:P, linear:P, power:C:E, exp-root:R \
                 or exp-root-power:C:R:E"
            ))
        }
    };
    pl.validate().map_err(|e| e.to_string())?;
    Ok(pl)
}

pub fn parse_n_grid(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
        .collect()
}

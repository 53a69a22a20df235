//! JSON run configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ccdiag::digest;
use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::grid::{Grid, GridSpec};
use crate::nonlin::{AssumptionConstants, NonlinearitySpec, Regime, SamplingPlan};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub grid: GridSpec,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<AssumptionConstants>,
    #[serde(default)]
    pub sampling: SamplingPlan,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Energy level a dilation probe must get below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_power: Option<u32>,
    /// `A` in the critical-mass formula; defaults to `constants.a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

/// Which parameters a command needs checked before it starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Needs {
    Solve,
    Scan,
    Assumptions,
    Negativity,
    Subadditivity,
    Comparison,
    Continuity,
    Dilation,
    Critical,
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Stable hash of the canonical JSON, excluding the output location.
    pub fn digest(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.output_dir = None;
        digest(&copy)
    }

    pub fn functional(&self) -> Functional {
        self.functional.unwrap_or(Functional::J)
    }

    pub fn c(&self) -> Result<f64> {
        match self.c {
            Some(c) if c > 0.0 && c.is_finite() => Ok(c),
            Some(c) => bad(format!("c must be positive, got {c}")),
            None => bad("missing parameter c"),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone().unwrap_or_else(|| vec![1.0, 0.5, 0.25, 0.125])
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.fractions.clone().unwrap_or_else(|| vec![0.3, 0.5, 0.7])
    }

    /// Checks everything the command will use; returns the grid.
    pub fn validate(&self, needs: Needs) -> Result<Grid> {
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        let grid = Grid::from_spec(&self.grid).map_err(|e| Error::Config(e.to_string()))?;
        let dim = grid.dim();
        let regime = self.nonlinearity.validate(dim).map_err(|e| Error::Config(e.to_string()))?;
        self.flow.validate()?;
        self.sampling.validate()?;
        if let Some(radii) = &self.radii {
            if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                return bad("radii must be positive");
            }
        }
        if self.point_budget == Some(0) {
            return bad("point_budget must be positive");
        }
        match needs {
            Needs::Solve | Needs::Negativity | Needs::Comparison | Needs::Dilation => {
                self.c()?;
            }
            Needs::Scan => {
                let list = match &self.c_values {
                    Some(list) if !list.is_empty() => list,
                    _ => return bad("scan needs a non-empty c_values list"),
                };
                if list.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
                    return bad("c_values must be positive");
                }
                if list.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("c_values must be strictly increasing");
                }
            }
            Needs::Assumptions => {
                let constants = self
                    .constants
                    .as_ref()
                    .ok_or_else(|| Error::Config("check-assumptions needs constants".into()))?;
                constants.validate(dim, self.nonlinearity.m())?;
            }
            Needs::Subadditivity => {
                self.c()?;
                let f = self.fractions();
                if f.is_empty() || f.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                    return bad("fractions must lie in (0, 1)");
                }
            }
            Needs::Continuity => {
                let c = self.c()?;
                if let Some(d) = self.delta {
                    if !(d > 0.0 && d < 0.5 * c) {
                        return bad(format!("delta must lie in (0, c/2), got {d}"));
                    }
                }
            }
            Needs::Critical => {
                if regime != Regime::Critical {
                    return bad("critical-threshold needs a mass-critical nonlinearity");
                }
                let a = self.growth_constant.or(self.constants.as_ref().map(|k| k.a));
                match a {
                    Some(a) if a > 0.0 => {}
                    Some(a) => return bad(format!("growth constant must be positive, got {a}")),
                    None => return bad("critical-threshold needs growth_constant or constants.a"),
                }
            }
        }
        if needs == Needs::Negativity {
            let l = self.lambdas();
            if l.is_empty() || l.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return bad("lambdas must lie in (0, 1]");
            }
        }
        if matches!(needs, Needs::Dilation | Needs::Critical) {
            if let Some(b) = self.bound {
                if !(b >= 0.0 && b.is_finite()) {
                    return bad("bound must be non-negative");
                }
            }
        }
        Ok(grid)
    }
}

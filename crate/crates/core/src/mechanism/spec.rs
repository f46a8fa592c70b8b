use super::measure::{loglog_density, LevyMeasure};
use super::BranchingMechanism;
use crate::error::{Error, Result};
use crate::quadrature::QuadBudget;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// JSON form of a mechanism:
/// `{"alpha": .., "beta": .., "pi": {"kind": "stable", "gamma": ..}}`,
/// `{"kind": "atoms", "atoms": [[r, p], ..]}` or
/// `{"kind": "tabulated", "points": [[r, density], ..], "extend_to_zero": bool}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    pub pi: PiSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PiSpec {
    Stable {
        gamma: f64,
    },
    Atoms {
        atoms: Vec<(f64, f64)>,
    },
    /// Log-log interpolated density through the points; with
    /// `extend_to_zero` the first segment's power law continues down to 0.
    Tabulated {
        points: Vec<(f64, f64)>,
        #[serde(default)]
        extend_to_zero: bool,
        #[serde(default)]
        budget: Option<QuadBudget>,
    },
}

impl MechanismSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidMechanism(format!("bad mechanism JSON: {e}")))
    }

    pub fn build(&self) -> Result<BranchingMechanism> {
        let pi = match &self.pi {
            PiSpec::Stable { gamma } => LevyMeasure::stable(*gamma)?,
            PiSpec::Atoms { atoms } => LevyMeasure::atoms(atoms.clone())?,
            PiSpec::Tabulated { points, extend_to_zero, budget } => {
                let density = loglog_density(points, *extend_to_zero)?;
                let lower = if *extend_to_zero { 0.0 } else { points[0].0 };
                LevyMeasure::tabulated(density, lower, points[points.len() - 1].0, budget.unwrap_or_default())?
            }
        };
        BranchingMechanism::new(self.alpha, self.beta, pi)
    }
}

impl BranchingMechanism {
    pub fn from_json(text: &str) -> Result<Self> {
        MechanismSpec::from_json(text)?.build()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::InvalidMechanism(format!("cannot read {}: {e}", path.as_ref().display())))?;
        BranchingMechanism::from_json(&text)
    }
}

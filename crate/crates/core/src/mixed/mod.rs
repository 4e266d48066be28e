//! Random-intercept mixed models fit by EM-REML on the mixed-model
//! equations. Factors are random intercepts; nesting is realized by giving
//! nested levels globally unique labels, so the algebra is always crossed.

mod em;

pub use em::{fit, Convergence, FitOptions, MixedFit};

use crate::error::ErrorCategory;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

/// A random-effect factor. `nested_in` is a structural declaration checked
/// against the data; it does not change the fitted model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub nested_in: Option<String>,
}

impl FactorSpec {
    pub fn new(name: impl Into<String>) -> Self {
        FactorSpec {
            name: name.into(),
            nested_in: None,
        }
    }

    pub fn nested(name: impl Into<String>, parent: impl Into<String>) -> Self {
        FactorSpec {
            name: name.into(),
            nested_in: Some(parent.into()),
        }
    }
}

/// One response with its factor-level assignment. A factor absent from
/// `levels` contributes nothing to that observation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub y: f64,
    pub levels: BTreeMap<String, String>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl Observation {
    pub fn new(y: f64, levels: BTreeMap<String, String>) -> Self {
        Observation {
            y,
            levels,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum MixedError {
    #[error("duplicate factor '{name}'")]
    DuplicateFactor { name: String },
    #[error("factor '{name}' is nested in unknown factor '{parent}'")]
    UnknownParent { name: String, parent: String },
    #[error("nesting cycle through factor '{name}'")]
    NestingCycle { name: String },
    #[error("factor '{name}' level '{level}' appears under parents '{a}' and '{b}'; nested levels must be globally unique")]
    NestedLevelClash {
        name: String,
        level: String,
        a: String,
        b: String,
    },
    #[error("need at least 2 observations, got {n}")]
    TooFewObservations { n: usize },
    #[error("Singular: mixed-model equations are not positive definite")]
    Singular,
    #[error("NotConverged: EM stopped after {iterations} iterations with relative change {rel_change:.3e}")]
    NotConverged { iterations: u32, rel_change: f64 },
}

impl MixedError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            MixedError::DuplicateFactor { .. }
            | MixedError::UnknownParent { .. }
            | MixedError::NestingCycle { .. } => ErrorCategory::Usage,
            MixedError::NestedLevelClash { .. } | MixedError::TooFewObservations { .. } => {
                ErrorCategory::Data
            }
            MixedError::Singular | MixedError::NotConverged { .. } => ErrorCategory::Numerical,
        }
    }
}

/// Structural validation: unique names, known parents, no cycles.
pub fn validate_factors(factors: &[FactorSpec]) -> Result<(), MixedError> {
    let mut names = BTreeSet::new();
    for f in factors {
        if !names.insert(f.name.as_str()) {
            return Err(MixedError::DuplicateFactor {
                name: f.name.clone(),
            });
        }
    }
    let parent: BTreeMap<&str, &str> = factors
        .iter()
        .filter_map(|f| f.nested_in.as_deref().map(|p| (f.name.as_str(), p)))
        .collect();
    for (name, p) in &parent {
        if !names.contains(p) {
            return Err(MixedError::UnknownParent {
                name: name.to_string(),
                parent: p.to_string(),
            });
        }
    }
    for f in factors {
        let mut seen = BTreeSet::new();
        let mut cur = f.name.as_str();
        while let Some(&p) = parent.get(cur) {
            if !seen.insert(p) {
                return Err(MixedError::NestingCycle {
                    name: f.name.clone(),
                });
            }
            cur = p;
        }
    }
    Ok(())
}

/// Data-level nesting check: each nested level must map to a single parent
/// level across the dataset.
pub fn check_nesting(
    factors: &[FactorSpec],
    observations: &[Observation],
) -> Result<(), MixedError> {
    for f in factors {
        let Some(parent) = &f.nested_in else {
            continue;
        };
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for o in observations {
            let (Some(level), Some(p)) = (o.levels.get(&f.name), o.levels.get(parent)) else {
                continue;
            };
            match seen.get(level.as_str()) {
                None => {
                    seen.insert(level, p);
                }
                Some(&prev) if prev != p.as_str() => {
                    return Err(MixedError::NestedLevelClash {
                        name: f.name.clone(),
                        level: level.clone(),
                        a: prev.to_string(),
                        b: p.clone(),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Linear predictor at a level assignment: intercept plus the BLUPs of any
/// matching levels; unknown or missing levels contribute zero.
pub fn predict_linear(fit: &MixedFit, levels: &BTreeMap<String, String>) -> f64 {
    let mut out = fit.intercept;
    for (factor, level) in levels {
        if let Some(blups) = fit.blups.get(factor) {
            if let Some(u) = blups.get(level) {
                out += u;
            }
        }
    }
    out
}

/// Split a unit of credit between two variance components. When both are
/// zero the split is undefined and reported as an even one with the
/// degenerate flag set.
pub fn variance_ratio(a: f64, b: f64) -> (f64, bool) {
    if a <= 0.0 && b <= 0.0 {
        (0.5, true)
    } else {
        (a / (a + b), false)
    }
}

pub fn save_fit(path: &Path, fit: &MixedFit) -> crate::error::Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| crate::error::Error::io(path.display().to_string(), e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), fit)?;
    Ok(())
}

pub fn load_fit(path: &Path) -> crate::error::Result<MixedFit> {
    let file = std::fs::File::open(path)
        .map_err(|e| crate::error::Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_duplicates_unknown_parents_and_cycles() {
        let dup = [FactorSpec::new("a"), FactorSpec::new("a")];
        assert!(matches!(
            validate_factors(&dup),
            Err(MixedError::DuplicateFactor { .. })
        ));
        let orphan = [FactorSpec::nested("a", "ghost")];
        assert!(matches!(
            validate_factors(&orphan),
            Err(MixedError::UnknownParent { .. })
        ));
        let cycle = [FactorSpec::nested("a", "b"), FactorSpec::nested("b", "a")];
        assert!(matches!(
            validate_factors(&cycle),
            Err(MixedError::NestingCycle { .. })
        ));
        let ok = [FactorSpec::new("conf"), FactorSpec::nested("team", "conf")];
        assert!(validate_factors(&ok).is_ok());
    }

    #[test]
    fn nested_level_reused_across_parents_is_rejected() {
        let factors = [FactorSpec::new("conf"), FactorSpec::nested("team", "conf")];
        let mk = |team: &str, conf: &str| {
            Observation::new(
                0.0,
                BTreeMap::from([
                    ("team".to_string(), team.to_string()),
                    ("conf".to_string(), conf.to_string()),
                ]),
            )
        };
        let good = vec![mk("acc/louisville", "acc"), mk("b12/texas", "b12")];
        assert!(check_nesting(&factors, &good).is_ok());
        let bad = vec![mk("tigers", "acc"), mk("tigers", "b12")];
        assert!(matches!(
            check_nesting(&factors, &bad),
            Err(MixedError::NestedLevelClash { .. })
        ));
    }

    #[test]
    fn variance_ratio_handles_degenerate_split() {
        assert_eq!(variance_ratio(3.0, 1.0), (0.75, false));
        assert_eq!(variance_ratio(0.0, 0.0), (0.5, true));
        assert_eq!(variance_ratio(2.0, 0.0), (1.0, false));
    }
}

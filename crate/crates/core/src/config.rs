//! Run configuration: one JSON file describes the grid, the exponents, the
//! truncation level, the seed and the verification suite.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::lab::{lookup, CheckParams, ExponentSet, Exponents, GridSpec, Knobs};

/// Test-family size used when the config does not set one.
pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpSpec {
    pub v_max: i32,
}

/// Atom orders for `decompose`; missing entries take the smallest admissible value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<i32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for reports, relative to the working directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// One suite entry. Every field except `id` overrides the run-level value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub exponents: ExponentSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub knobs: Knobs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Vec<i32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub exponents: ExponentSet,
    pub lp: LpSpec,
    #[serde(default)]
    pub suite: Vec<SuiteEntry>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Levels for the drift test of measured checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Vec<i32>>,
    #[serde(default)]
    pub atoms: AtomSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Unknown check ids and levels beyond the grid's guard are rejected.
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?.check_v_max(self.lp.v_max)?;
        for e in &self.suite {
            lookup(&e.id)?;
            let grid = e.grid.unwrap_or(self.grid).build()?;
            grid.check_v_max(e.v_max.unwrap_or(self.lp.v_max))?;
            for &v in e.stability.as_ref().or(self.stability.as_ref()).into_iter().flatten() {
                grid.check_v_max(v)?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (sorted keys, defaults filled in).
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    /// Run-level exponents sampled on the run grid.
    pub fn exponents(&self) -> Result<Exponents> {
        self.exponents.resolve(self.grid.build()?)
    }

    /// `(id, params)` for every suite entry, overrides applied.
    pub fn entries(&self) -> Vec<(String, CheckParams)> {
        self.suite
            .iter()
            .map(|e| {
                let params = CheckParams {
                    grid: e.grid.unwrap_or(self.grid),
                    exponents: self.exponents.merged(&e.exponents),
                    v_max: e.v_max.unwrap_or(self.lp.v_max),
                    samples: e.samples.unwrap_or(self.samples),
                    seed: self.seed,
                    knobs: e.knobs.clone(),
                    stability: e.stability.clone().or_else(|| self.stability.clone()),
                };
                (e.id.clone(), params)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    const BASE: &str = r#"{ "grid": { "dim": 1, "half_width": 4.0, "points_per_axis": 256 },
        "lp": { "v_max": 4 }, "seed": 5,
        "suite": [ { "id": "hardy" }, { "id": "sharp", "exponents": { "tau": { "kind": "constant", "value": 0.75 } }, "v_max": 3 } ] }"#;

    #[test]
    fn parses_and_applies_overrides() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.samples, DEFAULT_SAMPLES);
        let e = c.entries();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].1.v_max, 4);
        assert_eq!(e[1].1.v_max, 3);
        assert!(e[1].1.exponents.tau.is_some() && e[0].1.exponents.tau.is_none());
        assert_eq!(e[1].1.seed, 5);
    }

    #[test]
    fn digest_ignores_layout() {
        let a = RunConfig::from_json(BASE).unwrap();
        let reformatted = serde_json::to_string_pretty(&serde_json::from_str::<serde_json::Value>(BASE).unwrap()).unwrap();
        let b = RunConfig::from_json(&reformatted).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let mut c = a.clone();
        c.seed = 6;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(RunConfig::from_json(&BASE.replace("\"hardy\"", "\"nope\"")), Err(Error::UnknownCheck(_))));
        assert!(RunConfig::from_json(&BASE.replace("\"v_max\": 4", "\"v_max\": 40")).is_err());
        assert!(RunConfig::from_json(&BASE.replace("\"seed\"", "\"sead\"")).is_err());
    }
}

//! Experiment configuration: an optional JSON file merged under CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// All knobs any command understands. Unknown keys are rejected; individual
/// commands validate what they actually need. A seed is mandatory for
/// every randomized command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub k: Option<f64>,
    pub goal: Option<f64>,
    pub max_steps: Option<usize>,
    pub max_nodes: Option<usize>,
    pub patience: Option<usize>,
    pub check_interval: Option<usize>,
    pub grid_steps: Option<usize>,
    pub trials: Option<usize>,
    pub tasks: Option<usize>,
    pub inputs: Option<usize>,
    pub stream_len: Option<usize>,
    pub steps_per_phase: Option<usize>,
    pub seeds: Option<usize>,
    pub upstream_depth: Option<u32>,
    pub closed_world: Option<bool>,
    pub refine_mode: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    /// File config with CLI overrides layered on top.
    pub fn merged_under(mut self, overrides: &ExperimentConfig) -> Self {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if overrides.$field.is_some() { self.$field = overrides.$field.clone(); })*
            };
        }
        take!(
            seed, out, gamma, k, goal, max_steps, max_nodes, patience, check_interval, grid_steps,
            trials, tasks, inputs, stream_len, steps_per_phase, seeds, upstream_depth, closed_world,
            refine_mode
        );
        self
    }

    pub fn require_seed(&self) -> Result<u64, HarnessError> {
        self.seed.ok_or_else(|| HarnessError::Config("a seed is required (--seed or config)".into()))
    }

    pub fn growth_config(&self, seed: u64) -> evodev_core::growth::GrowthConfig {
        let mut g = evodev_core::growth::GrowthConfig::default();
        g.seed = seed;
        if let Some(v) = self.gamma {
            g.learning_rate = v;
        }
        if let Some(v) = self.k {
            g.sharpness = v;
        }
        if let Some(v) = self.goal {
            g.goal = v;
        }
        if let Some(v) = self.max_steps {
            g.max_steps = v;
        }
        if let Some(v) = self.max_nodes {
            g.max_nodes = v;
        }
        if let Some(v) = self.patience {
            g.patience = v;
        }
        if let Some(v) = self.check_interval {
            g.check_interval = v;
        }
        g
    }

    pub fn csv_config(&self) -> Result<evodev_core::csv::CsvConfig, HarnessError> {
        let mut c = evodev_core::csv::CsvConfig::default();
        if let Some(v) = self.upstream_depth {
            c.upstream_depth = v;
        }
        if let Some(v) = self.closed_world {
            c.closed_world = v;
        }
        if let Some(mode) = &self.refine_mode {
            c.refine_mode = match mode.as_str() {
                "discard" => evodev_core::csv::RefineMode::Discard,
                "archive" => evodev_core::csv::RefineMode::Archive,
                other => {
                    return Err(HarnessError::Config(format!("unknown refine mode {other:?}")))
                }
            };
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"seed": 1, "sneed": 2}"#);
        assert!(err.is_err());
    }

    #[test]
    fn cli_overrides_file_values() {
        let file: ExperimentConfig = serde_json::from_str(r#"{"seed": 1, "gamma": 0.2}"#).unwrap();
        let cli = ExperimentConfig { seed: Some(9), ..Default::default() };
        let merged = file.merged_under(&cli);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.gamma, Some(0.2));
    }
}

//! Growth engine: adaptive-potential accounting and the two neutral
//! generative processes.
//!
//! A parameter's *immediate* adaptive potential is its net (mean) gradient
//! over the batch; its *total* adaptive potential is the sum of absolute
//! per-sample gradients. A parameter stuck with an exhausted immediate AP
//! but live total AP marks a statistical trade-off: per-sample pressures
//! that cancel on average. The engine relieves those spots by generating
//! zero-weight in-edges and by converting edges into modulatory nodes,
//! both of which leave every network output unchanged at the moment they
//! are applied.

mod ap;
mod covariance;
mod ops;
mod train;

pub use ap::{compute_ap, ApEntry, ApKey, ApReport, ApThresholds, ApTracker};
pub use covariance::{covariance_termination_check, CovarianceReport};
pub use ops::{
    detect_growth_sites, edge_node_conversion, generate_edge, select_edge_source, Conversion, GrowthSites,
};
pub use train::{train_d1, GrowthEvent, GrowthEventKind, Termination, TrainingLog};

use thiserror::Error;

use crate::graph::{GraphError, NodeId, Term};

#[derive(Debug, Error, PartialEq)]
pub enum GrowthError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no gradient rows given")]
    EmptyRows,
    #[error("no legal edge source for {node} term {term}", term = .term.index())]
    NoCandidates { node: NodeId, term: Term },
    #[error("candidate set of {size} nodes exceeds the enumeration cap {cap}")]
    CandidateSetTooLarge { size: usize, cap: usize },
    #[error("invalid growth config: {0}")]
    InvalidConfig(String),
}

/// Hyperparameters of the growth-aware training loop.
#[derive(Debug, Clone)]
pub struct GrowthConfig {
    /// Gradient-descent learning rate.
    pub learning_rate: f64,
    /// Sharpness K of the modulation transfer function (used when the
    /// harness constructs networks; trained networks carry their own K).
    pub sharpness: f64,
    /// Immediate-AP exhaustion threshold, relative to the running RMS of
    /// that entry's historical immediate APs.
    pub imm_eps_rel: f64,
    /// Floor for the running RMS, so a parameter with no history yet still
    /// gets a positive threshold.
    pub imm_rms_floor: f64,
    /// Absolute total-AP significance threshold.
    pub total_eps: f64,
    /// Consecutive qualifying scans required before a site is acted on.
    pub patience: usize,
    /// Steps between growth scans.
    pub check_interval: usize,
    /// Node-count cap; conversions stop when it would be exceeded.
    pub max_nodes: usize,
    /// Step cap.
    pub max_steps: usize,
    /// Training halts once the mean cost drops below this.
    pub goal: f64,
    /// Seed for tie-breaking among equally scored edge sources.
    pub seed: u64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            learning_rate: 0.05,
            sharpness: 1.0,
            imm_eps_rel: 1e-4,
            imm_rms_floor: 1e-8,
            total_eps: 1e-6,
            patience: 5,
            check_interval: 25,
            max_nodes: 64,
            max_steps: 200_000,
            goal: 1e-3,
            seed: 0,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<(), GrowthError> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("sharpness", self.sharpness),
            ("imm_eps_rel", self.imm_eps_rel),
            ("imm_rms_floor", self.imm_rms_floor),
            ("total_eps", self.total_eps),
            ("goal", self.goal),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GrowthError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.patience == 0 {
            return Err(GrowthError::InvalidConfig("patience must be at least 1".into()));
        }
        if self.check_interval == 0 {
            return Err(GrowthError::InvalidConfig("check_interval must be at least 1".into()));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> ApThresholds {
        ApThresholds {
            imm_eps_rel: self.imm_eps_rel,
            imm_rms_floor: self.imm_rms_floor,
            total_eps: self.total_eps,
        }
    }
}

//! Termination condition check.
//!
//! Growth keeps relieving a stalled edge as long as any multiplicative
//! combination of candidate source states covaries with the edge's
//! per-sample gradients. This check enumerates the power set of the
//! candidate pool and reports the largest covariance magnitude; training
//! may only settle while unconverged if every subset's covariance is zero.

use crate::graph::{batch_gradients, Dataset, EdgeId, GraphError, Network, NodeId, NodeKind, ParamId};

use super::GrowthError;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub edge: EdgeId,
    pub candidates: Vec<NodeId>,
    pub max_abs_covariance: f64,
    /// Subset of candidates attaining the maximum.
    pub witness: Vec<NodeId>,
    pub satisfied: bool,
    pub tolerance: f64,
}

/// Candidate pool for relieving edge `(i, j)`: inputs and hidden nodes
/// that could legally feed the modulation term of a node spliced onto the
/// edge, i.e. everything not downstream of the edge's target.
pub fn termination_candidates(network: &Network, edge: EdgeId) -> Result<Vec<NodeId>, GraphError> {
    let target = network.edge(edge)?.target;
    let mut downstream = std::collections::BTreeSet::new();
    let mut stack = vec![target];
    while let Some(n) = stack.pop() {
        if !downstream.insert(n) {
            continue;
        }
        for &e in network.out_edge_ids(n) {
            stack.push(network.edge(e)?.target);
        }
    }
    Ok(network
        .nodes()
        .filter(|n| !matches!(n.kind, NodeKind::Output { .. }))
        .map(|n| n.id)
        .filter(|n| !downstream.contains(n))
        .collect())
}

/// Covariance of `prod_{x in A} a^m_x` with the edge's per-sample gradients
/// for every subset `A` of the candidate pool.
pub fn covariance_termination_check(
    network: &Network,
    dataset: &Dataset,
    edge: EdgeId,
    tolerance: f64,
    candidate_cap: usize,
) -> Result<CovarianceReport, GrowthError> {
    let candidates = termination_candidates(network, edge)?;
    if candidates.len() > candidate_cap {
        return Err(GrowthError::CandidateSetTooLarge { size: candidates.len(), cap: candidate_cap });
    }
    let batch = batch_gradients(network, dataset)?;
    let grads: Vec<f64> = batch.update_rows(ParamId::Weight(edge));
    let m = grads.len();
    let mean_grad = grads.iter().sum::<f64>() / m as f64;

    // States of each candidate per sample.
    let states: Vec<Vec<f64>> = candidates
        .iter()
        .map(|c| batch.traces.iter().map(|t| t.states[c]).collect())
        .collect();

    let n = candidates.len();
    // products[mask][sample]; each mask extends the mask without its lowest
    // set bit by one factor.
    let mut products: Vec<Vec<f64>> = Vec::with_capacity(1 << n);
    products.push(vec![1.0; m]);
    let mut max_abs = 0.0;
    let mut witness = Vec::new();
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let row: Vec<f64> = products[rest]
            .iter()
            .zip(&states[low])
            .map(|(p, s)| p * s)
            .collect();
        let mean_p = row.iter().sum::<f64>() / m as f64;
        let mean_pg = row.iter().zip(&grads).map(|(p, g)| p * g).sum::<f64>() / m as f64;
        let cov = mean_pg - mean_p * mean_grad;
        if cov.abs() > max_abs {
            max_abs = cov.abs();
            witness = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| candidates[b]).collect();
        }
        products.push(row);
    }

    Ok(CovarianceReport {
        edge,
        candidates,
        max_abs_covariance: max_abs,
        witness,
        satisfied: max_abs < tolerance,
        tolerance,
    })
}

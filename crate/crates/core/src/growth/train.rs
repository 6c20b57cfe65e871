//! Growth-aware training loop.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{
    apply_update, batch_gradients, forward, Dataset, EdgeId, GraphError, Network, NodeId, ParamId, Term,
};

use super::ops::{detect_growth_sites, edge_node_conversion, generate_edge, select_source_from_deltas};
use super::{ApReport, ApTracker, GrowthConfig, GrowthError};

#[derive(Debug, Clone, PartialEq)]
pub enum GrowthEventKind {
    EdgeGenerated { edge: EdgeId, target: NodeId, term: Term, source: NodeId, score: f64 },
    EdgeConverted { old_edge: EdgeId, new_node: NodeId, in_edge: EdgeId, out_edge: EdgeId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEvent {
    pub step: usize,
    pub kind: GrowthEventKind,
    /// Max absolute output deviation across the dataset, measured across
    /// this single structural change.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// Cost dropped below the goal.
    Converged { step: usize },
    /// Every total AP is exhausted: no adaptive potential anywhere.
    TotalExhaustion { step: usize },
    MaxSteps,
    /// A conversion was required but the node cap would be exceeded.
    MaxNodes { step: usize },
    /// Cost became non-finite.
    Diverged { step: usize },
}

#[derive(Debug, Clone)]
pub struct TrainingLog {
    /// Mean cost per step, recorded before that step's update.
    pub costs: Vec<f64>,
    pub events: Vec<GrowthEvent>,
    pub final_report: Option<ApReport>,
    pub termination: Termination,
    pub final_cost: f64,
}

impl TrainingLog {
    pub fn enc_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, GrowthEventKind::EdgeConverted { .. }))
            .count()
    }

    pub fn edge_generation_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, GrowthEventKind::EdgeGenerated { .. }))
            .count()
    }

    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Converged { .. })
    }
}

fn outputs_matrix(network: &Network, dataset: &Dataset) -> Result<Vec<Vec<f64>>, GraphError> {
    dataset.iter().map(|s| Ok(forward(network, s)?.outputs(network))).collect()
}

fn max_residual(before: &[Vec<f64>], after: &[Vec<f64>]) -> f64 {
    before
        .iter()
        .flatten()
        .zip(after.iter().flatten())
        .map(|(b, a)| (b - a).abs())
        .fold(0.0, f64::max)
}

/// Full-batch gradient descent with growth scans every `check_interval`
/// steps. A scan acts only on sites whose exhaustion held for `patience`
/// consecutive scans: first every qualifying edge is converted (ascending
/// id), each conversion immediately wiring the best source into the fresh
/// node's modulation term, then every qualifying node term gains one
/// zero-weight in-edge. Each structural event records its output residual.
/// Halts on goal cost, total-AP exhaustion, divergence, or resource caps.
pub fn train_d1(
    network: &mut Network,
    dataset: &Dataset,
    config: &GrowthConfig,
) -> Result<TrainingLog, GrowthError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(GrowthError::Graph(GraphError::EmptyDataset));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tracker = ApTracker::new(config.thresholds());
    let mut window: VecDeque<ApReport> = VecDeque::new();
    let mut costs = Vec::new();
    let mut events: Vec<GrowthEvent> = Vec::new();
    let mut final_report = None;
    let mut termination = Termination::MaxSteps;

    for step in 0..config.max_steps {
        let batch = batch_gradients(network, dataset)?;
        costs.push(batch.mean_cost);
        if !batch.mean_cost.is_finite() {
            termination = Termination::Diverged { step };
            break;
        }
        if batch.mean_cost < config.goal {
            termination = Termination::Converged { step };
            break;
        }
        tracker.record(&batch);

        if step > 0 && step % config.check_interval == 0 {
            let report = tracker.report(&batch)?;
            window.push_back(report);
            if window.len() > config.patience {
                window.pop_front();
            }
            if window.len() == config.patience {
                if window.iter().all(|r| r.all_total_exhausted()) {
                    final_report = window.back().cloned();
                    termination = Termination::TotalExhaustion { step };
                    break;
                }
                let reports: Vec<ApReport> = window.iter().cloned().collect();
                let sites = detect_growth_sites(&reports, network);
                if !sites.is_empty() {
                    if network.num_nodes() + sites.conversions.len() > config.max_nodes {
                        final_report = window.back().cloned();
                        termination = Termination::MaxNodes { step };
                        break;
                    }
                    let mut mutated = false;
                    let mut reference = outputs_matrix(network, dataset)?;

                    for &edge in &sites.conversions {
                        let transferred = batch.update_rows(ParamId::Weight(edge));
                        let conv = edge_node_conversion(network, edge)?;
                        let current = outputs_matrix(network, dataset)?;
                        events.push(GrowthEvent {
                            step,
                            kind: GrowthEventKind::EdgeConverted {
                                old_edge: edge,
                                new_node: conv.node,
                                in_edge: conv.in_edge,
                                out_edge: conv.out_edge,
                            },
                            residual: max_residual(&reference, &current),
                        });
                        reference = current;
                        mutated = true;

                        // The fresh node's modulation term inherits the
                        // converted edge's per-sample gradients; wire in the
                        // source that exploits them best.
                        match select_source_from_deltas(
                            network,
                            conv.node,
                            Term::Modulation,
                            &transferred,
                            &batch.traces,
                            &mut rng,
                        ) {
                            Ok((source, score)) => {
                                let new_edge = generate_edge(network, conv.node, Term::Modulation, source)?;
                                let current = outputs_matrix(network, dataset)?;
                                events.push(GrowthEvent {
                                    step,
                                    kind: GrowthEventKind::EdgeGenerated {
                                        edge: new_edge,
                                        target: conv.node,
                                        term: Term::Modulation,
                                        source,
                                        score,
                                    },
                                    residual: max_residual(&reference, &current),
                                });
                                reference = current;
                            }
                            Err(GrowthError::NoCandidates { .. }) => {}
                            Err(e) => return Err(e),
                        }
                    }

                    for &(node, term) in &sites.edge_targets {
                        let deltas = batch.delta_rows(node, term);
                        if deltas.len() != batch.traces.len() {
                            continue;
                        }
                        match select_source_from_deltas(network, node, term, &deltas, &batch.traces, &mut rng) {
                            Ok((source, score)) => {
                                let new_edge = generate_edge(network, node, term, source)?;
                                let current = outputs_matrix(network, dataset)?;
                                events.push(GrowthEvent {
                                    step,
                                    kind: GrowthEventKind::EdgeGenerated {
                                        edge: new_edge,
                                        target: node,
                                        term,
                                        source,
                                        score,
                                    },
                                    residual: max_residual(&reference, &current),
                                });
                                reference = current;
                                mutated = true;
                            }
                            Err(GrowthError::NoCandidates { .. }) => {}
                            Err(e) => return Err(e),
                        }
                    }

                    if mutated {
                        // The batch no longer matches the structure; restart
                        // the exhaustion window and skip this step's update.
                        window.clear();
                        continue;
                    }
                }
            }
        }

        apply_update(network, &batch.mean_updates(), config.learning_rate)?;
    }

    let final_cost = crate::graph::cost(network, dataset)?.0;
    if final_report.is_none() {
        let batch = batch_gradients(network, dataset)?;
        final_report = Some(tracker.report(&batch)?);
    }
    Ok(TrainingLog { costs, events, final_report, termination, final_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Activation;
    use crate::graph::Sample;

    fn signed_xor() -> Dataset {
        vec![
            Sample::new(vec![-1.0, -1.0], vec![-1.0]),
            Sample::new(vec![-1.0, 1.0], vec![1.0]),
            Sample::new(vec![1.0, -1.0], vec![1.0]),
            Sample::new(vec![1.0, 1.0], vec![-1.0]),
        ]
    }

    #[test]
    fn already_optimal_network_halts_immediately() {
        let mut net = Network::new(1, 1, Activation::Identity, 1.0);
        net.add_edge(net.inputs()[0], net.outputs()[0], Term::Signal, 1.0).unwrap();
        let data = vec![Sample::new(vec![0.5], vec![0.5])];
        let log = train_d1(&mut net, &data, &GrowthConfig::default()).unwrap();
        assert_eq!(log.termination, Termination::Converged { step: 0 });
        assert!(log.events.is_empty());
    }

    #[test]
    fn linearly_separable_task_needs_no_conversion() {
        // Signed AND is separable; plain descent suffices.
        let mut net = Network::new(2, 1, Activation::Tanh, 1.0);
        let y = net.outputs()[0];
        net.add_edge(net.inputs()[0], y, Term::Signal, 0.1).unwrap();
        net.add_edge(net.inputs()[1], y, Term::Signal, 0.1).unwrap();
        let data = vec![
            Sample::new(vec![-1.0, -1.0], vec![-1.0]),
            Sample::new(vec![-1.0, 1.0], vec![-1.0]),
            Sample::new(vec![1.0, -1.0], vec![-1.0]),
            Sample::new(vec![1.0, 1.0], vec![1.0]),
        ];
        let mut config = GrowthConfig::default();
        config.goal = 1e-2;
        let log = train_d1(&mut net, &data, &config).unwrap();
        assert!(log.converged(), "termination: {:?}", log.termination);
        assert_eq!(log.enc_count(), 0);
    }

    #[test]
    fn signed_xor_grows_to_solution() {
        let mut net = Network::new(2, 1, Activation::Tanh, 1.0);
        let config = GrowthConfig { seed: 7, ..GrowthConfig::default() };
        let log = train_d1(&mut net, &signed_xor(), &config).unwrap();
        assert!(log.converged(), "termination: {:?} final cost {}", log.termination, log.final_cost);
        assert!(log.final_cost < 1e-3);
        assert!(log.enc_count() >= 1, "expected at least one conversion: {:?}", log.events);
        for event in &log.events {
            assert!(event.residual <= 1e-9, "growth was not neutral: {event:?}");
        }
        // Outputs carry the right signs on all four samples.
        for sample in &signed_xor() {
            let out = forward(&net, sample).unwrap().outputs(&net)[0];
            assert_eq!(out.signum(), sample.targets[0].signum());
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let mut net = Network::new(1, 1, Activation::Identity, 1.0);
        net.add_edge(net.inputs()[0], net.outputs()[0], Term::Signal, 0.0).unwrap();
        let data = vec![Sample::new(vec![1.0], vec![5.0])];
        // A huge learning rate on identity regression oscillates to infinity.
        let config = GrowthConfig { learning_rate: 1e6, max_steps: 500, ..GrowthConfig::default() };
        let log = train_d1(&mut net, &data, &config).unwrap();
        assert!(matches!(log.termination, Termination::Diverged { .. }), "{:?}", log.termination);
    }
}

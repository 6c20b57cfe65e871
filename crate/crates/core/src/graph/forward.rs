//! Forward evaluation and cost.

use std::collections::BTreeMap;

use super::{modulation, Dataset, GraphError, Network, NodeId, NodeKind, Sample};

/// Per-node states and pre-activation inputs for one sample. The trace
/// carries the network revision it was computed against so that gradient
/// passes can reject traces invalidated by a mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub(crate) revision: u64,
    /// Node state `a_i`.
    pub states: BTreeMap<NodeId, f64>,
    /// Activation input per term. Standard and output nodes use index 0;
    /// input nodes have no entry.
    pub pre_activations: BTreeMap<NodeId, [f64; 2]>,
}

impl ForwardTrace {
    pub fn state(&self, node: NodeId) -> Option<f64> {
        self.states.get(&node).copied()
    }

    /// Output states in declaration order.
    pub fn outputs(&self, network: &Network) -> Vec<f64> {
        network.outputs().iter().map(|o| self.states[o]).collect()
    }
}

/// Evaluate the network on one sample in topological order.
///
/// Standard and output nodes compute `f(sum w a + b)`. Modulatory nodes
/// multiply a linear signal term by the modulation transfer of their
/// second term; with an empty modulation term and zero bias the factor is
/// exactly 1.
pub fn forward(network: &Network, sample: &Sample) -> Result<ForwardTrace, GraphError> {
    if sample.inputs.len() != network.inputs().len() {
        return Err(GraphError::ArityMismatch {
            what: "input",
            got: sample.inputs.len(),
            expected: network.inputs().len(),
        });
    }
    let mut states = BTreeMap::new();
    let mut pre_activations = BTreeMap::new();
    let input_values: BTreeMap<NodeId, f64> =
        network.inputs().iter().copied().zip(sample.inputs.iter().copied()).collect();

    for &id in network.topo_order() {
        let node = network.node(id)?;
        let state = match &node.kind {
            NodeKind::Input => input_values[&id],
            NodeKind::Output { activation, bias } | NodeKind::Standard { activation, bias } => {
                let mut z = *bias;
                for e in network.in_edge_ids(id, super::Term::Signal) {
                    let edge = network.edge(*e)?;
                    z += edge.weight * states[&edge.source];
                }
                pre_activations.insert(id, [z, 0.0]);
                activation.apply(z)
            }
            NodeKind::Modulatory { term_biases } => {
                let mut z = [term_biases[0], term_biases[1]];
                for (term_idx, z_term) in z.iter_mut().enumerate() {
                    let term = super::Term::from_index(term_idx as u8).unwrap();
                    for e in network.in_edge_ids(id, term) {
                        let edge = network.edge(*e)?;
                        *z_term += edge.weight * states[&edge.source];
                    }
                }
                pre_activations.insert(id, z);
                z[0] * modulation(network.sharpness(), z[1])
            }
        };
        states.insert(id, state);
    }

    Ok(ForwardTrace { revision: network.revision(), states, pre_activations })
}

/// Squared-error cost: per-sample cost is the sum of squared output errors,
/// the total is the mean over the dataset.
pub fn cost(network: &Network, dataset: &Dataset) -> Result<(f64, Vec<f64>), GraphError> {
    if dataset.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let mut per_sample = Vec::with_capacity(dataset.len());
    for sample in dataset {
        if sample.targets.len() != network.outputs().len() {
            return Err(GraphError::ArityMismatch {
                what: "target",
                got: sample.targets.len(),
                expected: network.outputs().len(),
            });
        }
        let trace = forward(network, sample)?;
        let c: f64 = network
            .outputs()
            .iter()
            .zip(&sample.targets)
            .map(|(o, t)| {
                let d = trace.states[o] - t;
                d * d
            })
            .sum();
        per_sample.push(c);
    }
    let total = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok((total, per_sample))
}

//! Per-sample reverse-mode gradients.
//!
//! Every learnable parameter gets its exact chain-rule gradient; these are
//! what finite differences verify and what plain gradient descent applies.
//! Modulation terms additionally carry a *regulatory* gradient channel:
//! the activation-input gradient reported for term 1 of a modulatory node
//! is the sum of the node's out-edge weight gradients,
//! `delta~_1 = a_x * sum_e dC/dz_(target(e),term(e))`,
//! which at the moment of edge-node conversion equals the converted edge's
//! per-sample weight gradients exactly. The chain-rule value
//! `dC/dz_1 = dC/da * z_0 * sigma_1'` vanishes whenever the outbound
//! weight is zero — precisely the situation conversion is applied in — so
//! it cannot carry the transferred adaptation signal; the regulatory
//! channel is what the growth machinery accounts and what modulation-term
//! weights descend.

use std::collections::BTreeMap;

use super::forward::{forward, ForwardTrace};
use super::{
    modulation, modulation_derivative, Dataset, EdgeId, GraphError, Network, NodeId, NodeKind, Sample, Term,
};

/// Identity of a learnable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamId {
    /// An edge weight.
    Weight(EdgeId),
    /// The bias of a standard or output node.
    Bias(NodeId),
    /// The modulation-term bias of a modulatory node.
    TermBias(NodeId),
}

/// Gradients of one sample's cost with respect to the current parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrace {
    pub(crate) revision: u64,
    /// Per-sample cost `C^m`.
    pub cost: f64,
    /// Exact chain-rule gradient per learnable parameter.
    pub params: BTreeMap<ParamId, f64>,
    /// Regulatory-channel gradients, present only for weights of edges
    /// feeding a modulation term.
    pub regulatory: BTreeMap<ParamId, f64>,
    /// Reported activation-input gradients per node and term. Modulation
    /// terms carry the regulatory value; all other terms the chain-rule one.
    pub deltas: BTreeMap<(NodeId, Term), f64>,
}

impl GradientTrace {
    /// The gradient the training loop descends: the regulatory channel for
    /// modulation-term weights, the chain-rule gradient everywhere else.
    pub fn update_gradient(&self, param: ParamId) -> f64 {
        self.regulatory.get(&param).copied().unwrap_or_else(|| self.params[&param])
    }

    pub fn delta(&self, node: NodeId, term: Term) -> Option<f64> {
        self.deltas.get(&(node, term)).copied()
    }
}

/// Reverse-mode gradients for one sample. The forward trace must have been
/// produced by this exact network revision.
pub fn backward(network: &Network, trace: &ForwardTrace, sample: &Sample) -> Result<GradientTrace, GraphError> {
    if trace.revision != network.revision() {
        return Err(GraphError::StaleTrace { trace: trace.revision, network: network.revision() });
    }
    if sample.targets.len() != network.outputs().len() {
        return Err(GraphError::ArityMismatch {
            what: "target",
            got: sample.targets.len(),
            expected: network.outputs().len(),
        });
    }

    let mut cost = 0.0;
    // dC/da accumulators, chain-rule channel.
    let mut acc: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (o, t) in network.outputs().iter().zip(&sample.targets) {
        let err = trace.states[o] - t;
        cost += err * err;
        *acc.entry(*o).or_insert(0.0) += 2.0 * err;
    }

    let mut params = BTreeMap::new();
    let mut regulatory = BTreeMap::new();
    let mut deltas: BTreeMap<(NodeId, Term), f64> = BTreeMap::new();

    for &id in network.topo_order().iter().rev() {
        let node = network.node(id)?;
        let upstream = acc.get(&id).copied().unwrap_or(0.0);
        match &node.kind {
            NodeKind::Input => {}
            NodeKind::Output { activation, bias: _ } | NodeKind::Standard { activation, bias: _ } => {
                let a = trace.states[&id];
                let delta = upstream * activation.derivative_from_output(a);
                params.insert(ParamId::Bias(id), delta);
                deltas.insert((id, Term::Signal), delta);
                for e in network.in_edge_ids(id, Term::Signal) {
                    let edge = network.edge(*e)?;
                    params.insert(ParamId::Weight(*e), delta * trace.states[&edge.source]);
                    *acc.entry(edge.source).or_insert(0.0) += delta * edge.weight;
                }
            }
            NodeKind::Modulatory { .. } => {
                let z = trace.pre_activations[&id];
                let mod_value = modulation(network.sharpness(), z[1]);
                let delta_signal = upstream * mod_value;
                let delta_mod_true = upstream * z[0] * modulation_derivative(network.sharpness(), mod_value);

                // Regulatory channel: the node's out-edge weight gradients,
                // composed through already-computed downstream deltas.
                let a = trace.states[&id];
                let mut downstream = 0.0;
                for e in network.out_edge_ids(id) {
                    let edge = network.edge(*e)?;
                    downstream += deltas[&(edge.target, edge.term)];
                }
                let delta_mod_reg = a * downstream;

                params.insert(ParamId::TermBias(id), delta_mod_true);
                deltas.insert((id, Term::Signal), delta_signal);
                deltas.insert((id, Term::Modulation), delta_mod_reg);

                for e in network.in_edge_ids(id, Term::Signal) {
                    let edge = network.edge(*e)?;
                    params.insert(ParamId::Weight(*e), delta_signal * trace.states[&edge.source]);
                    *acc.entry(edge.source).or_insert(0.0) += delta_signal * edge.weight;
                }
                for e in network.in_edge_ids(id, Term::Modulation) {
                    let edge = network.edge(*e)?;
                    params.insert(ParamId::Weight(*e), delta_mod_true * trace.states[&edge.source]);
                    regulatory.insert(ParamId::Weight(*e), delta_mod_reg * trace.states[&edge.source]);
                    *acc.entry(edge.source).or_insert(0.0) += delta_mod_true * edge.weight;
                }
            }
        }
    }

    Ok(GradientTrace { revision: network.revision(), cost, params, regulatory, deltas })
}

/// Per-sample gradient rows plus their forward traces and mean cost.
/// Rows are retained because adaptive-potential accounting and source
/// selection both need per-sample values, not just the mean.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub rows: Vec<GradientTrace>,
    pub traces: Vec<ForwardTrace>,
    pub mean_cost: f64,
}

impl BatchGradients {
    pub fn per_sample_costs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cost).collect()
    }

    /// Mean chain-rule gradient per parameter.
    pub fn mean_params(&self) -> BTreeMap<ParamId, f64> {
        self.mean_of(|row, p| row.params[p])
    }

    /// Mean update-channel gradient per parameter (regulatory for
    /// modulation-term weights, chain rule otherwise).
    pub fn mean_updates(&self) -> BTreeMap<ParamId, f64> {
        self.mean_of(|row, p| row.update_gradient(*p))
    }

    fn mean_of(&self, value: impl Fn(&GradientTrace, &ParamId) -> f64) -> BTreeMap<ParamId, f64> {
        let n = self.rows.len() as f64;
        let mut mean = BTreeMap::new();
        if let Some(first) = self.rows.first() {
            for p in first.params.keys() {
                let sum: f64 = self.rows.iter().map(|row| value(row, p)).sum();
                mean.insert(*p, sum / n);
            }
        }
        mean
    }

    /// Per-sample update-channel gradients of one parameter.
    pub fn update_rows(&self, param: ParamId) -> Vec<f64> {
        self.rows.iter().map(|r| r.update_gradient(param)).collect()
    }

    /// Per-sample reported deltas of one node term.
    pub fn delta_rows(&self, node: NodeId, term: Term) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.delta(node, term)).collect()
    }
}

/// Forward + backward over the whole dataset.
pub fn batch_gradients(network: &Network, dataset: &Dataset) -> Result<BatchGradients, GraphError> {
    if dataset.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let mut rows = Vec::with_capacity(dataset.len());
    let mut traces = Vec::with_capacity(dataset.len());
    for sample in dataset {
        let trace = forward(network, sample)?;
        rows.push(backward(network, &trace, sample)?);
        traces.push(trace);
    }
    let mean_cost = rows.iter().map(|r| r.cost).sum::<f64>() / rows.len() as f64;
    Ok(BatchGradients { rows, traces, mean_cost })
}

/// Gradient-descent step `alpha <- alpha - lr * g` for every entry of the
/// gradient map. Fixed signal-term biases have no parameter id, so they
/// cannot be touched.
pub fn apply_update(
    network: &mut Network,
    gradient: &BTreeMap<ParamId, f64>,
    learning_rate: f64,
) -> Result<(), GraphError> {
    for (&param, &g) in gradient {
        let value = network.param(param)?;
        network.set_param(param, value - learning_rate * g)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cost, Activation};

    fn single_edge_net(weight: f64) -> (Network, NodeId, EdgeId) {
        let mut net = Network::new(1, 1, Activation::Tanh, 1.0);
        let x = net.inputs()[0];
        let y = net.outputs()[0];
        let e = net.add_edge(x, y, Term::Signal, weight).unwrap();
        (net, y, e)
    }

    #[test]
    fn zero_error_gives_zero_weight_gradient() {
        let (net, _, e) = single_edge_net(0.0);
        let sample = Sample::new(vec![1.0], vec![0.0]);
        let trace = forward(&net, &sample).unwrap();
        let grads = backward(&net, &trace, &sample).unwrap();
        assert_eq!(grads.params[&ParamId::Weight(e)], 0.0);
    }

    #[test]
    fn single_edge_gradient_matches_closed_form() {
        let (net, _, e) = single_edge_net(0.5);
        let sample = Sample::new(vec![1.0], vec![1.0]);
        let trace = forward(&net, &sample).unwrap();
        let grads = backward(&net, &trace, &sample).unwrap();
        let a = 0.5f64.tanh();
        let expected = 2.0 * (a - 1.0) * (1.0 - a * a);
        assert!((grads.params[&ParamId::Weight(e)] - expected).abs() < 1e-12);
        // Frozen value from central finite differences at h = 1e-6.
        assert!((grads.params[&ParamId::Weight(e)] - (-0.8460)).abs() < 1e-4);
    }

    #[test]
    fn stale_trace_is_rejected() {
        let (mut net, _, e) = single_edge_net(0.5);
        let sample = Sample::new(vec![1.0], vec![1.0]);
        let trace = forward(&net, &sample).unwrap();
        net.set_weight(e, 0.25).unwrap();
        assert!(matches!(
            backward(&net, &trace, &sample),
            Err(GraphError::StaleTrace { .. })
        ));
    }

    #[test]
    fn batch_mean_cancels_opposing_gradients() {
        let (net, _, e) = single_edge_net(0.0);
        // tanh(0) = 0 against a +1 target on inputs of opposite sign: the
        // per-sample weight gradients are -+2 but the mean is exactly zero.
        let data = vec![
            Sample::new(vec![-1.0], vec![1.0]),
            Sample::new(vec![1.0], vec![1.0]),
        ];
        let batch = batch_gradients(&net, &data).unwrap();
        let rows = batch.update_rows(ParamId::Weight(e));
        assert!(rows.iter().all(|g| g.abs() > 1.0));
        assert_eq!(batch.mean_params()[&ParamId::Weight(e)], 0.0);
    }

    #[test]
    fn single_sample_mean_is_that_sample() {
        let (net, _, e) = single_edge_net(0.3);
        let data = vec![Sample::new(vec![1.0], vec![0.5])];
        let batch = batch_gradients(&net, &data).unwrap();
        assert_eq!(batch.mean_params()[&ParamId::Weight(e)], batch.rows[0].params[&ParamId::Weight(e)]);
    }

    #[test]
    fn apply_update_moves_against_gradient() {
        let (mut net, _, e) = single_edge_net(1.0);
        let mut g = BTreeMap::new();
        g.insert(ParamId::Weight(e), 2.0);
        apply_update(&mut net, &g, 0.1).unwrap();
        assert!((net.weight(e).unwrap() - 0.8).abs() < 1e-15);
        // A zero gradient leaves values untouched.
        g.insert(ParamId::Weight(e), 0.0);
        apply_update(&mut net, &g, 0.1).unwrap();
        assert!((net.weight(e).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn repeated_updates_shrink_regression_cost() {
        let mut net = Network::new(1, 1, Activation::Identity, 1.0);
        let x = net.inputs()[0];
        let y = net.outputs()[0];
        net.add_edge(x, y, Term::Signal, 0.0).unwrap();
        let data = vec![
            Sample::new(vec![1.0], vec![2.0]),
            Sample::new(vec![-1.0], vec![-2.0]),
            Sample::new(vec![0.5], vec![1.0]),
        ];
        let mut last = f64::INFINITY;
        for _ in 0..200 {
            let batch = batch_gradients(&net, &data).unwrap();
            assert!(batch.mean_cost <= last + 1e-12, "cost increased: {last} -> {}", batch.mean_cost);
            last = batch.mean_cost;
            apply_update(&mut net, &batch.mean_updates(), 0.05).unwrap();
        }
        assert!(cost(&net, &data).unwrap().0 < 1e-6);
        assert!(net.param(ParamId::Bias(y)).unwrap().abs() < 1e-2);
    }

    #[test]
    fn modulation_term_delta_is_the_out_edge_gradient_sum() {
        // x -> m (signal, w=1), m -> y (w=0.7): the reported modulation
        // delta must equal 0.7's weight gradient dC/dw = delta_y * a_m.
        let mut net = Network::new(1, 1, Activation::Tanh, 1.0);
        let x = net.inputs()[0];
        let y = net.outputs()[0];
        let m = net.add_modulatory_node();
        net.add_edge(x, m, Term::Signal, 1.0).unwrap();
        let out = net.add_edge(m, y, Term::Signal, 0.7).unwrap();
        let sample = Sample::new(vec![0.8], vec![-0.5]);
        let trace = forward(&net, &sample).unwrap();
        let grads = backward(&net, &trace, &sample).unwrap();
        let expected = grads.params[&ParamId::Weight(out)];
        assert!((grads.delta(m, Term::Modulation).unwrap() - expected).abs() < 1e-15);
    }
}

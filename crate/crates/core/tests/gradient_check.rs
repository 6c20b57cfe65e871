//! Numerical gradient check: reverse-mode parameter gradients against
//! central finite differences on randomized grown networks.

use evodev_core::graph::{
    batch_gradients, cost, Activation, Dataset, Network, NodeId, ParamId, Sample, Term,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-6;

/// Random DAG with standard and modulatory hidden nodes and bounded
/// weights, plus a matching dataset.
fn random_network(rng: &mut ChaCha8Rng) -> (Network, Dataset) {
    let n_inputs = rng.gen_range(1..=4);
    let n_outputs = rng.gen_range(1..=2);
    let sharpness = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
    let mut net = Network::new(n_inputs, n_outputs, Activation::Tanh, sharpness);

    let mut hidden: Vec<NodeId> = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        hidden.push(net.add_standard_node(Activation::Tanh, rng.gen_range(-0.5..0.5)));
    }
    for _ in 0..rng.gen_range(1..4) {
        hidden.push(net.add_modulatory_node());
    }

    let sources: Vec<NodeId> = net.inputs().iter().copied().chain(hidden.iter().copied()).collect();
    let targets: Vec<NodeId> = hidden.iter().copied().chain(net.outputs().iter().copied()).collect();
    for _ in 0..rng.gen_range(6..16) {
        let s = sources[rng.gen_range(0..sources.len())];
        let t = targets[rng.gen_range(0..targets.len())];
        let term = if rng.gen_bool(0.3) { Term::Modulation } else { Term::Signal };
        let weight = rng.gen_range(-1.5..1.5);
        let _ = net.add_edge(s, t, term, weight);
    }
    for &m in &hidden {
        if let Ok(v) = net.param(ParamId::TermBias(m)) {
            let _ = v;
            net.set_param(ParamId::TermBias(m), rng.gen_range(-0.8..0.8)).unwrap();
        }
    }

    let data = (0..rng.gen_range(2..6))
        .map(|_| {
            Sample::new(
                (0..n_inputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..n_outputs).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    (net, data)
}

/// Central finite difference of the mean dataset cost for one parameter.
fn finite_difference(net: &mut Network, data: &Dataset, param: ParamId) -> f64 {
    let original = net.param(param).unwrap();
    net.set_param(param, original + FD_STEP).unwrap();
    let plus = cost(net, data).unwrap().0;
    net.set_param(param, original - FD_STEP).unwrap();
    let minus = cost(net, data).unwrap().0;
    net.set_param(param, original).unwrap();
    (plus - minus) / (2.0 * FD_STEP)
}

fn within_tolerance(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-8 || diff <= 1e-6 * analytic.abs().max(numeric.abs())
}

#[test]
fn every_parameter_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d2b);
    let mut checked_params = 0;
    for case in 0..60 {
        let (mut net, data) = random_network(&mut rng);
        let mean = batch_gradients(&net, &data).unwrap().mean_params();
        for (&param, &g) in &mean {
            let fd = finite_difference(&mut net, &data, param);
            assert!(
                within_tolerance(g, fd),
                "case {case}: {param:?} analytic {g} vs finite difference {fd}"
            );
            checked_params += 1;
        }
    }
    assert!(checked_params > 300, "generator produced too few parameters: {checked_params}");
}

#[test]
fn per_sample_gradients_match_finite_differences() {
    // Same oracle on single-sample datasets so the per-sample rows are
    // checked directly, not just their mean.
    let mut rng = ChaCha8Rng::seed_from_u64(0x51ee);
    for case in 0..20 {
        let (mut net, data) = random_network(&mut rng);
        let single = vec![data[0].clone()];
        let batch = batch_gradients(&net, &single).unwrap();
        for (&param, &g) in &batch.rows[0].params {
            let fd = finite_difference(&mut net, &single, param);
            assert!(
                within_tolerance(g, fd),
                "case {case}: {param:?} analytic {g} vs finite difference {fd}"
            );
        }
    }
}

#[test]
fn traces_are_bit_identical_across_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xded0);
    let (net, data) = random_network(&mut rng);
    let a = batch_gradients(&net, &data).unwrap();
    let b = batch_gradients(&net, &data).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.cost.to_bits(), rb.cost.to_bits());
        for (pa, pb) in ra.params.iter().zip(&rb.params) {
            assert_eq!(pa.0, pb.0);
            assert_eq!(pa.1.to_bits(), pb.1.to_bits());
        }
    }
    for (ta, tb) in a.traces.iter().zip(&b.traces) {
        for (sa, sb) in ta.states.iter().zip(&tb.states) {
            assert_eq!(sa.1.to_bits(), sb.1.to_bits());
        }
    }
}

#[test]
fn forward_matches_an_independent_expression_evaluator() {
    // Recursive memoized evaluation straight from the node equations, an
    // independent path from the library's topological loop.
    use std::collections::BTreeMap;

    fn eval(
        net: &Network,
        node: NodeId,
        sample: &Sample,
        memo: &mut BTreeMap<NodeId, f64>,
    ) -> f64 {
        if let Some(&v) = memo.get(&node) {
            return v;
        }
        let value = {
            let idx = net.inputs().iter().position(|&n| n == node);
            if let Some(i) = idx {
                sample.inputs[i]
            } else {
                let mut z = [0.0f64, 0.0];
                for term in [Term::Signal, Term::Modulation] {
                    for &e in net.in_edge_ids(node, term) {
                        let edge = net.edge(e).unwrap();
                        z[term.index()] += edge.weight * eval(net, edge.source, sample, memo);
                    }
                }
                match &net.node(node).unwrap().kind {
                    evodev_core::graph::NodeKind::Output { activation, bias }
                    | evodev_core::graph::NodeKind::Standard { activation, bias } => {
                        activation.apply(z[0] + bias)
                    }
                    evodev_core::graph::NodeKind::Modulatory { term_biases } => {
                        let m = 4.0 / (1.0 + (-net.sharpness() * (z[1] + term_biases[1])).exp()) - 1.0;
                        (z[0] + term_biases[0]) * m
                    }
                    evodev_core::graph::NodeKind::Input => unreachable!(),
                }
            }
        };
        memo.insert(node, value);
        value
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xace5);
    for _ in 0..10 {
        let (net, data) = random_network(&mut rng);
        for sample in &data {
            let trace = evodev_core::graph::forward(&net, sample).unwrap();
            for node in net.nodes() {
                let mut memo = BTreeMap::new();
                let expected = eval(&net, node.id, sample, &mut memo);
                let got = trace.states[&node.id];
                assert!(
                    (expected - got).abs() < 1e-12,
                    "node {} expected {expected} got {got}",
                    node.id
                );
            }
        }
    }
}

//! Network JSON round-trip.
//!
//! Layout:
//!
//! ```json
//! {
//!   "K": 1.0,
//!   "inputs": [0, 1],
//!   "outputs": [2],
//!   "nodes": [
//!     {"id": 0, "kind": "input"},
//!     {"id": 2, "kind": "output", "activation": "tanh", "bias": 0.0},
//!     {"id": 3, "kind": "modulatory", "term_biases": [0.0, -0.4]}
//!   ],
//!   "edges": [{"id": 0, "source": 0, "target": 3, "term": 0, "weight": 1.0}]
//! }
//! ```
//!
//! Field order is irrelevant; unknown fields are rejected.

use serde::{Deserialize, Serialize};

use super::{Activation, Edge, EdgeId, GraphError, Network, Node, NodeId, NodeKind, Term};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    #[serde(rename = "K")]
    k: f64,
    inputs: Vec<u64>,
    outputs: Vec<u64>,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: u64,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    activation: Option<Activation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    term_biases: Option<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: u64,
    source: u64,
    target: u64,
    term: u8,
    weight: f64,
}

fn node_to_doc(node: &Node) -> NodeDoc {
    let (activation, bias, term_biases) = match node.kind {
        NodeKind::Input => (None, None, None),
        NodeKind::Output { activation, bias } | NodeKind::Standard { activation, bias } => {
            (Some(activation), Some(bias), None)
        }
        NodeKind::Modulatory { term_biases } => (None, None, Some(term_biases)),
    };
    NodeDoc { id: node.id.0, kind: node.kind.name().to_string(), activation, bias, term_biases }
}

fn doc_to_node(doc: &NodeDoc) -> Result<Node, GraphError> {
    let id = NodeId(doc.id);
    let invalid = |msg: String| GraphError::InvalidDocument(msg);
    let kind = match doc.kind.as_str() {
        "input" => {
            if doc.activation.is_some() || doc.bias.is_some() || doc.term_biases.is_some() {
                return Err(invalid(format!("input node {id} carries payload fields")));
            }
            NodeKind::Input
        }
        "output" | "standard" => {
            let activation = doc
                .activation
                .ok_or_else(|| invalid(format!("node {id} is missing an activation")))?;
            let bias = doc.bias.ok_or_else(|| invalid(format!("node {id} is missing a bias")))?;
            if doc.term_biases.is_some() {
                return Err(invalid(format!("node {id} carries term_biases")));
            }
            if doc.kind == "output" {
                NodeKind::Output { activation, bias }
            } else {
                NodeKind::Standard { activation, bias }
            }
        }
        "modulatory" => {
            let term_biases = doc
                .term_biases
                .ok_or_else(|| invalid(format!("node {id} is missing term_biases")))?;
            if doc.activation.is_some() || doc.bias.is_some() {
                return Err(invalid(format!("node {id} carries standard-node fields")));
            }
            NodeKind::Modulatory { term_biases }
        }
        other => return Err(invalid(format!("unknown node kind {other:?}"))),
    };
    Ok(Node { id, kind })
}

/// Serialize a network to pretty-printed JSON.
pub fn to_json(network: &Network) -> String {
    let doc = NetworkDoc {
        k: network.sharpness(),
        inputs: network.inputs().iter().map(|n| n.0).collect(),
        outputs: network.outputs().iter().map(|n| n.0).collect(),
        nodes: network.nodes().map(node_to_doc).collect(),
        edges: network
            .edges()
            .map(|e| EdgeDoc {
                id: e.id.0,
                source: e.source.0,
                target: e.target.0,
                term: e.term.index() as u8,
                weight: e.weight,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("network document serialization cannot fail")
}

/// Parse and validate a network document.
pub fn from_json(text: &str) -> Result<Network, GraphError> {
    let doc: NetworkDoc =
        serde_json::from_str(text).map_err(|e| GraphError::InvalidDocument(e.to_string()))?;
    let nodes = doc.nodes.iter().map(doc_to_node).collect::<Result<Vec<_>, _>>()?;
    let edges = doc
        .edges
        .iter()
        .map(|e| {
            let term = Term::from_index(e.term)
                .ok_or_else(|| GraphError::InvalidDocument(format!("edge {} has term {}", e.id, e.term)))?;
            Ok(Edge {
                id: EdgeId(e.id),
                source: NodeId(e.source),
                target: NodeId(e.target),
                term,
                weight: e.weight,
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;
    Network::from_parts(
        doc.k,
        doc.inputs.into_iter().map(NodeId).collect(),
        doc.outputs.into_iter().map(NodeId).collect(),
        nodes,
        edges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Activation;

    #[test]
    fn empty_network_round_trips() {
        let net = Network::new(2, 1, Activation::Tanh, 1.5);
        let back = from_json(&to_json(&net)).unwrap();
        assert!(net.structurally_equal(&back));
    }

    #[test]
    fn grown_network_round_trips() {
        let mut net = Network::new(2, 1, Activation::Tanh, 1.0);
        let (x0, x1) = (net.inputs()[0], net.inputs()[1]);
        let y = net.outputs()[0];
        let e = net.add_edge(x1, y, Term::Signal, 0.25).unwrap();
        let (m, _, _) = net.replace_edge_with_path(e).unwrap();
        net.add_edge(x0, m, Term::Modulation, -0.7).unwrap();
        net.set_param(super::super::ParamId::TermBias(m), 0.3).unwrap();
        let back = from_json(&to_json(&net)).unwrap();
        assert!(net.structurally_equal(&back));
    }

    #[test]
    fn dangling_edge_is_rejected() {
        let text = r#"{
            "K": 1.0,
            "inputs": [0],
            "outputs": [1],
            "nodes": [
                {"id": 0, "kind": "input"},
                {"id": 1, "kind": "output", "activation": "tanh", "bias": 0.0}
            ],
            "edges": [{"id": 0, "source": 0, "target": 9, "term": 0, "weight": 1.0}]
        }"#;
        let err = from_json(text).unwrap_err();
        assert!(matches!(err, GraphError::InvalidDocument(_)), "{err}");
    }

    #[test]
    fn unknown_kind_and_unknown_field_are_rejected() {
        let unknown_kind = r#"{
            "K": 1.0, "inputs": [0], "outputs": [1],
            "nodes": [
                {"id": 0, "kind": "relu_input"},
                {"id": 1, "kind": "output", "activation": "tanh", "bias": 0.0}
            ],
            "edges": []
        }"#;
        assert!(from_json(unknown_kind).is_err());
        let unknown_field = r#"{
            "K": 1.0, "inputs": [0], "outputs": [1], "comment": "nope",
            "nodes": [
                {"id": 0, "kind": "input"},
                {"id": 1, "kind": "output", "activation": "tanh", "bias": 0.0}
            ],
            "edges": []
        }"#;
        assert!(from_json(unknown_field).is_err());
    }

    #[test]
    fn nonzero_signal_term_bias_is_rejected() {
        let text = r#"{
            "K": 1.0, "inputs": [0], "outputs": [1],
            "nodes": [
                {"id": 0, "kind": "input"},
                {"id": 1, "kind": "output", "activation": "tanh", "bias": 0.0},
                {"id": 2, "kind": "modulatory", "term_biases": [0.5, 0.0]}
            ],
            "edges": []
        }"#;
        assert!(from_json(text).is_err());
    }
}

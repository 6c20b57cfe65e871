//! Mutable directed-acyclic computation graph.
//!
//! Networks hold standard nodes (weighted sum, bias, activation) and
//! modulatory nodes whose state is the product of two terms: a linear
//! signal term and a sigmoid-like modulation term that can invert the
//! sign of whatever flows through the node. The graph can be mutated
//! (edges added, removed, or converted into modulatory nodes) while
//! training; every mutation re-checks acyclicity and bumps a revision
//! counter so stale traces are detected.

mod backward;
mod forward;
mod serial;

pub use backward::{apply_update, backward, batch_gradients, BatchGradients, GradientTrace, ParamId};
pub use forward::{cost, forward, ForwardTrace};
pub use serial::{from_json, to_json};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stable node identifier. Ids of removed nodes are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

/// Stable edge identifier. Ids of removed edges are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Which term of a target node an edge feeds. Standard and output nodes
/// only have the signal term; modulatory nodes add the modulation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Term 0, the linear signal path.
    Signal,
    /// Term 1, the sign-inverting modulation path (modulatory nodes only).
    Modulation,
}

impl Term {
    pub fn index(self) -> usize {
        match self {
            Term::Signal => 0,
            Term::Modulation => 1,
        }
    }

    pub fn from_index(i: u8) -> Option<Term> {
        match i {
            0 => Some(Term::Signal),
            1 => Some(Term::Modulation),
            _ => None,
        }
    }
}

/// Activation applied by standard and output nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative evaluated from the activation output `a`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Node payload. The modulation-term bias of a modulatory node is
/// learnable; its signal-term bias is fixed at zero, which is part of
/// what keeps edge-node conversion output-neutral.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Input,
    Output { activation: Activation, bias: f64 },
    Standard { activation: Activation, bias: f64 },
    Modulatory { term_biases: [f64; 2] },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input => "input",
            NodeKind::Output { .. } => "output",
            NodeKind::Standard { .. } => "standard",
            NodeKind::Modulatory { .. } => "modulatory",
        }
    }

    pub fn is_modulatory(&self) -> bool {
        matches!(self, NodeKind::Modulatory { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
    pub term: Term,
    pub weight: f64,
}

/// One training example: one value per input node, one per output node.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Sample {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>) -> Self {
        Sample { inputs, targets }
    }
}

pub type Dataset = Vec<Sample>;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node {0} not found")]
    NodeNotFound(NodeId),
    #[error("edge {0} not found")]
    EdgeNotFound(EdgeId),
    #[error("edge {from} -> {to} would create a cycle")]
    CycleDetected { from: NodeId, to: NodeId },
    #[error("edge {from} -> {to} (term {term}) already exists")]
    DuplicateEdge { from: NodeId, to: NodeId, term: usize },
    #[error("self-loop on {0} is not allowed")]
    SelfLoop(NodeId),
    #[error("input node {0} cannot receive edges")]
    EdgeIntoInput(NodeId),
    #[error("node {0} has no modulation term")]
    NoModulationTerm(NodeId),
    #[error("sample has {got} {what} values, network expects {expected}")]
    ArityMismatch { what: &'static str, got: usize, expected: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("trace revision {trace} does not match network revision {network}")]
    StaleTrace { trace: u64, network: u64 },
    #[error("gradient refers to unknown parameter {0:?}")]
    UnknownParameter(ParamId),
    #[error("invalid network document: {0}")]
    InvalidDocument(String),
}

/// Directed acyclic computation graph of standard and modulatory nodes.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    inputs: Vec<NodeId>,
    outputs: Vec<NodeId>,
    /// Sharpness constant K of the modulation transfer function.
    sharpness: f64,
    next_node_id: u64,
    next_edge_id: u64,
    /// Topological order, recomputed after every mutation.
    topo: Vec<NodeId>,
    /// In-edges per node and term, sorted by edge id.
    in_edges: BTreeMap<NodeId, [Vec<EdgeId>; 2]>,
    /// Out-edges per node, sorted by edge id.
    out_edges: BTreeMap<NodeId, Vec<EdgeId>>,
    /// Bumped on every mutation; forward traces carry it.
    revision: u64,
}

impl Network {
    /// A network holding only input and output nodes, no edges. Output
    /// biases start at zero.
    pub fn new(n_inputs: usize, n_outputs: usize, output_activation: Activation, sharpness: f64) -> Self {
        let mut net = Network {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            sharpness,
            next_node_id: 0,
            next_edge_id: 0,
            topo: Vec::new(),
            in_edges: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            revision: 0,
        };
        for _ in 0..n_inputs {
            let id = net.alloc_node_id();
            net.nodes.insert(id, Node { id, kind: NodeKind::Input });
            net.inputs.push(id);
        }
        for _ in 0..n_outputs {
            let id = net.alloc_node_id();
            net.nodes.insert(
                id,
                Node { id, kind: NodeKind::Output { activation: output_activation, bias: 0.0 } },
            );
            net.outputs.push(id);
        }
        net.rebuild_caches();
        net
    }

    fn alloc_node_id(&mut self) -> NodeId {
        let id = NodeId(self.next_node_id);
        self.next_node_id += 1;
        id
    }

    fn alloc_edge_id(&mut self) -> EdgeId {
        let id = EdgeId(self.next_edge_id);
        self.next_edge_id += 1;
        id
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(&id).ok_or(GraphError::NodeNotFound(id))
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge, GraphError> {
        self.edges.get(&id).ok_or(GraphError::EdgeNotFound(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Nodes in a fixed topological order (inputs first).
    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo
    }

    /// In-edge ids of `(node, term)`, ascending by edge id.
    pub fn in_edge_ids(&self, node: NodeId, term: Term) -> &[EdgeId] {
        self.in_edges
            .get(&node)
            .map(|both| both[term.index()].as_slice())
            .unwrap_or(&[])
    }

    pub fn out_edge_ids(&self, node: NodeId) -> &[EdgeId] {
        self.out_edges.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Learnable parameters of the current structure, in a fixed order:
    /// edge weights ascending, then biases ascending by node id.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut params: Vec<ParamId> = self.edges.keys().map(|&e| ParamId::Weight(e)).collect();
        for node in self.nodes.values() {
            match node.kind {
                NodeKind::Output { .. } | NodeKind::Standard { .. } => params.push(ParamId::Bias(node.id)),
                NodeKind::Modulatory { .. } => params.push(ParamId::TermBias(node.id)),
                NodeKind::Input => {}
            }
        }
        params
    }

    pub fn weight(&self, edge: EdgeId) -> Result<f64, GraphError> {
        Ok(self.edge(edge)?.weight)
    }

    pub fn set_weight(&mut self, edge: EdgeId, weight: f64) -> Result<(), GraphError> {
        self.edges
            .get_mut(&edge)
            .map(|e| e.weight = weight)
            .ok_or(GraphError::EdgeNotFound(edge))?;
        self.revision += 1;
        Ok(())
    }

    /// Value of any learnable parameter.
    pub fn param(&self, param: ParamId) -> Result<f64, GraphError> {
        match param {
            ParamId::Weight(e) => self.weight(e),
            ParamId::Bias(n) => match &self.node(n)?.kind {
                NodeKind::Output { bias, .. } | NodeKind::Standard { bias, .. } => Ok(*bias),
                _ => Err(GraphError::UnknownParameter(param)),
            },
            ParamId::TermBias(n) => match &self.node(n)?.kind {
                NodeKind::Modulatory { term_biases } => Ok(term_biases[1]),
                _ => Err(GraphError::UnknownParameter(param)),
            },
        }
    }

    pub fn set_param(&mut self, param: ParamId, value: f64) -> Result<(), GraphError> {
        match param {
            ParamId::Weight(e) => return self.set_weight(e, value),
            ParamId::Bias(n) => {
                let node = self.nodes.get_mut(&n).ok_or(GraphError::NodeNotFound(n))?;
                match &mut node.kind {
                    NodeKind::Output { bias, .. } | NodeKind::Standard { bias, .. } => *bias = value,
                    _ => return Err(GraphError::UnknownParameter(param)),
                }
            }
            ParamId::TermBias(n) => {
                let node = self.nodes.get_mut(&n).ok_or(GraphError::NodeNotFound(n))?;
                match &mut node.kind {
                    NodeKind::Modulatory { term_biases } => term_biases[1] = value,
                    _ => return Err(GraphError::UnknownParameter(param)),
                }
            }
        }
        self.revision += 1;
        Ok(())
    }

    /// Add a hidden standard node.
    pub fn add_standard_node(&mut self, activation: Activation, bias: f64) -> NodeId {
        let id = self.alloc_node_id();
        self.nodes.insert(id, Node { id, kind: NodeKind::Standard { activation, bias } });
        self.rebuild_caches();
        self.revision += 1;
        id
    }

    /// Add a hidden modulatory node. The signal-term bias is fixed at zero;
    /// the modulation-term bias starts at zero so the modulation factor is
    /// exactly 1 until something feeds the term.
    pub fn add_modulatory_node(&mut self) -> NodeId {
        let id = self.alloc_node_id();
        self.nodes.insert(id, Node { id, kind: NodeKind::Modulatory { term_biases: [0.0, 0.0] } });
        self.rebuild_caches();
        self.revision += 1;
        id
    }

    /// True if an edge `source -> target` would close a cycle, i.e. the
    /// source is reachable from the target.
    pub fn would_create_cycle(&self, source: NodeId, target: NodeId) -> bool {
        if source == target {
            return true;
        }
        let mut stack = vec![target];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == source {
                return true;
            }
            if !seen.insert(n) {
                continue;
            }
            for &e in self.out_edge_ids(n) {
                stack.push(self.edges[&e].target);
            }
        }
        false
    }

    pub fn has_edge(&self, source: NodeId, target: NodeId, term: Term) -> bool {
        self.in_edge_ids(target, term)
            .iter()
            .any(|e| self.edges[e].source == source)
    }

    /// Add an edge, preserving acyclicity.
    pub fn add_edge(&mut self, source: NodeId, target: NodeId, term: Term, weight: f64) -> Result<EdgeId, GraphError> {
        self.node(source)?;
        let target_node = self.node(target)?;
        if source == target {
            return Err(GraphError::SelfLoop(source));
        }
        match target_node.kind {
            NodeKind::Input => return Err(GraphError::EdgeIntoInput(target)),
            NodeKind::Modulatory { .. } => {}
            _ if term == Term::Modulation => return Err(GraphError::NoModulationTerm(target)),
            _ => {}
        }
        if self.has_edge(source, target, term) {
            return Err(GraphError::DuplicateEdge { from: source, to: target, term: term.index() });
        }
        if self.would_create_cycle(source, target) {
            return Err(GraphError::CycleDetected { from: source, to: target });
        }
        let id = self.alloc_edge_id();
        self.edges.insert(id, Edge { id, source, target, term, weight });
        self.rebuild_caches();
        self.revision += 1;
        Ok(id)
    }

    pub fn remove_edge(&mut self, edge: EdgeId) -> Result<Edge, GraphError> {
        let removed = self.edges.remove(&edge).ok_or(GraphError::EdgeNotFound(edge))?;
        self.rebuild_caches();
        self.revision += 1;
        Ok(removed)
    }

    /// Replace edge `(i, j)` with a fresh modulatory node `k` on the path
    /// `i -> k -> j`. The inbound edge gets weight 1 into the signal term
    /// and the outbound edge inherits the original weight and target term,
    /// so every network output is unchanged. Returns `(k, i->k, k->j)`.
    pub fn replace_edge_with_path(&mut self, edge: EdgeId) -> Result<(NodeId, EdgeId, EdgeId), GraphError> {
        let old = self.edge(edge)?.clone();
        self.edges.remove(&edge);
        let k = self.alloc_node_id();
        self.nodes.insert(k, Node { id: k, kind: NodeKind::Modulatory { term_biases: [0.0, 0.0] } });
        let in_id = self.alloc_edge_id();
        self.edges.insert(
            in_id,
            Edge { id: in_id, source: old.source, target: k, term: Term::Signal, weight: 1.0 },
        );
        let out_id = self.alloc_edge_id();
        self.edges.insert(
            out_id,
            Edge { id: out_id, source: k, target: old.target, term: old.term, weight: old.weight },
        );
        self.rebuild_caches();
        self.revision += 1;
        Ok((k, in_id, out_id))
    }

    fn rebuild_caches(&mut self) {
        self.in_edges.clear();
        self.out_edges.clear();
        for id in self.nodes.keys() {
            self.in_edges.insert(*id, [Vec::new(), Vec::new()]);
            self.out_edges.insert(*id, Vec::new());
        }
        for edge in self.edges.values() {
            self.in_edges.get_mut(&edge.target).unwrap()[edge.term.index()].push(edge.id);
            self.out_edges.get_mut(&edge.source).unwrap().push(edge.id);
        }
        self.topo = self.compute_topo().expect("graph invariant violated: cycle present");
    }

    /// Kahn's algorithm with a BTreeSet frontier for a deterministic order.
    fn compute_topo(&self) -> Option<Vec<NodeId>> {
        let mut in_degree: BTreeMap<NodeId, usize> = self.nodes.keys().map(|&n| (n, 0)).collect();
        for edge in self.edges.values() {
            *in_degree.get_mut(&edge.target).unwrap() += 1;
        }
        let mut ready: std::collections::BTreeSet<NodeId> =
            in_degree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&n) = ready.iter().next() {
            ready.remove(&n);
            order.push(n);
            for &e in self.out_edge_ids(n) {
                let t = self.edges[&e].target;
                let d = in_degree.get_mut(&t).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(t);
                }
            }
        }
        if order.len() == self.nodes.len() {
            Some(order)
        } else {
            None
        }
    }

    /// Construct from parts, validating every structural invariant. Used by
    /// deserialization.
    pub(crate) fn from_parts(
        sharpness: f64,
        inputs: Vec<NodeId>,
        outputs: Vec<NodeId>,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let mut node_map = BTreeMap::new();
        for node in nodes {
            if node_map.insert(node.id, node.clone()).is_some() {
                return Err(GraphError::InvalidDocument(format!("duplicate node id {}", node.id)));
            }
        }
        let mut edge_map = BTreeMap::new();
        for edge in edges {
            if !node_map.contains_key(&edge.source) {
                return Err(GraphError::InvalidDocument(format!(
                    "edge {} references missing source {}",
                    edge.id, edge.source
                )));
            }
            if !node_map.contains_key(&edge.target) {
                return Err(GraphError::InvalidDocument(format!(
                    "edge {} references missing target {}",
                    edge.id, edge.target
                )));
            }
            if edge.source == edge.target {
                return Err(GraphError::InvalidDocument(format!("edge {} is a self-loop", edge.id)));
            }
            let target_kind = &node_map[&edge.target].kind;
            if matches!(target_kind, NodeKind::Input) {
                return Err(GraphError::InvalidDocument(format!(
                    "edge {} targets input node {}",
                    edge.id, edge.target
                )));
            }
            if edge.term == Term::Modulation && !target_kind.is_modulatory() {
                return Err(GraphError::InvalidDocument(format!(
                    "edge {} targets term 1 of non-modulatory node {}",
                    edge.id, edge.target
                )));
            }
            if edge_map.insert(edge.id, edge.clone()).is_some() {
                return Err(GraphError::InvalidDocument(format!("duplicate edge id {}", edge.id)));
            }
        }
        for (what, list) in [("input", &inputs), ("output", &outputs)] {
            for id in list {
                let node = node_map
                    .get(id)
                    .ok_or_else(|| GraphError::InvalidDocument(format!("{what} list references missing {id}")))?;
                let ok = match (what, &node.kind) {
                    ("input", NodeKind::Input) => true,
                    ("output", NodeKind::Output { .. }) => true,
                    _ => false,
                };
                if !ok {
                    return Err(GraphError::InvalidDocument(format!("{id} is not an {what} node")));
                }
            }
        }
        if inputs.iter().any(|i| outputs.contains(i)) {
            return Err(GraphError::InvalidDocument("input and output lists overlap".into()));
        }
        let n_listed = node_map.values().filter(|n| matches!(n.kind, NodeKind::Input)).count();
        if n_listed != inputs.len() {
            return Err(GraphError::InvalidDocument("input list does not cover all input nodes".into()));
        }
        let n_out = node_map.values().filter(|n| matches!(n.kind, NodeKind::Output { .. })).count();
        if n_out != outputs.len() {
            return Err(GraphError::InvalidDocument("output list does not cover all output nodes".into()));
        }
        for node in node_map.values() {
            if let NodeKind::Modulatory { term_biases } = node.kind {
                if term_biases[0] != 0.0 {
                    return Err(GraphError::InvalidDocument(format!(
                        "modulatory node {} has nonzero signal-term bias",
                        node.id
                    )));
                }
            }
        }
        // Duplicate (source, target, term) edges are rejected.
        let mut seen = std::collections::BTreeSet::new();
        for edge in edge_map.values() {
            if !seen.insert((edge.source, edge.target, edge.term)) {
                return Err(GraphError::InvalidDocument(format!(
                    "duplicate edge {} -> {} (term {})",
                    edge.source,
                    edge.target,
                    edge.term.index()
                )));
            }
        }
        let next_node_id = node_map.keys().map(|n| n.0 + 1).max().unwrap_or(0);
        let next_edge_id = edge_map.keys().map(|e| e.0 + 1).max().unwrap_or(0);
        let mut net = Network {
            nodes: node_map,
            edges: edge_map,
            inputs,
            outputs,
            sharpness,
            next_node_id,
            next_edge_id,
            topo: Vec::new(),
            in_edges: BTreeMap::new(),
            out_edges: BTreeMap::new(),
            revision: 0,
        };
        net.in_edges.clear();
        net.out_edges.clear();
        for id in net.nodes.keys() {
            net.in_edges.insert(*id, [Vec::new(), Vec::new()]);
            net.out_edges.insert(*id, Vec::new());
        }
        let edges: Vec<Edge> = net.edges.values().cloned().collect();
        for edge in &edges {
            net.in_edges.get_mut(&edge.target).unwrap()[edge.term.index()].push(edge.id);
            net.out_edges.get_mut(&edge.source).unwrap().push(edge.id);
        }
        match net.compute_topo() {
            Some(topo) => net.topo = topo,
            None => return Err(GraphError::InvalidDocument("graph contains a cycle".into())),
        }
        Ok(net)
    }

    /// Structural equality: same nodes, edges, io lists, and sharpness.
    pub fn structurally_equal(&self, other: &Network) -> bool {
        self.sharpness == other.sharpness
            && self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

/// Modulation transfer function `4 / (1 + exp(-K x)) - 1`, range (-1, 3).
/// At zero it is exactly 1, which is what makes a freshly converted node
/// pass its signal term through unchanged.
pub fn modulation(sharpness: f64, x: f64) -> f64 {
    4.0 / (1.0 + (-sharpness * x).exp()) - 1.0
}

/// Derivative of [`modulation`], written in terms of the output value to
/// stay finite under saturation: `K (s + 1) (3 - s) / 4`.
pub fn modulation_derivative(sharpness: f64, value: f64) -> f64 {
    sharpness * (value + 1.0) * (3.0 - value) / 4.0
}

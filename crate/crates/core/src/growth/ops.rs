//! Growth-site detection and the two neutral generative processes.

use rand::Rng;

use crate::graph::{
    EdgeId, ForwardTrace, GraphError, Network, NodeId, NodeKind, ParamId, Term,
};

use super::{ApReport, GrowthError};

/// Structural changes a scan has decided on: node terms that should gain a
/// zero-weight in-edge, and edges that should become modulatory nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrowthSites {
    pub edge_targets: Vec<(NodeId, Term)>,
    pub conversions: Vec<EdgeId>,
}

impl GrowthSites {
    pub fn is_empty(&self) -> bool {
        self.edge_targets.is_empty() && self.conversions.is_empty()
    }
}

fn qualified_in_all(window: &[ApReport], f: impl Fn(&ApReport) -> bool) -> bool {
    !window.is_empty() && window.iter().all(f)
}

/// Scan the sustained-exhaustion window for growth sites.
///
/// A node term qualifies for edge generation when its learnable bias and
/// all of its in-edge weights have exhausted immediate APs while the
/// activation input's total AP is still live, in every report of the
/// window. An edge qualifies for conversion when its weight's immediate AP
/// is exhausted but its total AP is not, in every report.
pub fn detect_growth_sites(window: &[ApReport], network: &Network) -> GrowthSites {
    let mut sites = GrowthSites::default();

    for edge in network.edges() {
        let key = ParamId::Weight(edge.id);
        if qualified_in_all(window, |r| {
            r.params.get(&key).map_or(false, |e| e.imm_exhausted && !e.total_exhausted)
        }) {
            sites.conversions.push(edge.id);
        }
    }

    for node in network.nodes() {
        let terms: &[Term] = match node.kind {
            NodeKind::Input => continue,
            NodeKind::Output { .. } | NodeKind::Standard { .. } => &[Term::Signal],
            NodeKind::Modulatory { .. } => &[Term::Signal, Term::Modulation],
        };
        for &term in terms {
            // The signal-term bias of a modulatory node is fixed, so only
            // the terms below carry a learnable bias to check.
            let bias_key = match (&node.kind, term) {
                (NodeKind::Output { .. } | NodeKind::Standard { .. }, _) => Some(ParamId::Bias(node.id)),
                (NodeKind::Modulatory { .. }, Term::Modulation) => Some(ParamId::TermBias(node.id)),
                _ => None,
            };
            let bias_ok = match bias_key {
                Some(key) => qualified_in_all(window, |r| {
                    r.params.get(&key).map_or(false, |e| e.imm_exhausted)
                }),
                None => !window.is_empty(),
            };
            if !bias_ok {
                continue;
            }
            let edges_ok = network.in_edge_ids(node.id, term).iter().all(|&e| {
                qualified_in_all(window, |r| {
                    r.params.get(&ParamId::Weight(e)).map_or(false, |entry| entry.imm_exhausted)
                })
            });
            if !edges_ok {
                continue;
            }
            let z_live = qualified_in_all(window, |r| {
                r.node_terms
                    .get(&(node.id, term))
                    .map_or(false, |e| !e.total_exhausted)
            });
            if z_live {
                sites.edge_targets.push((node.id, term));
            }
        }
    }

    sites
}

/// Legal sources for a new in-edge of `(target, term)`: every input node
/// plus every hidden node, minus the target itself, existing sources of
/// that term, and anything that would close a cycle.
pub fn candidate_sources(network: &Network, target: NodeId, term: Term) -> Vec<NodeId> {
    network
        .nodes()
        .filter(|n| match n.kind {
            NodeKind::Input => true,
            NodeKind::Standard { .. } | NodeKind::Modulatory { .. } => true,
            NodeKind::Output { .. } => false,
        })
        .map(|n| n.id)
        .filter(|&c| c != target)
        .filter(|&c| !network.has_edge(c, target, term))
        .filter(|&c| !network.would_create_cycle(c, target))
        .collect()
}

/// Pick the source that maximizes the magnitude of the expected immediate
/// gradient on the new edge, `|sum_m a^m_source * delta^m|`. Exact score
/// ties are broken uniformly with the caller's seeded generator.
pub fn select_source_from_deltas<R: Rng>(
    network: &Network,
    target: NodeId,
    term: Term,
    deltas: &[f64],
    traces: &[ForwardTrace],
    rng: &mut R,
) -> Result<(NodeId, f64), GrowthError> {
    let candidates = candidate_sources(network, target, term);
    if candidates.is_empty() {
        return Err(GrowthError::NoCandidates { node: target, term });
    }
    let scored: Vec<(NodeId, f64)> = candidates
        .into_iter()
        .map(|c| {
            let score: f64 = traces
                .iter()
                .zip(deltas)
                .map(|(trace, d)| trace.states[&c] * d)
                .sum();
            (c, score.abs())
        })
        .collect();
    let best = scored.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<(NodeId, f64)> = scored.into_iter().filter(|(_, s)| *s == best).collect();
    Ok(ties[rng.gen_range(0..ties.len())])
}

/// [`select_source_from_deltas`] over the target term's reported deltas.
pub fn select_edge_source<R: Rng>(
    network: &Network,
    target: NodeId,
    term: Term,
    batch: &crate::graph::BatchGradients,
    rng: &mut R,
) -> Result<(NodeId, f64), GrowthError> {
    let deltas = batch.delta_rows(target, term);
    if deltas.len() != batch.traces.len() {
        return Err(GrowthError::NoCandidates { node: target, term });
    }
    select_source_from_deltas(network, target, term, &deltas, &batch.traces, rng)
}

/// Add a zero-weight edge. Weight zero means the target's activation input
/// is numerically unchanged, so the operation is output-neutral on every
/// sample by construction.
pub fn generate_edge(
    network: &mut Network,
    target: NodeId,
    term: Term,
    source: NodeId,
) -> Result<EdgeId, GraphError> {
    network.add_edge(source, target, term, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub node: NodeId,
    pub in_edge: EdgeId,
    pub out_edge: EdgeId,
}

/// Edge-node conversion: replace edge `(i, j)` with a modulatory node `k`
/// and the path `i -> k -> j`, weights 1 and the original weight. The new
/// node multiplies its pass-through signal by a modulation factor that is
/// exactly 1 at creation, so outputs are unchanged, and its modulation-term
/// deltas equal the per-sample gradients the original edge had.
pub fn edge_node_conversion(network: &mut Network, edge: EdgeId) -> Result<Conversion, GraphError> {
    let (node, in_edge, out_edge) = network.replace_edge_with_path(edge)?;
    Ok(Conversion { node, in_edge, out_edge })
}

//! Adaptive potentials.

use std::collections::BTreeMap;

use crate::graph::{BatchGradients, GradientTrace, NodeId, ParamId, Term};

use super::GrowthError;

/// Anything that carries per-sample gradients: a learnable parameter or a
/// node's activation-input term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ApKey {
    Param(ParamId),
    NodeTerm(NodeId, Term),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApEntry {
    /// Net gradient over the batch (mean of per-sample gradients).
    pub immediate: f64,
    /// Sum of absolute per-sample gradients.
    pub total: f64,
    pub imm_exhausted: bool,
    pub total_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApReport {
    pub params: BTreeMap<ParamId, ApEntry>,
    pub node_terms: BTreeMap<(NodeId, Term), ApEntry>,
}

impl ApReport {
    pub fn all_total_exhausted(&self) -> bool {
        self.params.values().all(|e| e.total_exhausted)
            && self.node_terms.values().all(|e| e.total_exhausted)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ApThresholds {
    pub imm_eps_rel: f64,
    pub imm_rms_floor: f64,
    pub total_eps: f64,
}

fn entry(values: impl Iterator<Item = f64>, n: usize, imm_eps: f64, total_eps: f64) -> ApEntry {
    let mut sum = 0.0;
    let mut total = 0.0;
    for v in values {
        sum += v;
        total += v.abs();
    }
    let immediate = sum / n as f64;
    ApEntry {
        immediate,
        total,
        imm_exhausted: immediate.abs() < imm_eps,
        total_exhausted: total < total_eps,
    }
}

/// Adaptive potentials of a batch under flat thresholds. Parameter entries
/// are computed from the update-channel gradients (the values the loop
/// actually descends); node terms from the reported deltas.
pub fn compute_ap(rows: &[GradientTrace], imm_eps: f64, total_eps: f64) -> Result<ApReport, GrowthError> {
    let first = rows.first().ok_or(GrowthError::EmptyRows)?;
    let n = rows.len();
    let mut report = ApReport::default();
    for &p in first.params.keys() {
        report
            .params
            .insert(p, entry(rows.iter().map(|r| r.update_gradient(p)), n, imm_eps, total_eps));
    }
    for &k in first.deltas.keys() {
        report
            .node_terms
            .insert(k, entry(rows.iter().map(|r| r.deltas[&k]), n, imm_eps, total_eps));
    }
    Ok(report)
}

/// Maintains the running RMS of each entry's immediate AP so exhaustion is
/// judged relative to the scale the entry has historically moved at. A
/// parameter whose net gradient was never large should not need an
/// absolute threshold to be declared stuck.
#[derive(Debug, Clone, Default)]
pub struct ApTracker {
    thresholds: Option<ApThresholds>,
    /// Count and mean square of historical immediate APs.
    history: BTreeMap<ApKey, (u64, f64)>,
}

impl ApTracker {
    pub fn new(thresholds: ApThresholds) -> Self {
        ApTracker { thresholds: Some(thresholds), history: BTreeMap::new() }
    }

    fn push(&mut self, key: ApKey, immediate: f64) {
        let (count, mean_sq) = self.history.entry(key).or_insert((0, 0.0));
        *count += 1;
        *mean_sq += (immediate * immediate - *mean_sq) / *count as f64;
    }

    fn imm_eps(&self, key: ApKey) -> f64 {
        let t = self.thresholds.expect("tracker built without thresholds");
        let rms = self.history.get(&key).map(|(_, ms)| ms.sqrt()).unwrap_or(0.0);
        t.imm_eps_rel * rms.max(t.imm_rms_floor)
    }

    /// Fold one step's immediate APs into the running history.
    pub fn record(&mut self, batch: &BatchGradients) {
        let n = batch.rows.len() as f64;
        if let Some(first) = batch.rows.first() {
            for &p in first.params.keys() {
                let mean = batch.rows.iter().map(|r| r.update_gradient(p)).sum::<f64>() / n;
                self.push(ApKey::Param(p), mean);
            }
            for &k in first.deltas.keys() {
                let mean = batch.rows.iter().map(|r| r.deltas[&k]).sum::<f64>() / n;
                self.push(ApKey::NodeTerm(k.0, k.1), mean);
            }
        }
    }

    /// Report for the current batch using scale-relative immediate
    /// thresholds. Call [`record`](Self::record) first so the current step
    /// participates in the scale estimate.
    pub fn report(&self, batch: &BatchGradients) -> Result<ApReport, GrowthError> {
        let first = batch.rows.first().ok_or(GrowthError::EmptyRows)?;
        let t = self.thresholds.expect("tracker built without thresholds");
        let n = batch.rows.len();
        let mut report = ApReport::default();
        for &p in first.params.keys() {
            let imm_eps = self.imm_eps(ApKey::Param(p));
            report
                .params
                .insert(p, entry(batch.rows.iter().map(|r| r.update_gradient(p)), n, imm_eps, t.total_eps));
        }
        for &k in first.deltas.keys() {
            let imm_eps = self.imm_eps(ApKey::NodeTerm(k.0, k.1));
            report
                .node_terms
                .insert(k, entry(batch.rows.iter().map(|r| r.deltas[&k]), n, imm_eps, t.total_eps));
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{batch_gradients, Activation, Network, Sample};

    fn synthetic_rows(values: &[f64]) -> Vec<GradientTrace> {
        // A real single-edge network evaluated per sample would be overkill;
        // build traces with one weight entry each.
        values
            .iter()
            .map(|&v| {
                let mut params = BTreeMap::new();
                params.insert(ParamId::Weight(crate::graph::EdgeId(0)), v);
                GradientTrace {
                    revision: 0,
                    cost: 0.0,
                    params,
                    regulatory: BTreeMap::new(),
                    deltas: BTreeMap::new(),
                }
            })
            .collect()
    }

    #[test]
    fn opposing_rows_exhaust_immediate_but_not_total() {
        let rows = synthetic_rows(&[1.0, -1.0]);
        let report = compute_ap(&rows, 1e-6, 1e-6).unwrap();
        let e = report.params[&ParamId::Weight(crate::graph::EdgeId(0))];
        assert_eq!(e.immediate, 0.0);
        assert_eq!(e.total, 2.0);
        assert!(e.imm_exhausted);
        assert!(!e.total_exhausted);
    }

    #[test]
    fn all_zero_rows_exhaust_both() {
        let rows = synthetic_rows(&[0.0, 0.0, 0.0]);
        let report = compute_ap(&rows, 1e-6, 1e-6).unwrap();
        let e = report.params[&ParamId::Weight(crate::graph::EdgeId(0))];
        assert!(e.imm_exhausted && e.total_exhausted);
    }

    #[test]
    fn empty_rows_are_an_error() {
        assert_eq!(compute_ap(&[], 1e-6, 1e-6), Err(GrowthError::EmptyRows));
    }

    #[test]
    fn signed_xor_stalled_edge_has_dead_mean_and_live_total() {
        // Inputs x0, x1; output y with a zero-weight edge from x1. The four
        // signed-XOR samples push the weight in directions that cancel.
        let mut net = Network::new(2, 1, Activation::Tanh, 1.0);
        let x1 = net.inputs()[1];
        let y = net.outputs()[0];
        let e = net.add_edge(x1, y, Term::Signal, 0.0).unwrap();
        let data = vec![
            Sample::new(vec![-1.0, -1.0], vec![-1.0]),
            Sample::new(vec![-1.0, 1.0], vec![1.0]),
            Sample::new(vec![1.0, -1.0], vec![1.0]),
            Sample::new(vec![1.0, 1.0], vec![-1.0]),
        ];
        let batch = batch_gradients(&net, &data).unwrap();
        let report = compute_ap(&batch.rows, 1e-9, 1e-6).unwrap();
        let entry = report.params[&ParamId::Weight(e)];
        assert!(entry.imm_exhausted, "net gradient should be zero: {entry:?}");
        assert!(!entry.total_exhausted, "per-sample gradients should be live: {entry:?}");
        assert!((entry.total - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tracker_threshold_scales_with_history() {
        let mut tracker = ApTracker::new(ApThresholds {
            imm_eps_rel: 1e-4,
            imm_rms_floor: 1e-8,
            total_eps: 1e-6,
        });
        // Without history the threshold is the floor times the coefficient.
        assert!((tracker.imm_eps(ApKey::Param(ParamId::Bias(NodeId(0)))) - 1e-12).abs() < 1e-24);
        tracker.push(ApKey::Param(ParamId::Bias(NodeId(0))), 2.0);
        let eps = tracker.imm_eps(ApKey::Param(ParamId::Bias(NodeId(0))));
        assert!((eps - 2e-4).abs() < 1e-12);
    }
}

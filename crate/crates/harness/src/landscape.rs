//! Cost-landscape scanning over one or two parameters.

use evodev_core::graph::{cost, Dataset, EdgeId, Network, NodeId, ParamId};

use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub param: ParamId,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl AxisSpec {
    pub fn new(param: ParamId, lo: f64, hi: f64, steps: usize) -> Self {
        AxisSpec { param, lo, hi, steps }
    }

    /// Symmetric default range matching the two zero-cost basins of the
    /// XOR landscape.
    pub fn default_range(param: ParamId, steps: usize) -> Self {
        AxisSpec { param, lo: -2.0, hi: 2.0, steps }
    }

    fn values(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.lo];
        }
        let span = self.hi - self.lo;
        (0..self.steps)
            .map(|i| self.lo + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LandscapeGrid {
    pub label1: String,
    pub label2: String,
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// cost[i][j] at (axis1[i], axis2[j]).
    pub cost: Vec<Vec<f64>>,
}

impl LandscapeGrid {
    /// Index of the grid value closest to `x` on axis 1.
    pub fn nearest1(&self, x: f64) -> usize {
        nearest(&self.axis1, x)
    }

    pub fn nearest2(&self, x: f64) -> usize {
        nearest(&self.axis2, x)
    }
}

fn nearest(axis: &[f64], x: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - x).abs().partial_cmp(&(*b - x).abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

fn param_label(param: ParamId) -> String {
    match param {
        ParamId::Weight(e) => format!("w:{}", e.0),
        ParamId::Bias(n) => format!("b:{}", n.0),
        ParamId::TermBias(n) => format!("tb:{}", n.0),
    }
}

/// Parse a parameter address: `w:<edge>`, `b:<node>`, or `tb:<node>`.
pub fn parse_param(text: &str) -> Result<ParamId, HarnessError> {
    let (kind, id) = text
        .split_once(':')
        .ok_or_else(|| HarnessError::Config(format!("bad parameter address {text:?}")))?;
    let id: u64 = id
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad parameter id in {text:?}")))?;
    match kind {
        "w" => Ok(ParamId::Weight(EdgeId(id))),
        "b" => Ok(ParamId::Bias(NodeId(id))),
        "tb" => Ok(ParamId::TermBias(NodeId(id))),
        _ => Err(HarnessError::Config(format!("bad parameter kind in {text:?}"))),
    }
}

/// Evaluate the dataset cost over a grid of one or two parameters, all
/// others frozen. Works on a clone, so the caller's network is untouched.
pub fn scan_landscape(
    network: &Network,
    dataset: &Dataset,
    axis1: &AxisSpec,
    axis2: Option<&AxisSpec>,
) -> Result<LandscapeGrid, HarnessError> {
    let mut net = network.clone();
    // Unknown parameters surface before any evaluation.
    net.param(axis1.param)?;
    if let Some(a2) = axis2 {
        net.param(a2.param)?;
    }
    let values1 = axis1.values();
    let values2 = axis2.map(|a| a.values()).unwrap_or_else(|| vec![0.0]);
    let mut grid = Vec::with_capacity(values1.len());
    for &v1 in &values1 {
        net.set_param(axis1.param, v1)?;
        let mut row = Vec::with_capacity(values2.len());
        for &v2 in &values2 {
            if let Some(a2) = axis2 {
                net.set_param(a2.param, v2)?;
            }
            let (c, _) = cost(&net, dataset)?;
            if !c.is_finite() {
                return Err(HarnessError::Task(format!(
                    "non-finite cost at ({v1}, {v2})"
                )));
            }
            row.push(c);
        }
        grid.push(row);
    }
    Ok(LandscapeGrid {
        label1: param_label(axis1.param),
        label2: axis2.map(|a| param_label(a.param)).unwrap_or_default(),
        axis1: values1,
        axis2: values2,
        cost: grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use evodev_core::graph::{to_json, Activation, Sample, Term};

    #[test]
    fn constant_network_scans_flat() {
        let mut net = Network::new(1, 1, Activation::Tanh, 1.0);
        let e = net.add_edge(net.inputs()[0], net.outputs()[0], Term::Signal, 0.0).unwrap();
        // Input is zero, so the weight cannot matter.
        let data = vec![Sample::new(vec![0.0], vec![0.5])];
        let grid = scan_landscape(
            &net,
            &data,
            &AxisSpec::new(ParamId::Weight(e), -1.0, 1.0, 5),
            None,
        )
        .unwrap();
        let c0 = grid.cost[0][0];
        assert!(grid.cost.iter().flatten().all(|&c| (c - c0).abs() < 1e-15));
    }

    #[test]
    fn scan_leaves_the_network_unchanged() {
        let mut net = Network::new(1, 1, Activation::Tanh, 1.0);
        let e = net.add_edge(net.inputs()[0], net.outputs()[0], Term::Signal, 0.731).unwrap();
        let before = to_json(&net);
        let data = vec![Sample::new(vec![1.0], vec![0.5])];
        scan_landscape(&net, &data, &AxisSpec::new(ParamId::Weight(e), -2.0, 2.0, 9), None).unwrap();
        assert_eq!(to_json(&net), before);
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let net = Network::new(1, 1, Activation::Tanh, 1.0);
        let data = vec![Sample::new(vec![1.0], vec![0.5])];
        let err = scan_landscape(
            &net,
            &data,
            &AxisSpec::new(ParamId::Weight(EdgeId(42)), -1.0, 1.0, 3),
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn param_addresses_parse() {
        assert_eq!(parse_param("w:3").unwrap(), ParamId::Weight(EdgeId(3)));
        assert_eq!(parse_param("b:1").unwrap(), ParamId::Bias(NodeId(1)));
        assert_eq!(parse_param("tb:4").unwrap(), ParamId::TermBias(NodeId(4)));
        assert!(parse_param("q:1").is_err());
        assert!(parse_param("w3").is_err());
    }
}

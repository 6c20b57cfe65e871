//! Fixed-topology multilayer perceptron with tanh units throughout.

use rand::Rng;

use crate::graph::{Dataset, GraphError};

#[derive(Debug, Clone)]
struct Layer {
    /// weights[out][in]
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    sizes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Mean cost before each step.
    pub costs: Vec<f64>,
    /// Step at which the cost became non-finite, if it did.
    pub diverged_at: Option<usize>,
}

impl Mlp {
    /// Fresh network with weights uniform in +-1/sqrt(fan_in), biases zero.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let scale = 1.0 / (n_in as f64).sqrt();
                Layer {
                    weights: (0..n_out)
                        .map(|_| (0..n_in).map(|_| rng.gen_range(-scale..scale)).collect())
                        .collect(),
                    biases: vec![0.0; n_out],
                }
            })
            .collect();
        Mlp { layers, sizes: sizes.to_vec() }
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn forward(&self, inputs: &[f64]) -> Vec<f64> {
        let mut a = inputs.to_vec();
        for layer in &self.layers {
            a = layer
                .weights
                .iter()
                .zip(&layer.biases)
                .map(|(row, b)| (row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
                .collect();
        }
        a
    }

    /// Mean over samples of the per-sample squared-error sum.
    pub fn cost(&self, data: &Dataset) -> Result<f64, GraphError> {
        if data.is_empty() {
            return Err(GraphError::EmptyDataset);
        }
        let total: f64 = data
            .iter()
            .map(|s| {
                self.forward(&s.inputs)
                    .iter()
                    .zip(&s.targets)
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>()
            })
            .sum();
        Ok(total / data.len() as f64)
    }

    /// Fraction of samples whose output signs all match the target signs.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .iter()
            .filter(|s| {
                self.forward(&s.inputs)
                    .iter()
                    .zip(&s.targets)
                    .all(|(o, t)| o.signum() == t.signum())
            })
            .count();
        hits as f64 / data.len() as f64
    }

    /// One full-batch gradient step; returns the pre-step cost.
    fn gradient_step(&mut self, data: &Dataset, learning_rate: f64) -> f64 {
        let n = data.len() as f64;
        let mut grad_w: Vec<Vec<Vec<f64>>> = self
            .layers
            .iter()
            .map(|l| l.weights.iter().map(|row| vec![0.0; row.len()]).collect())
            .collect();
        let mut grad_b: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect();
        let mut total_cost = 0.0;

        for sample in data {
            // Forward caching every layer's activations.
            let mut activations = vec![sample.inputs.clone()];
            for layer in &self.layers {
                let prev = activations.last().unwrap();
                let a: Vec<f64> = layer
                    .weights
                    .iter()
                    .zip(&layer.biases)
                    .map(|(row, b)| (row.iter().zip(prev).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
                    .collect();
                activations.push(a);
            }
            let out = activations.last().unwrap();
            total_cost += out
                .iter()
                .zip(&sample.targets)
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>();

            // Backward: delta = dC/dz per unit.
            let mut delta: Vec<f64> = out
                .iter()
                .zip(&sample.targets)
                .map(|(o, t)| 2.0 * (o - t) * (1.0 - o * o))
                .collect();
            for li in (0..self.layers.len()).rev() {
                let prev = &activations[li];
                for (j, &d) in delta.iter().enumerate() {
                    grad_b[li][j] += d;
                    for (i, &x) in prev.iter().enumerate() {
                        grad_w[li][j][i] += d * x;
                    }
                }
                if li > 0 {
                    let layer = &self.layers[li];
                    delta = (0..prev.len())
                        .map(|i| {
                            let upstream: f64 =
                                delta.iter().enumerate().map(|(j, d)| d * layer.weights[j][i]).sum();
                            upstream * (1.0 - prev[i] * prev[i])
                        })
                        .collect();
                }
            }
        }

        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (j, row) in layer.weights.iter_mut().enumerate() {
                for (i, w) in row.iter_mut().enumerate() {
                    *w -= learning_rate * grad_w[li][j][i] / n;
                }
                layer.biases[j] -= learning_rate * grad_b[li][j] / n;
            }
        }
        total_cost / n
    }
}

/// Plain full-batch gradient descent, no growth, fixed topology.
pub fn train_static(
    mlp: &mut Mlp,
    data: &Dataset,
    steps: usize,
    learning_rate: f64,
) -> Result<TrainOutcome, GraphError> {
    if data.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let mut costs = Vec::with_capacity(steps);
    for step in 0..steps {
        let c = mlp.gradient_step(data, learning_rate);
        costs.push(c);
        if !c.is_finite() {
            return Ok(TrainOutcome { costs, diverged_at: Some(step) });
        }
    }
    Ok(TrainOutcome { costs, diverged_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn signed_and() -> Dataset {
        vec![
            Sample::new(vec![-1.0, -1.0], vec![-1.0]),
            Sample::new(vec![-1.0, 1.0], vec![-1.0]),
            Sample::new(vec![1.0, -1.0], vec![-1.0]),
            Sample::new(vec![1.0, 1.0], vec![1.0]),
        ]
    }

    fn signed_xor() -> Dataset {
        vec![
            Sample::new(vec![-1.0, -1.0], vec![-1.0]),
            Sample::new(vec![-1.0, 1.0], vec![1.0]),
            Sample::new(vec![1.0, -1.0], vec![1.0]),
            Sample::new(vec![1.0, 1.0], vec![-1.0]),
        ]
    }

    #[test]
    fn zero_steps_change_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::new(&[2, 4, 1], &mut rng);
        let before = mlp.forward(&[0.3, -0.6]);
        train_static(&mut mlp, &signed_and(), 0, 0.1).unwrap();
        assert_eq!(mlp.forward(&[0.3, -0.6]), before);
    }

    #[test]
    fn and_is_learned_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mlp = Mlp::new(&[2, 8, 1], &mut rng);
        train_static(&mut mlp, &signed_and(), 10_000, 0.1).unwrap();
        assert!(mlp.cost(&signed_and()).unwrap() < 1e-2);
        assert_eq!(mlp.accuracy(&signed_and()), 1.0);
    }

    #[test]
    fn xor_without_hidden_units_plateaus() {
        // Direct input-output weights only: the statistical trade-off pins
        // the cost at its stuck value.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::new(&[2, 1], &mut rng);
        let outcome = train_static(&mut mlp, &signed_xor(), 10_000, 0.1).unwrap();
        assert!(outcome.diverged_at.is_none());
        assert!(mlp.cost(&signed_xor()).unwrap() > 0.9);
    }
}

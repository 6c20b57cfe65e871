//! Task generators: boolean functions under sign encoding for the growing
//! network and ternary encoding for the rule learner, with their
//! truth-table oracles.

use evodev_core::csv::{CsvModel, Instance, StateValue, SvId};
use evodev_core::graph::{Dataset, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::HarnessError;

/// Signed XOR over two inputs: false is -1, true is +1.
pub fn gen_signed_xor() -> Dataset {
    vec![
        Sample::new(vec![-1.0, -1.0], vec![-1.0]),
        Sample::new(vec![-1.0, 1.0], vec![1.0]),
        Sample::new(vec![1.0, -1.0], vec![1.0]),
        Sample::new(vec![1.0, 1.0], vec![-1.0]),
    ]
}

/// Boolean row under ternary encoding: inputs and target in {1, -1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryRow {
    pub inputs: Vec<i8>,
    pub target: i8,
}

impl TernaryRow {
    /// Bind the row to a model's SV ids.
    pub fn instance(&self, inputs: &[SvId], target: SvId) -> Instance {
        let mut states: std::collections::BTreeMap<SvId, StateValue> = inputs
            .iter()
            .zip(&self.inputs)
            .map(|(&id, &v)| (id, StateValue::from_i8(v).expect("ternary value")))
            .collect();
        states.insert(target, StateValue::from_i8(self.target).expect("ternary value"));
        Instance::new(states)
    }
}

/// A conjunction of literals: active iff all positives active and no
/// negative active.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjunction {
    pub n_inputs: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl Conjunction {
    pub fn value(&self, pattern: &[bool]) -> bool {
        self.positives.iter().all(|&i| pattern[i]) && !self.negatives.iter().any(|&i| pattern[i])
    }

    pub fn truth_table(&self) -> Vec<bool> {
        (0..1usize << self.n_inputs).map(|row| self.value(&pattern_of(row, self.n_inputs))).collect()
    }
}

pub fn pattern_of(row: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| row >> i & 1 == 1).collect()
}

fn row_of(pattern: &[bool]) -> TernaryRow {
    TernaryRow {
        inputs: pattern.iter().map(|&b| if b { 1 } else { -1 }).collect(),
        target: 0, // caller fills
    }
}

fn ternary_row(pattern: &[bool], label: bool) -> TernaryRow {
    let mut row = row_of(pattern);
    row.target = if label { 1 } else { -1 };
    row
}

/// A random boolean function over `n` inputs with all of its encodings.
#[derive(Debug, Clone)]
pub struct BooleanTask {
    pub n_inputs: usize,
    /// truth[row], bit i of row = input i.
    pub truth: Vec<bool>,
    /// All 2^n rows under sign encoding.
    pub dataset: Dataset,
    /// Observation stream under ternary encoding: a literal-exercising
    /// curriculum when the function is conjunction-expressible, two
    /// shuffled enumeration passes otherwise.
    pub stream: Vec<TernaryRow>,
    /// The extracted conjunction, when the function is one.
    pub conjunction: Option<Conjunction>,
}

/// Random function over `2 <= n <= 8` inputs, reproducible from the seed.
pub fn gen_random_boolean(n: usize, seed: u64) -> Result<BooleanTask, HarnessError> {
    if !(2..=8).contains(&n) {
        return Err(HarnessError::Task(format!("input count {n} outside 2..=8")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<bool> = (0..1usize << n).map(|_| rng.gen_bool(0.5)).collect();
    Ok(boolean_task(n, truth, &mut rng))
}

fn boolean_task(n: usize, truth: Vec<bool>, rng: &mut ChaCha8Rng) -> BooleanTask {
    let dataset = (0..truth.len())
        .map(|row| {
            let pattern = pattern_of(row, n);
            Sample::new(
                pattern.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect(),
                vec![if truth[row] { 1.0 } else { -1.0 }],
            )
        })
        .collect();
    let conjunction = conjunction_from_truth(n, &truth);
    let stream = match &conjunction {
        Some(c) => curriculum_stream(c),
        None => {
            let mut rows: Vec<usize> = (0..truth.len()).collect();
            let mut stream = Vec::with_capacity(truth.len() * 2);
            for _ in 0..2 {
                shuffle(&mut rows, rng);
                stream.extend(rows.iter().map(|&r| ternary_row(&pattern_of(r, n), truth[r])));
            }
            stream
        }
    };
    BooleanTask { n_inputs: n, truth, dataset, stream, conjunction }
}

fn shuffle(rows: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..rows.len()).rev() {
        rows.swap(i, rng.gen_range(0..=i));
    }
}

/// Extract the conjunction a truth table expresses, if any: the active
/// rows must form a subcube.
pub fn conjunction_from_truth(n: usize, truth: &[bool]) -> Option<Conjunction> {
    let active: Vec<usize> = (0..truth.len()).filter(|&r| truth[r]).collect();
    if active.is_empty() {
        return None;
    }
    let and_mask = active.iter().fold(usize::MAX, |m, &r| m & r);
    let or_mask = active.iter().fold(0, |m, &r| m | r);
    let fixed_one = and_mask;
    let fixed_zero = !or_mask & ((1 << n) - 1);
    let free = n - (fixed_one.count_ones() + fixed_zero.count_ones()) as usize;
    if active.len() != 1 << free {
        return None;
    }
    Some(Conjunction {
        n_inputs: n,
        positives: (0..n).filter(|i| fixed_one >> i & 1 == 1).collect(),
        negatives: (0..n).filter(|i| fixed_zero >> i & 1 == 1).collect(),
    })
}

/// Random conjunction with at least one literal.
pub fn gen_conjunction(n: usize, seed: u64) -> Result<Conjunction, HarnessError> {
    if !(2..=8).contains(&n) {
        return Err(HarnessError::Task(format!("input count {n} outside 2..=8")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut positives = Vec::new();
        let mut negatives = Vec::new();
        for i in 0..n {
            match rng.gen_range(0..4) {
                0 => positives.push(i),
                1 => negatives.push(i),
                _ => {}
            }
        }
        if !positives.is_empty() || !negatives.is_empty() {
            return Ok(Conjunction { n_inputs: n, positives, negatives });
        }
    }
}

/// Observation curriculum that converges the learner to the conjunction's
/// exact literal sets: form (with junk active when prunable), prune junk
/// positives one at a time, then one suppression exposure with every true
/// negative active together. Negative sources are captured exactly once
/// per CSV, so the suppression exposure is joint by design.
pub fn curriculum_stream(concept: &Conjunction) -> Vec<TernaryRow> {
    let n = concept.n_inputs;
    let junk: Vec<usize> = (0..n)
        .filter(|i| !concept.positives.contains(i) && !concept.negatives.contains(i))
        .collect();
    let base = |junk_on: &dyn Fn(usize) -> bool, negs_on: bool| -> Vec<bool> {
        (0..n)
            .map(|i| {
                if concept.positives.contains(&i) {
                    true
                } else if concept.negatives.contains(&i) {
                    negs_on
                } else {
                    junk_on(i)
                }
            })
            .collect()
    };
    let mut stream = Vec::new();
    if concept.positives.is_empty() {
        // Junk can only be pruned while another positive stays active, so
        // positive-free concepts form junk-free.
        let p = base(&|_| false, false);
        stream.push(ternary_row(&p, concept.value(&p)));
    } else {
        let p = base(&|_| true, false);
        stream.push(ternary_row(&p, concept.value(&p)));
        for &j in &junk {
            let p = base(&|i| i != j, false);
            stream.push(ternary_row(&p, concept.value(&p)));
        }
    }
    if !concept.negatives.is_empty() {
        let p = base(&|_| false, true);
        stream.push(ternary_row(&p, concept.value(&p)));
    }
    stream
}

/// Random observation stream for replay fuzzing: a persistent context,
/// resampled wholesale with 10% probability per step and locally perturbed
/// otherwise, labeled by the concept.
pub fn fuzz_stream(concept: &Conjunction, len: usize, seed: u64) -> Vec<TernaryRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = concept.n_inputs;
    let mut pattern: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    (0..len)
        .map(|step| {
            if step > 0 {
                if rng.gen_bool(0.1) {
                    pattern = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                } else if rng.gen_bool(0.3) {
                    let flip = rng.gen_range(0..n);
                    pattern[flip] = !pattern[flip];
                }
            }
            ternary_row(&pattern, concept.value(&pattern))
        })
        .collect()
}

/// Fresh single-target model plus its input ids bound to a stream's width.
pub fn model_for_stream(
    n_inputs: usize,
    config: evodev_core::csv::CsvConfig,
) -> (CsvModel, Vec<SvId>, SvId) {
    let mut model = CsvModel::new(config);
    let inputs = (0..n_inputs).map(|_| model.add_input()).collect();
    let target = model.add_target();
    (model, inputs, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_xor_matches_the_sign_convention() {
        let data = gen_signed_xor();
        assert_eq!(data.len(), 4);
        assert_eq!(data[0].targets[0], -1.0); // (-1, -1) -> -1
        assert_eq!(data[2].targets[0], 1.0); // (+1, -1) -> +1
        // Antisymmetric under a single input flip.
        for (a, b) in [(0, 1), (0, 2), (3, 1), (3, 2)] {
            assert_eq!(data[a].targets[0], -data[b].targets[0]);
        }
    }

    #[test]
    fn random_boolean_is_reproducible_and_range_checked() {
        let a = gen_random_boolean(2, 99).unwrap();
        let b = gen_random_boolean(2, 99).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.dataset.len(), 4);
        assert!(gen_random_boolean(9, 0).is_err());
        assert!(gen_random_boolean(1, 0).is_err());
    }

    #[test]
    fn subcube_detection_extracts_literals() {
        // y = x0 and not x2 over 3 inputs.
        let c = Conjunction { n_inputs: 3, positives: vec![0], negatives: vec![2] };
        let found = conjunction_from_truth(3, &c.truth_table()).unwrap();
        assert_eq!(found, c);
        // Parity is not a conjunction.
        let parity: Vec<bool> = (0..8).map(|r: usize| r.count_ones() % 2 == 1).collect();
        assert!(conjunction_from_truth(3, &parity).is_none());
    }

    #[test]
    fn curriculum_trains_to_the_truth_table() {
        use evodev_core::csv::{predict, CsvConfig};
        for seed in 0..30 {
            let concept = gen_conjunction(5, seed).unwrap();
            let (mut model, inputs, target) = model_for_stream(5, CsvConfig::default());
            for row in curriculum_stream(&concept) {
                model.observe(&row.instance(&inputs, target)).unwrap();
            }
            for row_idx in 0..32usize {
                let pattern = pattern_of(row_idx, 5);
                let assignment: std::collections::BTreeMap<_, _> = inputs
                    .iter()
                    .zip(&pattern)
                    .map(|(&id, &b)| {
                        (id, if b { StateValue::Active } else { StateValue::Inactive })
                    })
                    .collect();
                let got = predict(&model, &assignment)[&target] == StateValue::Active;
                assert_eq!(got, concept.value(&pattern), "seed {seed} row {row_idx}");
            }
        }
    }
}

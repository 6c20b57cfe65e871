//! Sequential-task protocols.

use crate::csv::{CsvConfig, CsvError, CsvModel, Instance, ReplayAuditor, ReplayReport};
use crate::graph::{Dataset, GraphError};

use super::mlp::{train_static, Mlp};

/// Two datasets over the same input/output arity.
#[derive(Debug, Clone)]
pub struct TaskPair {
    pub task_a: Dataset,
    pub task_b: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub phase: &'static str,
    pub step: usize,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
}

#[derive(Debug, Clone)]
pub struct SequentialOutcome {
    pub timeline: Vec<PhasePoint>,
    /// Task-A accuracy right after its own training phase.
    pub peak_a: f64,
    /// Task-A accuracy after the task-B phase.
    pub final_a: f64,
    pub final_b: f64,
}

impl SequentialOutcome {
    /// Percentage-point fall of task-A accuracy across the second phase.
    pub fn drop_a(&self) -> f64 {
        (self.peak_a - self.final_a) * 100.0
    }
}

/// Train on task A, then on task B, evaluating both tasks along the way.
pub fn run_sequential(
    mlp: &mut Mlp,
    pair: &TaskPair,
    steps_per_phase: usize,
    learning_rate: f64,
    eval_every: usize,
) -> Result<SequentialOutcome, GraphError> {
    let mut timeline = Vec::new();
    let eval_every = eval_every.max(1);
    let mut record = |mlp: &Mlp, phase, step| {
        timeline.push(PhasePoint {
            phase,
            step,
            accuracy_a: mlp.accuracy(&pair.task_a),
            accuracy_b: mlp.accuracy(&pair.task_b),
        });
    };
    record(mlp, "a", 0);
    let mut step = 0;
    while step < steps_per_phase {
        let chunk = eval_every.min(steps_per_phase - step);
        train_static(mlp, &pair.task_a, chunk, learning_rate)?;
        step += chunk;
        record(mlp, "a", step);
    }
    let peak_a = mlp.accuracy(&pair.task_a);
    let mut step = 0;
    while step < steps_per_phase {
        let chunk = eval_every.min(steps_per_phase - step);
        train_static(mlp, &pair.task_b, chunk, learning_rate)?;
        step += chunk;
        record(mlp, "b", step);
    }
    Ok(SequentialOutcome {
        timeline,
        peak_a,
        final_a: mlp.accuracy(&pair.task_a),
        final_b: mlp.accuracy(&pair.task_b),
    })
}

/// Train on the union of both tasks for the same total budget.
pub fn run_joint(
    mlp: &mut Mlp,
    pair: &TaskPair,
    total_steps: usize,
    learning_rate: f64,
) -> Result<(f64, f64), GraphError> {
    let mut joint = pair.task_a.clone();
    joint.extend(pair.task_b.iter().cloned());
    train_static(mlp, &joint, total_steps, learning_rate)?;
    Ok((mlp.accuracy(&pair.task_a), mlp.accuracy(&pair.task_b)))
}

#[derive(Debug, Clone)]
pub struct CsvPhaseStats {
    pub phase: &'static str,
    pub observed: usize,
    pub csvs_after: usize,
    /// Destructive changes to archived responses so far.
    pub violations_so_far: usize,
    /// Fraction of archived determined responses preserved, 1.0 exactly
    /// when no destructive change has happened.
    pub preserved_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct CsvSequentialOutcome {
    pub timeline: Vec<CsvPhaseStats>,
    pub report: ReplayReport,
}

impl CsvSequentialOutcome {
    pub fn fully_preserved(&self) -> bool {
        self.report.violations.is_empty()
    }
}

/// The same sequential protocol through the rule learner, with every past
/// instance replayed after every observation. Preservation here is exact
/// by construction, not a matter of degree.
pub fn run_sequential_csv(
    model: &mut CsvModel,
    stream_a: Vec<Instance>,
    stream_b: Vec<Instance>,
) -> Result<CsvSequentialOutcome, CsvError> {
    let mut auditor = ReplayAuditor::new();
    let mut timeline = Vec::new();
    let mut observed = 0;
    for (phase, stream) in [("a", stream_a), ("b", stream_b)] {
        for instance in stream {
            auditor.observe_checked(model, instance)?;
            observed += 1;
        }
        let report = auditor.report();
        let destructive = report.violations.len();
        let preserved = if report.checks == 0 {
            1.0
        } else {
            1.0 - destructive as f64 / report.checks as f64
        };
        timeline.push(CsvPhaseStats {
            phase,
            observed,
            csvs_after: model.num_csvs(),
            violations_so_far: destructive,
            preserved_fraction: preserved,
        });
    }
    Ok(CsvSequentialOutcome { timeline, report: auditor.into_report() })
}

/// Fresh model over `n_inputs` input SVs and one target SV.
pub fn single_target_model(n_inputs: usize, config: CsvConfig) -> (CsvModel, Vec<crate::csv::SvId>, crate::csv::SvId) {
    let mut model = CsvModel::new(config);
    let inputs = (0..n_inputs).map(|_| model.add_input()).collect();
    let target = model.add_target();
    (model, inputs, target)
}

//! Static-network baseline and the sequential-task protocols.
//!
//! A fixed-topology tanh MLP trained by plain full-batch gradient descent
//! reproduces destructive adaptation: training on a second task erases the
//! weight patterns carrying the first. The same protocol run through the
//! variation-selection rule learner preserves every archived response.

mod mlp;
mod sequential;

pub use mlp::{Mlp, TrainOutcome};
pub use sequential::{
    run_joint, run_sequential, run_sequential_csv, CsvPhaseStats, CsvSequentialOutcome, PhasePoint,
    SequentialOutcome, TaskPair,
};

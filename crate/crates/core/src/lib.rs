//! Two small learning systems that grow structure instead of relying on
//! overparameterized static substrates, plus a static-network baseline used
//! to reproduce the destructive-adaptation contrast they are built to avoid.
//!
//! - [`graph`] — mutable directed-acyclic computation graphs with forward
//!   evaluation and per-sample reverse-mode gradients, including two-term
//!   modulatory nodes.
//! - [`growth`] — adaptive-potential accounting, neutral edge generation,
//!   edge-node conversion, the growth-aware training loop, and the
//!   covariance termination check.
//! - [`csv`] — ternary state variables and conditioning state variables:
//!   a single-pass variation-and-selection rule learner with replay
//!   invariance instrumentation.
//! - [`baselines`] — a plain fixed-topology MLP and the sequential-task
//!   protocols that exhibit (network) or avoid (rule learner) destructive
//!   adaptation.

pub mod baselines;
pub mod csv;
pub mod graph;
pub mod growth;

//! Energy-metered training strategies for desk-scale spoken language
//! understanding (SLU) models.
//!
//! The crate trains small CTC sequence models under staged strategies
//! (`3steps`, `2steps`, `1step`, plus transfer and fine-tuned-feature
//! variants), meters electric energy while doing so, and compares the
//! resulting models by cost-effectiveness: the extra kilowatt-hours spent
//! per point of metric improvement (kWh/p).
//!
//! Modules:
//! - [`metrics`] — CER / intent accuracy scoring and kWh/p analytics
//! - [`energy`] — pluggable energy meters and per-run energy ledgers
//! - [`ctc`] — CTC loss, analytic gradient, best-path decoding
//! - [`model`] — pyramidal LSTM encoder + dual-attention decoder with
//!   manual backpropagation and checkpoint transfer
//! - [`corpus`] — synthetic concept-annotated corpus generation and I/O
//! - [`strategies`] — stage planning and metered strategy execution

pub mod corpus;
pub mod ctc;
pub mod energy;
pub mod metrics;
pub mod model;
pub mod strategies;

mod rng;

pub use metrics::{AlignmentStats, ExperimentRecord, KwhPerPoint, MetricKind};
pub use model::{ModelCheckpoint, ModelConfig};
pub use strategies::{StagePlan, StrategyKind, StrategySpec};

//! Data generators, training pipelines and audits for the three experiments.

pub mod audit;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod neohookean;
pub mod signature;
pub mod sparse;
pub mod train;

pub use audit::{audit_suite, equivariance_audit, AuditRecord};
pub use config::{ExperimentConfig, ExperimentKind, ModelChoice};
pub use dataset::{generate_dataset, Dataset, DatasetHeader, Split};
pub use metrics::{summary_table, MetricsLog};
pub use train::{check_gradients, eval_baseline, eval_experiment, train_experiment, TrainOutcome};

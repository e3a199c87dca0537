//! Closed-form optimum, error bounds, randomization diagnostics and metrics.

pub mod error_bound;
pub mod lemma;
pub mod linalg;
pub mod metrics;
pub mod randomization;

pub use error_bound::{error_report, gronwall_series, prediction_error_series, CPolicy, ErrorReport};
pub use lemma::{linear_optimum, SnapshotMatrix};
pub use metrics::{rollout_mse, summarize, MseSummary};
pub use randomization::{randomization_check, RandomizationDiagnostics, TermEstimate};

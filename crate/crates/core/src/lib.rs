//! Metric condensation: covering numbers, quotient pseudometrics, separators,
//! hierarchical condensation towers, block-parity updates and the
//! slow-versus-fast inference comparison.

pub mod config;
pub mod cover;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod hierarchy;
pub mod inference;
pub mod io;
pub mod metric;
pub mod parity;
pub mod quotient;
pub mod rng;
pub mod separator;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind};
pub use cover::{covering_number_exact, covering_number_greedy, CoverMethod, CoverResult};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentOutcome};
pub use hierarchy::{
    build_hierarchy, required_depth, verify_telescoping, CondensationPolicy, Hierarchy, LevelSpace,
    Stream, Verdict,
};
pub use metric::{diameter, validate_metric, FiniteMetricSpace, Metric, PointCloud, SegmentSpace};
pub use quotient::{build_quotient, contract_region, Partition, QuotientSpace, Token};
pub use separator::{fiber_quotient, recursive_separation_check, urysohn_separator, Separator};

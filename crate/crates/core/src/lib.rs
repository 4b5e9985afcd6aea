//! Architecture-conditional scaling laws for decoder-only transformers:
//! parameter accounting, calibrated loss laws and their fitting, a roofline
//! inference-cost model, and a search for shapes that maximise modeled
//! throughput under a loss ceiling.

// Negated float comparisons are used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod cli;
pub mod corpus;
pub mod cost;
pub mod fit;
pub mod io;
pub mod laws;
pub mod runs;
pub mod search;
pub mod synthetic;

pub use arch::{ArchError, ArchGridSpec, ArchitectureConfig, Snapping, VariantAxis};
pub use cost::{CostError, CostReport, HardwareProfile, Workload};
pub use fit::{FitError, FitOptions, FitResult};
pub use laws::{ChinchillaParams, ConditionalLaw, LawError, LawForm, RefLossSource};
pub use runs::RunRecord;
pub use search::{CandidateEvaluation, SearchError, SearchProblem};

//! Experiment runner: declarative JSON specs in, reproducible CSV/JSON
//! artifacts and a checksummed manifest out.

pub mod manifest;
pub mod report;
pub mod runner;
pub mod spec;

pub use runner::{execute, Outputs, RunError, RunOutcome};
pub use spec::{parse_and_validate, validate, Diagnostics, ExperimentSpec, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_STRICT: i32 = 4;

//! Numerical laboratory for first-order mean-field particle systems with
//! moderately singular, non-attractive interaction kernels.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: interaction kernels, their evaluation and numerical
//!   certificates (sign condition, singularity constant, divergence).
//! * [`config_stats`]: particle configurations and their distance
//!   statistics (minimal distances, close sets, cut-off sums).
//! * [`neighbors`]: exact cell-list neighbour search backing the above.
//! * [`transport`]: exact discrete Wasserstein distances.
//! * [`dynamics`]: direct-summation integrator and the blob reference
//!   solver for the limit equation.
//! * [`verifier`]: finite-N checks of the convergence hypotheses and
//!   conclusions, and the bootstrap monitor.
//! * [`montecarlo`]: i.i.d. sampling and Monte Carlo estimators for the
//!   probabilistic scaling statements.

pub mod config_stats;
pub mod dynamics;
pub mod error;
pub mod jsonfloat;
pub mod kernels;
pub mod montecarlo;
pub mod neighbors;
pub mod stats;
pub mod summation;
pub mod transport;
pub mod verifier;

pub use config_stats::{cutoff_sum, distance_report, CutoffSums, DistanceReport, ParticleConfig};
pub use dynamics::{IntegratorControls, Scheme, Trajectory};
pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use montecarlo::DensitySpec;
pub use transport::{PointCloud, TransportResult};

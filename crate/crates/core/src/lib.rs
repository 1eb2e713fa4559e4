//! Sparse signal reconstruction by iterative support detection.
//!
//! The crate is organized around a weighted l1 solver (`wl1`), the ISD outer
//! loop (`isd`), reweighted l1/least-squares baselines (`reweighted`),
//! matrix-free sensing operators (`linop`), test-signal generation
//! (`signal`), and exact small-scale oracles plus null-space-property
//! calculators (`oracles`).

pub mod haar;
pub mod isd;
pub mod linop;
pub mod oracles;
pub mod reweighted;
pub mod rng;
pub mod signal;
pub mod util;
pub mod wl1;

pub use isd::{DetectionRule, IsdConfig, IterationDiagnostics, ReconReport, StopRule};
pub use linop::{LinopError, SensingOperator, SynthesisTransform};
pub use reweighted::{IrlsEpsSchedule, ReweightConfig, ReweightError};
pub use signal::{Signal, SignalKind};
pub use wl1::{SolveOutcome, SolverConfig, SolverError, SolverState, Weights};

//! Kinetic Monte Carlo for the exclusion process on a periodic lattice.

pub mod functional;
pub mod lattice;
pub mod run;

pub use functional::{FunctionalKind, FunctionalSpec};
pub use lattice::{init_bernoulli, Change, Event, LatticeConfig, SimError};
pub use run::{
    covariance_identity_check, event_log_csv, finite_size_exceeded, initial_config, replay, run_occupation,
    run_replica, CouplingReport, CouplingRow, Estimate, ReplicaRecord, ReplicaStats, RunOptions,
};

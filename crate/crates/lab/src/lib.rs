//! Configuration, orchestration and output for maser simulations.
//!
//! The `maser` binary wraps these modules; they are exposed as a library so
//! that runs can also be driven from tests and other programs.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod config;
pub mod output;
pub mod run;
pub mod scenarios;

pub use config::{parse_config, ConfigError, Document, SimulationConfig, SweepPoint};
pub use run::{run, RunReport};

/// Process exit statuses of the `maser` binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const GATE: i32 = 4;
}

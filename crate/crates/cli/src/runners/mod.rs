//! Study drivers behind the CLI subcommands. Each takes a validated
//! [`RunConfig`](crate::config::RunConfig), computes one flat record per grid
//! point, and returns them together with any cross-point summaries.

pub mod classical;
pub mod gg;
pub mod rsb;
pub mod scaling;

pub use classical::{run_classical, ClassicalResult};
pub use gg::{run_gg, GgResult};
pub use rsb::{run_rsb, RsbResult};
pub use scaling::{run_scaling, ScalingResult};

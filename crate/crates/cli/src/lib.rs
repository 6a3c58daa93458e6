//! Experiment driver for the disordered-spin laboratory: validated run
//! configurations, four study runners (self-averaging scaling, overlap
//! identities, classical variance proportions, inter-replica coupling
//! sweeps), and flat CSV/JSONL record output with embedded provenance.

pub mod config;
pub mod error;
pub mod records;
pub mod runners;

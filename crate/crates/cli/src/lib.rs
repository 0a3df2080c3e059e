//! Experiment harness for the exact scheduling simulator: spec-driven
//! sweeps, instance and prediction generation, oracle baselines, and
//! CSV/summary reporting.
//!
//! The binary (`precsched`) wires these modules to subcommands `gen`,
//! `opt`, `run`, `eval`, and `report`; everything here is a library so the
//! same operations are callable from tests.

pub mod error;
pub mod registry;
pub mod report;
pub mod run;
pub mod spec;

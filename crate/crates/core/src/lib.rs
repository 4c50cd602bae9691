//! Cooling plant co-design optimizer.
//!
//! Models a liquid-cooled data center plant in which N coolant distribution
//! units (CDUs) are grouped into K parallel subloops. The library enumerates
//! every way of partitioning the CDUs, minimizes total pump + cooling tower
//! fan power at each telemetry timestep under per-subloop return temperature
//! limits, and aggregates annual energy and savings metrics for the full
//! design space.
//!
//! Module map:
//! - [`plant_model`]: reduced-order pump, fan, and energy-balance physics
//! - [`topology`]: partition enumeration, CDU-to-subloop assignment, workload
//!   equalization
//! - [`telemetry`]: dataset schema, CSV ingestion/validation, synthetic data
//! - [`solver`]: per-timestep constrained minimization plus closed-form oracles
//! - [`sweep`]: design-space sweep, annual aggregation, and derived metrics

// Negated float comparisons like `!(v > 0.0)` are domain guards that must
// also reject NaN; the direct comparison would silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plant_model;
pub mod solver;
pub mod sweep;
pub mod telemetry;
pub mod topology;

pub use plant_model::{ObjectiveGradient, OperatingPoint, PlantParams, SubloopLoads};
pub use solver::{SolveResult, SolveStatus, SolverConfig, Strategy};
pub use sweep::{AnnualResult, AssignmentPolicy, EvalSpec, FractionMode, SweepResult};
pub use telemetry::{Dataset, TimestepRecord};
pub use topology::Partition;

//! Smooth Lipschitz approximation on analytic model manifolds.
//!
//! The pipeline pulls a Lipschitz function back through exponential charts,
//! extends and truncates it on each tangent grid, regularizes it with
//! quadratic sup-inf convolutions and a compact mollifier, and glues the
//! chart-local results with a telescoped partition of unity whose Lipschitz
//! budgets are tracked explicitly. Every quantitative guarantee is checked
//! numerically and reported in a [`glue::LipschitzReport`].
//!
//! Module map:
//!
//! - [`manifold`]: model manifolds, exponential charts, greedy covers.
//! - [`field`]: tangent grids, sampled fields, Lipschitz estimators.
//! - [`envelope`]: quadratic inf/sup convolutions and their composition.
//! - [`extend`]: McShane extension and truncation.
//! - [`smooth`]: compact mollification.
//! - [`unity`]: cutoffs, chart bumps, partition of unity, uniform bumps.
//! - [`glue`]: the end-to-end approximation, verification and the
//!   perturbation search.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod exec;
pub mod extend;
pub mod field;
pub mod glue;
pub mod manifold;
pub mod smooth;
pub mod unity;

pub use error::{Error, Result};
pub use exec::Execution;
pub use field::{FunctionOracle, GridField, NodeSet, TangentGrid};
pub use glue::{ApproxRequest, ApproxSettings, GluedFunction, LipschitzReport, Tolerance};
pub use manifold::{Chart, CoverAtlas, ManifoldModel, Point, Region, Tangent};

//! Generalized metrics of order `n`: a value `g(x_0, ..., x_n)` assigned to
//! `n + 1` points at once, subject to positive definiteness, permutation
//! invariance, monotonicity under support growth, and a split triangle
//! inequality. Order 1 recovers ordinary metrics; order 2 recovers the
//! familiar three-point generalized metrics.
//!
//! The crate is organized around finite ground samples: a list of points
//! (coordinate vectors or opaque labels) together with a base distance.
//! On top of that sit
//!
//! * [`construct`]: a catalog of concrete g-metric functionals (discrete,
//!   diameter, average, max, shortest path, enclosing ball, ...) plus
//!   sum and post-composition combinators,
//! * [`axioms`]: exhaustive and seeded-sample checkers that hunt for axiom
//!   violations and produce machine-readable reports,
//! * [`analysis`]: balls, derived ordinary metrics, convergence and Cauchy
//!   diagnostics, epsilon-nets,
//! * [`fixedpoint`]: contraction-style fixed point solvers with per-step
//!   certificates and theoretical bound tracking,
//! * [`fixtures`]: seeded generators for samples, metric matrices, and
//!   deliberately corrupted variants, used heavily by the test suite.
//!
//! Everything is deterministic under a fixed seed; nothing here touches the
//! network or the clock.

pub mod analysis;
pub mod axioms;
pub mod construct;
pub mod fixedpoint;
pub mod fixtures;
mod meb;
pub mod space;

pub use axioms::{AuditSummary, AxiomId, CheckConfig, ViolationReport};
pub use construct::{Claim, ConstructionSpec, GMetric, TransformSpec};
pub use fixedpoint::{
    ContractionCertificate, IterationBudget, IterationSpace, OrbitPoint, OrbitTrace, Regime,
    SelfMap, StopReason,
};
pub use space::{GroundSample, MetricSource, PointTuple, SplitSpec};

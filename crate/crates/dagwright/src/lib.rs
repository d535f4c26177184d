//! dagwright — a causal-diagram toolkit.
//!
//! Parse directed acyclic graphs from a small text format, enumerate and
//! classify the paths between variables, decide d-separation, identify
//! variable roles (confounder, collider, mediator, instrument, moderator),
//! compute minimal backdoor adjustment sets, and verify all of the
//! qualitative claims numerically with a linear-Gaussian structural-model
//! engine plus regression diagnostics.
//!
//! The crate is organized around the pipeline:
//!
//! - [`graph`] — validated immutable DAGs with reachability queries;
//! - [`dsl`] — the `.dag` file format: parse, canonical serialize, DOT;
//! - [`paths`] — simple-path enumeration, classification, d-separation;
//! - [`identify`] — role reports, backdoor paths, minimal adjustment sets;
//! - [`scm`] — linear-Gaussian simulation, exact implied covariance, path
//!   tracing, OLS and IV estimators, scripted bias demos;
//! - [`diagnostics`] — the regression assumption checklist and the
//!   shear-strength worked example;
//! - [`corpus`] — five bundled diagrams used by the demos and tests;
//! - [`cli`] — the `dagwright` command-line surface.

pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod dsl;
pub mod graph;
pub mod identify;
pub mod paths;
pub mod scm;

pub use dsl::{parse, serialize, to_dot, DagDocument, DslError};
pub use graph::{Dag, DagBuilder, Edge, GraphError, Moderation, NodeId};
pub use identify::{
    backdoor_paths, check_instrument, classify_roles, find_adjustment_sets, AdjustmentResult,
    InstrumentReport, RoleReport,
};
pub use paths::{
    classify_path, d_separated, enumerate_paths, is_blocked, CausalQuery, Path, PathClass,
    PathKind, Separation, Traversal,
};

//! The `.dag` text format: parsing, canonical serialization, DOT export.
//!
//! A document is a named graph plus optional analysis defaults: exposure and
//! outcome markers, an adjusted (conditioning) set, per-edge coefficients,
//! per-moderation interaction coefficients, and per-node noise variances.
//! The grammar, informally:
//!
//! ```text
//! doc      := 'dag' NAME '{' stmt* '}'
//! stmt     := nodeDecl | edgeDecl | modDecl | marker | noiseDecl
//! nodeDecl := ID attrs?
//! edgeDecl := ID '->' ID attrs?
//! modDecl  := ID '~>' '(' ID '->' ID ')' attrs?
//! marker   := ('exposure' | 'outcome' | 'adjusted' | 'latent') ID
//! noiseDecl:= 'noise' ID REAL
//! attrs    := '[' key '=' value (',' key '=' value)* ']'    key in {label, coef}
//! ```
//!
//! Whitespace and newlines are interchangeable outside string literals, `#`
//! starts a comment, statement order is irrelevant, and nodes mentioned by an
//! edge or moderation are declared implicitly. `label` takes a quoted string
//! and belongs on node declarations; `coef` takes a number and belongs on
//! edges and moderations. The marker words are reserved and cannot name
//! nodes.
//!
//! [`serialize`] emits the canonical form — nodes in canonical order, one
//! statement per line, groups in a fixed sequence — so `parse(serialize(d))`
//! reproduces `d` exactly and serialization is idempotent.

mod dot;
mod lexer;
mod parser;
mod printer;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{Dag, Edge, GraphError, Moderation, NodeId};
use crate::paths::CausalQuery;

pub use dot::to_dot;

/// Parse failure, always located in the input (1-based line and column).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: {message}")]
    Semantic {
        line: usize,
        col: usize,
        message: String,
    },
}

impl DslError {
    pub fn line_col(&self) -> (usize, usize) {
        match self {
            DslError::Syntax { line, col, .. } | DslError::Semantic { line, col, .. } => {
                (*line, *col)
            }
        }
    }
}

/// A parsed `.dag` file: validated graph plus analysis defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct DagDocument {
    pub(crate) name: String,
    pub(crate) dag: Dag,
    pub(crate) exposure: Option<NodeId>,
    pub(crate) outcome: Option<NodeId>,
    pub(crate) adjusted: BTreeSet<NodeId>,
    pub(crate) edge_coefs: BTreeMap<Edge, f64>,
    pub(crate) moderation_coefs: BTreeMap<Moderation, f64>,
    pub(crate) noise: BTreeMap<NodeId, f64>,
}

impl DagDocument {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn exposure(&self) -> Option<&NodeId> {
        self.exposure.as_ref()
    }

    pub fn outcome(&self) -> Option<&NodeId> {
        self.outcome.as_ref()
    }

    pub fn adjusted(&self) -> &BTreeSet<NodeId> {
        &self.adjusted
    }

    /// Coefficients stated in the file; absent edges default elsewhere.
    pub fn edge_coefs(&self) -> &BTreeMap<Edge, f64> {
        &self.edge_coefs
    }

    pub fn moderation_coefs(&self) -> &BTreeMap<Moderation, f64> {
        &self.moderation_coefs
    }

    pub fn noise(&self) -> &BTreeMap<NodeId, f64> {
        &self.noise
    }

    /// The query implied by the document's markers, if both are present.
    pub fn default_query(&self) -> Result<Option<CausalQuery>, GraphError> {
        match (&self.exposure, &self.outcome) {
            (Some(x), Some(y)) => {
                let conditioned: Vec<&str> = self.adjusted.iter().map(NodeId::as_str).collect();
                CausalQuery::new(&self.dag, x.as_str(), y.as_str(), &conditioned).map(Some)
            }
            _ => Ok(None),
        }
    }
}

/// Parse a `.dag` document.
pub fn parse(text: &str) -> Result<DagDocument, DslError> {
    parser::parse(text)
}

/// Canonical text form; see the module docs for the guarantees.
pub fn serialize(doc: &DagDocument) -> String {
    printer::serialize(doc)
}

/// Programmatic document construction, mirroring what a file would declare.
/// Semantics match [`parse`]; errors lose source positions (reported at 0:0).
#[derive(Debug, Default, Clone)]
pub struct DocumentBuilder {
    name: String,
    stmts: Vec<parser::SpannedStmt>,
}

impl DocumentBuilder {
    pub fn new(name: &str) -> Self {
        DocumentBuilder {
            name: name.to_owned(),
            stmts: Vec::new(),
        }
    }

    pub fn node(mut self, name: &str) -> Self {
        self.stmts.push(parser::stmt_node(name, None));
        self
    }

    pub fn labeled_node(mut self, name: &str, label: &str) -> Self {
        self.stmts.push(parser::stmt_node(name, Some(label)));
        self
    }

    pub fn edge(mut self, from: &str, to: &str) -> Self {
        self.stmts.push(parser::stmt_edge(from, to, None));
        self
    }

    pub fn edge_with_coef(mut self, from: &str, to: &str, coef: f64) -> Self {
        self.stmts.push(parser::stmt_edge(from, to, Some(coef)));
        self
    }

    pub fn moderation(mut self, moderator: &str, from: &str, to: &str, coef: Option<f64>) -> Self {
        self.stmts.push(parser::stmt_mod(moderator, from, to, coef));
        self
    }

    pub fn exposure(mut self, node: &str) -> Self {
        self.stmts.push(parser::stmt_marker("exposure", node));
        self
    }

    pub fn outcome(mut self, node: &str) -> Self {
        self.stmts.push(parser::stmt_marker("outcome", node));
        self
    }

    pub fn adjusted(mut self, node: &str) -> Self {
        self.stmts.push(parser::stmt_marker("adjusted", node));
        self
    }

    pub fn latent(mut self, node: &str) -> Self {
        self.stmts.push(parser::stmt_marker("latent", node));
        self
    }

    pub fn noise(mut self, node: &str, var: f64) -> Self {
        self.stmts.push(parser::stmt_noise(node, var));
        self
    }

    pub fn build(self) -> Result<DagDocument, DslError> {
        parser::assemble(self.name, self.stmts)
    }
}

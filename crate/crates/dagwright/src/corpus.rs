//! The bundled diagram corpus: five small `.dag` files exercising one
//! variable role each. They ship inside the binary (the CLI accepts their
//! ids wherever it accepts a file path) and double as test fixtures.

use crate::dsl::{parse, DagDocument, DslError};

/// A bundled diagram.
#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub id: &'static str,
    pub text: &'static str,
    /// The role the case is built to showcase.
    pub headline_role: &'static str,
}

pub const CORPUS: &[CorpusEntry] = &[
    CorpusEntry {
        id: "fig1",
        text: include_str!("../corpus/fig1.dag"),
        headline_role: "confounder",
    },
    CorpusEntry {
        id: "flood",
        text: include_str!("../corpus/flood.dag"),
        headline_role: "confounder",
    },
    CorpusEntry {
        id: "bridges",
        text: include_str!("../corpus/bridges.dag"),
        headline_role: "collider",
    },
    CorpusEntry {
        id: "quake",
        text: include_str!("../corpus/quake.dag"),
        headline_role: "mediator",
    },
    CorpusEntry {
        id: "fire",
        text: include_str!("../corpus/fire.dag"),
        headline_role: "moderator",
    },
];

pub fn ids() -> Vec<&'static str> {
    CORPUS.iter().map(|e| e.id).collect()
}

pub fn entry(id: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.id == id)
}

pub fn text(id: &str) -> Option<&'static str> {
    entry(id).map(|e| e.text)
}

/// Parse a bundled diagram. Corpus files are validated by the test suite, so
/// for known ids this only fails if the build itself is broken.
pub fn document(id: &str) -> Option<Result<DagDocument, DslError>> {
    entry(id).map(|e| parse(e.text))
}

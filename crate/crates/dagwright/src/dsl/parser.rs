//! Recursive-descent parser plus the statement assembler shared with
//! [`super::DocumentBuilder`]. Statement order never matters: declarations
//! are collected first and validated as a whole.

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{lex, Tok, Token};
use super::{DagDocument, DslError};
use crate::graph::{DagBuilder, Edge, GraphError, Moderation, NodeId, RESERVED_WORDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Span {
    pub line: usize,
    pub col: usize,
}

impl Span {
    const BUILDER: Span = Span { line: 0, col: 0 };

    fn of(token: &Token) -> Span {
        Span {
            line: token.line,
            col: token.col,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MarkerKind {
    Exposure,
    Outcome,
    Adjusted,
    Latent,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RawStmt {
    Node {
        name: String,
        label: Option<String>,
    },
    Edge {
        from: String,
        to: String,
        coef: Option<f64>,
    },
    Mod {
        moderator: String,
        from: String,
        to: String,
        coef: Option<f64>,
    },
    Marker {
        kind: MarkerKind,
        node: String,
    },
    Noise {
        node: String,
        var: f64,
    },
}

pub(crate) type SpannedStmt = (Span, RawStmt);

pub(crate) fn stmt_node(name: &str, label: Option<&str>) -> SpannedStmt {
    (
        Span::BUILDER,
        RawStmt::Node {
            name: name.to_owned(),
            label: label.map(str::to_owned),
        },
    )
}

pub(crate) fn stmt_edge(from: &str, to: &str, coef: Option<f64>) -> SpannedStmt {
    (
        Span::BUILDER,
        RawStmt::Edge {
            from: from.to_owned(),
            to: to.to_owned(),
            coef,
        },
    )
}

pub(crate) fn stmt_mod(moderator: &str, from: &str, to: &str, coef: Option<f64>) -> SpannedStmt {
    (
        Span::BUILDER,
        RawStmt::Mod {
            moderator: moderator.to_owned(),
            from: from.to_owned(),
            to: to.to_owned(),
            coef,
        },
    )
}

pub(crate) fn stmt_marker(kind: &str, node: &str) -> SpannedStmt {
    let kind = match kind {
        "exposure" => MarkerKind::Exposure,
        "outcome" => MarkerKind::Outcome,
        "adjusted" => MarkerKind::Adjusted,
        "latent" => MarkerKind::Latent,
        other => unreachable!("not a marker keyword: {other}"),
    };
    (
        Span::BUILDER,
        RawStmt::Marker {
            kind,
            node: node.to_owned(),
        },
    )
}

pub(crate) fn stmt_noise(node: &str, var: f64) -> SpannedStmt {
    (
        Span::BUILDER,
        RawStmt::Noise {
            node: node.to_owned(),
            var,
        },
    )
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, token: &Token, expected: &str) -> DslError {
        DslError::Syntax {
            line: token.line,
            col: token.col,
            message: format!("expected {expected}, found {}", token.tok.describe()),
        }
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<Token, DslError> {
        if &self.peek().tok == want {
            Ok(self.bump())
        } else {
            Err(self.syntax(self.peek(), expected))
        }
    }

    /// An identifier in node position: reserved words are refused here.
    fn expect_node_name(&mut self) -> Result<(Span, String), DslError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(name) if RESERVED_WORDS.contains(&name.as_str()) => Err(DslError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("`{name}` is a reserved word and cannot name a node"),
            }),
            Tok::Ident(name) => {
                let name = name.clone();
                self.bump();
                Ok((Span::of(&t), name))
            }
            _ => Err(self.syntax(&t, "a node name")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AttrValue {
    Real(f64),
    Str(String),
}

type Attrs = Vec<(Span, String, AttrValue)>;

pub(crate) fn parse(text: &str) -> Result<DagDocument, DslError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };

    match &p.peek().tok {
        Tok::Ident(kw) if kw == "dag" => {
            p.bump();
        }
        _ => return Err(p.syntax(p.peek(), "keyword `dag`")),
    }
    let name = match &p.peek().tok {
        Tok::Ident(n) => {
            let n = n.clone();
            p.bump();
            n
        }
        _ => return Err(p.syntax(p.peek(), "a document name")),
    };
    p.expect(&Tok::LBrace, "`{`")?;

    let mut stmts: Vec<SpannedStmt> = Vec::new();
    loop {
        let t = p.peek().clone();
        match &t.tok {
            Tok::RBrace => {
                p.bump();
                break;
            }
            Tok::Eof => return Err(p.syntax(&t, "a statement or `}`")),
            Tok::Ident(word) => match word.as_str() {
                "exposure" | "outcome" | "adjusted" | "latent" => {
                    let kind = word.clone();
                    p.bump();
                    let (_, node) = p.expect_node_name()?;
                    let (span, stmt) = stmt_marker(&kind, &node);
                    let _ = span;
                    stmts.push((Span::of(&t), stmt));
                }
                "noise" => {
                    p.bump();
                    let (_, node) = p.expect_node_name()?;
                    let var = match &p.peek().tok {
                        Tok::Real(v) => {
                            let v = *v;
                            p.bump();
                            v
                        }
                        _ => return Err(p.syntax(p.peek(), "a noise variance")),
                    };
                    stmts.push((Span::of(&t), RawStmt::Noise { node, var }));
                }
                "dag" => return Err(p.syntax(&t, "a statement or `}`")),
                _ => {
                    let (span, name) = p.expect_node_name()?;
                    match &p.peek().tok {
                        Tok::Arrow => {
                            p.bump();
                            let (_, to) = p.expect_node_name()?;
                            let attrs = parse_attrs(&mut p)?;
                            let coef = take_coef(attrs, "an edge")?;
                            stmts.push((
                                span,
                                RawStmt::Edge {
                                    from: name,
                                    to,
                                    coef,
                                },
                            ));
                        }
                        Tok::ModArrow => {
                            p.bump();
                            p.expect(&Tok::LParen, "`(`")?;
                            let (_, from) = p.expect_node_name()?;
                            p.expect(&Tok::Arrow, "`->`")?;
                            let (_, to) = p.expect_node_name()?;
                            p.expect(&Tok::RParen, "`)`")?;
                            let attrs = parse_attrs(&mut p)?;
                            let coef = take_coef(attrs, "a moderation")?;
                            stmts.push((
                                span,
                                RawStmt::Mod {
                                    moderator: name,
                                    from,
                                    to,
                                    coef,
                                },
                            ));
                        }
                        _ => {
                            let attrs = parse_attrs(&mut p)?;
                            let label = take_label(attrs)?;
                            stmts.push((span, RawStmt::Node { name, label }));
                        }
                    }
                }
            },
            _ => return Err(p.syntax(&t, "a statement or `}`")),
        }
    }
    p.expect(&Tok::Eof, "end of input")?;

    assemble(name, stmts)
}

fn parse_attrs(p: &mut Parser) -> Result<Attrs, DslError> {
    if p.peek().tok != Tok::LBracket {
        return Ok(Vec::new());
    }
    p.bump();
    let mut attrs = Attrs::new();
    loop {
        let key_tok = p.peek().clone();
        let key = match &key_tok.tok {
            Tok::Ident(k) => {
                let k = k.clone();
                p.bump();
                k
            }
            _ => return Err(p.syntax(&key_tok, "an attribute key")),
        };
        if key != "label" && key != "coef" {
            return Err(DslError::Semantic {
                line: key_tok.line,
                col: key_tok.col,
                message: format!("unknown attribute key `{key}` (expected `label` or `coef`)"),
            });
        }
        if attrs.iter().any(|(_, k, _)| *k == key) {
            return Err(DslError::Semantic {
                line: key_tok.line,
                col: key_tok.col,
                message: format!("duplicate attribute `{key}`"),
            });
        }
        p.expect(&Tok::Eq, "`=`")?;
        let val_tok = p.peek().clone();
        let value = match (&val_tok.tok, key.as_str()) {
            (Tok::Real(v), "coef") => {
                let v = *v;
                p.bump();
                AttrValue::Real(v)
            }
            (Tok::Str(s), "label") => {
                let s = s.clone();
                p.bump();
                AttrValue::Str(s)
            }
            (_, "coef") => return Err(p.syntax(&val_tok, "a number for `coef`")),
            _ => return Err(p.syntax(&val_tok, "a quoted string for `label`")),
        };
        attrs.push((Span::of(&key_tok), key, value));
        match &p.peek().tok {
            Tok::Comma => {
                p.bump();
            }
            Tok::RBracket => {
                p.bump();
                return Ok(attrs);
            }
            _ => return Err(p.syntax(p.peek(), "`,` or `]`")),
        }
    }
}

fn take_coef(attrs: Attrs, ctx: &str) -> Result<Option<f64>, DslError> {
    let mut coef = None;
    for (span, key, value) in attrs {
        match (key.as_str(), value) {
            ("coef", AttrValue::Real(v)) => coef = Some(v),
            ("label", _) => {
                return Err(DslError::Semantic {
                    line: span.line,
                    col: span.col,
                    message: format!("attribute `label` is not allowed on {ctx}"),
                })
            }
            _ => unreachable!("attr values are checked against their key"),
        }
    }
    Ok(coef)
}

fn take_label(attrs: Attrs) -> Result<Option<String>, DslError> {
    let mut label = None;
    for (span, key, value) in attrs {
        match (key.as_str(), value) {
            ("label", AttrValue::Str(s)) => label = Some(s),
            ("coef", _) => {
                return Err(DslError::Semantic {
                    line: span.line,
                    col: span.col,
                    message: "attribute `coef` is not allowed on a node declaration".to_owned(),
                })
            }
            _ => unreachable!("attr values are checked against their key"),
        }
    }
    Ok(label)
}

fn semantic(span: Span, message: impl std::fmt::Display) -> DslError {
    DslError::Semantic {
        line: span.line,
        col: span.col,
        message: message.to_string(),
    }
}

/// Validate collected statements and produce the document. Shared by the
/// parser (real spans) and `DocumentBuilder` (zero spans).
pub(crate) fn assemble(name: String, stmts: Vec<SpannedStmt>) -> Result<DagDocument, DslError> {
    let mut builder = DagBuilder::new();
    let mut labeled: BTreeSet<String> = BTreeSet::new();

    // Declarations first; edges and moderations auto-declare their nodes.
    for (span, stmt) in &stmts {
        let mapper = |e: GraphError| semantic(*span, e);
        match stmt {
            RawStmt::Node { name, label } => {
                if let Some(text) = label {
                    if !labeled.insert(name.clone()) {
                        return Err(semantic(*span, format!("duplicate label for node `{name}`")));
                    }
                    builder.labeled_node(name, text).map_err(mapper)?;
                } else {
                    builder.node(name).map_err(mapper)?;
                }
            }
            RawStmt::Edge { from, to, .. } => {
                builder.node(from).map_err(mapper)?;
                builder.node(to).map_err(mapper)?;
                builder.edge(from, to).map_err(mapper)?;
            }
            RawStmt::Mod {
                moderator,
                from,
                to,
                ..
            } => {
                builder.node(moderator).map_err(mapper)?;
                builder.node(from).map_err(mapper)?;
                builder.node(to).map_err(mapper)?;
                builder.moderation(moderator, from, to).map_err(mapper)?;
            }
            _ => {}
        }
    }
    for (span, stmt) in &stmts {
        if let RawStmt::Marker {
            kind: MarkerKind::Latent,
            node,
        } = stmt
        {
            builder.mark_latent(node).map_err(|e| semantic(*span, e))?;
        }
    }

    let dag = builder.build().map_err(|e| {
        // Attach whole-graph failures to the most relevant statement we can
        // find; fall back to the document start.
        let span = match &e {
            GraphError::CycleFound(cycle) => stmts
                .iter()
                .filter_map(|(span, stmt)| match stmt {
                    RawStmt::Edge { from, to, .. } if on_cycle(cycle, from, to) => Some(*span),
                    _ => None,
                })
                .last(),
            _ => stmts.first().map(|(span, _)| *span),
        };
        semantic(span.unwrap_or(Span { line: 1, col: 1 }), e)
    })?;

    let mut doc = DagDocument {
        name,
        dag,
        exposure: None,
        outcome: None,
        adjusted: BTreeSet::new(),
        edge_coefs: BTreeMap::new(),
        moderation_coefs: BTreeMap::new(),
        noise: BTreeMap::new(),
    };

    for (span, stmt) in &stmts {
        match stmt {
            RawStmt::Edge {
                from,
                to,
                coef: Some(v),
            } => {
                if !v.is_finite() {
                    return Err(semantic(*span, format!("coefficient {v:?} is not finite")));
                }
                let edge = Edge {
                    from: NodeId::new(from.as_str()).map_err(|e| semantic(*span, e))?,
                    to: NodeId::new(to.as_str()).map_err(|e| semantic(*span, e))?,
                };
                doc.edge_coefs.insert(edge, *v);
            }
            RawStmt::Mod {
                moderator,
                from,
                to,
                coef: Some(v),
            } => {
                if !v.is_finite() {
                    return Err(semantic(*span, format!("coefficient {v:?} is not finite")));
                }
                let m = Moderation {
                    moderator: NodeId::new(moderator.as_str()).map_err(|e| semantic(*span, e))?,
                    target_from: NodeId::new(from.as_str()).map_err(|e| semantic(*span, e))?,
                    target_to: NodeId::new(to.as_str()).map_err(|e| semantic(*span, e))?,
                };
                doc.moderation_coefs.insert(m, *v);
            }
            RawStmt::Marker { kind, node } => {
                let id = resolve(&doc, *span, node)?;
                match kind {
                    MarkerKind::Exposure => {
                        if doc.exposure.is_some() {
                            return Err(semantic(*span, "duplicate `exposure` marker"));
                        }
                        doc.exposure = Some(id);
                    }
                    MarkerKind::Outcome => {
                        if doc.outcome.is_some() {
                            return Err(semantic(*span, "duplicate `outcome` marker"));
                        }
                        doc.outcome = Some(id);
                    }
                    MarkerKind::Adjusted => {
                        doc.adjusted.insert(id);
                    }
                    MarkerKind::Latent => {}
                }
            }
            RawStmt::Noise { node, var } => {
                let id = resolve(&doc, *span, node)?;
                if !(var.is_finite() && *var > 0.0) {
                    return Err(semantic(
                        *span,
                        format!("noise variance for `{node}` must be positive and finite, got {var:?}"),
                    ));
                }
                if doc.noise.insert(id, *var).is_some() {
                    return Err(semantic(*span, format!("duplicate noise for node `{node}`")));
                }
            }
            _ => {}
        }
    }

    // Marker cross-checks, reported at the document head since the offending
    // combination spans statements.
    let head = stmts.first().map(|(s, _)| *s).unwrap_or(Span { line: 1, col: 1 });
    if let (Some(x), Some(y)) = (&doc.exposure, &doc.outcome) {
        if x == y {
            return Err(semantic(
                head,
                format!("exposure and outcome are both `{x}`"),
            ));
        }
    }
    for id in &doc.adjusted {
        if Some(id) == doc.exposure.as_ref() || Some(id) == doc.outcome.as_ref() {
            return Err(semantic(
                head,
                format!("`{id}` cannot be adjusted and a query endpoint"),
            ));
        }
        if doc.dag.is_latent(id.as_str()).unwrap_or(false) {
            return Err(semantic(
                head,
                GraphError::LatentConditioned(id.as_str().to_owned()),
            ));
        }
    }

    Ok(doc)
}

fn on_cycle(cycle: &[NodeId], from: &str, to: &str) -> bool {
    cycle
        .windows(2)
        .any(|w| w[0].as_str() == from && w[1].as_str() == to)
}

fn resolve(doc: &DagDocument, span: Span, node: &str) -> Result<NodeId, DslError> {
    if !doc.dag.contains(node) {
        return Err(semantic(span, GraphError::UnknownNode(node.to_owned())));
    }
    NodeId::new(node).map_err(|e| semantic(span, e))
}

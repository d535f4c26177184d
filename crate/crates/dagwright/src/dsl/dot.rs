//! DOT export. Output is deterministic for a given document: nodes and edges
//! follow the canonical order, and attribute lists have a fixed key order.
//!
//! Moderations cannot be drawn as plain node-to-node arrows, so each
//! moderated edge is split around a point-shaped midpoint node and the
//! moderator points at the midpoint with a dashed edge.

use std::collections::BTreeMap;

use super::DagDocument;
use crate::graph::Edge;
use crate::identify::RoleReport;

/// Role coloring when a report is supplied. A node holding several roles
/// takes the first matching color in the order confounder, collider,
/// mediator, instrument, moderator.
pub fn to_dot(doc: &DagDocument, highlights: Option<&RoleReport>) -> String {
    let dag = doc.dag();
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", doc.name()));

    for id in dag.nodes() {
        let mut attrs: Vec<String> = Vec::new();
        if let Some(label) = dag.label(id.as_str()).expect("iterating own nodes") {
            attrs.push(format!("label=\"{}\"", escape(label)));
        }
        if let Some(report) = highlights {
            if *id == report.query.exposure || *id == report.query.outcome {
                attrs.push("shape=box".to_owned());
                attrs.push("penwidth=2".to_owned());
            } else if let Some(color) = role_color(report, id.as_str()) {
                attrs.push("style=filled".to_owned());
                attrs.push(format!("fillcolor={color}"));
            }
        }
        if dag.is_latent(id.as_str()).expect("iterating own nodes") {
            attrs.push("style=dashed".to_owned());
        }
        if attrs.is_empty() {
            out.push_str(&format!("  {id};\n"));
        } else {
            out.push_str(&format!("  {id} [{}];\n", attrs.join(", ")));
        }
    }

    // Midpoints for moderated edges, indexed in canonical edge order.
    let mut midpoints: BTreeMap<&Edge, String> = BTreeMap::new();
    for m in dag.moderations() {
        let edge = dag
            .edges()
            .iter()
            .find(|e| e.from == m.target_from && e.to == m.target_to)
            .expect("moderation targets a validated edge");
        if !midpoints.contains_key(edge) {
            let name = format!("__mod{}", midpoints.len());
            midpoints.insert(edge, name);
        }
    }
    for (edge, mid) in &midpoints {
        out.push_str(&format!("  {mid} [shape=point, width=0.08, label=\"\"];\n"));
        out.push_str(&format!("  {} -> {mid} [arrowhead=none];\n", edge.from));
        out.push_str(&format!("  {mid} -> {};\n", edge.to));
    }

    for edge in dag.edges() {
        if midpoints.contains_key(edge) {
            continue;
        }
        out.push_str(&format!("  {} -> {};\n", edge.from, edge.to));
    }
    for m in dag.moderations() {
        let edge = dag
            .edges()
            .iter()
            .find(|e| e.from == m.target_from && e.to == m.target_to)
            .expect("moderation targets a validated edge");
        out.push_str(&format!(
            "  {} -> {} [style=dashed];\n",
            m.moderator, midpoints[edge]
        ));
    }

    out.push_str("}\n");
    out
}

fn role_color(report: &RoleReport, name: &str) -> Option<&'static str> {
    let is = |set: &std::collections::BTreeSet<crate::graph::NodeId>| {
        set.iter().any(|id| id.as_str() == name)
    };
    if is(&report.confounders) {
        Some("orange")
    } else if report.colliders.iter().any(|e| e.node.as_str() == name) {
        Some("lightcoral")
    } else if is(&report.mediators) {
        Some("lightblue")
    } else if is(&report.instruments) {
        Some("palegreen")
    } else if is(&report.moderators) {
        Some("plum")
    } else {
        None
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

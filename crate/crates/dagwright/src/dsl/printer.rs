//! Canonical serialization. The output is a pure function of document
//! structure: nodes in canonical order, then edges, moderations, latent
//! marks, exposure, outcome, adjusted marks, and noise declarations, one
//! statement per line.

use super::DagDocument;
use crate::graph::NodeId;

pub(crate) fn serialize(doc: &DagDocument) -> String {
    let dag = &doc.dag;
    let mut out = String::new();
    out.push_str(&format!("dag {} {{\n", doc.name));

    for id in dag.nodes() {
        match dag.label(id.as_str()).expect("iterating own nodes") {
            Some(label) => out.push_str(&format!("  {id} [label=\"{}\"]\n", escape(label))),
            None => out.push_str(&format!("  {id}\n")),
        }
    }

    for edge in dag.edges() {
        match doc.edge_coefs.get(edge) {
            Some(c) => out.push_str(&format!("  {} -> {} [coef={c:?}]\n", edge.from, edge.to)),
            None => out.push_str(&format!("  {} -> {}\n", edge.from, edge.to)),
        }
    }

    for m in dag.moderations() {
        let head = format!("  {} ~> ({} -> {})", m.moderator, m.target_from, m.target_to);
        match doc.moderation_coefs.get(m) {
            Some(c) => out.push_str(&format!("{head} [coef={c:?}]\n")),
            None => out.push_str(&format!("{head}\n")),
        }
    }

    for id in dag.nodes() {
        if dag.is_latent(id.as_str()).expect("iterating own nodes") {
            out.push_str(&format!("  latent {id}\n"));
        }
    }
    if let Some(x) = &doc.exposure {
        out.push_str(&format!("  exposure {x}\n"));
    }
    if let Some(y) = &doc.outcome {
        out.push_str(&format!("  outcome {y}\n"));
    }
    for id in in_canonical_order(doc, &doc.adjusted) {
        out.push_str(&format!("  adjusted {id}\n"));
    }
    for id in dag.nodes() {
        if let Some(var) = doc.noise.get(id) {
            out.push_str(&format!("  noise {id} {var:?}\n"));
        }
    }

    out.push_str("}\n");
    out
}

fn in_canonical_order<'a>(
    doc: &'a DagDocument,
    set: &'a std::collections::BTreeSet<NodeId>,
) -> impl Iterator<Item = &'a NodeId> {
    doc.dag.nodes().filter(|id| set.contains(*id))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::super::{parse, serialize};

    #[test]
    fn canonical_form_is_order_insensitive() {
        let a = parse("dag g { B -> C  A -> B  exposure A  outcome C }").unwrap();
        let b = parse("dag g { exposure A  outcome C  A -> B  B -> C }").unwrap();
        assert_eq!(serialize(&a), serialize(&b));
    }

    #[test]
    fn serialize_is_idempotent() {
        let text = r#"
            dag demo {
                Z [label="zoning \"dense\""]
                Z -> N [coef=0.5]
                Z -> F
                N -> F [coef=2.0]
                exposure N
                outcome F
                noise F 0.25
            }
        "#;
        let doc = parse(text).unwrap();
        let once = serialize(&doc);
        let twice = serialize(&parse(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn round_trip_preserves_structure() {
        let text = "dag f { G -> Y [coef=1.0]  T ~> (G -> Y) [coef=0.8]  exposure G  outcome Y  latent T  noise Y 2.0 }";
        let doc = parse(text).unwrap();
        let back = parse(&serialize(&doc)).unwrap();
        assert_eq!(doc, back);
    }
}

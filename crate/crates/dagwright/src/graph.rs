//! Validated directed acyclic graphs.
//!
//! A [`Dag`] is immutable once built: construction runs the full validation
//! suite (name rules, duplicate edges, self-loops, cycle detection, the node
//! cap) and caches a canonical node order — topological, with ties broken
//! lexicographically by name. Every query in the rest of the crate iterates
//! nodes in that order, which is what makes reports and serialized output
//! reproducible byte for byte.
//!
//! Moderation annotations ride along as metadata. They never contribute
//! edges: a plain DAG cannot express effect modification, so path search,
//! separation and adjustment logic all ignore them. The simulation engine
//! gives them numeric meaning as interaction terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on graph size. Path enumeration and adjustment-set search are
/// exhaustive by design, so validation refuses anything bigger.
pub const MAX_NODES: usize = 20;

/// Words the text format claims for itself; they cannot name nodes.
pub const RESERVED_WORDS: &[&str] = &["dag", "exposure", "outcome", "adjusted", "latent", "noise"];

/// Errors raised by graph construction and graph queries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("invalid node name `{0}`: must match [A-Za-z_][A-Za-z0-9_]*")]
    InvalidName(String),
    #[error("`{0}` is a reserved word and cannot name a node")]
    ReservedName(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("cycle found: {}", render_cycle(.0))]
    CycleFound(Vec<NodeId>),
    #[error("moderation targets missing edge {0} -> {1}")]
    UnknownEdge(String, String),
    #[error("moderator `{0}` cannot sit on its own target edge")]
    ModeratorOnTarget(String),
    #[error("duplicate moderation {0} ~> ({1} -> {2})")]
    DuplicateModeration(String, String, String),
    #[error("graph has {actual} nodes, limit is {limit}")]
    SizeLimit { limit: usize, actual: usize },
    #[error("`{0}` used as both endpoints of the query")]
    SameNode(String),
    #[error("cannot condition on latent node `{0}`")]
    LatentConditioned(String),
    #[error("conditioning set may not contain query endpoint `{0}`")]
    ConditionedEndpoint(String),
}

fn render_cycle(cycle: &[NodeId]) -> String {
    cycle
        .iter()
        .map(NodeId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// A node name. Construction validates the identifier pattern and rejects
/// the text format's reserved words, so any `NodeId` can be serialized back
/// losslessly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, GraphError> {
        let name = name.into();
        let mut chars = name.chars();
        let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
        let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !head_ok || !tail_ok {
            return Err(GraphError::InvalidName(name));
        }
        if RESERVED_WORDS.contains(&name.as_str()) {
            return Err(GraphError::ReservedName(name));
        }
        Ok(NodeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// A directed edge `from -> to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.from, self.to)
    }
}

/// An effect-modification annotation: `moderator` alters the strength of the
/// edge `target_from -> target_to`. Metadata only; see the module docs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Moderation {
    pub moderator: NodeId,
    pub target_from: NodeId,
    pub target_to: NodeId,
}

impl fmt::Display for Moderation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ~> ({} -> {})",
            self.moderator, self.target_from, self.target_to
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeInfo {
    id: NodeId,
    latent: bool,
    label: Option<String>,
}

/// An immutable, validated DAG.
///
/// Nodes are stored in the canonical order (topological, lexicographic
/// tie-break); all iterators and returned sets follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    nodes: Vec<NodeInfo>,
    index: BTreeMap<NodeId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    moderations: Vec<Moderation>,
}

/// Accumulates declarations, then [`DagBuilder::build`] validates the lot.
///
/// Edge and moderation endpoints must be declared via [`DagBuilder::node`]
/// (or a flavored variant) before `build`; the text-format parser is the
/// layer that auto-declares names it encounters.
#[derive(Debug, Default, Clone)]
pub struct DagBuilder {
    nodes: Vec<NodeInfo>,
    edges: Vec<Edge>,
    moderations: Vec<Moderation>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare a node. Redeclaration merges: `latent` is sticky and a new
    /// label overrides a missing one.
    pub fn node(&mut self, name: &str) -> Result<&mut Self, GraphError> {
        self.declare(name, false, None)
    }

    pub fn latent_node(&mut self, name: &str) -> Result<&mut Self, GraphError> {
        self.declare(name, true, None)
    }

    pub fn labeled_node(&mut self, name: &str, label: &str) -> Result<&mut Self, GraphError> {
        self.declare(name, false, Some(label.to_owned()))
    }

    pub fn mark_latent(&mut self, name: &str) -> Result<&mut Self, GraphError> {
        let id = NodeId::new(name)?;
        match self.nodes.iter_mut().find(|n| n.id == id) {
            Some(info) => {
                info.latent = true;
                Ok(self)
            }
            None => Err(GraphError::UnknownNode(name.to_owned())),
        }
    }

    fn declare(
        &mut self,
        name: &str,
        latent: bool,
        label: Option<String>,
    ) -> Result<&mut Self, GraphError> {
        let id = NodeId::new(name)?;
        if let Some(info) = self.nodes.iter_mut().find(|n| n.id == id) {
            info.latent |= latent;
            if label.is_some() {
                info.label = label;
            }
        } else {
            self.nodes.push(NodeInfo { id, latent, label });
        }
        Ok(self)
    }

    pub fn edge(&mut self, from: &str, to: &str) -> Result<&mut Self, GraphError> {
        self.edges.push(Edge {
            from: NodeId::new(from)?,
            to: NodeId::new(to)?,
        });
        Ok(self)
    }

    pub fn moderation(
        &mut self,
        moderator: &str,
        target_from: &str,
        target_to: &str,
    ) -> Result<&mut Self, GraphError> {
        self.moderations.push(Moderation {
            moderator: NodeId::new(moderator)?,
            target_from: NodeId::new(target_from)?,
            target_to: NodeId::new(target_to)?,
        });
        Ok(self)
    }

    /// Validate everything and freeze the graph.
    pub fn build(&self) -> Result<Dag, GraphError> {
        if self.nodes.len() > MAX_NODES {
            return Err(GraphError::SizeLimit {
                limit: MAX_NODES,
                actual: self.nodes.len(),
            });
        }

        let declared: BTreeMap<NodeId, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();

        let mut seen_edges = BTreeSet::new();
        for e in &self.edges {
            if e.from == e.to {
                return Err(GraphError::SelfLoop(e.from.as_str().to_owned()));
            }
            for end in [&e.from, &e.to] {
                if !declared.contains_key(end) {
                    return Err(GraphError::UnknownNode(end.as_str().to_owned()));
                }
            }
            if !seen_edges.insert((e.from.clone(), e.to.clone())) {
                return Err(GraphError::DuplicateEdge(
                    e.from.as_str().to_owned(),
                    e.to.as_str().to_owned(),
                ));
            }
        }

        let mut seen_mods = BTreeSet::new();
        for m in &self.moderations {
            if !declared.contains_key(&m.moderator) {
                return Err(GraphError::UnknownNode(m.moderator.as_str().to_owned()));
            }
            if !seen_edges.contains(&(m.target_from.clone(), m.target_to.clone())) {
                return Err(GraphError::UnknownEdge(
                    m.target_from.as_str().to_owned(),
                    m.target_to.as_str().to_owned(),
                ));
            }
            if m.moderator == m.target_from || m.moderator == m.target_to {
                return Err(GraphError::ModeratorOnTarget(m.moderator.as_str().to_owned()));
            }
            if !seen_mods.insert(m.clone()) {
                return Err(GraphError::DuplicateModeration(
                    m.moderator.as_str().to_owned(),
                    m.target_from.as_str().to_owned(),
                    m.target_to.as_str().to_owned(),
                ));
            }
        }

        let order = canonical_order(&self.nodes, &declared, &self.edges)?;

        // Reindex everything into canonical positions.
        let nodes: Vec<NodeInfo> = order.iter().map(|&i| self.nodes[i].clone()).collect();
        let index: BTreeMap<NodeId, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();

        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        for e in &self.edges {
            let f = index[&e.from];
            let t = index[&e.to];
            children[f].push(t);
            parents[t].push(f);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }

        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (index[&e.from], index[&e.to]));
        let mut moderations = self.moderations.clone();
        moderations.sort_by_key(|m| (index[&m.moderator], index[&m.target_from], index[&m.target_to]));

        Ok(Dag {
            nodes,
            index,
            parents,
            children,
            edges,
            moderations,
        })
    }
}

/// Kahn's algorithm with a lexicographic frontier. On a stall the remaining
/// nodes all sit on or feed a cycle; the error carries one witness.
fn canonical_order(
    nodes: &[NodeInfo],
    index: &BTreeMap<NodeId, usize>,
    edges: &[Edge],
) -> Result<Vec<usize>, GraphError> {
    let n = nodes.len();
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for e in edges {
        let f = index[&e.from];
        let t = index[&e.to];
        indegree[t] += 1;
        children[f].push(t);
    }

    let mut frontier: BTreeSet<(&NodeId, usize)> = nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| indegree[*i] == 0)
        .map(|(i, info)| (&info.id, i))
        .collect();

    let mut order = Vec::with_capacity(n);
    while let Some(&(_, i)) = frontier.iter().next() {
        frontier.remove(&(&nodes[i].id, i));
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                frontier.insert((&nodes[c].id, c));
            }
        }
    }

    if order.len() == n {
        return Ok(order);
    }

    // Witness extraction: walk parent links inside the stalled set until a
    // node repeats, then normalize the rotation for a stable message.
    let stalled: BTreeSet<usize> = (0..n).filter(|i| !order.contains(i)).collect();
    let mut parent_in_stalled = vec![usize::MAX; n];
    for e in edges {
        let f = index[&e.from];
        let t = index[&e.to];
        if stalled.contains(&f) && stalled.contains(&t) {
            parent_in_stalled[t] = parent_in_stalled[t].min(f);
        }
    }
    let mut walk = Vec::new();
    let mut at = *stalled.iter().next().expect("stalled set is nonempty");
    let mut seen = BTreeMap::new();
    loop {
        if let Some(&pos) = seen.get(&at) {
            walk.drain(..pos);
            break;
        }
        seen.insert(at, walk.len());
        walk.push(at);
        at = parent_in_stalled[at];
    }
    // walk now holds the cycle following parent links; reverse for edge order.
    walk.reverse();
    let min_pos = walk
        .iter()
        .enumerate()
        .min_by_key(|(_, &i)| &nodes[i].id)
        .map(|(p, _)| p)
        .unwrap_or(0);
    walk.rotate_left(min_pos);
    let mut cycle: Vec<NodeId> = walk.iter().map(|&i| nodes[i].id.clone()).collect();
    cycle.push(cycle[0].clone());
    Err(GraphError::CycleFound(cycle))
}

impl Dag {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node ids in canonical order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().map(|n| &n.id)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn moderations(&self) -> &[Moderation] {
        &self.moderations
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| n.id.as_str() == name)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.from.as_str() == from && e.to.as_str() == to)
    }

    pub fn is_latent(&self, name: &str) -> Result<bool, GraphError> {
        Ok(self.nodes[self.resolve(name)?].latent)
    }

    pub fn label(&self, name: &str) -> Result<Option<&str>, GraphError> {
        Ok(self.nodes[self.resolve(name)?].label.as_deref())
    }

    pub fn latent_nodes(&self) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.latent)
            .map(|n| n.id.clone())
            .collect()
    }

    pub fn parents(&self, name: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.resolve(name)?;
        Ok(self.parents[i].iter().map(|&p| self.id_of(p).clone()).collect())
    }

    pub fn children(&self, name: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.resolve(name)?;
        Ok(self.children[i].iter().map(|&c| self.id_of(c).clone()).collect())
    }

    /// Transitive predecessors, excluding the node itself.
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.resolve(name)?;
        Ok(self
            .closure_idx(i, Direction::Up)
            .into_iter()
            .map(|j| self.id_of(j).clone())
            .collect())
    }

    /// Transitive successors, excluding the node itself.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<NodeId>, GraphError> {
        let i = self.resolve(name)?;
        Ok(self
            .closure_idx(i, Direction::Down)
            .into_iter()
            .map(|j| self.id_of(j).clone())
            .collect())
    }

    pub(crate) fn resolve(&self, name: &str) -> Result<usize, GraphError> {
        self.nodes
            .iter()
            .position(|n| n.id.as_str() == name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_owned()))
    }

    pub(crate) fn id_of(&self, idx: usize) -> &NodeId {
        &self.nodes[idx].id
    }

    pub(crate) fn parents_idx(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub(crate) fn children_idx(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub(crate) fn closure_idx(&self, start: usize, dir: Direction) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let next = match dir {
                Direction::Up => &self.parents[i],
                Direction::Down => &self.children[i],
            };
            for &j in next {
                if out.insert(j) {
                    stack.push(j);
                }
            }
        }
        out.remove(&start);
        out
    }

    /// Directed reachability `from -> ... -> to`, optionally refusing to pass
    /// through `banned` (endpoints are never banned-checked).
    pub(crate) fn reaches_directed(&self, from: usize, to: usize, banned: Option<usize>) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            for &c in &self.children[i] {
                if c == to {
                    return true;
                }
                if Some(c) == banned || seen[c] {
                    continue;
                }
                seen[c] = true;
                stack.push(c);
            }
        }
        false
    }

    /// Copy of the graph with every edge leaving `node` removed. Used by the
    /// instrument check.
    pub(crate) fn without_outgoing_edges(&self, node: usize) -> Dag {
        let mut b = DagBuilder::new();
        b.nodes = self.nodes.clone();
        b.edges = self
            .edges
            .iter()
            .filter(|e| self.index[&e.from] != node)
            .cloned()
            .collect();
        // Moderations may now target removed edges; they are metadata and
        // irrelevant to separation queries, so drop the orphaned ones.
        b.moderations = self
            .moderations
            .iter()
            .filter(|m| self.index[&m.target_from] != node)
            .cloned()
            .collect();
        b.build().expect("edge removal cannot invalidate a DAG")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Up,
    Down,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(edges: &[(&str, &str)]) -> Dag {
        let mut b = DagBuilder::new();
        for (f, t) in edges {
            b.node(f).unwrap();
            b.node(t).unwrap();
            b.edge(f, t).unwrap();
        }
        b.build().unwrap()
    }

    fn fig1() -> Dag {
        dag(&[("A", "C"), ("B", "A"), ("B", "D"), ("D", "C"), ("E", "D")])
    }

    fn names(set: &BTreeSet<NodeId>) -> Vec<&str> {
        set.iter().map(NodeId::as_str).collect()
    }

    #[test]
    fn two_node_chain_topo_order() {
        let d = dag(&[("A", "C")]);
        let order: Vec<&str> = d.nodes().map(NodeId::as_str).collect();
        assert_eq!(order, ["A", "C"]);
    }

    #[test]
    fn minimal_cycle_reports_witness() {
        let mut b = DagBuilder::new();
        b.node("A").unwrap().node("B").unwrap();
        b.edge("A", "B").unwrap().edge("B", "A").unwrap();
        match b.build() {
            Err(GraphError::CycleFound(c)) => {
                let seq: Vec<&str> = c.iter().map(NodeId::as_str).collect();
                assert_eq!(seq, ["A", "B", "A"]);
            }
            other => panic!("expected CycleFound, got {other:?}"),
        }
    }

    #[test]
    fn longer_cycle_witness_is_normalized() {
        let mut b = DagBuilder::new();
        for n in ["X", "Y", "Z"] {
            b.node(n).unwrap();
        }
        b.edge("Y", "Z").unwrap();
        b.edge("Z", "X").unwrap();
        b.edge("X", "Y").unwrap();
        match b.build() {
            Err(GraphError::CycleFound(c)) => {
                let seq: Vec<&str> = c.iter().map(NodeId::as_str).collect();
                assert_eq!(seq, ["X", "Y", "Z", "X"]);
            }
            other => panic!("expected CycleFound, got {other:?}"),
        }
    }

    #[test]
    fn fig1_builds_and_orders() {
        let d = fig1();
        let order: Vec<&str> = d.nodes().map(NodeId::as_str).collect();
        // B and E are sources; lexicographic tie-break puts B first, then A
        // unlocks once B is placed.
        assert_eq!(order, ["B", "A", "E", "D", "C"]);
        for e in d.edges() {
            let f = d.resolve(e.from.as_str()).unwrap();
            let t = d.resolve(e.to.as_str()).unwrap();
            assert!(f < t, "edge {e} violates topological order");
        }
    }

    #[test]
    fn fig1_parents_and_ancestors() {
        let d = fig1();
        assert_eq!(names(&d.parents("D").unwrap()), ["B", "E"]);
        assert_eq!(names(&d.parents("A").unwrap()), ["B"]);
        assert!(d.parents("B").unwrap().is_empty());
        assert_eq!(names(&d.ancestors("C").unwrap()), ["A", "B", "D", "E"]);
        assert_eq!(names(&d.descendants("B").unwrap()), ["A", "C", "D"]);
        assert!(d.descendants("C").unwrap().is_empty());
    }

    #[test]
    fn self_loop_and_duplicate_edge_rejected() {
        let mut b = DagBuilder::new();
        b.node("A").unwrap();
        b.edge("A", "A").unwrap();
        assert_eq!(b.build(), Err(GraphError::SelfLoop("A".into())));

        let mut b = DagBuilder::new();
        b.node("A").unwrap().node("B").unwrap();
        b.edge("A", "B").unwrap().edge("A", "B").unwrap();
        assert_eq!(
            b.build(),
            Err(GraphError::DuplicateEdge("A".into(), "B".into()))
        );
    }

    #[test]
    fn undeclared_edge_endpoint_rejected() {
        let mut b = DagBuilder::new();
        b.node("A").unwrap();
        b.edge("A", "B").unwrap();
        assert_eq!(b.build(), Err(GraphError::UnknownNode("B".into())));
    }

    #[test]
    fn moderation_validation() {
        let mut b = DagBuilder::new();
        b.node("G").unwrap().node("Y").unwrap().node("T").unwrap();
        b.edge("G", "Y").unwrap();
        b.moderation("T", "G", "Y").unwrap();
        let d = b.build().unwrap();
        assert_eq!(d.moderations().len(), 1);

        // Target edge absent.
        let mut b = DagBuilder::new();
        b.node("G").unwrap().node("Y").unwrap().node("T").unwrap();
        b.moderation("T", "G", "Y").unwrap();
        assert_eq!(b.build(), Err(GraphError::UnknownEdge("G".into(), "Y".into())));

        // Moderator on its own edge.
        let mut b = DagBuilder::new();
        b.node("G").unwrap().node("Y").unwrap();
        b.edge("G", "Y").unwrap();
        b.moderation("G", "G", "Y").unwrap();
        assert_eq!(b.build(), Err(GraphError::ModeratorOnTarget("G".into())));
    }

    #[test]
    fn name_rules() {
        assert!(NodeId::new("_x9").is_ok());
        assert!(matches!(NodeId::new("9x"), Err(GraphError::InvalidName(_))));
        assert!(matches!(NodeId::new(""), Err(GraphError::InvalidName(_))));
        assert!(matches!(NodeId::new("a-b"), Err(GraphError::InvalidName(_))));
        assert!(matches!(
            NodeId::new("noise"),
            Err(GraphError::ReservedName(_))
        ));
    }

    #[test]
    fn node_cap_enforced() {
        let mut b = DagBuilder::new();
        for i in 0..=MAX_NODES {
            b.node(&format!("N{i:02}")).unwrap();
        }
        assert!(matches!(b.build(), Err(GraphError::SizeLimit { .. })));
    }

    #[test]
    fn ancestor_descendant_duality_small() {
        let d = fig1();
        let ids: Vec<NodeId> = d.nodes().cloned().collect();
        for u in &ids {
            for v in &ids {
                let u_anc_v = d.ancestors(v.as_str()).unwrap().contains(u);
                let v_desc_u = d.descendants(u.as_str()).unwrap().contains(v);
                assert_eq!(u_anc_v, v_desc_u, "duality broken for ({u}, {v})");
            }
        }
    }
}

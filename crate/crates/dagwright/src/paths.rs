//! Path enumeration, classification and d-separation.
//!
//! The separation engine is deliberately exhaustive: enumerate every simple
//! path between the two query nodes, decide blocking per path, and report the
//! open paths as evidence. Graphs are capped at [`crate::graph::MAX_NODES`]
//! nodes by validation, and the diagrams this tool targets have three to five
//! variables, so transparency wins over reachability tricks.
//!
//! Blocking follows the standard rules: a path is blocked by a conditioning
//! set `S` when some non-collider on it is in `S`, or when some collider on
//! it has neither itself nor any descendant in `S`.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::graph::{Dag, Direction, GraphError, NodeId};

/// How an edge was walked: `Forward` is tail to head (with the arrow),
/// `Backward` against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Traversal {
    Forward,
    Backward,
}

impl Traversal {
    fn flipped(self) -> Self {
        match self {
            Traversal::Forward => Traversal::Backward,
            Traversal::Backward => Traversal::Forward,
        }
    }
}

/// A simple path: `nodes[i]` and `nodes[i+1]` are joined by a real edge whose
/// orientation relative to the walk is `traversals[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Path {
    nodes: Vec<NodeId>,
    traversals: Vec<Traversal>,
}

impl Path {
    pub(crate) fn new(nodes: Vec<NodeId>, traversals: Vec<Traversal>) -> Self {
        debug_assert_eq!(nodes.len(), traversals.len() + 1);
        debug_assert!(!traversals.is_empty());
        Path { nodes, traversals }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn traversals(&self) -> &[Traversal] {
        &self.traversals
    }

    pub fn source(&self) -> &NodeId {
        self.nodes.first().expect("paths have >= 2 nodes")
    }

    pub fn target(&self) -> &NodeId {
        self.nodes.last().expect("paths have >= 2 nodes")
    }

    pub fn edge_count(&self) -> usize {
        self.traversals.len()
    }

    /// Interior nodes, in walk order.
    pub fn interior(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// Nodes where two arrowheads meet along this walk: reached with the
    /// arrow and left against the next one.
    pub fn colliders(&self) -> BTreeSet<NodeId> {
        (1..self.nodes.len() - 1)
            .filter(|&i| {
                self.traversals[i - 1] == Traversal::Forward
                    && self.traversals[i] == Traversal::Backward
            })
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    /// The same walk read from the other end.
    pub fn reversed(&self) -> Path {
        Path {
            nodes: self.nodes.iter().rev().cloned().collect(),
            traversals: self.traversals.iter().rev().map(|t| t.flipped()).collect(),
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (t, n) in self.traversals.iter().zip(&self.nodes[1..]) {
            let arrow = match t {
                Traversal::Forward => "->",
                Traversal::Backward => "<-",
            };
            write!(f, " {arrow} {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PathKind {
    Causal,
    NonCausal,
}

/// Classification of one path: causal iff walked tail-to-head the whole way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathClass {
    pub kind: PathKind,
    pub colliders: BTreeSet<NodeId>,
}

pub fn classify_path(path: &Path) -> PathClass {
    let kind = if path.traversals().iter().all(|t| *t == Traversal::Forward) {
        PathKind::Causal
    } else {
        PathKind::NonCausal
    };
    PathClass {
        kind,
        colliders: path.colliders(),
    }
}

/// An exposure/outcome pair with an optional conditioning set, validated
/// against a concrete graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CausalQuery {
    pub exposure: NodeId,
    pub outcome: NodeId,
    pub conditioned: BTreeSet<NodeId>,
}

impl CausalQuery {
    pub fn new(
        dag: &Dag,
        exposure: &str,
        outcome: &str,
        conditioned: &[&str],
    ) -> Result<Self, GraphError> {
        if exposure == outcome {
            return Err(GraphError::SameNode(exposure.to_owned()));
        }
        dag.resolve(exposure)?;
        dag.resolve(outcome)?;
        let mut set = BTreeSet::new();
        for name in conditioned {
            validate_conditionable(dag, name)?;
            if *name == exposure || *name == outcome {
                return Err(GraphError::ConditionedEndpoint((*name).to_owned()));
            }
            set.insert(NodeId::new(*name)?);
        }
        Ok(CausalQuery {
            exposure: NodeId::new(exposure)?,
            outcome: NodeId::new(outcome)?,
            conditioned: set,
        })
    }
}

fn validate_conditionable(dag: &Dag, name: &str) -> Result<(), GraphError> {
    if dag.is_latent(name)? {
        return Err(GraphError::LatentConditioned(name.to_owned()));
    }
    Ok(())
}

/// All simple paths between `x` and `y`, walked in either edge direction,
/// ordered lexicographically by their node-name sequence. Moderation
/// annotations contribute nothing here.
pub fn enumerate_paths(dag: &Dag, x: &str, y: &str) -> Result<Vec<Path>, GraphError> {
    if x == y {
        return Err(GraphError::SameNode(x.to_owned()));
    }
    let start = dag.resolve(x)?;
    let goal = dag.resolve(y)?;

    // Neighbors with the traversal used to reach them, pre-sorted by name so
    // depth-first emission order is the lexicographic order of node
    // sequences.
    let n = dag.node_count();
    let mut neighbors: Vec<Vec<(usize, Traversal)>> = vec![Vec::new(); n];
    for (i, adj) in neighbors.iter_mut().enumerate() {
        adj.extend(dag.children_idx(i).iter().map(|&c| (c, Traversal::Forward)));
        adj.extend(dag.parents_idx(i).iter().map(|&p| (p, Traversal::Backward)));
        adj.sort_by(|a, b| dag.id_of(a.0).cmp(dag.id_of(b.0)));
    }

    let mut out = Vec::new();
    let mut on_path = vec![false; n];
    let mut node_stack = vec![start];
    let mut trav_stack: Vec<Traversal> = Vec::new();
    on_path[start] = true;

    fn dfs(
        at: usize,
        goal: usize,
        dag: &Dag,
        neighbors: &[Vec<(usize, Traversal)>],
        on_path: &mut [bool],
        node_stack: &mut Vec<usize>,
        trav_stack: &mut Vec<Traversal>,
        out: &mut Vec<Path>,
    ) {
        for &(next, trav) in &neighbors[at] {
            if on_path[next] {
                continue;
            }
            node_stack.push(next);
            trav_stack.push(trav);
            if next == goal {
                out.push(Path::new(
                    node_stack.iter().map(|&i| dag.id_of(i).clone()).collect(),
                    trav_stack.clone(),
                ));
            } else {
                on_path[next] = true;
                dfs(next, goal, dag, neighbors, on_path, node_stack, trav_stack, out);
                on_path[next] = false;
            }
            node_stack.pop();
            trav_stack.pop();
        }
    }

    dfs(
        start,
        goal,
        dag,
        &neighbors,
        &mut on_path,
        &mut node_stack,
        &mut trav_stack,
        &mut out,
    );
    Ok(out)
}

/// Standard blocking test for one path under a conditioning set.
///
/// Latent nodes cannot be conditioned on; the set is validated before any
/// path logic runs.
pub fn is_blocked(
    dag: &Dag,
    path: &Path,
    conditioned: &BTreeSet<NodeId>,
) -> Result<bool, GraphError> {
    for c in conditioned {
        dag.resolve(c.as_str())?;
        validate_conditionable(dag, c.as_str())?;
    }
    let colliders = path.colliders();
    for node in path.interior() {
        if colliders.contains(node) {
            let idx = dag.resolve(node.as_str())?;
            let opened = conditioned.contains(node)
                || dag
                    .closure_idx(idx, Direction::Down)
                    .iter()
                    .any(|&d| conditioned.contains(dag.id_of(d)));
            if !opened {
                return Ok(true);
            }
        } else if conditioned.contains(node) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Verdict of a d-separation query, with the open paths kept as evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Separation {
    pub separated: bool,
    pub open_paths: Vec<Path>,
}

/// `x` and `y` are d-separated given `conditioned` iff every path between
/// them is blocked.
pub fn d_separated(
    dag: &Dag,
    x: &str,
    y: &str,
    conditioned: &BTreeSet<NodeId>,
) -> Result<Separation, GraphError> {
    for c in conditioned {
        if c.as_str() == x || c.as_str() == y {
            return Err(GraphError::ConditionedEndpoint(c.as_str().to_owned()));
        }
    }
    let mut open_paths = Vec::new();
    for path in enumerate_paths(dag, x, y)? {
        if !is_blocked(dag, &path, conditioned)? {
            open_paths.push(path);
        }
    }
    Ok(Separation {
        separated: open_paths.is_empty(),
        open_paths,
    })
}

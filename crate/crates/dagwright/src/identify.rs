//! Variable-role classification and backdoor adjustment sets.
//!
//! Roles are relative to a query: the same node can be a collider in one
//! analysis and a mediator in another, so every report carries the query it
//! was computed against. The definitions:
//!
//! - mediator — an interior node of some directed exposure-to-outcome path;
//! - confounder — a common cause: it reaches the exposure by a directed path
//!   avoiding the outcome, and the outcome by one avoiding the exposure;
//! - collider — a head-to-head node on some exposure–outcome path, reported
//!   together with that path;
//! - instrument — causes the exposure, reaches the outcome only through the
//!   exposure, and has no open path to the outcome once the exposure's
//!   outgoing edges are cut;
//! - moderator — taken from annotations only (never inferred from topology)
//!   when the annotated edge lies on a causal exposure-to-outcome path.
//!
//! Adjustment-set search enumerates candidate subsets outright, smallest
//! first. At the 20-node cap that is at most 2^18 subsets, and exactness
//! means minimality and soundness can be asserted rather than argued.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::Serialize;

use crate::graph::{Dag, Direction, GraphError, NodeId, MAX_NODES};
use crate::paths::{
    classify_path, d_separated, enumerate_paths, is_blocked, CausalQuery, Path, PathKind,
    Traversal,
};

/// One collider occurrence: the node and the exposure–outcome path it sits on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColliderEntry {
    pub node: NodeId,
    pub path: Path,
}

/// Every variable's role relative to a query. Role sets may overlap, and
/// nodes filling no role land in `unclassified`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleReport {
    pub query: CausalQuery,
    pub mediators: BTreeSet<NodeId>,
    pub confounders: BTreeSet<NodeId>,
    pub colliders: Vec<ColliderEntry>,
    pub instruments: BTreeSet<NodeId>,
    pub moderators: BTreeSet<NodeId>,
    pub unclassified: BTreeSet<NodeId>,
}

pub fn classify_roles(dag: &Dag, query: &CausalQuery) -> Result<RoleReport, GraphError> {
    let x = dag.resolve(query.exposure.as_str())?;
    let y = dag.resolve(query.outcome.as_str())?;

    let mut mediators = BTreeSet::new();
    let mut confounders = BTreeSet::new();
    let mut instruments = BTreeSet::new();

    for idx in 0..dag.node_count() {
        if idx == x || idx == y {
            continue;
        }
        let id = dag.id_of(idx).clone();
        // On a directed x -> ... -> y route, strictly between the endpoints.
        if dag.reaches_directed(x, idx, Some(y)) && dag.reaches_directed(idx, y, Some(x)) {
            mediators.insert(id.clone());
        }
        if dag.reaches_directed(idx, x, Some(y)) && dag.reaches_directed(idx, y, Some(x)) {
            confounders.insert(id.clone());
        }
        if instrument_conditions(dag, idx, x, y)?.iter().all(|c| c.passed) {
            instruments.insert(id.clone());
        }
    }

    let mut colliders = Vec::new();
    let xy_paths = enumerate_paths(dag, query.exposure.as_str(), query.outcome.as_str())?;
    for path in &xy_paths {
        for node in path.colliders() {
            colliders.push(ColliderEntry {
                node,
                path: path.clone(),
            });
        }
    }

    // A moderator counts only when its annotated edge carries causal flow
    // for this query.
    let causal_edges: BTreeSet<(&NodeId, &NodeId)> = xy_paths
        .iter()
        .filter(|p| classify_path(p).kind == PathKind::Causal)
        .flat_map(|p| p.nodes().windows(2).map(|w| (&w[0], &w[1])))
        .collect();
    let moderators: BTreeSet<NodeId> = dag
        .moderations()
        .iter()
        .filter(|m| causal_edges.contains(&(&m.target_from, &m.target_to)))
        .map(|m| m.moderator.clone())
        .collect();

    let mut unclassified: BTreeSet<NodeId> = dag.nodes().cloned().collect();
    unclassified.remove(&query.exposure);
    unclassified.remove(&query.outcome);
    for set in [&mediators, &confounders, &instruments, &moderators] {
        for id in set {
            unclassified.remove(id);
        }
    }
    for entry in &colliders {
        unclassified.remove(&entry.node);
    }

    Ok(RoleReport {
        query: query.clone(),
        mediators,
        confounders,
        colliders,
        instruments,
        moderators,
        unclassified,
    })
}

/// Exposure–outcome paths that start with an arrow into the exposure.
pub fn backdoor_paths(dag: &Dag, query: &CausalQuery) -> Result<Vec<Path>, GraphError> {
    Ok(
        enumerate_paths(dag, query.exposure.as_str(), query.outcome.as_str())?
            .into_iter()
            .filter(|p| p.traversals()[0] == Traversal::Backward)
            .collect(),
    )
}

/// Minimal backdoor adjustment sets plus the nodes barred from adjustment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjustmentResult {
    /// Sorted by size, then lexicographically. No set is a superset of
    /// another; when no backdoor path exists this is `[{}]`.
    pub minimal_sets: Vec<BTreeSet<NodeId>>,
    /// Latent nodes and descendants of the exposure.
    pub forbidden: BTreeSet<NodeId>,
}

pub fn find_adjustment_sets(dag: &Dag, query: &CausalQuery) -> Result<AdjustmentResult, GraphError> {
    if dag.node_count() > MAX_NODES {
        return Err(GraphError::SizeLimit {
            limit: MAX_NODES,
            actual: dag.node_count(),
        });
    }
    let x = dag.resolve(query.exposure.as_str())?;
    dag.resolve(query.outcome.as_str())?;

    let mut forbidden: BTreeSet<NodeId> = dag.latent_nodes();
    forbidden.extend(
        dag.closure_idx(x, Direction::Down)
            .into_iter()
            .map(|i| dag.id_of(i).clone()),
    );

    let backdoor = backdoor_paths(dag, query)?;
    if backdoor.is_empty() {
        return Ok(AdjustmentResult {
            minimal_sets: vec![BTreeSet::new()],
            forbidden,
        });
    }

    let candidates: Vec<NodeId> = dag
        .nodes()
        .filter(|id| {
            **id != query.exposure && **id != query.outcome && !forbidden.contains(*id)
        })
        .cloned()
        .sorted()
        .collect();

    let blocks_all = |set: &BTreeSet<NodeId>| -> Result<bool, GraphError> {
        for path in &backdoor {
            if !is_blocked(dag, path, set)? {
                return Ok(false);
            }
        }
        Ok(true)
    };

    let mut minimal: Vec<BTreeSet<NodeId>> = Vec::new();
    for size in 0..=candidates.len() {
        for combo in candidates.iter().combinations(size) {
            let set: BTreeSet<NodeId> = combo.into_iter().cloned().collect();
            if minimal.iter().any(|m| m.is_subset(&set)) {
                continue;
            }
            if blocks_all(&set)? {
                minimal.push(set);
            }
        }
    }
    // Size-major enumeration already yields (size, lexicographic) order.
    Ok(AdjustmentResult {
        minimal_sets: minimal,
        forbidden,
    })
}

/// One of the three instrument conditions, with its verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstrumentCondition {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Per-condition breakdown of the instrument check for a candidate node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstrumentReport {
    pub node: NodeId,
    pub conditions: Vec<InstrumentCondition>,
    pub is_instrument: bool,
}

/// Evaluate the three instrument conditions for `z` individually.
pub fn check_instrument(dag: &Dag, z: &str, query: &CausalQuery) -> Result<InstrumentReport, GraphError> {
    let zi = dag.resolve(z)?;
    if z == query.exposure.as_str() || z == query.outcome.as_str() {
        return Err(GraphError::SameNode(z.to_owned()));
    }
    let x = dag.resolve(query.exposure.as_str())?;
    let y = dag.resolve(query.outcome.as_str())?;
    let conditions = instrument_conditions(dag, zi, x, y)?;
    let is_instrument = conditions.iter().all(|c| c.passed);
    Ok(InstrumentReport {
        node: dag.id_of(zi).clone(),
        conditions,
        is_instrument,
    })
}

fn instrument_conditions(
    dag: &Dag,
    z: usize,
    x: usize,
    y: usize,
) -> Result<Vec<InstrumentCondition>, GraphError> {
    let zn = dag.id_of(z);
    let xn = dag.id_of(x);
    let yn = dag.id_of(y);

    let relevance = dag.reaches_directed(z, x, None);
    let leak = dag.reaches_directed(z, y, Some(x));
    // Condition 3 runs on the graph with the exposure's outgoing edges cut,
    // so association surviving the cut cannot be flowing through the
    // exposure.
    let cut = dag.without_outgoing_edges(x);
    let separated = d_separated(&cut, zn.as_str(), yn.as_str(), &BTreeSet::new())?.separated;

    Ok(vec![
        InstrumentCondition {
            name: "causes_exposure",
            passed: relevance,
            detail: if relevance {
                format!("directed path {zn} -> ... -> {xn} exists")
            } else {
                format!("no directed path from {zn} to {xn}")
            },
        },
        InstrumentCondition {
            name: "exclusion_via_exposure",
            passed: !leak,
            detail: if leak {
                format!("a directed path from {zn} reaches {yn} without passing {xn}")
            } else {
                format!("every directed path from {zn} to {yn} passes through {xn}")
            },
        },
        InstrumentCondition {
            name: "no_open_backdoor_to_outcome",
            passed: separated,
            detail: if separated {
                format!("{zn} and {yn} are d-separated once edges out of {xn} are removed")
            } else {
                format!("{zn} and {yn} stay connected after removing edges out of {xn}")
            },
        },
    ])
}

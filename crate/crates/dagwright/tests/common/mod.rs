#![allow(dead_code)]

//! Shared generators for the integration suites: seeded random DAGs,
//! random linear models over them, and random documents exercising every
//! text-format feature.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use dagwright::dsl::{DagDocument, DocumentBuilder};
use dagwright::graph::{Dag, DagBuilder, Edge, NodeId};
use dagwright::scm::Scm;

pub const NAME_POOL: &[&str] = &[
    "A", "B", "C", "D", "E", "F", "G", "H", "J", "K", "L", "M", "N", "P", "Q", "R", "S", "T",
    "V", "W",
];

/// A random DAG: a hidden topological order over shuffled names, each
/// forward pair wired with probability `edge_prob`. Shuffling the names
/// keeps lexicographic order and topological order genuinely different.
pub fn random_dag(rng: &mut ChaCha12Rng, n_nodes: usize, edge_prob: f64) -> Dag {
    assert!(n_nodes >= 2 && n_nodes <= NAME_POOL.len());
    let mut names: Vec<&str> = NAME_POOL[..n_nodes].to_vec();
    names.shuffle(rng);

    let mut b = DagBuilder::new();
    for name in &names {
        b.node(name).unwrap();
    }
    for i in 0..n_nodes {
        for j in (i + 1)..n_nodes {
            if rng.gen_bool(edge_prob) {
                b.edge(names[i], names[j]).unwrap();
            }
        }
    }
    b.build().expect("forward wiring cannot form a cycle")
}

/// Unit-noise linear model with coefficients drawn uniformly from
/// `coef_range`.
pub fn random_scm(rng: &mut ChaCha12Rng, dag: &Dag, coef_range: (f64, f64)) -> Scm {
    let coefs: BTreeMap<Edge, f64> = dag
        .edges()
        .iter()
        .map(|e| (e.clone(), rng.gen_range(coef_range.0..coef_range.1)))
        .collect();
    let noise: BTreeMap<NodeId, f64> = dag.nodes().map(|id| (id.clone(), 1.0)).collect();
    Scm::new(dag.clone(), coefs, noise, BTreeMap::new()).expect("generated model is complete")
}

/// All subsets of `items` with size at most `max_size`.
pub fn small_subsets<'a, T: Clone>(items: &'a [T], max_size: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for size in 1..=max_size.min(items.len()) {
        let mut stack: Vec<(usize, Vec<T>)> = vec![(0, Vec::new())];
        while let Some((start, partial)) = stack.pop() {
            if partial.len() == size {
                out.push(partial);
                continue;
            }
            for i in start..items.len() {
                let mut next = partial.clone();
                next.push(items[i].clone());
                stack.push((i + 1, next));
            }
        }
    }
    out
}

/// A random document touching every grammar feature, built to satisfy the
/// document invariants by construction.
pub fn random_document(rng: &mut ChaCha12Rng, max_nodes: usize) -> DagDocument {
    let n_nodes = rng.gen_range(2..=max_nodes);
    let dag = random_dag(rng, n_nodes, 0.4);
    let names: Vec<String> = dag.nodes().map(|id| id.as_str().to_owned()).collect();

    let mut doc = DocumentBuilder::new(["net", "model", "study", "case_7"][rng.gen_range(0..4)]);

    for name in &names {
        if rng.gen_bool(0.25) {
            let label = format!("var {} \"{}\"", name, rng.gen_range(0..100));
            doc = doc.labeled_node(name, &label);
        } else {
            doc = doc.node(name);
        }
    }
    for edge in dag.edges() {
        if rng.gen_bool(0.5) {
            let coef = f64::from(rng.gen_range(-40i32..40)) / 8.0;
            doc = doc.edge_with_coef(edge.from.as_str(), edge.to.as_str(), coef);
        } else {
            doc = doc.edge(edge.from.as_str(), edge.to.as_str());
        }
    }

    // A couple of moderations where a valid (moderator, edge) pair exists;
    // repeats would be duplicate declarations, so dedupe.
    let edges = dag.edges();
    let mut used: Vec<(String, String, String)> = Vec::new();
    if !edges.is_empty() {
        for _ in 0..rng.gen_range(0..=2usize) {
            let edge = &edges[rng.gen_range(0..edges.len())];
            let candidates: Vec<&String> = names
                .iter()
                .filter(|n| *n != edge.from.as_str() && *n != edge.to.as_str())
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let moderator = candidates[rng.gen_range(0..candidates.len())];
            let key = (
                moderator.clone(),
                edge.from.as_str().to_owned(),
                edge.to.as_str().to_owned(),
            );
            if used.contains(&key) {
                continue;
            }
            used.push(key);
            let coef = rng
                .gen_bool(0.5)
                .then(|| f64::from(rng.gen_range(1i32..16)) / 10.0);
            doc = doc.moderation(moderator, edge.from.as_str(), edge.to.as_str(), coef);
        }
    }

    // Markers: exposure != outcome, adjusted and latent sets disjoint from
    // the query endpoints, latents never adjusted.
    let mut latent: Vec<&String> = Vec::new();
    let mut query_nodes: Vec<&String> = Vec::new();
    if names.len() >= 2 && rng.gen_bool(0.7) {
        let mut picks = names.iter().collect::<Vec<_>>();
        picks.shuffle(rng);
        query_nodes.push(picks[0]);
        query_nodes.push(picks[1]);
        doc = doc.exposure(picks[0]).outcome(picks[1]);
    }
    for name in &names {
        if query_nodes.contains(&name) {
            continue;
        }
        if rng.gen_bool(0.15) {
            doc = doc.latent(name);
            latent.push(name);
        } else if rng.gen_bool(0.2) {
            doc = doc.adjusted(name);
        }
    }
    for name in &names {
        if rng.gen_bool(0.3) {
            let var = f64::from(rng.gen_range(1i32..50)) / 10.0;
            doc = doc.noise(name, var);
        }
    }

    doc.build().expect("generator respects document invariants")
}

/// Deterministic rng for a test, named so seeds stay distinct per suite.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

//! Cross-module checks on random graphs: the covariance oracle for
//! d-separation, the two independent covariance routes, and the structural
//! properties of paths, roles, and adjustment sets.

mod common;

use std::collections::BTreeSet;

use dagwright::graph::NodeId;
use dagwright::paths::{classify_path, d_separated, enumerate_paths, is_blocked, CausalQuery};
use dagwright::scm::{
    implied_covariance, ols, partial_correlation, path_tracing_covariance, population_regression,
    sample_cov, simulate, total_effect, Dataset, Scm,
};
use dagwright::{corpus, dsl, find_adjustment_sets, classify_roles};

use common::{random_dag, random_scm, rng, small_subsets};

fn node_names(dag: &dagwright::graph::Dag) -> Vec<String> {
    dag.nodes().map(|n| n.as_str().to_owned()).collect()
}

fn to_set(names: &[String]) -> BTreeSet<NodeId> {
    names
        .iter()
        .map(|n| NodeId::new(n.as_str()).unwrap())
        .collect()
}

/// d-separation must agree exactly with vanishing partial correlation on the
/// implied covariance, for every pair and every small conditioning set.
#[test]
fn dsep_agrees_with_partial_correlation_oracle() {
    let mut rng = rng(0xD5EF);
    for round in 0..60 {
        let n = 3 + round % 6; // 3..=8 nodes
        let dag = random_dag(&mut rng, n, 0.35);
        let scm = random_scm(&mut rng, &dag, (0.5, 2.0));
        let cov = implied_covariance(&scm).unwrap();
        let names = node_names(&dag);

        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                let others: Vec<String> = names
                    .iter()
                    .filter(|nm| **nm != names[i] && **nm != names[j])
                    .cloned()
                    .collect();
                for given in small_subsets(&others, 3) {
                    let sep = d_separated(&dag, &names[i], &names[j], &to_set(&given))
                        .unwrap()
                        .separated;
                    let refs: Vec<&str> = given.iter().map(String::as_str).collect();
                    let pc = partial_correlation(&cov, &names[i], &names[j], &refs).unwrap();
                    assert_eq!(
                        sep,
                        pc.abs() < 1e-9,
                        "round {round}: ({}, {} | {:?}) d-sep {sep} but pcorr {pc}",
                        names[i],
                        names[j],
                        given
                    );
                }
            }
        }
    }
}

/// The trek-enumeration route must reproduce the triangular recursion on
/// every pair, for corpus and random models alike.
#[test]
fn path_tracing_matches_implied_covariance() {
    let mut models: Vec<Scm> = Vec::new();
    for id in corpus::ids() {
        let doc = corpus::document(id).unwrap().unwrap();
        let scm = Scm::from_document(&doc).unwrap();
        models.push(if scm.has_moderations() {
            scm.strip_moderations().unwrap()
        } else {
            scm
        });
    }
    let mut rng = rng(0x72EC);
    for round in 0..40 {
        let dag = random_dag(&mut rng, 3 + round % 6, 0.4);
        models.push(random_scm(&mut rng, &dag, (0.5, 2.0)));
    }

    for scm in &models {
        let cov = implied_covariance(scm).unwrap();
        let names = node_names(scm.dag());
        for a in &names {
            for b in &names {
                let traced = path_tracing_covariance(scm, a, b).unwrap();
                let direct = cov.get(a, b).unwrap();
                assert!(
                    (traced - direct).abs() <= 1e-9,
                    "cov({a}, {b}): traced {traced} vs direct {direct}"
                );
            }
        }
    }
}

/// Covariance matrices are symmetric and positive semidefinite.
#[test]
fn implied_covariance_is_symmetric_psd() {
    let mut rng = rng(0xC0F);
    for round in 0..40 {
        let dag = random_dag(&mut rng, 3 + round % 6, 0.4);
        let scm = random_scm(&mut rng, &dag, (0.5, 2.0));
        let cov = implied_covariance(&scm).unwrap();
        assert!(cov.asymmetry() <= 1e-12);
        assert!(cov.is_positive_semidefinite(1e-9));
    }
}

/// Paths come back simple, edge-connected, lexicographically ordered, and
/// symmetric in count under endpoint swap (with reversal preserving
/// colliders).
#[test]
fn enumerated_paths_are_simple_ordered_and_symmetric() {
    let mut rng = rng(0x9A7B);
    for round in 0..40 {
        let dag = random_dag(&mut rng, 3 + round % 6, 0.4);
        let names = node_names(&dag);
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                let forward = enumerate_paths(&dag, &names[i], &names[j]).unwrap();
                let backward = enumerate_paths(&dag, &names[j], &names[i]).unwrap();
                assert_eq!(forward.len(), backward.len(), "round {round}");

                let mut seqs: Vec<Vec<&str>> = Vec::new();
                for p in &forward {
                    // Simple.
                    let uniq: BTreeSet<&NodeId> = p.nodes().iter().collect();
                    assert_eq!(uniq.len(), p.nodes().len(), "repeated node in {p}");
                    // Edge-connected according to the stated traversals.
                    for (w, t) in p.nodes().windows(2).zip(p.traversals()) {
                        let ok = match t {
                            dagwright::Traversal::Forward => {
                                dag.has_edge(w[0].as_str(), w[1].as_str())
                            }
                            dagwright::Traversal::Backward => {
                                dag.has_edge(w[1].as_str(), w[0].as_str())
                            }
                        };
                        assert!(ok, "traversal mismatch in {p}");
                    }
                    seqs.push(p.nodes().iter().map(NodeId::as_str).collect());
                }
                let mut sorted = seqs.clone();
                sorted.sort();
                assert_eq!(seqs, sorted, "paths out of lexicographic order");

                // Reversal correspondence: the backward enumeration is the
                // same set of walks read the other way.
                let mut reversed: Vec<String> =
                    forward.iter().map(|p| p.reversed().to_string()).collect();
                reversed.sort();
                let mut got: Vec<String> = backward.iter().map(|p| p.to_string()).collect();
                got.sort();
                assert_eq!(reversed, got);
                for p in &forward {
                    assert_eq!(p.reversed().colliders(), p.colliders());
                }
            }
        }
    }
}

/// Blocking every path by its own non-collider interior yields separation,
/// whenever such a set exists and touches no collider machinery.
#[test]
fn conditioning_out_noncolliders_separates_corpus_pairs() {
    let mut applicable = 0;
    for id in corpus::ids() {
        let doc = corpus::document(id).unwrap().unwrap();
        let dag = doc.dag();
        let names = node_names(dag);
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                let paths = enumerate_paths(dag, &names[i], &names[j]).unwrap();
                if paths.is_empty() {
                    continue;
                }
                let mut blockers = BTreeSet::new();
                let mut colliders = BTreeSet::new();
                let mut premise_holds = true;
                for p in &paths {
                    let cls = classify_path(p);
                    let noncolliders: Vec<&NodeId> = p
                        .interior()
                        .iter()
                        .filter(|n| !cls.colliders.contains(*n))
                        .collect();
                    if p.interior().is_empty() {
                        // A bare edge cannot be blocked.
                        premise_holds = false;
                    }
                    blockers.extend(noncolliders.into_iter().cloned());
                    for c in &cls.colliders {
                        colliders.insert(c.clone());
                        colliders.extend(dag.descendants(c.as_str()).unwrap());
                    }
                }
                premise_holds &= blockers.is_disjoint(&colliders)
                    && blockers
                        .iter()
                        .all(|b| !dag.is_latent(b.as_str()).unwrap());
                if !premise_holds {
                    continue;
                }
                applicable += 1;
                let sep = d_separated(dag, &names[i], &names[j], &blockers).unwrap();
                assert!(
                    sep.separated,
                    "{id}: ({}, {}) not separated by {blockers:?}",
                    names[i], names[j]
                );
            }
        }
    }
    assert!(applicable > 0, "corollary never applied");
}

/// Minimality and soundness of every returned adjustment set, checked
/// directly on random graphs.
#[test]
fn adjustment_sets_are_minimal_and_sound() {
    let mut rng = rng(0xAD57);
    for round in 0..40 {
        let dag = random_dag(&mut rng, 3 + round % 6, 0.4);
        let names = node_names(&dag);
        let x = &names[0];
        let y = names.last().unwrap();
        if x == y {
            continue;
        }
        let query = CausalQuery::new(&dag, x, y, &[]).unwrap();
        let backdoor = dagwright::backdoor_paths(&dag, &query).unwrap();
        let result = find_adjustment_sets(&dag, &query).unwrap();

        for s in &result.minimal_sets {
            assert!(s.is_disjoint(&result.forbidden), "round {round}");
            for p in &backdoor {
                assert!(is_blocked(&dag, p, s).unwrap(), "round {round}: unsound");
            }
            for drop in s {
                let mut smaller = s.clone();
                smaller.remove(drop);
                let blocks_all = backdoor
                    .iter()
                    .all(|p| is_blocked(&dag, p, &smaller).unwrap());
                assert!(!blocks_all, "round {round}: {s:?} not minimal");
            }
        }
        // No set is a superset of another.
        for a in &result.minimal_sets {
            for b in &result.minimal_sets {
                if a != b {
                    assert!(!a.is_superset(b));
                }
            }
        }
    }
}

/// Adjusting the outcome-on-exposure regression by any returned minimal set
/// recovers the total causal effect, on every corpus model.
#[test]
fn adjusted_regression_recovers_total_effect_on_corpus() {
    for id in corpus::ids() {
        let doc = corpus::document(id).unwrap().unwrap();
        let scm = {
            let raw = Scm::from_document(&doc).unwrap();
            if raw.has_moderations() {
                raw.strip_moderations().unwrap()
            } else {
                raw
            }
        };
        let dag = scm.dag();
        let query = doc.default_query().unwrap().unwrap();
        let x = query.exposure.as_str();
        let y = query.outcome.as_str();
        let query = CausalQuery::new(dag, x, y, &[]).unwrap();

        let cov = implied_covariance(&scm).unwrap();
        let effect = total_effect(&scm, x, y).unwrap();
        for set in &find_adjustment_sets(dag, &query).unwrap().minimal_sets {
            let mut predictors = vec![x];
            predictors.extend(set.iter().map(NodeId::as_str));
            let slope = population_regression(&cov, y, &predictors).unwrap()[0];
            assert!(
                (slope - effect).abs() <= 1e-9,
                "{id}: adjusted slope {slope} vs effect {effect} under {set:?}"
            );
        }
    }
}

/// Role classification commutes with renaming the nodes.
#[test]
fn classify_roles_is_invariant_under_renaming() {
    let mut rng = rng(0x5EED);
    for round in 0..25 {
        let dag = random_dag(&mut rng, 4 + round % 5, 0.4);
        let names = node_names(&dag);
        let x = &names[0];
        let y = names.last().unwrap();
        let report = classify_roles(&dag, &CausalQuery::new(&dag, x, y, &[]).unwrap()).unwrap();

        // Rename every node by prefixing; rebuild through the text format.
        let doc = dsl::DocumentBuilder::new("renamed");
        let mut doc = doc;
        for name in &names {
            doc = doc.node(&format!("zz_{name}"));
        }
        for e in dag.edges() {
            doc = doc.edge(&format!("zz_{}", e.from), &format!("zz_{}", e.to));
        }
        let renamed = doc.build().unwrap();
        let rq = CausalQuery::new(renamed.dag(), &format!("zz_{x}"), &format!("zz_{y}"), &[])
            .unwrap();
        let renamed_report = classify_roles(renamed.dag(), &rq).unwrap();

        let map = |set: &BTreeSet<NodeId>| -> BTreeSet<String> {
            set.iter().map(|n| format!("zz_{n}")).collect()
        };
        let got = |set: &BTreeSet<NodeId>| -> BTreeSet<String> {
            set.iter().map(|n| n.as_str().to_owned()).collect()
        };
        assert_eq!(map(&report.mediators), got(&renamed_report.mediators));
        assert_eq!(map(&report.confounders), got(&renamed_report.confounders));
        assert_eq!(map(&report.instruments), got(&renamed_report.instruments));
        assert_eq!(map(&report.unclassified), got(&renamed_report.unclassified));
        assert_eq!(report.colliders.len(), renamed_report.colliders.len());
    }
}

/// Sample covariance converges to the implied covariance within five
/// standard Monte-Carlo errors per entry.
#[test]
fn sample_covariance_converges_to_implied() {
    let doc = corpus::document("flood").unwrap().unwrap();
    let scm = Scm::from_document(&doc).unwrap();
    let cov = implied_covariance(&scm).unwrap();
    let n = 100_000;
    let data = simulate(&scm, n, 1234).unwrap();
    let names = node_names(scm.dag());
    for a in &names {
        for b in &names {
            let sa = data.column(a).unwrap();
            let sb = data.column(b).unwrap();
            let observed = sample_cov(&sa, &sb);
            let expected = cov.get(a, b).unwrap();
            // Var of a sample covariance of joint Gaussians.
            let sigma = ((cov.get(a, a).unwrap() * cov.get(b, b).unwrap()
                + expected * expected)
                / n as f64)
                .sqrt();
            assert!(
                (observed - expected).abs() <= 5.0 * sigma,
                "cov({a}, {b}): {observed} vs {expected} (sigma {sigma})"
            );
        }
    }
}

/// Regressing a node on all of its parents over exact (noise-free) columns
/// returns the structural coefficients.
#[test]
fn ols_recovers_structural_coefficients_from_exact_columns() {
    let mut rng = rng(0x0152);
    for round in 0..20 {
        let dag = random_dag(&mut rng, 4 + round % 5, 0.5);
        let scm = random_scm(&mut rng, &dag, (0.5, 2.0));
        let names = node_names(&dag);
        let Some(target) = names
            .iter()
            .find(|n| !dag.parents(n).unwrap().is_empty())
        else {
            continue;
        };
        let parents: Vec<NodeId> = dag.parents(target).unwrap().into_iter().collect();

        let base = simulate(&scm, 300, round as u64).unwrap();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut headers: Vec<&str> = Vec::new();
        for p in &parents {
            cols.push(base.column(p.as_str()).unwrap());
            headers.push(p.as_str());
        }
        let mut y = vec![0.0; base.n_rows()];
        for (p, col) in parents.iter().zip(&cols) {
            let coef = scm
                .coef(&dagwright::Edge {
                    from: p.clone(),
                    to: NodeId::new(target.as_str()).unwrap(),
                })
                .unwrap();
            for (acc, v) in y.iter_mut().zip(col) {
                *acc += coef * v;
            }
        }
        cols.push(y);
        headers.push("y_exact");
        let data = Dataset::from_columns(&headers, &cols).unwrap();
        let predictors: Vec<&str> = parents.iter().map(NodeId::as_str).collect();
        let fit = ols(&data, "y_exact", &predictors).unwrap();
        assert!(fit.intercept.abs() < 1e-8, "round {round}");
        for (p, got) in parents.iter().zip(&fit.coefficients) {
            let want = scm
                .coef(&dagwright::Edge {
                    from: p.clone(),
                    to: NodeId::new(target.as_str()).unwrap(),
                })
                .unwrap();
            assert!(
                (got - want).abs() < 1e-8,
                "round {round}: coefficient on {p}: {got} vs {want}"
            );
        }
    }
}

//! Linear-Gaussian structural-model engine.
//!
//! Each node is assigned the coefficient-weighted sum of its parents, plus
//! one interaction term per moderation annotation, plus independent Gaussian
//! noise. Two independent routes compute population covariances — the
//! triangular recursion in [`implied_covariance`] and explicit trek
//! enumeration in [`path_tracing_covariance`] — and cross-validate each
//! other; everything else (partial correlation, population regression, the
//! IV ratio) reduces to covariance algebra, so population checks stay free
//! of Monte-Carlo noise wherever moderation is absent.
//!
//! Moderation makes a model non-Gaussian, so the covariance routes refuse
//! it; [`simulate`] is the only operation that gives interaction terms
//! meaning.

mod demo;
mod linalg;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::dsl::DagDocument;
use crate::graph::{Dag, Edge, GraphError, Moderation, NodeId};
use linalg::SymMatrix;

pub use demo::{bias_demo, DemoCase, DemoCheck, DemoReport};

/// Conditioning guard for every linear solve in this module: a pivot at or
/// below this (on unit-scaled matrices) is treated as rank deficiency.
pub const CONDITION_TOL: f64 = 1e-10;

/// Residual variances at or below this are degenerate for correlation
/// purposes.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Instrument strength floor for the IV ratio denominator.
pub const WEAK_INSTRUMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("model has moderation terms; this operation needs a moderation-free model")]
    ModerationPresent,
    #[error("edge {0} -> {1} has no coefficient")]
    MissingCoefficient(String, String),
    #[error("coefficient for unknown edge {0} -> {1}")]
    UnknownEdge(String, String),
    #[error("noise variance for `{0}` must be positive and finite, got {1}")]
    InvalidNoise(String, f64),
    #[error("conditioning set makes the covariance singular (pivot {0:.3e})")]
    SingularMatrix(f64),
    #[error("predictors are collinear (conditioning pivot {0:.3e})")]
    RankDeficient(f64),
    #[error("instrument is too weak: |cov(z, x)| = {0:.3e}")]
    WeakInstrument(f64),
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate predictor `{0}`")]
    DuplicatePredictor(String),
    #[error("response `{0}` cannot also be a predictor")]
    ResponseIsPredictor(String),
    #[error("no predictors given")]
    NoPredictors,
    #[error("{n} rows is too few; need at least {need}")]
    TooFewRows { n: usize, need: usize },
    #[error("unknown demo case `{0}` (expected flood, bridges, quake, or fire)")]
    UnknownCase(String),
    #[error("malformed csv: {0}")]
    CsvFormat(String),
    #[error("io error: {0}")]
    Io(String),
}

/// A fully parameterized linear-Gaussian model over a DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    coefs: BTreeMap<Edge, f64>,
    noise: BTreeMap<NodeId, f64>,
    mod_coefs: BTreeMap<Moderation, f64>,
    // Compiled per-node views, indexed in canonical order.
    parent_terms: Vec<Vec<(usize, f64)>>,
    child_terms: Vec<Vec<(usize, f64)>>,
    interaction_terms: Vec<Vec<(usize, usize, f64)>>,
    noise_by_idx: Vec<f64>,
}

impl Scm {
    pub fn new(
        dag: Dag,
        coefs: BTreeMap<Edge, f64>,
        noise: BTreeMap<NodeId, f64>,
        mod_coefs: BTreeMap<Moderation, f64>,
    ) -> Result<Self, ScmError> {
        for edge in coefs.keys() {
            if !dag.has_edge(edge.from.as_str(), edge.to.as_str()) {
                return Err(ScmError::UnknownEdge(
                    edge.from.as_str().to_owned(),
                    edge.to.as_str().to_owned(),
                ));
            }
        }
        for edge in dag.edges() {
            let c = coefs.get(edge).copied().ok_or_else(|| {
                ScmError::MissingCoefficient(
                    edge.from.as_str().to_owned(),
                    edge.to.as_str().to_owned(),
                )
            })?;
            if !c.is_finite() {
                return Err(ScmError::MissingCoefficient(
                    edge.from.as_str().to_owned(),
                    edge.to.as_str().to_owned(),
                ));
            }
        }
        for id in dag.nodes() {
            match noise.get(id) {
                Some(v) if v.is_finite() && *v > 0.0 => {}
                Some(v) => return Err(ScmError::InvalidNoise(id.as_str().to_owned(), *v)),
                None => return Err(ScmError::InvalidNoise(id.as_str().to_owned(), f64::NAN)),
            }
        }
        for m in dag.moderations() {
            if !mod_coefs.contains_key(m) {
                return Err(ScmError::MissingCoefficient(
                    m.target_from.as_str().to_owned(),
                    m.target_to.as_str().to_owned(),
                ));
            }
        }

        let n = dag.node_count();
        let mut parent_terms = vec![Vec::new(); n];
        let mut child_terms = vec![Vec::new(); n];
        for edge in dag.edges() {
            let f = dag.resolve(edge.from.as_str())?;
            let t = dag.resolve(edge.to.as_str())?;
            parent_terms[t].push((f, coefs[edge]));
            child_terms[f].push((t, coefs[edge]));
        }
        let mut interaction_terms = vec![Vec::new(); n];
        for m in dag.moderations() {
            let moderator = dag.resolve(m.moderator.as_str())?;
            let parent = dag.resolve(m.target_from.as_str())?;
            let child = dag.resolve(m.target_to.as_str())?;
            interaction_terms[child].push((moderator, parent, mod_coefs[m]));
        }
        let noise_by_idx = dag
            .nodes()
            .map(|id| noise[id])
            .collect();

        Ok(Scm {
            dag,
            coefs,
            noise,
            mod_coefs,
            parent_terms,
            child_terms,
            interaction_terms,
            noise_by_idx,
        })
    }

    /// All coefficients and noise variances 1.0; moderation strengths 1.0.
    pub fn unit(dag: Dag) -> Result<Self, ScmError> {
        let coefs = dag.edges().iter().map(|e| (e.clone(), 1.0)).collect();
        let noise = dag.nodes().map(|id| (id.clone(), 1.0)).collect();
        let mods = dag.moderations().iter().map(|m| (m.clone(), 1.0)).collect();
        Scm::new(dag, coefs, noise, mods)
    }

    /// Build from a document: anything the file does not pin defaults to 1.0.
    /// These unit conventions make every population quantity hand-derivable;
    /// they are test conventions, not measured values.
    pub fn from_document(doc: &DagDocument) -> Result<Self, ScmError> {
        let dag = doc.dag().clone();
        let mut coefs: BTreeMap<Edge, f64> =
            dag.edges().iter().map(|e| (e.clone(), 1.0)).collect();
        for (e, v) in doc.edge_coefs() {
            coefs.insert(e.clone(), *v);
        }
        let mut noise: BTreeMap<NodeId, f64> =
            dag.nodes().map(|id| (id.clone(), 1.0)).collect();
        for (id, v) in doc.noise() {
            noise.insert(id.clone(), *v);
        }
        let mut mods: BTreeMap<Moderation, f64> =
            dag.moderations().iter().map(|m| (m.clone(), 1.0)).collect();
        for (m, v) in doc.moderation_coefs() {
            mods.insert(m.clone(), *v);
        }
        Scm::new(dag, coefs, noise, mods)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn coef(&self, edge: &Edge) -> Option<f64> {
        self.coefs.get(edge).copied()
    }

    pub fn noise_var(&self, node: &NodeId) -> Option<f64> {
        self.noise.get(node).copied()
    }

    pub fn mod_coef(&self, m: &Moderation) -> Option<f64> {
        self.mod_coefs.get(m).copied()
    }

    pub fn has_moderations(&self) -> bool {
        !self.dag.moderations().is_empty()
    }

    /// The same model with moderation annotations (and their interaction
    /// terms) dropped — the linear skeleton.
    pub fn strip_moderations(&self) -> Result<Scm, ScmError> {
        let mut b = crate::graph::DagBuilder::new();
        for id in self.dag.nodes() {
            if self.dag.is_latent(id.as_str())? {
                b.latent_node(id.as_str())?;
            } else {
                b.node(id.as_str())?;
            }
            if let Some(label) = self.dag.label(id.as_str())? {
                b.labeled_node(id.as_str(), label)?;
            }
        }
        for e in self.dag.edges() {
            b.edge(e.from.as_str(), e.to.as_str())?;
        }
        let dag = b.build()?;
        Scm::new(dag, self.coefs.clone(), self.noise.clone(), BTreeMap::new())
    }

    fn require_linear(&self) -> Result<(), ScmError> {
        if self.has_moderations() {
            Err(ScmError::ModerationPresent)
        } else {
            Ok(())
        }
    }
}

/// Symmetric covariance matrix over named variables.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    labels: Vec<NodeId>,
    values: SymMatrix,
}

impl CovMatrix {
    pub fn labels(&self) -> &[NodeId] {
        &self.labels
    }

    pub fn get(&self, x: &str, y: &str) -> Result<f64, ScmError> {
        Ok(self.values.get(self.position(x)?, self.position(y)?))
    }

    fn position(&self, name: &str) -> Result<usize, ScmError> {
        self.labels
            .iter()
            .position(|l| l.as_str() == name)
            .ok_or_else(|| ScmError::UnknownColumn(name.to_owned()))
    }

    /// Largest symmetry defect, for invariant checks.
    pub fn asymmetry(&self) -> f64 {
        let n = self.labels.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.values.get(i, j) - self.values.get(j, i)).abs());
            }
        }
        worst
    }

    /// True when all eigenvalues are at least `-slack`, decided by a
    /// Cholesky attempt on the slack-shifted matrix.
    pub fn is_positive_semidefinite(&self, slack: f64) -> bool {
        let n = self.labels.len();
        let mut shifted = self.values.clone();
        for i in 0..n {
            shifted.set(i, i, shifted.get(i, i) + slack);
        }
        linalg::cholesky(&shifted, 0.0).is_ok()
    }
}

/// Population covariance by the triangular recursion in canonical
/// (topological) order: each node's row follows from its parents' rows, so
/// no matrix inversion is ever needed.
pub fn implied_covariance(scm: &Scm) -> Result<CovMatrix, ScmError> {
    scm.require_linear()?;
    let n = scm.dag.node_count();
    let mut cov = SymMatrix::zeros(n);
    for j in 0..n {
        for i in 0..j {
            let mut v = 0.0;
            for &(p, c) in &scm.parent_terms[j] {
                v += c * cov.get(p, i);
            }
            cov.set(j, i, v);
        }
        let mut var = scm.noise_by_idx[j];
        for &(p, c) in &scm.parent_terms[j] {
            var += c * cov.get(p, j);
        }
        cov.set(j, j, var);
    }
    Ok(CovMatrix {
        labels: scm.dag.nodes().cloned().collect(),
        values: cov,
    })
}

/// Sum over all directed paths `from -> ... -> to` of the product of edge
/// coefficients, by explicit enumeration (the empty path counts 1.0).
fn directed_path_sum(scm: &Scm, from: usize, to: usize) -> f64 {
    if from == to {
        return 1.0;
    }
    scm.child_terms[from]
        .iter()
        .map(|&(child, coef)| coef * directed_path_sum(scm, child, to))
        .sum()
}

/// Wright-style covariance: sum over treks. A trek is a pair of directed
/// paths out of a common source node, one to `x` and one to `y`; its
/// contribution is the source's noise variance times both paths' coefficient
/// products. Implemented by path enumeration, fully independent of
/// [`implied_covariance`], and cross-checked against it in the tests.
pub fn path_tracing_covariance(scm: &Scm, x: &str, y: &str) -> Result<f64, ScmError> {
    scm.require_linear()?;
    let xi = scm.dag.resolve(x)?;
    let yi = scm.dag.resolve(y)?;
    let mut total = 0.0;
    for s in 0..scm.dag.node_count() {
        let to_x = directed_path_sum(scm, s, xi);
        if to_x == 0.0 {
            continue;
        }
        let to_y = directed_path_sum(scm, s, yi);
        total += scm.noise_by_idx[s] * to_x * to_y;
    }
    Ok(total)
}

/// Total causal effect of `x` on `y`: the sum over directed paths of
/// coefficient products.
pub fn total_effect(scm: &Scm, x: &str, y: &str) -> Result<f64, ScmError> {
    scm.require_linear()?;
    let xi = scm.dag.resolve(x)?;
    let yi = scm.dag.resolve(y)?;
    if xi == yi {
        return Err(GraphError::SameNode(x.to_owned()).into());
    }
    Ok(directed_path_sum(scm, xi, yi))
}

/// A rectangular sample with named columns. Latent columns are kept for
/// analysis but never exported.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    latent: Vec<bool>,
    rows: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl Dataset {
    pub fn from_columns(names: &[&str], cols: &[Vec<f64>]) -> Result<Self, ScmError> {
        assert_eq!(names.len(), cols.len(), "one name per column");
        let n = cols.first().map(|c| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(ScmError::EmptySample);
        }
        if cols.iter().any(|c| c.len() != n) {
            return Err(ScmError::CsvFormat("ragged columns".to_owned()));
        }
        let rows = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        Ok(Dataset {
            columns: names.iter().map(|s| (*s).to_owned()).collect(),
            latent: vec![false; names.len()],
            rows,
            seed: None,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_latent(&self, name: &str) -> bool {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.latent[i])
            .unwrap_or(false)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, ScmError> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ScmError::UnknownColumn(name.to_owned()))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// CSV with a one-line header; latent columns are dropped.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<(), ScmError> {
        let mut w = csv::Writer::from_writer(writer);
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&i| !self.latent[i])
            .collect();
        w.write_record(keep.iter().map(|&i| self.columns[i].as_str()))
            .map_err(|e| ScmError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(keep.iter().map(|&i| format!("{:?}", row[i])))
                .map_err(|e| ScmError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| ScmError::Io(e.to_string()))
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ScmError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| ScmError::CsvFormat(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if columns.is_empty() {
            return Err(ScmError::CsvFormat("empty header".to_owned()));
        }
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record.map_err(|e| ScmError::CsvFormat(e.to_string()))?;
            if record.len() != columns.len() {
                return Err(ScmError::CsvFormat(format!(
                    "row {} has {} fields, header has {}",
                    rows.len() + 2,
                    record.len(),
                    columns.len()
                )));
            }
            let row: Result<Vec<f64>, _> = record
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| ScmError::CsvFormat(format!("not a number: `{f}`")))
                })
                .collect();
            rows.push(row?);
        }
        if rows.is_empty() {
            return Err(ScmError::EmptySample);
        }
        let latent = vec![false; columns.len()];
        Ok(Dataset {
            columns,
            latent,
            rows,
            seed: None,
        })
    }
}

/// Ancestral sampling in canonical (topological) order. Each node draws the
/// weighted sum of its parents plus interaction terms plus Gaussian noise.
/// Output is a pure function of `(scm, n, seed)`.
pub fn simulate(scm: &Scm, n: usize, seed: u64) -> Result<Dataset, ScmError> {
    simulate_with(scm, n, seed, &BTreeMap::new())
}

/// [`simulate`] under interventions: listed nodes are clamped to constants,
/// draw no noise, and ignore their parents.
pub fn simulate_with(
    scm: &Scm,
    n: usize,
    seed: u64,
    interventions: &BTreeMap<NodeId, f64>,
) -> Result<Dataset, ScmError> {
    if n == 0 {
        return Err(ScmError::EmptySample);
    }
    for id in interventions.keys() {
        scm.dag.resolve(id.as_str())?;
    }
    let count = scm.dag.node_count();
    let clamp: Vec<Option<f64>> = scm
        .dag
        .nodes()
        .map(|id| interventions.get(id).copied())
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![0.0; count];
        for j in 0..count {
            if let Some(v) = clamp[j] {
                row[j] = v;
                continue;
            }
            let mut v = 0.0;
            for &(p, c) in &scm.parent_terms[j] {
                v += c * row[p];
            }
            for &(m, p, c) in &scm.interaction_terms[j] {
                v += c * row[m] * row[p];
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            row[j] = v + z * scm.noise_by_idx[j].sqrt();
        }
        rows.push(row);
    }

    Ok(Dataset {
        columns: scm.dag.nodes().map(|id| id.as_str().to_owned()).collect(),
        latent: scm
            .dag
            .nodes()
            .map(|id| scm.dag.is_latent(id.as_str()).unwrap_or(false))
            .collect(),
        rows,
        seed: Some(seed),
    })
}

/// Partial correlation of `x` and `y` given a conditioning set, by Schur
/// complement on the conditioned block. Result is clamped to [-1, 1].
pub fn partial_correlation(
    cov: &CovMatrix,
    x: &str,
    y: &str,
    given: &[&str],
) -> Result<f64, ScmError> {
    let xi = cov.position(x)?;
    let yi = cov.position(y)?;
    let s: Vec<usize> = given
        .iter()
        .map(|g| cov.position(g))
        .collect::<Result<_, _>>()?;

    let (cxx, cyy, cxy) = if s.is_empty() {
        (
            cov.values.get(xi, xi),
            cov.values.get(yi, yi),
            cov.values.get(xi, yi),
        )
    } else {
        let k = s.len();
        let mut block = SymMatrix::zeros(k);
        for a in 0..k {
            for b in a..k {
                block.set(a, b, cov.values.get(s[a], s[b]));
            }
        }
        let l = linalg::cholesky(&block, SINGULAR_TOL)
            .map_err(|d| ScmError::SingularMatrix(d.pivot))?;
        let sx: Vec<f64> = s.iter().map(|&i| cov.values.get(i, xi)).collect();
        let sy: Vec<f64> = s.iter().map(|&i| cov.values.get(i, yi)).collect();
        let wx = linalg::chol_solve(&l, k, &sx);
        let wy = linalg::chol_solve(&l, k, &sy);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        (
            cov.values.get(xi, xi) - dot(&sx, &wx),
            cov.values.get(yi, yi) - dot(&sy, &wy),
            cov.values.get(xi, yi) - dot(&sx, &wy),
        )
    };

    if cxx <= SINGULAR_TOL || cyy <= SINGULAR_TOL {
        return Err(ScmError::SingularMatrix(cxx.min(cyy)));
    }
    Ok((cxy / (cxx * cyy).sqrt()).clamp(-1.0, 1.0))
}

/// Ordinary least squares with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub response: String,
    pub predictors: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionFit {
    pub fn coefficient(&self, predictor: &str) -> Option<f64> {
        self.predictors
            .iter()
            .position(|p| p == predictor)
            .map(|i| self.coefficients[i])
    }

    pub fn fitted(&self, dataset: &Dataset) -> Result<Vec<f64>, ScmError> {
        let y = dataset.column(&self.response)?;
        Ok(y.iter()
            .zip(&self.residuals)
            .map(|(v, e)| v - e)
            .collect())
    }
}

pub fn ols(dataset: &Dataset, response: &str, predictors: &[&str]) -> Result<RegressionFit, ScmError> {
    if predictors.is_empty() {
        return Err(ScmError::NoPredictors);
    }
    for (i, p) in predictors.iter().enumerate() {
        if predictors[..i].contains(p) {
            return Err(ScmError::DuplicatePredictor((*p).to_owned()));
        }
        if *p == response {
            return Err(ScmError::ResponseIsPredictor(response.to_owned()));
        }
    }
    let n = dataset.n_rows();
    let need = predictors.len() + 2;
    if n < need {
        return Err(ScmError::TooFewRows { n, need });
    }

    let y = dataset.column(response)?;
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for p in predictors {
        cols.push(dataset.column(p)?);
    }
    let beta = linalg::least_squares(&cols, &y, CONDITION_TOL)
        .map_err(|d| ScmError::RankDeficient(d.pivot))?;

    let mut residuals = y.clone();
    for (col, b) in cols.iter().zip(&beta) {
        for (r, v) in residuals.iter_mut().zip(col) {
            *r -= b * v;
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(RegressionFit {
        response: response.to_owned(),
        predictors: predictors.iter().map(|s| (*s).to_owned()).collect(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        residuals,
        r_squared,
        n,
    })
}

/// Population regression slopes of `response` on `predictors`, straight from
/// a covariance matrix (all structural means are zero, so no intercept).
pub fn population_regression(
    cov: &CovMatrix,
    response: &str,
    predictors: &[&str],
) -> Result<Vec<f64>, ScmError> {
    if predictors.is_empty() {
        return Err(ScmError::NoPredictors);
    }
    let yi = cov.position(response)?;
    let idx: Vec<usize> = predictors
        .iter()
        .map(|p| cov.position(p))
        .collect::<Result<_, _>>()?;
    let k = idx.len();
    let mut block = SymMatrix::zeros(k);
    for a in 0..k {
        for b in a..k {
            block.set(a, b, cov.values.get(idx[a], idx[b]));
        }
    }
    let l = linalg::cholesky(&block, CONDITION_TOL)
        .map_err(|d| ScmError::RankDeficient(d.pivot))?;
    let rhs: Vec<f64> = idx.iter().map(|&i| cov.values.get(i, yi)).collect();
    Ok(linalg::chol_solve(&l, k, &rhs))
}

/// Instrumental-variable ratio `cov(z, y) / cov(z, x)` from a population
/// covariance.
pub fn iv_from_cov(cov: &CovMatrix, z: &str, x: &str, y: &str) -> Result<f64, ScmError> {
    let zx = cov.get(z, x)?;
    if zx.abs() <= WEAK_INSTRUMENT_TOL {
        return Err(ScmError::WeakInstrument(zx.abs()));
    }
    Ok(cov.get(z, y)? / zx)
}

/// The same ratio from sample covariances.
pub fn iv_from_dataset(dataset: &Dataset, z: &str, x: &str, y: &str) -> Result<f64, ScmError> {
    let zc = dataset.column(z)?;
    let xc = dataset.column(x)?;
    let yc = dataset.column(y)?;
    let zx = sample_cov(&zc, &xc);
    if zx.abs() <= WEAK_INSTRUMENT_TOL {
        return Err(ScmError::WeakInstrument(zx.abs()));
    }
    Ok(sample_cov(&zc, &yc) / zx)
}

/// Guarded least squares shared with the diagnostics module: same solver,
/// same conditioning tolerance as [`ols`].
pub(crate) fn least_squares_guarded(cols: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, ScmError> {
    linalg::least_squares(cols, y, CONDITION_TOL).map_err(|d| ScmError::RankDeficient(d.pivot))
}

/// Unbiased sample covariance.
pub fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    if n < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::graph::DagBuilder;

    fn doc_scm(text: &str) -> Scm {
        Scm::from_document(&parse(text).unwrap()).unwrap()
    }

    fn bridges() -> Scm {
        doc_scm("dag bridges { L -> S  P -> S }")
    }

    fn flood() -> Scm {
        doc_scm("dag flood { Z -> N  Z -> F  N -> F }")
    }

    fn quake() -> Scm {
        doc_scm("dag quake { R -> E  E -> M  M -> D }")
    }

    #[test]
    fn bridges_implied_covariance() {
        let cov = implied_covariance(&bridges()).unwrap();
        assert!((cov.get("S", "S").unwrap() - 3.0).abs() < 1e-12);
        assert!((cov.get("L", "S").unwrap() - 1.0).abs() < 1e-12);
        assert!((cov.get("L", "P").unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn single_node_covariance_is_noise() {
        let mut b = DagBuilder::new();
        b.node("X").unwrap();
        let dag = b.build().unwrap();
        let scm = Scm::new(
            dag,
            BTreeMap::new(),
            [(NodeId::new("X").unwrap(), 2.5)].into(),
            BTreeMap::new(),
        )
        .unwrap();
        let cov = implied_covariance(&scm).unwrap();
        assert_eq!(cov.get("X", "X").unwrap(), 2.5);
    }

    #[test]
    fn flood_implied_covariance() {
        let cov = implied_covariance(&flood()).unwrap();
        assert!((cov.get("N", "N").unwrap() - 2.0).abs() < 1e-12);
        assert!((cov.get("N", "F").unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn path_tracing_matches_examples() {
        let q = quake();
        assert!((path_tracing_covariance(&q, "R", "D").unwrap() - 1.0).abs() < 1e-12);
        let b = bridges();
        assert_eq!(path_tracing_covariance(&b, "L", "P").unwrap(), 0.0);
        // Self-covariance equals the implied variance.
        let cov = implied_covariance(&b).unwrap();
        let v = path_tracing_covariance(&b, "S", "S").unwrap();
        assert!((v - cov.get("S", "S").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn moderation_blocks_covariance_routes() {
        let scm = doc_scm("dag fire { G -> Y  T ~> (G -> Y) [coef=0.8] }");
        assert_eq!(implied_covariance(&scm), Err(ScmError::ModerationPresent));
        assert_eq!(
            path_tracing_covariance(&scm, "G", "Y"),
            Err(ScmError::ModerationPresent)
        );
        let stripped = scm.strip_moderations().unwrap();
        assert!(implied_covariance(&stripped).is_ok());
    }

    #[test]
    fn simulate_shape_and_determinism() {
        let scm = quake();
        let a = simulate(&scm, 5, 99).unwrap();
        assert_eq!(a.n_rows(), 5);
        assert_eq!(a.columns(), ["R", "E", "M", "D"]);
        let b = simulate(&scm, 5, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&scm, 5, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_noise_approaches_path_tracing() {
        let doc = parse(
            "dag quake { R -> E  E -> M  M -> D \
             noise E 1e-12  noise M 1e-12  noise D 1e-12 }",
        )
        .unwrap();
        let scm = Scm::from_document(&doc).unwrap();
        let data = simulate(&scm, 20_000, 3).unwrap();
        let r = data.column("R").unwrap();
        let d = data.column("D").unwrap();
        let observed = sample_cov(&r, &d);
        // R still has unit variance, so sampling error ~ 1/sqrt(n).
        assert!(
            (observed - 1.0).abs() < 0.05,
            "cov(R, D) = {observed}, want 1.0"
        );
    }

    #[test]
    fn partial_correlation_bridges() {
        let cov = implied_covariance(&bridges()).unwrap();
        assert_eq!(partial_correlation(&cov, "L", "P", &[]).unwrap(), 0.0);
        let r = partial_correlation(&cov, "L", "P", &["S"]).unwrap();
        assert!((r - (-0.5)).abs() < 1e-12, "{r}");
        assert_eq!(partial_correlation(&cov, "L", "L", &[]).unwrap(), 1.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let data = Dataset::from_columns(&["x", "y"], &[x, y]).unwrap();
        let fit = ols(&data, "y", &["x"]).unwrap();
        assert!((fit.intercept - 1.0).abs() < 1e-10);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn population_regression_flood() {
        let cov = implied_covariance(&flood()).unwrap();
        let marginal = population_regression(&cov, "F", &["N"]).unwrap();
        assert!((marginal[0] - 1.5).abs() < 1e-12);
        let adjusted = population_regression(&cov, "F", &["N", "Z"]).unwrap();
        assert!((adjusted[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iv_beats_ols_under_latent_confounding() {
        let scm = doc_scm("dag iv { Z -> X  U -> X  U -> Y  X -> Y  latent U }");
        let cov = implied_covariance(&scm).unwrap();
        assert!((iv_from_cov(&cov, "Z", "X", "Y").unwrap() - 1.0).abs() < 1e-12);
        let naive = population_regression(&cov, "Y", &["X"]).unwrap()[0];
        assert!((naive - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn weak_instrument_detected() {
        let scm = doc_scm("dag g { Z  X -> Y }");
        let cov = implied_covariance(&scm).unwrap();
        assert!(matches!(
            iv_from_cov(&cov, "Z", "X", "Y"),
            Err(ScmError::WeakInstrument(_))
        ));
    }

    #[test]
    fn rank_deficiency_detected() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let dup = x.clone();
        let data = Dataset::from_columns(&["x", "x2", "y"], &[x, dup, y]).unwrap();
        assert!(matches!(
            ols(&data, "y", &["x", "x2"]),
            Err(ScmError::RankDeficient(_))
        ));
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let scm = flood();
        let data = simulate(&scm, 500, 11).unwrap();
        let fit = ols(&data, "F", &["N", "Z"]).unwrap();
        let n = data.n_rows() as f64;
        for col in ["N", "Z"] {
            let c = data.column(col).unwrap();
            let dot: f64 = c.iter().zip(&fit.residuals).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-8 * n, "residuals not orthogonal to {col}");
        }
        let sum: f64 = fit.residuals.iter().sum();
        assert!(sum.abs() <= 1e-8 * n);
    }

    #[test]
    fn csv_round_trip_skips_latents() {
        let scm = doc_scm("dag iv { Z -> X  U -> X  U -> Y  X -> Y  latent U }");
        let data = simulate(&scm, 50, 5).unwrap();
        let mut buf = Vec::new();
        data.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().split(',').all(|c| c != "U"));
        let back = Dataset::from_csv(&buf[..]).unwrap();
        // Canonical node order is [U, Z, X, Y]; the latent U is dropped.
        assert_eq!(back.columns(), ["Z", "X", "Y"]);
        assert_eq!(back.n_rows(), 50);
        assert_eq!(back.column("X").unwrap(), data.column("X").unwrap());
    }

    #[test]
    fn intervention_clamps_node() {
        let scm = doc_scm("dag fire { G -> Y  T ~> (G -> Y) [coef=0.8] }");
        let clamp: BTreeMap<NodeId, f64> = [(NodeId::new("T").unwrap(), 1.0)].into();
        let data = simulate_with(&scm, 100, 1, &clamp).unwrap();
        assert!(data.column("T").unwrap().iter().all(|&v| v == 1.0));
    }
}

//! The `dagwright` command-line surface.
//!
//! Exit codes follow one contract everywhere: 0 on success, 2 for domain or
//! validation failures (parse errors, unknown nodes, failed demo checks),
//! 3 for I/O failures. Every subcommand is deterministic given its flags,
//! and `--format structured` emits versioned JSON with stable field names.
//!
//! Wherever a file path is expected, the id of a bundled corpus diagram
//! (`fig1`, `flood`, `bridges`, `quake`, `fire`) works too; real files take
//! precedence over corpus ids.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::corpus;
use crate::diagnostics::{self, DiagnosticsOptions};
use crate::dsl::{self, DagDocument};
use crate::graph::NodeId;
use crate::identify;
use crate::paths::{self, CausalQuery, PathKind};
use crate::scm::{self, DemoCase, Scm};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "dagwright",
    version,
    about = "Causal-diagram toolkit: validate DAG files, classify paths and roles, \
             compute adjustment sets, and verify the qualitative story numerically."
)]
pub struct Cli {
    /// Output style for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Seed for every randomized operation.
    #[arg(long, global = true, default_value_t = 17)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a .dag file.
    Validate { file: String },

    /// List the paths between two nodes with classification and blocking.
    Paths {
        file: String,
        x: String,
        y: String,
        /// Conditioning set (repeatable or comma-separated). Defaults to the
        /// document's `adjusted` markers.
        #[arg(long, value_delimiter = ',')]
        conditioned: Vec<String>,
    },

    /// Classify every variable's role relative to a query.
    Roles {
        file: String,
        #[arg(long)]
        exposure: Option<String>,
        #[arg(long)]
        outcome: Option<String>,
    },

    /// Compute minimal backdoor adjustment sets for a query.
    Adjust {
        file: String,
        #[arg(long)]
        exposure: Option<String>,
        #[arg(long)]
        outcome: Option<String>,
    },

    /// Run a scripted bias demonstration (flood, bridges, quake, fire).
    /// Exits nonzero when an observed number misses its expectation.
    Demo {
        case: String,
        /// Sample size for simulated contrasts.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },

    /// Simulate the document's structural model and write CSV.
    Simulate {
        file: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<String>,
    },

    /// Fit a regression on a CSV dataset and run the assumption checks.
    Regress {
        csv: String,
        #[arg(long)]
        response: String,
        #[arg(long, value_delimiter = ',', required = true)]
        predictors: Vec<String>,
        /// Rows carry no meaningful order; the independence check reports
        /// Inconclusive.
        #[arg(long, default_value_t = false)]
        unordered: bool,
    },

    /// Emit DOT. Role highlights are applied when the document carries
    /// exposure and outcome markers.
    Render {
        file: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<String>,
        /// Skip role highlighting.
        #[arg(long, default_value_t = false)]
        plain: bool,
    },
}

enum CliError {
    /// Domain or validation failure -> exit 2.
    Domain(String),
    /// I/O failure -> exit 3.
    Io(String),
    /// Checks ran and failed; message already printed -> exit 2.
    ChecksFailed,
}

impl From<dsl::DslError> for CliError {
    fn from(e: dsl::DslError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<crate::graph::GraphError> for CliError {
    fn from(e: crate::graph::GraphError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<scm::ScmError> for CliError {
    fn from(e: scm::ScmError) -> Self {
        match e {
            scm::ScmError::Io(msg) => CliError::Io(msg),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<diagnostics::DiagError> for CliError {
    fn from(e: diagnostics::DiagError) -> Self {
        CliError::Domain(e.to_string())
    }
}

/// Run a parsed invocation. Returns the process exit code.
pub fn run<W: Write, E: Write>(cli: Cli, stdout: &mut W, stderr: &mut E) -> i32 {
    let result = dispatch(&cli, stdout);
    match result {
        Ok(()) => 0,
        Err(CliError::ChecksFailed) => 2,
        Err(CliError::Domain(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(CliError::Io(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            3
        }
    }
}

fn dispatch<W: Write>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate { file } => cmd_validate(cli, file, out),
        Command::Paths {
            file,
            x,
            y,
            conditioned,
        } => cmd_paths(cli, file, x, y, conditioned, out),
        Command::Roles {
            file,
            exposure,
            outcome,
        } => cmd_roles(cli, file, exposure.as_deref(), outcome.as_deref(), out),
        Command::Adjust {
            file,
            exposure,
            outcome,
        } => cmd_adjust(cli, file, exposure.as_deref(), outcome.as_deref(), out),
        Command::Demo { case, n } => cmd_demo(cli, case, *n, out),
        Command::Simulate { file, n, out: path } => cmd_simulate(cli, file, *n, path.as_deref(), out),
        Command::Regress {
            csv,
            response,
            predictors,
            unordered,
        } => cmd_regress(cli, csv, response, predictors, *unordered, out),
        Command::Render { file, out: path, plain } => {
            cmd_render(cli, file, path.as_deref(), *plain, out)
        }
    }
}

/// Read a document from a path, falling back to the bundled corpus when the
/// argument names one of its ids.
fn read_document(file: &str) -> Result<DagDocument, CliError> {
    let text = if Path::new(file).exists() {
        fs::read_to_string(file).map_err(|e| CliError::Io(format!("{file}: {e}")))?
    } else if let Some(text) = corpus::text(file) {
        text.to_owned()
    } else {
        return Err(CliError::Io(format!("{file}: no such file or corpus id")));
    };
    dsl::parse(&text).map_err(|e| CliError::Domain(format!("{file}:{e}")))
}

fn write_output(path: Option<&str>, content: &[u8], out: &mut impl Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| CliError::Io(format!("{p}: {e}"))),
        None => out
            .write_all(content)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn emit<W: Write, T: Serialize>(
    cli: &Cli,
    out: &mut W,
    command: &str,
    payload: &T,
    text: impl FnOnce() -> String,
) -> Result<(), CliError> {
    match cli.format {
        Format::Text => out
            .write_all(text().as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
        Format::Structured => {
            let doc = json!({
                "format_version": FORMAT_VERSION,
                "command": command,
                "report": payload,
            });
            let rendered =
                serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(out, "{rendered}").map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Resolve the query: explicit flags win, document markers fill the gaps.
fn resolve_query(
    doc: &DagDocument,
    exposure: Option<&str>,
    outcome: Option<&str>,
) -> Result<CausalQuery, CliError> {
    let x = exposure
        .map(str::to_owned)
        .or_else(|| doc.exposure().map(|id| id.as_str().to_owned()))
        .ok_or_else(|| {
            CliError::Domain("no --exposure given and the document has no exposure marker".into())
        })?;
    let y = outcome
        .map(str::to_owned)
        .or_else(|| doc.outcome().map(|id| id.as_str().to_owned()))
        .ok_or_else(|| {
            CliError::Domain("no --outcome given and the document has no outcome marker".into())
        })?;
    let conditioned: Vec<&str> = doc.adjusted().iter().map(NodeId::as_str).collect();
    Ok(CausalQuery::new(doc.dag(), &x, &y, &conditioned)?)
}

fn cmd_validate<W: Write>(cli: &Cli, file: &str, out: &mut W) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let payload = json!({
        "name": doc.name(),
        "nodes": doc.dag().node_count(),
        "edges": doc.dag().edge_count(),
        "moderations": doc.dag().moderations().len(),
        "valid": true,
    });
    emit(cli, out, "validate", &payload, || {
        format!(
            "ok: {} ({} nodes, {} edges{})\n",
            doc.name(),
            doc.dag().node_count(),
            doc.dag().edge_count(),
            match doc.dag().moderations().len() {
                0 => String::new(),
                k => format!(", {k} moderations"),
            }
        )
    })
}

#[derive(Serialize)]
struct PathLine {
    display: String,
    nodes: Vec<String>,
    kind: PathKind,
    colliders: Vec<String>,
    blocked: bool,
}

fn cmd_paths<W: Write>(
    cli: &Cli,
    file: &str,
    x: &str,
    y: &str,
    conditioned: &[String],
    out: &mut W,
) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let dag = doc.dag();
    let conditioned: BTreeSet<NodeId> = if conditioned.is_empty() {
        doc.adjusted().clone()
    } else {
        conditioned
            .iter()
            .map(|n| NodeId::new(n.as_str()))
            .collect::<Result<_, _>>()?
    };

    let separation = paths::d_separated(dag, x, y, &conditioned)?;
    let all = paths::enumerate_paths(dag, x, y)?;
    let lines: Vec<PathLine> = all
        .iter()
        .map(|p| {
            let class = paths::classify_path(p);
            Ok(PathLine {
                display: p.to_string(),
                nodes: p.nodes().iter().map(|n| n.as_str().to_owned()).collect(),
                kind: class.kind,
                colliders: class.colliders.iter().map(|n| n.as_str().to_owned()).collect(),
                blocked: paths::is_blocked(dag, p, &conditioned)?,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let payload = json!({
        "x": x,
        "y": y,
        "conditioned": conditioned.iter().map(NodeId::as_str).collect::<Vec<_>>(),
        "paths": lines,
        "d_separated": separation.separated,
        "open_paths": separation.open_paths.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    });

    emit(cli, out, "paths", &payload, || {
        let cond = names_or_dash(conditioned.iter());
        let mut text = format!("paths between {x} and {y} (conditioned: {cond}):\n");
        if lines.is_empty() {
            text.push_str("  (none)\n");
        }
        for (i, line) in lines.iter().enumerate() {
            let kind = match line.kind {
                PathKind::Causal => "causal    ",
                PathKind::NonCausal => "non-causal",
            };
            let colliders = if line.colliders.is_empty() {
                "-".to_owned()
            } else {
                line.colliders.join(", ")
            };
            let status = if line.blocked { "blocked" } else { "open" };
            text.push_str(&format!(
                "  {:>2}. {:<30} {kind}  colliders: {colliders:<8} {status}\n",
                i + 1,
                line.display,
            ));
        }
        text.push_str(&format!(
            "verdict: {}\n",
            if separation.separated {
                format!("{x} and {y} are d-separated")
            } else {
                format!(
                    "{x} and {y} are d-connected ({} open path{})",
                    separation.open_paths.len(),
                    if separation.open_paths.len() == 1 { "" } else { "s" }
                )
            }
        ));
        text
    })
}

fn cmd_roles<W: Write>(
    cli: &Cli,
    file: &str,
    exposure: Option<&str>,
    outcome: Option<&str>,
    out: &mut W,
) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let query = resolve_query(&doc, exposure, outcome)?;
    let report = identify::classify_roles(doc.dag(), &query)?;

    emit(cli, out, "roles", &report, || {
        let q = &report.query;
        let mut text = format!(
            "roles for exposure {}, outcome {} (conditioned: {}):\n",
            q.exposure,
            q.outcome,
            names_or_dash(q.conditioned.iter())
        );
        text.push_str(&format!(
            "  confounders:  {}\n",
            names_or_dash(report.confounders.iter())
        ));
        text.push_str(&format!(
            "  mediators:    {}\n",
            names_or_dash(report.mediators.iter())
        ));
        if report.colliders.is_empty() {
            text.push_str("  colliders:    -\n");
        } else {
            text.push_str("  colliders:\n");
            for entry in &report.colliders {
                text.push_str(&format!("    {} on {}\n", entry.node, entry.path));
            }
        }
        text.push_str(&format!(
            "  instruments:  {}\n",
            names_or_dash(report.instruments.iter())
        ));
        text.push_str(&format!(
            "  moderators:   {}\n",
            names_or_dash(report.moderators.iter())
        ));
        text.push_str(&format!(
            "  unclassified: {}\n",
            names_or_dash(report.unclassified.iter())
        ));
        text
    })
}

fn cmd_adjust<W: Write>(
    cli: &Cli,
    file: &str,
    exposure: Option<&str>,
    outcome: Option<&str>,
    out: &mut W,
) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let query = resolve_query(&doc, exposure, outcome)?;
    let dag = doc.dag();
    let backdoor = identify::backdoor_paths(dag, &query)?;
    let result = identify::find_adjustment_sets(dag, &query)?;
    // Collider warnings: causal paths cannot hold colliders, so every
    // collider entry marks a non-causal path that conditioning would open.
    let roles = identify::classify_roles(dag, &query)?;

    let payload = json!({
        "query": &query,
        "backdoor_paths": backdoor.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "minimal_sets": result
            .minimal_sets
            .iter()
            .map(|s| s.iter().map(NodeId::as_str).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "forbidden": result.forbidden.iter().map(NodeId::as_str).collect::<Vec<_>>(),
        "collider_warnings": roles
            .colliders
            .iter()
            .map(|e| json!({ "node": e.node.as_str(), "path": e.path.to_string() }))
            .collect::<Vec<_>>(),
    });

    emit(cli, out, "adjust", &payload, || {
        let mut text = format!(
            "backdoor paths from {} to {}:\n",
            query.exposure, query.outcome
        );
        if backdoor.is_empty() {
            text.push_str("  (none)\n");
        }
        for (i, p) in backdoor.iter().enumerate() {
            text.push_str(&format!("  {:>2}. {p}\n", i + 1));
        }
        let sets = result
            .minimal_sets
            .iter()
            .map(|s| format!("{{{}}}", s.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")))
            .collect::<Vec<_>>();
        text.push_str(&format!(
            "minimal adjustment sets: {}\n",
            if sets.is_empty() {
                "none (unblockable backdoor)".to_owned()
            } else {
                sets.join(", ")
            }
        ));
        text.push_str(&format!(
            "forbidden (latent or exposure descendants): {}\n",
            names_or_dash(result.forbidden.iter())
        ));
        for entry in &roles.colliders {
            text.push_str(&format!(
                "warning: conditioning on {} (or its descendants) opens the non-causal path {}\n",
                entry.node, entry.path
            ));
        }
        text
    })
}

fn cmd_demo<W: Write>(cli: &Cli, case: &str, n: usize, out: &mut W) -> Result<(), CliError> {
    let case: DemoCase = case.parse().map_err(|e: scm::ScmError| CliError::Domain(e.to_string()))?;
    let report = scm::bias_demo(case, n, cli.seed)?;

    emit(cli, out, "demo", &report, || {
        let mut text = format!("demo {}: {}\n", report.case, report.headline);
        for check in &report.checks {
            text.push_str(&format!(
                "  {:<36} observed {:>12.6}  expected {:>8.3} +/- {:<8}  {}\n",
                check.label,
                check.observed,
                check.expected,
                format!("{:?}", check.tolerance),
                if check.pass { "PASS" } else { "FAIL" }
            ));
        }
        text.push_str(&format!(
            "result: {}\n",
            if report.passed { "PASS" } else { "FAIL" }
        ));
        text
    })?;

    if report.passed {
        Ok(())
    } else {
        Err(CliError::ChecksFailed)
    }
}

fn cmd_simulate<W: Write>(
    cli: &Cli,
    file: &str,
    n: usize,
    path: Option<&str>,
    out: &mut W,
) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let model = Scm::from_document(&doc)?;
    let data = scm::simulate(&model, n, cli.seed)?;
    let mut buf = Vec::new();
    data.to_csv(&mut buf)?;
    write_output(path, &buf, out)
}

fn cmd_regress<W: Write>(
    cli: &Cli,
    csv: &str,
    response: &str,
    predictors: &[String],
    unordered: bool,
    out: &mut W,
) -> Result<(), CliError> {
    let raw = fs::read_to_string(csv).map_err(|e| CliError::Io(format!("{csv}: {e}")))?;
    let data = scm::Dataset::from_csv(raw.as_bytes())?;
    let predictors: Vec<&str> = predictors.iter().map(String::as_str).collect();
    let fit = scm::ols(&data, response, &predictors)?;
    let report =
        diagnostics::check_assumptions_with(&data, &fit, DiagnosticsOptions { unordered })?;

    let payload = json!({ "fit": &fit, "diagnostics": &report });
    emit(cli, out, "regress", &payload, || {
        let mut text = format!(
            "fit: {} ~ {}  (n = {})\n",
            fit.response,
            fit.predictors.join(" + "),
            fit.n
        );
        text.push_str(&format!("  {:<12} {:>16.8}\n", "intercept", fit.intercept));
        for (name, coef) in fit.predictors.iter().zip(&fit.coefficients) {
            text.push_str(&format!("  {name:<12} {coef:>16.8}\n"));
        }
        text.push_str(&format!("r_squared: {:.6}\n", fit.r_squared));
        text.push_str(&report.render_text());
        text
    })
}

fn cmd_render<W: Write>(
    _cli: &Cli,
    file: &str,
    path: Option<&str>,
    plain: bool,
    out: &mut W,
) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let report = if plain {
        None
    } else {
        match resolve_query(&doc, None, None) {
            Ok(query) => Some(identify::classify_roles(doc.dag(), &query)?),
            // No markers: render unhighlighted rather than demand a query.
            Err(_) => None,
        }
    };
    let dot = dsl::to_dot(&doc, report.as_ref());
    write_output(path, dot.as_bytes(), out)
}

fn names_or_dash<'a>(mut iter: impl Iterator<Item = &'a NodeId>) -> String {
    let joined = iter.by_ref().map(NodeId::as_str).collect::<Vec<_>>().join(", ");
    if joined.is_empty() {
        "-".to_owned()
    } else {
        joined
    }
}

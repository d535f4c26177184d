//! End-to-end tests against the built binary: the exit-code contract,
//! output determinism, and the simulate -> regress pipeline.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dagwright(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagwright"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn exit_code_contract_per_subcommand() {
    // 0: success.
    assert_eq!(code_of(&dagwright(&["validate", "fig1"])), 0);
    assert_eq!(code_of(&dagwright(&["paths", "fig1", "A", "C"])), 0);
    assert_eq!(code_of(&dagwright(&["roles", "quake"])), 0);
    assert_eq!(code_of(&dagwright(&["adjust", "flood"])), 0);
    assert_eq!(code_of(&dagwright(&["demo", "flood"])), 0);
    assert_eq!(code_of(&dagwright(&["render", "fig1"])), 0);

    // 2: domain/validation errors.
    assert_eq!(code_of(&dagwright(&["paths", "fig1", "A", "Q"])), 2);
    assert_eq!(code_of(&dagwright(&["paths", "fig1", "A", "A"])), 2);
    assert_eq!(code_of(&dagwright(&["demo", "storm"])), 2);
    assert_eq!(code_of(&dagwright(&["roles", "bridges", "--exposure", "nope"])), 2);

    // 3: I/O errors.
    assert_eq!(code_of(&dagwright(&["validate", "missing-file.dag"])), 3);
    assert_eq!(code_of(&dagwright(&["regress", "missing.csv", "--response", "y", "--predictors", "x"])), 3);
}

#[test]
fn validate_reports_located_errors_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cyclic.dag");
    fs::write(&path, "dag c {\n  A -> B\n  B -> A\n}\n").unwrap();
    let out = dagwright(&["validate", path.to_str().unwrap()]);
    assert_eq!(code_of(&out), 2);
    let err = stderr_of(&out);
    assert!(err.contains("cycle found: A -> B -> A"), "{err}");
    assert!(err.contains(":3:"), "error should carry the edge location: {err}");
}

#[test]
fn structured_output_is_byte_identical_across_runs() {
    for args in [
        vec!["roles", "fig1", "--format", "structured"],
        vec!["adjust", "bridges", "--format", "structured"],
        vec!["paths", "fig1", "A", "E", "--format", "structured"],
        vec!["demo", "quake", "--format", "structured"],
        vec!["demo", "fire", "--format", "structured", "--n", "20000"],
    ] {
        let a = dagwright(&args);
        let b = dagwright(&args);
        assert_eq!(code_of(&a), 0, "{args:?}: {}", stderr_of(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?} not deterministic");
        let text = stdout_of(&a);
        assert!(text.contains("\"format_version\": 1"), "{text}");
    }
}

#[test]
fn demo_flood_prints_the_expected_contrast() {
    let out = dagwright(&["demo", "flood"]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    assert!(text.contains("1.500000"), "{text}");
    assert!(text.contains("result: PASS"), "{text}");
}

#[test]
fn demo_bridges_prints_marginal_and_conditional() {
    let out = dagwright(&["demo", "bridges"]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    assert!(text.contains("pcorr(L, P)"), "{text}");
    assert!(text.contains("-0.500000"), "{text}");
}

#[test]
fn simulate_then_regress_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flood.csv");
    let out = dagwright(&[
        "simulate",
        "flood",
        "--n",
        "4000",
        "--seed",
        "42",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0, "{}", stderr_of(&out));
    let header = fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("Z,F,N\n") || header.starts_with("Z,N,F\n"), "{header}");

    let out = dagwright(&[
        "regress",
        csv.to_str().unwrap(),
        "--response",
        "F",
        "--predictors",
        "N,Z",
    ]);
    assert_eq!(code_of(&out), 0, "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("fit: F ~ N + Z"), "{text}");
    assert!(text.contains("assumption checks:"), "{text}");

    // Identical seeds give identical CSV bytes.
    let csv2 = dir.path().join("flood2.csv");
    let out2 = dagwright(&[
        "simulate", "flood", "--n", "4000", "--seed", "42", "--out", csv2.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out2), 0);
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&csv2).unwrap());
}

#[test]
fn regress_shear_dataset_flags_nonlinearity() {
    // Build the shear CSV through the library, then drive the binary.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("shear.csv");
    let data = dagwright::diagnostics::shear_dataset(2000, 10, 0.0).unwrap();
    let mut buf = Vec::new();
    data.to_csv(&mut buf).unwrap();
    fs::write(&csv, buf).unwrap();

    let out = dagwright(&[
        "regress",
        csv.to_str().unwrap(),
        "--response",
        "Vc",
        "--predictors",
        "rho,fc,bw,d",
    ]);
    assert_eq!(code_of(&out), 0, "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("linearity"), "{text}");
    assert!(text.contains("Fail"), "expected a linearity failure: {text}");
}

#[test]
fn render_writes_dot_file() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("fire.dot");
    let out = dagwright(&["render", "fire", "--out", dot.to_str().unwrap()]);
    assert_eq!(code_of(&out), 0);
    let text = fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("digraph fire {"), "{text}");
    assert!(text.contains("T -> __mod0 [style=dashed];"), "{text}");
    assert!(Path::new(&dot).exists());
}

#[test]
fn corpus_files_on_disk_match_embedded_corpus() {
    // The corpus ships both embedded and as real files; keep them in sync.
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus");
    for id in dagwright::corpus::ids() {
        let on_disk = fs::read_to_string(root.join(format!("{id}.dag"))).unwrap();
        assert_eq!(on_disk, dagwright::corpus::text(id).unwrap(), "{id}");
    }
}

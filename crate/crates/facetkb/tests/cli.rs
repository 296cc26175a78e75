//! End-to-end tests that spawn the real binary against the shipped data
//! files and against purpose-built broken fixtures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facetkb"))
}

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = bin();
    for a in args {
        cmd.arg(a.as_ref());
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).expect("stderr is UTF-8")
}

/// Builds the shipped manifest into a fresh snapshot directory.
fn build_shipped(out: &Path) {
    let o = run(&[&"build", &data("manifest.toml"), &"--out", &out]);
    assert!(
        o.status.success(),
        "build failed: {}{}",
        stdout(&o),
        stderr(&o)
    );
}

#[test]
fn build_writes_snapshot_files_and_reports_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    let o = run(&[&"build", &data("manifest.toml"), &"--out", &out]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    assert!(stdout(&o).contains("snapshot written to"));
    assert!(out.join("schema.outline").is_file());
    assert!(out.join("abox.nt").is_file());
    assert!(!out.join(".lock").exists(), "lock must be released");
}

#[test]
fn build_with_missing_outline_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("kb.toml");
    fs::write(
        &manifest,
        "outline = \"absent.outline\"\nsnapshot = \"snap\"\n\n[prefixes]\nEI = \"http://example.org/ns#\"\n",
    )
    .unwrap();
    let o = run(&[&"build", &manifest]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.outline"));
}

#[test]
fn query_reproduces_the_presidency_answer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let o = run(&[&"query", &out, &"-f", &data("presidency_query.sparql")]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "Person\tOrganization\nMaria Helena Nazaré\tEuropean University Association\n"
    );
}

#[test]
fn query_with_zero_matches_prints_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let o = run(&[
        &"query",
        &out,
        &"-q",
        &"PREFIX EI: <http://www.semanticweb.org/ontologies/2013/12/ontology.owl#>\n\
          SELECT ?who WHERE { ?who EI:PresidentOf EI:Nonexistent_Body }",
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    assert_eq!(stdout(&o), "who\n");
}

#[test]
fn malformed_query_exits_2_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let o = run(&[&"query", &out, &"-q", &"SELECT ?x FROM { ?x ?y ?z }"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line "), "stderr: {}", stderr(&o));
}

#[test]
fn lint_on_the_shipped_build_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let o = run(&[
        &"lint",
        &out,
        &"--questions",
        &data("competency_questions.txt"),
    ]);
    assert_eq!(o.status.code(), Some(0), "report: {}", stdout(&o));
    assert!(stdout(&o).contains("summary :: errors=0 warnings=0 infos=0 questions=5/5"));
}

#[test]
fn lint_on_a_missing_snapshot_exits_2() {
    let o = run(&[&"lint", &"/nonexistent/snapshot/path"]);
    assert_eq!(o.status.code(), Some(2));
}

/// A snapshot with one of each headline defect: an is-a cycle, a missing
/// gloss, a duplicate label, and a domain-range conflict in the data.
fn write_defect_snapshot(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(
        dir.join("schema.outline"),
        "@namespace <http://example.org/defects#>\n\
         \n\
         A :: alpha concept\n\
         \x20 B ::\n\
         Dup :: first of a pair\n\
         dup :: second of a pair\n\
         Host :: receiving class\n\
         Guest :: received class\n\
         Other :: unrelated class\n\
         \n\
         @isa A -> B\n\
         \n\
         @relations\n\
         - hosts: partitive Host -> Guest\n",
    )
    .unwrap();
    fs::write(
        dir.join("abox.nt"),
        "<http://example.org/defects#e1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/defects#Other> .\n\
         <http://example.org/defects#e1> <http://example.org/defects#hosts> <http://example.org/defects#e2> .\n",
    )
    .unwrap();
}

#[test]
fn lint_reports_the_four_defects_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap");
    write_defect_snapshot(&snap);
    let o = run(&[&"lint", &snap]);
    assert_eq!(o.status.code(), Some(1), "report: {}", stdout(&o));
    let text = stdout(&o);
    let errors: Vec<&str> = text.lines().filter(|l| l.starts_with("error ")).collect();
    assert_eq!(errors.len(), 4, "error lines: {errors:?}");
    for rule in [
        "isa-cycle",
        "missing-annotation",
        "duplicate-label",
        "domain-range-conflict",
    ] {
        assert!(
            errors.iter().any(|l| l.contains(rule)),
            "no `{rule}` among {errors:?}"
        );
    }
}

#[test]
fn lint_json_mirrors_the_text_findings() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap");
    write_defect_snapshot(&snap);
    let o = run(&[&"lint", &snap, &"--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).expect("valid JSON");
    assert_eq!(v["summary"]["errors"], 4);
    let rules: Vec<&str> = v["findings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["rule"].as_str().unwrap())
        .collect();
    assert!(rules.contains(&"isa-cycle"));
}

#[test]
fn ingest_reports_counts_then_reruns_as_no_change() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let o = run(&[
        &"ingest",
        &out,
        &data("glasgow_schools.map"),
        &data("glasgow_schools_sample.csv"),
    ]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    assert!(stdout(&o).starts_with("read=3 created=3 updated=0 skipped=0"));

    let again = run(&[
        &"ingest",
        &out,
        &data("glasgow_schools.map"),
        &data("glasgow_schools_sample.csv"),
    ]);
    assert_eq!(again.status.code(), Some(0));
    assert!(stdout(&again).starts_with("read=3 created=0 updated=0 skipped=3"));
}

#[test]
fn ingest_with_a_missing_column_exits_4_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let csv = dir.path().join("short.csv");
    fs::write(
        &csv,
        "Establishment Name,Establishment Type\nSomewhere Primary School,Primary School\n",
    )
    .unwrap();
    let o = run(&[&"ingest", &out, &data("glasgow_schools.map"), &csv]);
    assert_eq!(o.status.code(), Some(4), "stderr: {}", stderr(&o));
    assert!(stderr(&o).contains("Address"), "stderr: {}", stderr(&o));
}

#[test]
fn ingest_refuses_a_locked_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    fs::write(out.join(".lock"), "").unwrap();
    let o = run(&[
        &"ingest",
        &out,
        &data("glasgow_schools.map"),
        &data("glasgow_schools_sample.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).to_lowercase().contains("lock"),
        "stderr: {}",
        stderr(&o)
    );
}

#[test]
fn export_round_trips_both_snapshot_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let outline = run(&[&"export", &out, &"--format", &"outline"]);
    assert_eq!(
        stdout(&outline),
        fs::read_to_string(out.join("schema.outline")).unwrap()
    );
    let nt = run(&[&"export", &out, &"--format", &"ntriples"]);
    assert_eq!(
        stdout(&nt),
        fs::read_to_string(out.join("abox.nt")).unwrap()
    );
}

#[test]
fn stats_on_an_empty_snapshot_prints_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap");
    fs::create_dir_all(&snap).unwrap();
    fs::write(
        snap.join("schema.outline"),
        "@namespace <http://example.org/empty#>\n",
    )
    .unwrap();
    fs::write(snap.join("abox.nt"), "").unwrap();
    let o = run(&[&"stats", &snap]);
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "classCount: 0\nattributeFacetCount: 0\nvalueCount: 0\nrelationDeclCount: 0\n\
         isAEdgeCount: 0\ntripleCount: 0\nlogicalAssertionCount: 0\n"
    );
}

#[test]
fn namespace_env_override_repoints_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tiny.outline"),
        "Thing :: some thing {kind}\n",
    )
    .unwrap();
    let manifest = dir.path().join("kb.toml");
    fs::write(
        &manifest,
        "outline = \"tiny.outline\"\nsnapshot = \"snap\"\n\n[prefixes]\nEI = \"http://example.org/base#\"\n",
    )
    .unwrap();
    let o = bin()
        .args(["build"])
        .arg(&manifest)
        .env("FACETKB_NAMESPACE", "http://example.org/alt#")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    let schema = fs::read_to_string(dir.path().join("snap/schema.outline")).unwrap();
    assert!(schema.starts_with("@namespace <http://example.org/alt#>"));
    assert!(schema.contains("@prefix EI <http://example.org/alt#>"));
}

#[test]
fn query_rejects_file_and_inline_together() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap");
    build_shipped(&out);
    let o = run(&[
        &"query",
        &out,
        &"-f",
        &data("presidency_query.sparql"),
        &"-q",
        &"SELECT ?x WHERE { ?x ?y ?z }",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

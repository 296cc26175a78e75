//! Command-line surface wiring the library into a build/query/lint/ingest
//! workflow.
//!
//! A *snapshot* is a directory holding two files: `schema.outline` (the
//! TBox, reloaded leniently so defective data can still be linted) and
//! `abox.nt` (the instance triples, canonical N-Triples).  Commands that
//! write a snapshot do so atomically — temp file, then rename — and take a
//! `.lock` file in the directory for the duration; a stale lock from a
//! crashed run must be removed by hand.
//!
//! Exit codes: `0` success, `1` lint found errors or failed questions, `2`
//! parse or load failure, `3` refactor script failure, `4` binding or
//! ingestion failure, `5` query evaluation failure.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::kb::{KnowledgeBase, StatsSummary};
use crate::refactor::ScriptError;
use crate::{ingest, isced, manifest, ntriples, outline, query, validate, SyntaxError};

#[derive(Debug, Parser)]
#[command(
    name = "facetkb",
    version,
    about = "Faceted knowledge-base toolchain: build, query, lint, ingest, export"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a snapshot from a project manifest.
    Build {
        /// Path to the manifest (TOML).
        manifest: PathBuf,
        /// Write the snapshot here instead of the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a query against a snapshot.
    Query {
        /// Snapshot directory.
        snapshot: PathBuf,
        /// Read the query from a file.
        #[arg(short = 'f', long = "file", conflicts_with = "query")]
        file: Option<PathBuf>,
        /// Give the query inline.
        #[arg(short = 'q', long = "query")]
        query: Option<String>,
    },
    /// Scan a snapshot for pitfalls and run competency questions.
    Lint {
        /// Snapshot directory.
        snapshot: PathBuf,
        /// Competency-question file to run as the completeness check.
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Emit the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Ingest delimited data into a snapshot under a mapping.
    Ingest {
        /// Snapshot directory (updated in place).
        snapshot: PathBuf,
        /// Mapping specification file.
        mapping: PathBuf,
        /// CSV data file.
        data: PathBuf,
    },
    /// Print a snapshot in a text format.
    Export {
        /// Snapshot directory.
        snapshot: PathBuf,
        /// Which serialization to print.
        #[arg(long, value_enum)]
        format: ExportFormat,
    },
    /// Print summary counts for a snapshot.
    Stats {
        /// Snapshot directory.
        snapshot: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Ntriples,
    Outline,
}

// ---------------------------------------------------------------------------
// Snapshot I/O

pub const SCHEMA_FILE: &str = "schema.outline";
pub const ABOX_FILE: &str = "abox.nt";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("`{path}`: {source}")]
    Schema { path: PathBuf, source: SyntaxError },
    #[error("`{path}`: {source}")]
    Abox {
        path: PathBuf,
        source: ntriples::ImportError,
    },
    #[error("snapshot is locked (`{0}` exists); remove it if no other run is active")]
    Locked(PathBuf),
}

fn read(path: &Path) -> Result<String, SnapshotError> {
    fs::read_to_string(path).map_err(|source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a snapshot directory back into a knowledge base.  The schema is
/// parsed leniently: a snapshot is allowed to hold the defects the linter
/// exists to report.
pub fn load_snapshot(dir: &Path) -> Result<KnowledgeBase, SnapshotError> {
    let schema_path = dir.join(SCHEMA_FILE);
    let abox_path = dir.join(ABOX_FILE);
    let mut kb = outline::parse(&read(&schema_path)?, outline::Mode::Lenient).map_err(|source| {
        SnapshotError::Schema {
            path: schema_path,
            source,
        }
    })?;
    ntriples::import(&mut kb, &read(&abox_path)?).map_err(|source| SnapshotError::Abox {
        path: abox_path,
        source,
    })?;
    Ok(kb)
}

fn write_atomic(path: &Path, content: &str) -> Result<(), SnapshotError> {
    let tmp = path.with_extension("tmp");
    let io = |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(content.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

/// Writes both snapshot files atomically (each via temp file + rename).
pub fn write_snapshot(dir: &Path, kb: &KnowledgeBase) -> Result<(), SnapshotError> {
    fs::create_dir_all(dir).map_err(|source| SnapshotError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_atomic(&dir.join(SCHEMA_FILE), &outline::write(kb))?;
    write_atomic(&dir.join(ABOX_FILE), &ntriples::export(kb))
}

/// Holds the snapshot lock for the guard's lifetime.
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(dir: &Path) -> Result<LockGuard, SnapshotError> {
        fs::create_dir_all(dir).map_err(|source| SnapshotError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(SnapshotError::Locked(path))
            }
            Err(source) => Err(SnapshotError::Io { path, source }),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

// ---------------------------------------------------------------------------
// Build pipeline

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Manifest(#[from] manifest::ManifestError),
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{what} does not parse: {source}")]
    Parse { what: String, source: SyntaxError },
    #[error("refactor script failed: {0}")]
    Refactor(#[from] ScriptError),
    #[error("{what} does not bind: {message}")]
    Binding { what: String, message: String },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl BuildError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BuildError::Manifest(_) | BuildError::Io { .. } | BuildError::Parse { .. } => 2,
            BuildError::Snapshot(_) => 2,
            BuildError::Refactor(_) => 3,
            BuildError::Binding { .. } => 4,
        }
    }
}

fn read_input(path: &Path) -> Result<String, BuildError> {
    fs::read_to_string(path).map_err(|source| BuildError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the whole build: outline → refactor script → ISCED binding → seed
/// ABox → mapping binding, then writes the snapshot.  Returns the finished
/// knowledge base alongside the directory written.
pub fn build_snapshot(
    m: &manifest::Manifest,
    out_override: Option<&Path>,
) -> Result<(KnowledgeBase, PathBuf), BuildError> {
    let parse_err = |what: &str| {
        let what = what.to_string();
        move |source: SyntaxError| BuildError::Parse { what, source }
    };

    let mut kb = outline::parse(&read_input(&m.outline)?, outline::Mode::Strict)
        .map_err(parse_err(&format!("outline `{}`", m.outline.display())))?;
    kb.set_namespace(&m.namespace);
    for (name, base) in &m.prefixes {
        if name != "EI" {
            kb.add_prefix(name, base);
        }
    }

    if let Some(script_path) = &m.refactor_script {
        let actions = crate::refactor::parse_script(&kb, &read_input(script_path)?)
            .map_err(parse_err(&format!("refactor script `{}`", script_path.display())))?;
        crate::refactor::apply_script(&mut kb, &actions)?;
    }

    if let Some(isced_path) = &m.isced_map {
        let mapping = isced::parse(&read_input(isced_path)?)
            .map_err(parse_err(&format!("ISCED table `{}`", isced_path.display())))?;
        mapping.bind(&kb).map_err(|e| BuildError::Binding {
            what: format!("ISCED table `{}`", isced_path.display()),
            message: e.to_string(),
        })?;
    }

    if let Some(abox_path) = &m.seed_abox {
        let text = read_input(abox_path)?;
        ntriples::import(&mut kb, &text).map_err(|e| match e {
            ntriples::ImportError::Syntax(source) => BuildError::Parse {
                what: format!("seed ABox `{}`", abox_path.display()),
                source,
            },
            rejected @ ntriples::ImportError::Rejected { .. } => BuildError::Binding {
                what: format!("seed ABox `{}`", abox_path.display()),
                message: rejected.to_string(),
            },
        })?;
    }

    if let Some(question_path) = &m.competency_questions {
        validate::parse_questions(&read_input(question_path)?)
            .map_err(parse_err(&format!("questions `{}`", question_path.display())))?;
    }

    for entry in &m.mappings {
        let spec = ingest::parse_mapping(&read_input(&entry.mapping)?)
            .map_err(parse_err(&format!("mapping `{}`", entry.mapping.display())))?;
        ingest::bind_mapping(&kb, &spec).map_err(|e| BuildError::Binding {
            what: format!("mapping `{}`", entry.mapping.display()),
            message: e.to_string(),
        })?;
    }

    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| m.snapshot.clone());
    {
        let _lock = LockGuard::acquire(&out_dir)?;
        write_snapshot(&out_dir, &kb)?;
    }
    Ok((kb, out_dir))
}

// ---------------------------------------------------------------------------
// Command runners

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn cmd_build(manifest_path: &Path, out: Option<&Path>) -> i32 {
    let m = match manifest::load(manifest_path) {
        Ok(m) => m,
        Err(e) => return fail(2, e),
    };
    match build_snapshot(&m, out) {
        Ok((_, dir)) => {
            println!("snapshot written to {}", dir.display());
            0
        }
        Err(e) => fail(e.exit_code(), e),
    }
}

fn cmd_query(snapshot: &Path, file: Option<&Path>, inline: Option<&str>) -> i32 {
    let kb = match load_snapshot(snapshot) {
        Ok(kb) => kb,
        Err(e) => return fail(2, e),
    };
    let text = match (file, inline) {
        (Some(path), None) => match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(2, format_args!("cannot read `{}`: {e}", path.display())),
        },
        (None, Some(q)) => q.to_string(),
        _ => return fail(2, "give the query with exactly one of -f <file> or -q <text>"),
    };
    let parsed = match query::parse(&text) {
        Ok(p) => p,
        Err(e) => return fail(2, e),
    };
    let snap = kb.freeze();
    let rows = match query::evaluate(&snap, &parsed) {
        Ok(r) => r,
        Err(e) => return fail(5, e),
    };
    println!("{}", parsed.projected.join("\t"));
    for row in query::render_rows(&snap, &parsed, &rows) {
        println!("{}", row.join("\t"));
    }
    0
}

fn cmd_lint(snapshot: &Path, questions: Option<&Path>, json: bool) -> i32 {
    let kb = match load_snapshot(snapshot) {
        Ok(kb) => kb,
        Err(e) => return fail(2, e),
    };
    let parsed_questions = match questions {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(2, format_args!("cannot read `{}`: {e}", path.display())),
            };
            match validate::parse_questions(&text) {
                Ok(q) => q,
                Err(e) => return fail(2, format_args!("`{}`: {e}", path.display())),
            }
        }
        None => Vec::new(),
    };
    let report = validate::ValidationReport::build(&kb.freeze(), &parsed_questions);
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render());
    }
    if report.is_clean() {
        0
    } else {
        1
    }
}

fn cmd_ingest(snapshot: &Path, mapping: &Path, data: &Path) -> i32 {
    let mut kb = match load_snapshot(snapshot) {
        Ok(kb) => kb,
        Err(e) => return fail(2, e),
    };
    let spec = match fs::read_to_string(mapping) {
        Ok(t) => match ingest::parse_mapping(&t) {
            Ok(s) => s,
            Err(e) => return fail(2, format_args!("`{}`: {e}", mapping.display())),
        },
        Err(e) => return fail(2, format_args!("cannot read `{}`: {e}", mapping.display())),
    };
    let csv_text = match fs::read_to_string(data) {
        Ok(t) => t,
        Err(e) => return fail(2, format_args!("cannot read `{}`: {e}", data.display())),
    };
    let _lock = match LockGuard::acquire(snapshot) {
        Ok(l) => l,
        Err(e) => return fail(2, e),
    };
    let report = match ingest::ingest_delimited(&mut kb, &spec, &csv_text) {
        Ok(r) => r,
        Err(e) => return fail(4, e),
    };
    if let Err(e) = write_snapshot(snapshot, &kb) {
        return fail(2, e);
    }
    println!(
        "read={} created={} updated={} skipped={}",
        report.rows_read,
        report.created,
        report.updated,
        report.skipped.len()
    );
    for (row, reason) in &report.skipped {
        println!("skipped row {row}: {reason}");
    }
    0
}

fn cmd_export(snapshot: &Path, format: ExportFormat) -> i32 {
    let kb = match load_snapshot(snapshot) {
        Ok(kb) => kb,
        Err(e) => return fail(2, e),
    };
    match format {
        ExportFormat::Ntriples => print!("{}", ntriples::export(&kb)),
        ExportFormat::Outline => print!("{}", outline::write(&kb)),
    }
    0
}

fn cmd_stats(snapshot: &Path) -> i32 {
    let kb = match load_snapshot(snapshot) {
        Ok(kb) => kb,
        Err(e) => return fail(2, e),
    };
    let s = StatsSummary::compute(&kb);
    println!("classCount: {}", s.class_count);
    println!("attributeFacetCount: {}", s.attribute_facet_count);
    println!("valueCount: {}", s.value_count);
    println!("relationDeclCount: {}", s.relation_decl_count);
    println!("isAEdgeCount: {}", s.isa_edge_count);
    println!("tripleCount: {}", s.triple_count);
    println!("logicalAssertionCount: {}", s.logical_assertion_count);
    0
}

/// Entry point for the binary: returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Build { manifest, out } => cmd_build(&manifest, out.as_deref()),
        Command::Query { snapshot, file, query } => {
            cmd_query(&snapshot, file.as_deref(), query.as_deref())
        }
        Command::Lint {
            snapshot,
            questions,
            json,
        } => cmd_lint(&snapshot, questions.as_deref(), json),
        Command::Ingest {
            snapshot,
            mapping,
            data,
        } => cmd_ingest(&snapshot, &mapping, &data),
        Command::Export { snapshot, format } => cmd_export(&snapshot, format),
        Command::Stats { snapshot } => cmd_stats(&snapshot),
    }
}

// Used by integration helpers and the language bindings to keep entity
// accounting consistent with what the CLI prints.
#[doc(hidden)]
pub fn distinct_subjects(kb: &KnowledgeBase) -> usize {
    kb.abox()
        .iter()
        .map(|t| t.subject.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Stereotype;

    #[test]
    fn snapshot_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut kb = KnowledgeBase::new();
        let t = kb.add_concept("Thing", "a thing", Stereotype::Kind, None).unwrap();
        kb.add_concept("Widget", "a made thing", Stereotype::Subkind, Some(&t)).unwrap();
        write_snapshot(dir.path(), &kb).unwrap();
        let back = load_snapshot(dir.path()).unwrap();
        assert_eq!(outline::write(&back), outline::write(&kb));
        assert_eq!(ntriples::export(&back), ntriples::export(&kb));
    }

    #[test]
    fn lock_excludes_a_second_writer() {
        let dir = tempfile::tempdir().unwrap();
        let first = LockGuard::acquire(dir.path()).unwrap();
        assert!(matches!(
            LockGuard::acquire(dir.path()),
            Err(SnapshotError::Locked(_))
        ));
        drop(first);
        LockGuard::acquire(dir.path()).unwrap();
    }

    #[test]
    fn loading_a_missing_snapshot_fails_with_the_path() {
        let err = load_snapshot(Path::new("/nonexistent/snapdir")).unwrap_err();
        assert!(err.to_string().contains("snapdir"));
    }
}

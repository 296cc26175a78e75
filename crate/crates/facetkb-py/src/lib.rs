//! Python bindings for the facetkb engine.
//!
//! Builds an abi3 extension module named `facetkb`.  Because neither maturin
//! nor setuptools-rust may be available, the module is produced with a plain
//! `cargo build -p facetkb-py` and the resulting `libfacetkb_py.so` is
//! renamed to `facetkb.so` somewhere on `sys.path` (see
//! `python/smoke_test.py`, which automates exactly that).
//!
//! The API mirrors the CLI: text-shaped operations (outline, refactor
//! script, queries, mappings) take strings, snapshot- and manifest-shaped
//! operations take paths.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use facetkb::kb::StatsSummary;
use facetkb::{cli, ingest, isced, manifest, ntriples, outline, query, refactor, validate};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An in-memory faceted knowledge base: the concept forest with its
/// attribute facets and relation declarations, plus the instance triples.
#[pyclass(name = "KnowledgeBase")]
struct PyKnowledgeBase {
    inner: facetkb::kb::KnowledgeBase,
}

#[pymethods]
impl PyKnowledgeBase {
    /// Parses schema outline text.  `strict` applies the authoring rules
    /// (every concept glossed, no duplicate labels, ...); pass `False` to
    /// load defective text for inspection with `lint`.
    #[staticmethod]
    #[pyo3(signature = (text, strict = true))]
    fn parse_outline(text: &str, strict: bool) -> PyResult<Self> {
        let mode = if strict {
            outline::Mode::Strict
        } else {
            outline::Mode::Lenient
        };
        let inner = outline::parse(text, mode).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Loads a snapshot directory (`schema.outline` + `abox.nt`).
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let inner = cli::load_snapshot(&dir).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Runs the full build pipeline for a manifest and writes the snapshot.
    /// Returns the knowledge base and the directory the snapshot went to.
    /// `namespace` overrides the manifest's namespace, like the
    /// `FACETKB_NAMESPACE` environment variable does for the CLI.
    #[staticmethod]
    #[pyo3(signature = (manifest_path, out = None, namespace = None))]
    fn build(
        manifest_path: PathBuf,
        out: Option<PathBuf>,
        namespace: Option<&str>,
    ) -> PyResult<(Self, PathBuf)> {
        let m = manifest::load_with(&manifest_path, namespace).map_err(value_err)?;
        let (inner, written) = cli::build_snapshot(&m, out.as_deref()).map_err(value_err)?;
        Ok((Self { inner }, written))
    }

    /// Writes the snapshot files into `dir` (created if missing).
    fn save(&self, dir: PathBuf) -> PyResult<()> {
        cli::write_snapshot(&dir, &self.inner).map_err(value_err)
    }

    /// Canonical renderings as `(outline_text, ntriples_text)` — the same
    /// bytes `save` writes.
    fn export(&self) -> (String, String) {
        (outline::write(&self.inner), ntriples::export(&self.inner))
    }

    /// Parses and applies a refactoring script.  Returns the journal as a
    /// list of dicts with `description`, `before_digest`, `after_digest`
    /// and an ISO-8601 `timestamp`.
    fn apply_script<'py>(
        &mut self,
        py: Python<'py>,
        text: &str,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let actions = refactor::parse_script(&self.inner, text).map_err(value_err)?;
        let log = refactor::apply_script(&mut self.inner, &actions).map_err(value_err)?;
        let mut out = Vec::with_capacity(log.entries.len());
        for entry in &log.entries {
            let d = PyDict::new(py);
            d.set_item("description", &entry.description)?;
            d.set_item("before_digest", &entry.before_digest)?;
            d.set_item("after_digest", &entry.after_digest)?;
            d.set_item("timestamp", entry.timestamp.to_rfc3339())?;
            out.push(d);
        }
        Ok(out)
    }

    /// Evaluates a conjunctive query.  Returns `(headers, rows)` where the
    /// headers are the projected variable names and each row holds the
    /// rendered values (IRIs shortened through declared prefixes).
    fn query(&self, text: &str) -> PyResult<(Vec<String>, Vec<Vec<String>>)> {
        let q = query::parse(text).map_err(value_err)?;
        let snap = self.inner.freeze();
        let rows = query::evaluate(&snap, &q).map_err(value_err)?;
        let rendered = query::render_rows(&snap, &q, &rows);
        Ok((q.projected, rendered))
    }

    /// Entities typed to the class with this label or to any subclass.
    fn type_instances(&self, class_label: &str) -> PyResult<Vec<String>> {
        let snap = self.inner.freeze();
        let hits = query::type_instances(&snap, class_label).map_err(value_err)?;
        Ok(hits.into_iter().map(|e| e.to_string()).collect())
    }

    /// Runs the pitfall scan plus any competency questions (passed as the
    /// question-file text).  Returns a dict with `findings`, `questions`
    /// and a `summary` of counts.
    #[pyo3(signature = (questions = None))]
    fn lint<'py>(&self, py: Python<'py>, questions: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
        let parsed = match questions {
            Some(text) => validate::parse_questions(text).map_err(value_err)?,
            None => Vec::new(),
        };
        let report = validate::ValidationReport::build(&self.inner.freeze(), &parsed);

        let out = PyDict::new(py);
        let findings: Vec<Bound<'py, PyDict>> = report
            .findings
            .iter()
            .map(|f| {
                let d = PyDict::new(py);
                d.set_item("severity", f.severity.to_string())?;
                d.set_item("rule", &f.rule)?;
                d.set_item("subject", &f.subject)?;
                d.set_item("message", &f.message)?;
                Ok(d)
            })
            .collect::<PyResult<_>>()?;
        out.set_item("findings", findings)?;
        let outcomes: Vec<Bound<'py, PyDict>> = report
            .competency
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("name", &c.name)?;
                d.set_item("passed", c.passed)?;
                d.set_item("detail", &c.detail)?;
                Ok(d)
            })
            .collect::<PyResult<_>>()?;
        out.set_item("questions", outcomes)?;
        let summary = PyDict::new(py);
        summary.set_item("errors", report.summary.errors)?;
        summary.set_item("warnings", report.summary.warnings)?;
        summary.set_item("infos", report.summary.infos)?;
        summary.set_item("questions_passed", report.summary.questions_passed)?;
        summary.set_item("questions_total", report.summary.questions_total)?;
        out.set_item("summary", summary)?;
        Ok(out)
    }

    /// Size counters, keyed as the CLI prints them.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = StatsSummary::compute(&self.inner);
        let d = PyDict::new(py);
        d.set_item("classCount", s.class_count)?;
        d.set_item("attributeFacetCount", s.attribute_facet_count)?;
        d.set_item("valueCount", s.value_count)?;
        d.set_item("relationDeclCount", s.relation_decl_count)?;
        d.set_item("isAEdgeCount", s.isa_edge_count)?;
        d.set_item("tripleCount", s.triple_count)?;
        d.set_item("logicalAssertionCount", s.logical_assertion_count)?;
        Ok(d)
    }

    /// Ingests comma-delimited rows under a column mapping (both passed as
    /// text).  Returns `{"read", "created", "updated", "skipped"}` where
    /// `skipped` lists `(row_number, reason)` pairs.
    fn ingest<'py>(
        &mut self,
        py: Python<'py>,
        mapping: &str,
        csv_data: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let spec = ingest::parse_mapping(mapping).map_err(value_err)?;
        let report = ingest::ingest_delimited(&mut self.inner, &spec, csv_data).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("read", report.rows_read)?;
        d.set_item("created", report.created)?;
        d.set_item("updated", report.updated)?;
        d.set_item("skipped", report.skipped)?;
        Ok(d)
    }

    /// The full class IRI for a label (or synonym), if it resolves.
    fn resolve_label(&self, label: &str) -> Option<String> {
        let id = self.inner.resolve_label(label)?;
        self.inner.class_iri(&id)
    }

    /// Preferred labels of all concepts, in declaration order.
    fn labels(&self) -> Vec<String> {
        self.inner
            .concepts()
            .values()
            .map(|c| c.preferred_label.clone())
            .collect()
    }

    #[getter]
    fn namespace(&self) -> String {
        self.inner.namespace().to_string()
    }

    fn __repr__(&self) -> String {
        let s = StatsSummary::compute(&self.inner);
        format!(
            "<KnowledgeBase: {} classes, {} triples>",
            s.class_count, s.triple_count
        )
    }
}

/// A parsed level table mapping framework codes to class labels.
#[pyclass(name = "IscedMapping")]
struct PyIscedMapping {
    inner: isced::IscedMapping,
}

#[pymethods]
impl PyIscedMapping {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = isced::parse(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Class labels a level code maps to.
    fn labels_for(&self, code: i64) -> PyResult<Vec<String>> {
        Ok(self.inner.eio_labels_for(code).map_err(value_err)?.to_vec())
    }

    /// Level codes a class label maps back to.
    fn levels_for(&self, label: &str) -> PyResult<Vec<u8>> {
        Ok(self
            .inner
            .levels_for(label)
            .map_err(value_err)?
            .into_iter()
            .collect())
    }
}

#[pymodule(name = "facetkb")]
fn facetkb_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKnowledgeBase>()?;
    m.add_class::<PyIscedMapping>()?;
    Ok(())
}

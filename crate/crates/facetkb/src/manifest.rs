//! Project manifests: the single TOML file a build starts from.
//!
//! A manifest names the schema outline, optional refactor script, ISCED
//! table, seed ABox, competency questions, and any ingestion mappings, plus
//! the prefix declarations and the directory the finished snapshot goes to.
//! All paths are resolved relative to the manifest's own directory, and
//! every *input* must exist at load time (the snapshot directory is created
//! on demand).
//!
//! The prefix table must include the `EI` prefix.  The effective namespace
//! is, in order of precedence: the `FACETKB_NAMESPACE` environment
//! variable, the `namespace` key, the `EI` prefix.  When both `namespace`
//! and `EI` are given they must agree.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest does not parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{field} file does not exist: `{path}`")]
    MissingFile { field: &'static str, path: PathBuf },
    #[error("prefix table must declare `EI`")]
    MissingEiPrefix,
    #[error("`namespace` disagrees with the `EI` prefix")]
    InconsistentNamespace,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMapping {
    mapping: String,
    data: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    namespace: Option<String>,
    outline: String,
    refactor_script: Option<String>,
    isced_map: Option<String>,
    seed_abox: Option<String>,
    competency_questions: Option<String>,
    snapshot: String,
    #[serde(default)]
    prefixes: BTreeMap<String, String>,
    #[serde(default)]
    mappings: Vec<RawMapping>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingEntry {
    pub mapping: PathBuf,
    pub data: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub namespace: String,
    pub outline: PathBuf,
    pub refactor_script: Option<PathBuf>,
    pub isced_map: Option<PathBuf>,
    pub seed_abox: Option<PathBuf>,
    pub competency_questions: Option<PathBuf>,
    pub snapshot: PathBuf,
    pub prefixes: BTreeMap<String, String>,
    pub mappings: Vec<MappingEntry>,
}

/// Loads a manifest, honouring the `FACETKB_NAMESPACE` environment variable.
pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
    load_with(path, std::env::var("FACETKB_NAMESPACE").ok().as_deref())
}

/// Loads a manifest with an explicit namespace override (external callers
/// use [`load`], which wires the environment in).
pub fn load_with(path: &Path, override_namespace: Option<&str>) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: RawManifest = toml::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let Some(ei) = raw.prefixes.get("EI").cloned() else {
        return Err(ManifestError::MissingEiPrefix);
    };
    if let Some(ns) = &raw.namespace {
        if ns != &ei {
            return Err(ManifestError::InconsistentNamespace);
        }
    }
    let namespace = override_namespace
        .map(str::to_string)
        .or(raw.namespace)
        .unwrap_or(ei);

    let resolve = |p: &str| base.join(p);
    let must_exist = |field: &'static str, p: PathBuf| -> Result<PathBuf, ManifestError> {
        if p.is_file() {
            Ok(p)
        } else {
            Err(ManifestError::MissingFile { field, path: p })
        }
    };
    let optional = |field: &'static str,
                    p: Option<String>|
     -> Result<Option<PathBuf>, ManifestError> {
        p.map(|p| must_exist(field, resolve(&p))).transpose()
    };

    let outline = must_exist("outline", resolve(&raw.outline))?;
    let refactor_script = optional("refactor_script", raw.refactor_script)?;
    let isced_map = optional("isced_map", raw.isced_map)?;
    let seed_abox = optional("seed_abox", raw.seed_abox)?;
    let competency_questions = optional("competency_questions", raw.competency_questions)?;
    let mappings = raw
        .mappings
        .into_iter()
        .map(|m| {
            Ok(MappingEntry {
                mapping: must_exist("mapping", resolve(&m.mapping))?,
                data: must_exist("mapping data", resolve(&m.data))?,
            })
        })
        .collect::<Result<Vec<_>, ManifestError>>()?;

    Ok(Manifest {
        namespace,
        outline,
        refactor_script,
        isced_map,
        seed_abox,
        competency_questions,
        snapshot: resolve(&raw.snapshot),
        prefixes: raw.prefixes,
        mappings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    const NS: &str = "http://www.semanticweb.org/ontologies/2013/12/ontology.owl#";

    fn minimal(dir: &Path) -> PathBuf {
        write(dir, "schema.outline", "Thing :: a thing {kind}\n");
        write(
            dir,
            "kb.toml",
            &format!(
                "outline = \"schema.outline\"\nsnapshot = \"snap\"\n\n[prefixes]\nEI = \"{NS}\"\n"
            ),
        )
    }

    #[test]
    fn resolves_paths_relative_to_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = minimal(dir.path());
        let m = load_with(&path, None).unwrap();
        assert_eq!(m.namespace, NS);
        assert_eq!(m.outline, dir.path().join("schema.outline"));
        assert_eq!(m.snapshot, dir.path().join("snap"));
        assert!(m.refactor_script.is_none());
        assert!(m.mappings.is_empty());
    }

    #[test]
    fn missing_inputs_are_rejected_by_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "kb.toml",
            &format!(
                "outline = \"nope.outline\"\nsnapshot = \"snap\"\n\n[prefixes]\nEI = \"{NS}\"\n"
            ),
        );
        match load_with(&path, None) {
            Err(ManifestError::MissingFile { field, .. }) => assert_eq!(field, "outline"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ei_prefix_is_mandatory_and_checked_against_namespace() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "schema.outline", "Thing :: a thing {kind}\n");
        let no_ei = write(
            dir.path(),
            "a.toml",
            "outline = \"schema.outline\"\nsnapshot = \"snap\"\n",
        );
        assert!(matches!(load_with(&no_ei, None), Err(ManifestError::MissingEiPrefix)));

        let fighting = write(
            dir.path(),
            "b.toml",
            &format!(
                "namespace = \"http://other.example/#\"\noutline = \"schema.outline\"\nsnapshot = \"snap\"\n\n[prefixes]\nEI = \"{NS}\"\n"
            ),
        );
        assert!(matches!(
            load_with(&fighting, None),
            Err(ManifestError::InconsistentNamespace)
        ));
    }

    #[test]
    fn override_namespace_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = minimal(dir.path());
        let m = load_with(&path, Some("http://elsewhere.example/ns#")).unwrap();
        assert_eq!(m.namespace, "http://elsewhere.example/ns#");
    }

    #[test]
    fn unknown_keys_are_toml_errors() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "schema.outline", "Thing :: a thing {kind}\n");
        let path = write(
            dir.path(),
            "kb.toml",
            &format!(
                "outline = \"schema.outline\"\nsnapshot = \"snap\"\nbanana = 1\n\n[prefixes]\nEI = \"{NS}\"\n"
            ),
        );
        assert!(matches!(load_with(&path, None), Err(ManifestError::Toml(_))));
    }

    #[test]
    fn mappings_require_both_files() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "schema.outline", "Thing :: a thing {kind}\n");
        write(dir.path(), "x.map", "source \"s\"\nkey \"K\"\ndefault-class \"C\"\n");
        let path = write(
            dir.path(),
            "kb.toml",
            &format!(
                "outline = \"schema.outline\"\nsnapshot = \"snap\"\n\n[prefixes]\nEI = \"{NS}\"\n\n[[mappings]]\nmapping = \"x.map\"\ndata = \"x.csv\"\n"
            ),
        );
        match load_with(&path, None) {
            Err(ManifestError::MissingFile { field, path }) => {
                assert_eq!(field, "mapping data");
                assert!(path.ends_with("x.csv"));
            }
            other => panic!("unexpected {other:?}"),
        }

        write(dir.path(), "x.csv", "K\nv\n");
        let m = load_with(&path, None).unwrap();
        assert_eq!(m.mappings.len(), 1);
    }
}

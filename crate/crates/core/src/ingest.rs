//! Problem documents, corpora and solution files.
//!
//! A problem document is JSON:
//!
//! ```text
//! {
//!   "devices":   [EdgeDevice, ...],
//!   "vsps":      [{"id": 0, "interest_label": "..."}, ...],
//!   "interests": {"key": "interest text", ...},        // corpus mode only
//!   "scenarios": [{"probability": p,
//!                  "per_vsp": [{"interest_key": "key", "quantity": q, "threshold": t}, ...]}, ...],
//!   "similarity": {"explicit": [[[S per scenario] per device] per vsp]}
//!              | {"corpus": {"corpus_csv": "path", "embeddings": {"file": "path"} | "hash"}}
//! }
//! ```
//!
//! Relative paths resolve against the document's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::model::{DemandScenario, EdgeDevice, ProblemInstance, SimilarityTensor, Vsp};
use crate::recourse::Solution;
use crate::similarity::{
    build_similarity_tensor, load_corpora, EmbeddingProvider, FileEmbeddings, HashEmbedder,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfigDocument {
    pub devices: Vec<EdgeDevice>,
    pub vsps: Vec<Vsp>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub interests: BTreeMap<String, String>,
    pub scenarios: Vec<DemandScenario>,
    pub similarity: SimilaritySource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilaritySource {
    /// Nested `[vsp][device][scenario]` scores.
    Explicit(Vec<Vec<Vec<f64>>>),
    Corpus {
        corpus_csv: PathBuf,
        embeddings: EmbeddingSource,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// JSON map of text to precomputed vector.
    File(PathBuf),
    /// The built-in 64-dimensional token-hashing embedder.
    Hash,
}

impl ProblemConfigDocument {
    /// Explicit-tensor document describing `instance`.
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        Self {
            devices: instance.devices().to_vec(),
            vsps: instance.vsps().to_vec(),
            interests: BTreeMap::new(),
            scenarios: instance.scenarios().to_vec(),
            similarity: SimilaritySource::Explicit(instance.similarity().to_nested()),
        }
    }

    /// Builds and validates the instance, resolving relative paths against
    /// `base_dir`.
    pub fn into_instance(self, base_dir: &Path) -> Result<ProblemInstance, IngestError> {
        let tensor = match &self.similarity {
            SimilaritySource::Explicit(nested) => SimilarityTensor::from_nested(nested)?,
            SimilaritySource::Corpus {
                corpus_csv,
                embeddings,
            } => {
                let corpora = load_corpora(&base_dir.join(corpus_csv))?;
                let provider: Box<dyn EmbeddingProvider> = match embeddings {
                    EmbeddingSource::File(p) => Box::new(FileEmbeddings::load(&base_dir.join(p))?),
                    EmbeddingSource::Hash => Box::new(HashEmbedder),
                };
                build_similarity_tensor(
                    self.vsps.len(),
                    self.devices.len(),
                    &self.scenarios,
                    &self.interests,
                    &corpora,
                    provider.as_ref(),
                )?
            }
        };
        Ok(ProblemInstance::new(
            self.devices,
            self.vsps,
            self.scenarios,
            tensor,
        )?)
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Deserializes JSON, reporting failures with a JSON pointer to the
/// offending value.
pub fn parse_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, IngestError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let pointer = json_pointer(err.path());
        IngestError::Schema {
            path: path.to_path_buf(),
            pointer: if pointer.is_empty() { "/".into() } else { pointer },
            message: err.into_inner().to_string(),
        }
    })
}

fn read(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IngestError> {
    fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_document(path: &Path) -> Result<ProblemConfigDocument, IngestError> {
    parse_json(path, &read(path)?)
}

/// Reads, assembles and validates a problem document.
pub fn load_problem(path: &Path) -> Result<ProblemInstance, IngestError> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_document(path)?.into_instance(base)
}

pub fn write_problem(instance: &ProblemInstance, path: &Path) -> Result<(), IngestError> {
    write(path, &to_json(&ProblemConfigDocument::from_instance(instance)))
}

/// Pretty-printed JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the identical value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_solution(solution: &Solution, path: &Path) -> Result<(), IngestError> {
    write(path, &to_json(solution))
}

pub fn read_solution(path: &Path) -> Result<Solution, IngestError> {
    parse_json(path, &read(path)?)
}

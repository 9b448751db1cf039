//! Interest-to-corpus similarity scoring.
//!
//! A VSP interest and each category a device has produced are embedded by an
//! [`EmbeddingProvider`]; the device's score for that interest is the
//! count-weighted mean cosine between the interest vector and the category
//! vectors, with negative cosines clamped to zero so scores stay in [0, 1].

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use crate::error::{IngestError, SimilarityError};
use crate::model::{DemandScenario, SimilarityTensor};

/// Dimension of [`HashEmbedder`] vectors.
pub const HASH_EMBEDDER_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, SimilarityError> {
        if values.is_empty() {
            return Err(SimilarityError::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SimilarityError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
pub fn cosine_match(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SimilarityError> {
    if a.dim() != b.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Categories a device has produced, with how many images carried each.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryCorpus {
    pub device_id: usize,
    pub entries: Vec<(String, u64)>,
}

impl CategoryCorpus {
    pub fn new(device_id: usize) -> Self {
        Self {
            device_id,
            entries: Vec::new(),
        }
    }

    /// Total image count y.
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

/// Maps category or interest text to a vector.
///
/// Implementations must be deterministic and must never return the zero
/// vector for non-empty text.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, SimilarityError>;
}

/// Precomputed embeddings loaded from a JSON object `{ "text": [floats...] }`.
#[derive(Debug, Clone)]
pub struct FileEmbeddings {
    dimension: usize,
    vectors: HashMap<String, EmbeddingVector>,
}

impl FileEmbeddings {
    pub fn from_map(map: BTreeMap<String, Vec<f64>>) -> Result<Self, SimilarityError> {
        let mut dimension = None;
        let mut vectors = HashMap::with_capacity(map.len());
        for (text, values) in map {
            let v = EmbeddingVector::new(values)?;
            match dimension {
                None => dimension = Some(v.dim()),
                Some(d) if d != v.dim() => {
                    return Err(SimilarityError::DimensionMismatch {
                        left: d,
                        right: v.dim(),
                    })
                }
                Some(_) => {}
            }
            vectors.insert(text, v);
        }
        let dimension =
            dimension.ok_or_else(|| SimilarityError::Config("embeddings file has no entries".into()))?;
        Ok(Self { dimension, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let map: BTreeMap<String, Vec<f64>> = crate::ingest::parse_json(path, &bytes)?;
        Ok(Self::from_map(map)?)
    }
}

impl EmbeddingProvider for FileEmbeddings {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, SimilarityError> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| SimilarityError::MissingEmbedding(text.to_string()))
    }
}

/// Deterministic bag-of-words embedder for tests and offline runs.
///
/// Text is lowercased and split on non-alphanumeric characters; each token
/// adds 1.0 to bucket `fnv1a64(token) % 64`. Text without alphanumeric
/// characters is hashed as a single token, so non-empty input never yields
/// the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashEmbedder;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        HASH_EMBEDDER_DIM
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, SimilarityError> {
        if text.is_empty() {
            return Err(SimilarityError::Config("cannot embed empty text".into()));
        }
        let lower = text.to_lowercase();
        let mut values = vec![0.0; HASH_EMBEDDER_DIM];
        let mut any = false;
        for token in lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            values[(fnv1a64(token.as_bytes()) % HASH_EMBEDDER_DIM as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            values[(fnv1a64(lower.as_bytes()) % HASH_EMBEDDER_DIM as u64) as usize] = 1.0;
        }
        EmbeddingVector::new(values)
    }
}

/// Count-weighted mean of clamped cosine matches between `interest` and every
/// corpus entry.
pub fn average_similarity(
    interest: &EmbeddingVector,
    corpus: &CategoryCorpus,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, SimilarityError> {
    let total = corpus.total();
    if corpus.entries.is_empty() || total == 0 {
        return Err(SimilarityError::EmptyCorpus(corpus.device_id));
    }
    let mut sum = 0.0;
    for (category, count) in &corpus.entries {
        if *count == 0 {
            return Err(SimilarityError::ZeroCount {
                device: corpus.device_id,
                category: category.clone(),
            });
        }
        let m = cosine_match(interest, &provider.embed(category)?)?.max(0.0);
        sum += m * *count as f64;
    }
    Ok((sum / total as f64).clamp(0.0, 1.0))
}

/// Assembles `S[w][e][s]` = average similarity of the interest VSP `w`
/// holds in scenario `s` against device `e`'s corpus.
///
/// `interests` maps each scenario interest key to its text; `corpora` must
/// hold one corpus per device id in `0..devices`.
pub fn build_similarity_tensor(
    vsps: usize,
    devices: usize,
    scenarios: &[DemandScenario],
    interests: &BTreeMap<String, String>,
    corpora: &[CategoryCorpus],
    provider: &dyn EmbeddingProvider,
) -> Result<SimilarityTensor, SimilarityError> {
    let mut by_device: Vec<Option<&CategoryCorpus>> = vec![None; devices];
    for c in corpora {
        if c.device_id >= devices {
            return Err(SimilarityError::Config(format!(
                "corpus references unknown device {}",
                c.device_id
            )));
        }
        by_device[c.device_id] = Some(c);
    }
    let by_device: Vec<&CategoryCorpus> = by_device
        .into_iter()
        .enumerate()
        .map(|(e, c)| c.ok_or_else(|| SimilarityError::Config(format!("no corpus for device {e}"))))
        .collect::<Result<_, _>>()?;

    let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut tensor = SimilarityTensor::zeros(vsps, devices, scenarios.len());
    for (s, scenario) in scenarios.iter().enumerate() {
        if scenario.per_vsp.len() != vsps {
            return Err(SimilarityError::Config(format!(
                "scenario {s} lists {} vsp demands, expected {vsps}",
                scenario.per_vsp.len()
            )));
        }
        for (w, demand) in scenario.per_vsp.iter().enumerate() {
            let key = demand.interest_key.as_str();
            if !cache.contains_key(key) {
                let text = interests
                    .get(key)
                    .ok_or_else(|| SimilarityError::Config(format!("no interest text for key {key:?}")))?;
                let interest = provider.embed(text)?;
                let scores = by_device
                    .iter()
                    .map(|c| average_similarity(&interest, c, provider))
                    .collect::<Result<Vec<_>, _>>()?;
                cache.insert(key, scores);
            }
            for (e, &score) in cache[key].iter().enumerate() {
                tensor.set(w, e, s, score);
            }
        }
    }
    Ok(tensor)
}

#[derive(Debug, Deserialize)]
struct CorpusRow {
    device_id: usize,
    category: String,
    count: u64,
}

/// Reads a `device_id,category,count` CSV into per-device corpora, ordered
/// by device id. Rows for the same device keep file order.
pub fn load_corpora(path: &Path) -> Result<Vec<CategoryCorpus>, IngestError> {
    let csv_err = |message: String| IngestError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut map: BTreeMap<usize, CategoryCorpus> = BTreeMap::new();
    for row in reader.deserialize::<CorpusRow>() {
        let row = row.map_err(|e| csv_err(e.to_string()))?;
        if row.count == 0 {
            return Err(csv_err(format!(
                "device {} category {:?}: count must be >= 1",
                row.device_id, row.category
            )));
        }
        map.entry(row.device_id)
            .or_insert_with(|| CategoryCorpus::new(row.device_id))
            .entries
            .push((row.category, row.count));
    }
    Ok(map.into_values().collect())
}

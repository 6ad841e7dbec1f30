//! Advertising creative knowledge base: record schema, ingestion from JSONL,
//! deterministic text embedding, and persistence.
//!
//! The knowledge base is immutable after ingestion. Records are kept sorted
//! by id so iteration order, retrieval tie-breaks, and persisted bytes are
//! reproducible.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cider::{self, NGramStats};
use crate::error::{Error, Result};
use crate::motion::LatentTrajectory;
use crate::script::ScriptComponents;

pub const KB_VERSION: &str = "ACKB/1";

/// A product selling-point phrase with its corpus id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SellingPoint {
    pub id: String,
    pub text: String,
}

/// A video script: raw text plus, when known, its labeled decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub raw: String,
    pub structured: Option<ScriptComponents>,
}

impl Script {
    /// Canonical form of a structured script; `raw` always holds this for
    /// knowledge-base records.
    pub fn from_components(components: ScriptComponents) -> Self {
        Self {
            raw: components.to_labeled(),
            structured: Some(components),
        }
    }
}

/// Unit-norm text embedding; the all-zero vector marks un-embeddable text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    /// L2-normalizes into the unit/zero invariant; a zero vector stays zero.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self { values };
        }
        Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Cosine similarity, defined as 0 when either vector is zero.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        self.dot(other) / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    /// Built-in seeded feature hashing over character n-grams.
    HashedNgram,
    /// Vectors are supplied in the input stream; new text cannot be embedded.
    External,
}

/// Configuration of the text embedder attached to a knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub ngram_size: usize,
    pub hash_seed: u64,
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::HashedNgram,
            dim: 64,
            ngram_size: 3,
            hash_seed: 0,
        }
    }
}

impl EmbedderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 8 {
            return Err(Error::Config(format!(
                "embedder dim must be >= 8, got {}",
                self.dim
            )));
        }
        if self.ngram_size < 1 {
            return Err(Error::Config("embedder ngram_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Embeds text with the built-in hasher; errors for the external kind.
    pub fn embed(&self, text: &str) -> Result<Embedding> {
        match self.kind {
            EmbedderKind::HashedNgram => Ok(embed_text(text, self)),
            EmbedderKind::External => Err(Error::ExternalEmbedder),
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const SIGN_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashed buckets with signs for every character n-gram of `text`, in
/// occurrence order. Exposed for the bucket-collision checks in tests.
pub fn hashed_ngram_buckets(text: &str, spec: &EmbedderSpec) -> Vec<(usize, f64)> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    if chars.len() < spec.ngram_size {
        return Vec::new();
    }
    chars
        .windows(spec.ngram_size)
        .map(|window| {
            let gram: String = window.iter().collect();
            let base = fnv1a(gram.as_bytes());
            let bucket = (splitmix64(base ^ spec.hash_seed) % spec.dim as u64) as usize;
            let sign = if splitmix64(base ^ spec.hash_seed ^ SIGN_SALT) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            (bucket, sign)
        })
        .collect()
}

/// Deterministic feature-hashing embedder: lowercase, overlapping character
/// n-grams, seeded signed hashing into `dim` buckets, L2 normalization.
/// Text with no n-gram (empty or shorter than `ngram_size`) maps to the
/// exact zero vector.
pub fn embed_text(text: &str, spec: &EmbedderSpec) -> Embedding {
    let mut values = vec![0.0f64; spec.dim];
    for (bucket, sign) in hashed_ngram_buckets(text, spec) {
        values[bucket] += sign;
    }
    Embedding::normalized(values)
}

/// One knowledge-base entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreativeRecord {
    pub selling_point: SellingPoint,
    pub script: Script,
    pub embedding: Embedding,
    pub trajectory: Option<LatentTrajectory>,
}

/// Immutable record store with corpus statistics cached for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub records: Vec<CreativeRecord>,
    pub embedder_spec: EmbedderSpec,
    pub ngram_stats: NGramStats,
}

impl KnowledgeBase {
    /// Assembles a knowledge base from in-memory records: sorts by id,
    /// rejects duplicates and embedding-dimension drift, and caches corpus
    /// n-gram statistics. Programmatic counterpart of [`ingest`].
    pub fn from_records(mut records: Vec<CreativeRecord>, spec: EmbedderSpec) -> Result<Self> {
        spec.validate()?;
        records.sort_by(|a, b| a.selling_point.id.cmp(&b.selling_point.id));
        for pair in records.windows(2) {
            if pair[0].selling_point.id == pair[1].selling_point.id {
                return Err(Error::DuplicateId(pair[1].selling_point.id.clone()));
            }
        }
        for record in &records {
            if record.embedding.dim() != spec.dim {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim,
                    actual: record.embedding.dim(),
                });
            }
        }
        let ngram_stats = build_stats(&records)?;
        Ok(Self {
            records,
            embedder_spec: spec,
            ngram_stats,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records
            .iter()
            .map(|r| r.selling_point.id.as_str())
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&CreativeRecord> {
        self.records
            .binary_search_by(|r| r.selling_point.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Mean whitespace-token count of selling points; corpus statistic
    /// reported by the ingest summary.
    pub fn average_selling_point_words(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let total: usize = self
            .records
            .iter()
            .map(|r| cider::tokenize(&r.selling_point.text).len())
            .sum();
        total as f64 / self.records.len() as f64
    }
}

/// Wire schema for one JSONL line.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    selling_point: String,
    script: Option<RawScript>,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
    #[serde(default)]
    trajectory: Option<RawTrajectory>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    subject: String,
    scene: String,
    motion: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    frames: Vec<Vec<f64>>,
}

/// Builds a knowledge base from a JSONL stream.
///
/// In hashed-ngram mode supplied embeddings are ignored and the built-in
/// embedder is authoritative; in external mode every record must carry a
/// vector of the configured dimension, which is L2-normalized on ingest.
pub fn ingest(reader: impl BufRead, spec: &EmbedderSpec) -> Result<KnowledgeBase> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|source| Error::MalformedLine {
            line: line_no,
            source,
        })?;
        records.push(build_record(raw, spec, &mut seen_ids)?);
    }
    records.sort_by(|a, b| a.selling_point.id.cmp(&b.selling_point.id));
    let ngram_stats = build_stats(&records)?;
    Ok(KnowledgeBase {
        records,
        embedder_spec: spec.clone(),
        ngram_stats,
    })
}

fn build_record(
    raw: RawRecord,
    spec: &EmbedderSpec,
    seen_ids: &mut BTreeSet<String>,
) -> Result<CreativeRecord> {
    if raw.id.trim().is_empty() {
        return Err(Error::InvalidRecord {
            id: raw.id,
            reason: "empty id".into(),
        });
    }
    if !seen_ids.insert(raw.id.clone()) {
        return Err(Error::DuplicateId(raw.id));
    }
    if raw.selling_point.trim().is_empty() {
        return Err(Error::InvalidRecord {
            id: raw.id,
            reason: "empty selling point".into(),
        });
    }
    let script = raw.script.ok_or_else(|| Error::MissingScript {
        id: raw.id.clone(),
    })?;
    if script.motion.trim().is_empty() {
        return Err(Error::InvalidRecord {
            id: raw.id,
            reason: "empty motion component".into(),
        });
    }
    let components = ScriptComponents {
        subject: script.subject,
        scene: script.scene,
        motion: script.motion,
    };
    let embedding = match spec.kind {
        EmbedderKind::HashedNgram => embed_text(&raw.selling_point, spec),
        EmbedderKind::External => {
            let values = raw.embedding.ok_or_else(|| Error::InvalidRecord {
                id: raw.id.clone(),
                reason: "external embedder requires an embedding field".into(),
            })?;
            if values.len() != spec.dim {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim,
                    actual: values.len(),
                });
            }
            Embedding::normalized(values)
        }
    };
    let trajectory = match raw.trajectory {
        Some(t) => Some(
            LatentTrajectory::from_rows(&t.frames).map_err(|e| Error::InvalidRecord {
                id: raw.id.clone(),
                reason: format!("bad trajectory: {e}"),
            })?,
        ),
        None => None,
    };
    Ok(CreativeRecord {
        selling_point: SellingPoint {
            id: raw.id,
            text: raw.selling_point,
        },
        script: Script::from_components(components),
        embedding,
        trajectory,
    })
}

fn build_stats(records: &[CreativeRecord]) -> Result<NGramStats> {
    let docs: Vec<Vec<String>> = records
        .iter()
        .map(|r| cider::tokenize(&r.script.raw))
        .collect();
    NGramStats::build(&docs, cider::DEFAULT_MAX_N)
}

/// On-disk form of a knowledge base.
#[derive(Debug, Serialize, Deserialize)]
struct KbFile {
    version: String,
    embedder_spec: EmbedderSpec,
    ngram_stats: NGramStats,
    records: Vec<KbFileRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KbFileRecord {
    id: String,
    selling_point: String,
    script: RawScript,
    embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trajectory: Option<RawTrajectory>,
}

pub fn save_kb(kb: &KnowledgeBase, path: &Path) -> Result<()> {
    let records = kb
        .records
        .iter()
        .map(|r| {
            let c = r
                .script
                .structured
                .as_ref()
                .expect("knowledge-base records always carry structured scripts");
            KbFileRecord {
                id: r.selling_point.id.clone(),
                selling_point: r.selling_point.text.clone(),
                script: RawScript {
                    subject: c.subject.clone(),
                    scene: c.scene.clone(),
                    motion: c.motion.clone(),
                },
                embedding: r.embedding.values.clone(),
                trajectory: r.trajectory.as_ref().map(|t| RawTrajectory {
                    frames: t.to_rows(),
                }),
            }
        })
        .collect();
    let file = KbFile {
        version: KB_VERSION.to_string(),
        embedder_spec: kb.embedder_spec.clone(),
        ngram_stats: kb.ngram_stats.clone(),
        records,
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase> {
    let text = std::fs::read_to_string(path)?;
    let file: KbFile = serde_json::from_str(&text)?;
    if file.version != KB_VERSION {
        return Err(Error::VersionMismatch {
            expected: KB_VERSION.to_string(),
            found: file.version,
        });
    }
    let records = file
        .records
        .into_iter()
        .map(|r| {
            let trajectory = match r.trajectory {
                Some(t) => Some(LatentTrajectory::from_rows(&t.frames).map_err(|e| {
                    Error::InvalidRecord {
                        id: r.id.clone(),
                        reason: format!("bad trajectory: {e}"),
                    }
                })?),
                None => None,
            };
            Ok(CreativeRecord {
                selling_point: SellingPoint {
                    id: r.id,
                    text: r.selling_point,
                },
                script: Script::from_components(ScriptComponents {
                    subject: r.script.subject,
                    scene: r.script.scene,
                    motion: r.script.motion,
                }),
                embedding: Embedding {
                    values: r.embedding,
                },
                trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnowledgeBase {
        records,
        embedder_spec: file.embedder_spec,
        ngram_stats: file.ngram_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn line(id: &str, text: &str) -> String {
        format!(
            r#"{{"id":"{id}","selling_point":"{text}","script":{{"subject":"mint leaves","scene":"white marble counter","motion":"water droplet falls and ripples"}}}}"#
        )
    }

    #[test]
    fn empty_text_embeds_to_zero_vector() {
        let spec = EmbedderSpec::default();
        let e = embed_text("", &spec);
        assert_eq!(e.dim(), 64);
        assert!(e.is_zero());
    }

    #[test]
    fn embedding_is_deterministic() {
        let spec = EmbedderSpec::default();
        let a = embed_text("Balance Oral pH", &spec);
        let b = embed_text("Balance Oral pH", &spec);
        assert_eq!(a, b);
        assert!((a.cosine(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_trigram_strings_are_orthogonal_at_large_dim() {
        // Bucket-collision oracle: enumerate both strings' hashed buckets at
        // dim 65536 and confirm the sets are disjoint before asserting the
        // exact zero cosine.
        let spec = EmbedderSpec {
            dim: 65536,
            ..EmbedderSpec::default()
        };
        let (left, right) = ("abcdef", "uvwxyz");
        let buckets = |text: &str| -> BTreeSet<usize> {
            hashed_ngram_buckets(text, &spec)
                .into_iter()
                .map(|(b, _)| b)
                .collect()
        };
        let (lb, rb) = (buckets(left), buckets(right));
        assert!(!lb.is_empty() && !rb.is_empty());
        assert!(
            lb.is_disjoint(&rb),
            "bucket collision at this dim/seed: {lb:?} vs {rb:?}"
        );
        let (a, b) = (embed_text(left, &spec), embed_text(right, &spec));
        assert_eq!(a.cosine(&b), 0.0);
    }

    #[test]
    fn short_text_embeds_to_zero() {
        let spec = EmbedderSpec::default();
        assert!(embed_text("ab", &spec).is_zero());
    }

    proptest! {
        #[test]
        fn nonzero_embeddings_have_unit_norm(text in "[a-z ]{3,40}") {
            let spec = EmbedderSpec::default();
            let e = embed_text(&text, &spec);
            if !e.is_zero() {
                prop_assert!((e.norm() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn ingest_is_deterministic(seed in any::<u64>()) {
            let spec = EmbedderSpec { hash_seed: seed, ..EmbedderSpec::default() };
            let data = [line("r1", "gentle foaming face wash"), line("r2", "natural mint essence")].join("\n");
            let a = ingest(Cursor::new(data.clone()), &spec).unwrap();
            let b = ingest(Cursor::new(data), &spec).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn ingest_counts_records_and_corpus() {
        let data = [
            line("r1", "balance oral ph"),
            line("r2", "natural mint essence"),
            line("r3", "gentle foaming wash"),
        ]
        .join("\n");
        let kb = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap();
        assert_eq!(kb.len(), 3);
        assert_eq!(kb.ngram_stats.corpus_size, 3);
    }

    #[test]
    fn ingest_rejects_duplicate_id() {
        let data = [line("r1", "first"), line("r1", "second")].join("\n");
        let err = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap_err();
        match err {
            Error::DuplicateId(id) => assert_eq!(id, "r1"),
            other => panic!("expected duplicate-id error, got {other}"),
        }
    }

    #[test]
    fn ingest_reports_malformed_line_number() {
        let data = format!("{}\nnot json\n", line("r1", "first"));
        let err = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap_err();
        match err {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other}"),
        }
    }

    #[test]
    fn ingest_requires_structured_script() {
        let data = r#"{"id":"r9","selling_point":"something","script":null}"#;
        let err = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap_err();
        match err {
            Error::MissingScript { id } => assert_eq!(id, "r9"),
            other => panic!("expected missing-script error, got {other}"),
        }
    }

    #[test]
    fn ingest_sorts_records_by_id() {
        let data = [line("rb", "second one"), line("ra", "first one")].join("\n");
        let kb = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap();
        assert_eq!(kb.ids(), vec!["ra", "rb"]);
    }

    #[test]
    fn selling_point_length_statistic_matches_fixture() {
        // Ten records with 8- or 9-word selling points, alternating; the
        // average lands inside [8, 9] like the corpus it mirrors.
        let eight = "fresh mint essence for daily balanced oral care";
        let nine = "gentle foaming face wash with natural herbal extracts inside";
        let data: Vec<String> = (0..10)
            .map(|i| line(&format!("r{i}"), if i % 2 == 0 { eight } else { nine }))
            .collect();
        let kb = ingest(Cursor::new(data.join("\n")), &EmbedderSpec::default()).unwrap();
        let avg = kb.average_selling_point_words();
        assert!((8.0..=9.0).contains(&avg), "avg {avg}");
    }

    #[test]
    fn external_embedder_requires_vectors() {
        let spec = EmbedderSpec {
            kind: EmbedderKind::External,
            dim: 8,
            ..EmbedderSpec::default()
        };
        let err = ingest(Cursor::new(line("r1", "text")), &spec).unwrap_err();
        assert!(matches!(err, Error::InvalidRecord { .. }));
        assert!(matches!(spec.embed("anything"), Err(Error::ExternalEmbedder)));
    }

    #[test]
    fn save_load_roundtrip_is_identity() {
        let data = [
            line("r1", "balance oral ph"),
            line("r2", "natural mint essence"),
            line("r3", "gentle foaming wash"),
        ]
        .join("\n");
        let kb = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.json");
        save_kb(&kb, &path).unwrap();
        let loaded = load_kb(&path).unwrap();
        assert_eq!(kb, loaded);

        // Saving the loaded copy must reproduce the file byte for byte.
        let path2 = dir.path().join("kb2.json");
        save_kb(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn load_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.json");
        let data = line("r1", "balance oral ph");
        let kb = ingest(Cursor::new(data), &EmbedderSpec::default()).unwrap();
        save_kb(&kb, &path).unwrap();
        let full = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &full[..full.len() / 2]).unwrap();
        assert!(load_kb(&path).is_err());
    }

    #[test]
    fn load_rejects_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.json");
        let kb = ingest(
            Cursor::new(line("r1", "balance oral ph")),
            &EmbedderSpec::default(),
        )
        .unwrap();
        save_kb(&kb, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("ACKB/1", "ACKB/9");
        std::fs::write(&path, text).unwrap();
        match load_kb(&path).unwrap_err() {
            Error::VersionMismatch { found, .. } => assert_eq!(found, "ACKB/9"),
            other => panic!("expected version mismatch, got {other}"),
        }
    }
}

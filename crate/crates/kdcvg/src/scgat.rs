//! Attention-based retrieval over the knowledge base.
//!
//! A query selling point is scored against every stored record with a
//! learnable bilinear form: the query embedding is projected by `W_q`, each
//! candidate by `W_k`, and their scaled dot product feeds a softmax over the
//! whole candidate set. Top-k selection is deterministic (weight descending,
//! id ascending on ties). The non-learned baselines used in strategy sweeps
//! — no retrieval, seeded random, raw cosine — live here too so every
//! strategy produces the same [`RetrievalResult`] shape.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ackb::{Embedding, KnowledgeBase};
use crate::error::{Error, Result};
use crate::matrixio::{matrix_from_rows, rows_of};

/// Format tag for persisted attention parameters.
pub const PARAMS_VERSION: &str = "SCGAT/1";

/// Default number of references selected per query.
pub const DEFAULT_K: usize = 3;

/// Default scale of the noise added to the identity at initialization.
pub const DEFAULT_INIT_EPS: f64 = 0.01;

/// Learnable projection pair of the bilinear retrieval score
/// `s_i = (W_q q) · (W_k c_i) / √d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
}

impl AttentionParams {
    /// Validates that both projections are finite square matrices of the
    /// same side.
    pub fn new(w_q: Array2<f64>, w_k: Array2<f64>) -> Result<Self> {
        if w_q.nrows() != w_q.ncols() || w_k.nrows() != w_k.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "projection matrices must be square, got {:?} and {:?}",
                w_q.dim(),
                w_k.dim()
            )));
        }
        if w_q.dim() != w_k.dim() {
            return Err(Error::ShapeMismatch(format!(
                "W_q is {:?} but W_k is {:?}",
                w_q.dim(),
                w_k.dim()
            )));
        }
        if w_q.iter().chain(w_k.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("attention parameters"));
        }
        Ok(Self { w_q, w_k })
    }

    /// Exact identity projections: scoring reduces to the scaled dot
    /// product of raw embeddings.
    pub fn identity(d: usize) -> Self {
        Self {
            w_q: Array2::eye(d),
            w_k: Array2::eye(d),
        }
    }

    /// Training starting point: identity plus `eps`-scaled Gaussian noise
    /// from a seeded generator (`W_q` drawn first, then `W_k`, both
    /// row-major). Starts at the cosine baseline while breaking the
    /// symmetry between the two projections.
    pub fn seeded_near_identity(d: usize, eps: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy_eye = |rng: &mut ChaCha8Rng| {
            let mut m = Array2::eye(d);
            for i in 0..d {
                for j in 0..d {
                    let n: f64 = StandardNormal.sample(rng);
                    m[[i, j]] += eps * n;
                }
            }
            m
        };
        let w_q = noisy_eye(&mut rng);
        let w_k = noisy_eye(&mut rng);
        Self { w_q, w_k }
    }

    /// Embedding dimension both projections operate on.
    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }
}

/// Softmax weights over the candidate set, aligned with knowledge-base
/// record order. Entries are positive and sum to 1 (up to float rounding;
/// extreme score gaps can underflow an entry to exactly 0).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub weights: Vec<f64>,
}

impl AttentionWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// How a retrieval result was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// No references at all (generation runs from the query alone).
    None,
    /// Uniform seeded sample without replacement.
    Random,
    /// Raw cosine similarity of unprojected embeddings.
    Cosine,
    /// Learned bilinear attention.
    Scgat,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::None,
        Strategy::Random,
        Strategy::Cosine,
        Strategy::Scgat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Random => "random",
            Strategy::Cosine => "cosine",
            Strategy::Scgat => "scgat",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "random" => Ok(Strategy::Random),
            "cosine" => Ok(Strategy::Cosine),
            "scgat" => Ok(Strategy::Scgat),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?}; expected none, random, cosine, or scgat"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One selected record with the weight that ranked it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalItem {
    pub id: String,
    pub weight: f64,
}

/// Ranked selection for one query: at most k items, sorted by weight
/// descending with ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub strategy: Strategy,
    pub items: Vec<RetrievalItem>,
}

impl RetrievalResult {
    /// Ids in rank order.
    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.id.as_str()).collect()
    }
}

/// Bilinear attention scores of a query against every candidate:
/// `s_i = (W_q q) · (W_k c_i) / √d`, in candidate order.
pub fn raw_scores(
    query: &Embedding,
    candidates: &[&Embedding],
    params: &AttentionParams,
) -> Result<Vec<f64>> {
    let d = params.dim();
    if query.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: query.dim(),
        });
    }
    let scale = (d as f64).sqrt();
    let q = ArrayView1::from(&query.values[..]);
    let projected_query: Array1<f64> = params.w_q.dot(&q);
    let mut scores = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        if candidate.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: candidate.dim(),
            });
        }
        let c = ArrayView1::from(&candidate.values[..]);
        scores.push(params.w_k.dot(&c).dot(&projected_query) / scale);
    }
    Ok(scores)
}

/// Numerically stable softmax over candidate scores (max subtracted before
/// exponentiation).
pub fn softmax_weights(scores: &[f64]) -> Result<AttentionWeights> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("attention scores"));
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(AttentionWeights {
        weights: exps.into_iter().map(|e| e / total).collect(),
    })
}

/// Ranks candidates by `(value descending, id ascending)` and keeps the
/// first `min(k, N)`. Shared by the attention path and the cosine baseline.
fn select_top(values: &[f64], ids: &[&str], k: usize) -> Vec<RetrievalItem> {
    assert_eq!(values.len(), ids.len(), "one value per candidate id");
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("retrieval values are finite")
            .then_with(|| ids[a].cmp(ids[b]))
    });
    order.truncate(k.min(ids.len()));
    order
        .into_iter()
        .map(|i| RetrievalItem {
            id: ids[i].to_string(),
            weight: values[i],
        })
        .collect()
}

/// Top-k selection over attention weights with the deterministic tie-break;
/// `k > N` returns all N candidates.
pub fn top_k(weights: &AttentionWeights, ids: &[&str], k: usize) -> Vec<RetrievalItem> {
    select_top(&weights.weights, ids, k)
}

/// Full attention retrieval from query text: embed, score, softmax, top-k.
///
/// Errors if the knowledge base is empty or its embedder cannot embed new
/// text (externally embedded corpora must use
/// [`retrieve_with_embedding`]).
pub fn retrieve(
    query_text: &str,
    kb: &KnowledgeBase,
    params: &AttentionParams,
    k: usize,
) -> Result<RetrievalResult> {
    let query = kb.embedder_spec.embed(query_text)?;
    retrieve_with_embedding(&query, kb, params, k)
}

/// Attention retrieval for a pre-embedded query.
pub fn retrieve_with_embedding(
    query: &Embedding,
    kb: &KnowledgeBase,
    params: &AttentionParams,
    k: usize,
) -> Result<RetrievalResult> {
    if kb.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let candidates: Vec<&Embedding> = kb.records.iter().map(|r| &r.embedding).collect();
    let scores = raw_scores(query, &candidates, params)?;
    let weights = softmax_weights(&scores)?;
    Ok(RetrievalResult {
        strategy: Strategy::Scgat,
        items: top_k(&weights, &kb.ids(), k),
    })
}

/// Non-learned retrieval baselines from query text. `strategy` must be one
/// of none / random / cosine; the learned strategy needs trained parameters
/// and goes through [`retrieve`]. All baselines are total on an empty
/// knowledge base (they return an empty selection).
pub fn baseline_retrieve(
    strategy: Strategy,
    query_text: &str,
    kb: &KnowledgeBase,
    k: usize,
    rng_seed: u64,
) -> Result<RetrievalResult> {
    let items = match strategy {
        Strategy::None => Vec::new(),
        Strategy::Random => random_items(kb, k, rng_seed),
        Strategy::Cosine => cosine_items(&kb.embedder_spec.embed(query_text)?, kb, k),
        Strategy::Scgat => {
            return Err(Error::Config(
                "scgat strategy needs trained parameters; use retrieve".into(),
            ))
        }
    };
    Ok(RetrievalResult { strategy, items })
}

/// Baseline retrieval for a pre-embedded query (the query is only consulted
/// by the cosine strategy).
pub fn baseline_retrieve_with_embedding(
    strategy: Strategy,
    query: &Embedding,
    kb: &KnowledgeBase,
    k: usize,
    rng_seed: u64,
) -> Result<RetrievalResult> {
    let items = match strategy {
        Strategy::None => Vec::new(),
        Strategy::Random => random_items(kb, k, rng_seed),
        Strategy::Cosine => cosine_items(query, kb, k),
        Strategy::Scgat => {
            return Err(Error::Config(
                "scgat strategy needs trained parameters; use retrieve_with_embedding".into(),
            ))
        }
    };
    Ok(RetrievalResult { strategy, items })
}

/// Uniform sample of `min(k, N)` records without replacement. Each item
/// carries the uniform selection weight, so the sorted-result invariant
/// orders the chosen set by ascending id.
fn random_items(kb: &KnowledgeBase, k: usize, rng_seed: u64) -> Vec<RetrievalItem> {
    let n = kb.len();
    let take = k.min(n);
    if take == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let chosen = rand::seq::index::sample(&mut rng, n, take);
    let weight = 1.0 / take as f64;
    let mut ids: Vec<&str> = chosen
        .iter()
        .map(|i| kb.records[i].selling_point.id.as_str())
        .collect();
    ids.sort_unstable();
    ids.into_iter()
        .map(|id| RetrievalItem {
            id: id.to_string(),
            weight,
        })
        .collect()
}

/// Top-k by raw cosine similarity of unprojected embeddings.
fn cosine_items(query: &Embedding, kb: &KnowledgeBase, k: usize) -> Vec<RetrievalItem> {
    let values: Vec<f64> = kb
        .records
        .iter()
        .map(|r| query.cosine(&r.embedding))
        .collect();
    select_top(&values, &kb.ids(), k)
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    version: String,
    d: usize,
    w_q: Vec<Vec<f64>>,
    w_k: Vec<Vec<f64>>,
}

pub fn save_params<W: std::io::Write>(params: &AttentionParams, mut writer: W) -> Result<()> {
    let file = ParamsFile {
        version: PARAMS_VERSION.to_string(),
        d: params.dim(),
        w_q: rows_of(&params.w_q),
        w_k: rows_of(&params.w_k),
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load_params<R: std::io::Read>(reader: R) -> Result<AttentionParams> {
    let file: ParamsFile = serde_json::from_reader(reader)?;
    if file.version != PARAMS_VERSION {
        return Err(Error::VersionMismatch {
            expected: PARAMS_VERSION.to_string(),
            found: file.version,
        });
    }
    let w_q = matrix_from_rows(&file.w_q, "w_q")?;
    let w_k = matrix_from_rows(&file.w_k, "w_k")?;
    if w_q.dim() != (file.d, file.d) {
        return Err(Error::ShapeMismatch(format!(
            "w_q is {:?}, expected ({}, {})",
            w_q.dim(),
            file.d,
            file.d
        )));
    }
    AttentionParams::new(w_q, w_k)
}

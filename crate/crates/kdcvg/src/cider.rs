//! CIDEr consensus metric over TF-IDF n-gram vectors.
//!
//! Used both as the reinforcement reward for retrieval training and as the
//! script-quality measure in evaluation reports. This is the plain CIDEr
//! formulation (cosine of TF-IDF vectors, no length penalty or count
//! clipping, no stemming) and scores live in `[0, 1]`; reports display them
//! as percentages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ackb::Script;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_N: usize = 4;

/// Corpus document-frequency statistics for n-grams up to `max_n`.
///
/// Keys are space-joined token sequences; tokens never contain whitespace,
/// so the joined form is unambiguous and keeps the map JSON-serializable
/// with a deterministic key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramStats {
    pub max_n: usize,
    pub corpus_size: usize,
    pub doc_freq: BTreeMap<String, u32>,
}

impl NGramStats {
    /// Builds document frequencies over a reference corpus of token lists.
    pub fn build(documents: &[Vec<String>], max_n: usize) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
        for tokens in documents {
            let mut seen = std::collections::BTreeSet::new();
            for n in 1..=max_n {
                for gram in ngram_keys(tokens, n) {
                    seen.insert(gram);
                }
            }
            for gram in seen {
                *doc_freq.entry(gram).or_insert(0) += 1;
            }
        }
        Ok(Self {
            max_n,
            corpus_size: documents.len(),
            doc_freq,
        })
    }

    /// IDF with document frequency floored at 1 for unseen n-grams.
    fn idf(&self, gram: &str) -> f64 {
        let df = self.doc_freq.get(gram).copied().unwrap_or(1).max(1);
        (self.corpus_size as f64 / df as f64).ln()
    }
}

/// CIDEr score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiderScore {
    pub value: f64,
}

impl CiderScore {
    pub fn percent(self) -> f64 {
        self.value * 100.0
    }
}

/// Lowercases, strips punctuation to spaces, and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Space-joined n-grams of a token list, in order of occurrence.
fn ngram_keys(tokens: &[String], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.join(" ")).collect()
}

/// TF-IDF vector at order `n`: weight(g) = count(g)/total * idf(g).
fn tfidf_vector(tokens: &[String], n: usize, stats: &NGramStats) -> BTreeMap<String, f64> {
    let grams = ngram_keys(tokens, n);
    let total = grams.len() as f64;
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for g in grams {
        *counts.entry(g).or_insert(0.0) += 1.0;
    }
    counts
        .into_iter()
        .map(|(g, c)| {
            let w = c / total * stats.idf(&g);
            (g, w)
        })
        .collect()
}

/// Cosine similarity of two sparse vectors; 0 when either is zero.
fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let norm = |v: &BTreeMap<String, f64>| v.values().map(|w| w * w).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(g, w)| b.get(g).map(|u| w * u))
        .sum();
    dot / (na * nb)
}

/// Scores a candidate script against reference scripts.
///
/// Per order n in `1..=max_n` the score is the mean over references of the
/// cosine similarity between TF-IDF vectors; the final value is the mean
/// over all orders, so scripts shorter than `max_n` tokens are penalized by
/// the zero-vector orders.
pub fn cider_score(candidate: &Script, references: &[&Script], stats: &NGramStats) -> CiderScore {
    let cand_tokens = tokenize(&candidate.raw);
    let ref_tokens: Vec<Vec<String>> = references.iter().map(|r| tokenize(&r.raw)).collect();
    let mut total = 0.0;
    for n in 1..=stats.max_n {
        let cand_vec = tfidf_vector(&cand_tokens, n, stats);
        let mut per_ref = 0.0;
        for tokens in &ref_tokens {
            per_ref += cosine(&cand_vec, &tfidf_vector(tokens, n, stats));
        }
        if !ref_tokens.is_empty() {
            total += per_ref / ref_tokens.len() as f64;
        }
    }
    CiderScore {
        value: (total / stats.max_n as f64).clamp(0.0, 1.0),
    }
}

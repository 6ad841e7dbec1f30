//! REINFORCE training of the retrieval attention parameters.
//!
//! The stochastic policy selects an ordered reference set by sequential
//! softmax sampling without replacement; the script composed from the
//! selection is scored against the query record's own ground-truth script,
//! and that reward drives an exact analytic policy gradient with a
//! moving-average baseline and Adam ascent. Queries cycle round-robin over
//! the knowledge base with the query's own record excluded from its
//! candidate pool, so the policy cannot learn to copy.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ackb::{CreativeRecord, Embedding, KnowledgeBase};
use crate::adam::Adam;
use crate::cider::cider_score;
use crate::error::{Error, Result};
use crate::scgat::{self, AttentionParams, AttentionWeights};
use crate::script::{compose_script, LlmClient};

pub const DEFAULT_STEPS: usize = 400;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;
pub const DEFAULT_BATCH: usize = 4;

/// Decay of the exponential-moving-average reward baseline.
pub const BASELINE_DECAY: f64 = 0.9;

/// Hyperparameters of the retrieval training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// References sampled per episode (capped at the candidate-pool size).
    pub k: usize,
    /// Episodes per parameter update.
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Noise scale of the near-identity parameter initialization.
    pub init_eps: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            learning_rate: DEFAULT_LEARNING_RATE,
            k: scgat::DEFAULT_K,
            batch: DEFAULT_BATCH,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_eps: scgat::DEFAULT_INIT_EPS,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// An ordered draw of candidate indices with its sampling log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub log_prob: f64,
}

/// Sequential sampling without replacement: draw from the categorical given
/// by the current weights, remove the winner, renormalize, repeat `k`
/// times. The log-probability is the sum of the sequential draw
/// log-probabilities.
pub fn sample_selection(
    weights: &AttentionWeights,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Selection> {
    let n = weights.len();
    if k > n {
        return Err(Error::SelectionTooLarge { k, n });
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut mass: Vec<f64> = weights.weights.clone();
    let mut indices = Vec::with_capacity(k);
    let mut log_prob = 0.0;
    for _ in 0..k {
        let total: f64 = mass.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::NonFinite("selection probabilities"));
        }
        let u: f64 = rng.gen::<f64>() * total;
        let mut cumulative = 0.0;
        // Rounding can leave `u` past the final cumulative sum; the last
        // remaining candidate absorbs that sliver.
        let mut pick = mass.len() - 1;
        for (pos, &w) in mass.iter().enumerate() {
            cumulative += w;
            if u < cumulative {
                pick = pos;
                break;
            }
        }
        log_prob += (mass[pick] / total).ln();
        indices.push(remaining[pick]);
        remaining.remove(pick);
        mass.remove(pick);
    }
    Ok(Selection { indices, log_prob })
}

/// Cached forward quantities of one training episode, enough to rebuild the
/// exact gradient without re-running retrieval or generation.
#[derive(Debug, Clone)]
pub struct Episode {
    pub query: Embedding,
    pub candidates: Vec<Embedding>,
    /// Pre-softmax attention scores aligned with `candidates`.
    pub scores: Vec<f64>,
    pub selection: Selection,
    pub reward: f64,
}

/// Reward of one episode: compose a script from the selected references and
/// score it against the query record's ground-truth script over the corpus
/// n-gram statistics. LLM failures propagate so the trainer can skip the
/// episode rather than treat it as a zero reward.
pub fn episode_reward(
    query: &CreativeRecord,
    references: &[&CreativeRecord],
    kb: &KnowledgeBase,
    llm: &dyn LlmClient,
) -> Result<f64> {
    let composition = compose_script(&query.selling_point.text, references, llm)?;
    let score = cider_score(&composition.script, &[&query.script], &kb.ngram_stats);
    Ok(score.value)
}

/// Per-candidate coefficient of the selection log-probability gradient with
/// respect to the raw scores:
/// `∂ log π / ∂ s_i = Σ_t [ 1{i = a_t} − 1{i ∈ R_t} · p_t(i) ]`,
/// where `R_t` is the candidate set still available at draw `t` and `p_t`
/// the softmax of the remaining raw scores.
fn selection_score_coefficients(scores: &[f64], picked: &[usize]) -> Vec<f64> {
    let mut coef = vec![0.0; scores.len()];
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    for &winner in picked {
        let max = remaining
            .iter()
            .map(|&i| scores[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = remaining.iter().map(|&i| (scores[i] - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (pos, &i) in remaining.iter().enumerate() {
            coef[i] -= exps[pos] / total;
        }
        coef[winner] += 1.0;
        let pos = remaining
            .iter()
            .position(|&i| i == winner)
            .expect("picked index still in the remaining set");
        remaining.remove(pos);
    }
    coef
}

/// Policy-gradient estimate for both projection matrices (ascent
/// direction).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
}

impl PolicyGradient {
    pub fn zeros(d: usize) -> Self {
        Self {
            w_q: Array2::zeros((d, d)),
            w_k: Array2::zeros((d, d)),
        }
    }

    fn is_finite(&self) -> bool {
        self.w_q.iter().chain(self.w_k.iter()).all(|v| v.is_finite())
    }
}

/// Mean over the batch of `(R − baseline) · ∇ log π(selection)`.
///
/// With `s_i = (W_q q) · (W_k c_i)/√d` the per-score derivatives are
/// `∇_{W_q} s_i = (W_k c_i) qᵀ/√d` and `∇_{W_k} s_i = (W_q q) c_iᵀ/√d`, so
/// the per-episode gradient collapses onto the coefficient-weighted
/// candidate sum `m = Σ_i coef_i c_i`:
/// `∇_{W_q} log π = (W_k m) qᵀ/√d`, `∇_{W_k} log π = (W_q q) mᵀ/√d`.
pub fn reinforce_gradient(
    episodes: &[Episode],
    baseline: f64,
    params: &AttentionParams,
) -> Result<PolicyGradient> {
    let d = params.dim();
    let mut grad = PolicyGradient::zeros(d);
    if episodes.is_empty() {
        return Ok(grad);
    }
    for episode in episodes {
        let advantage = episode.reward - baseline;
        let coef = selection_score_coefficients(&episode.scores, &episode.selection.indices);
        let mut m = Array1::<f64>::zeros(d);
        for (c, &weight) in episode.candidates.iter().zip(&coef) {
            if weight != 0.0 {
                m.scaled_add(weight, &ArrayView1::from(&c.values[..]));
            }
        }
        let q = ArrayView1::from(&episode.query.values[..]);
        let km: Array1<f64> = params.w_k.dot(&m);
        let qq: Array1<f64> = params.w_q.dot(&q);
        let scale = advantage / (d as f64).sqrt();
        for r in 0..d {
            for c in 0..d {
                grad.w_q[[r, c]] += scale * km[r] * q[c];
                grad.w_k[[r, c]] += scale * qq[r] * m[c];
            }
        }
    }
    let inv = 1.0 / episodes.len() as f64;
    grad.w_q *= inv;
    grad.w_k *= inv;
    if !grad.is_finite() {
        return Err(Error::NonFinite("policy gradient"));
    }
    Ok(grad)
}

/// Mutable training state: parameters, per-matrix Adam moments, and the
/// EMA reward baseline (absent until the first batch).
#[derive(Debug, Clone)]
pub struct PolicyState {
    pub params: AttentionParams,
    adam_q: Adam,
    adam_k: Adam,
    pub baseline: Option<f64>,
    pub steps_taken: usize,
}

impl PolicyState {
    pub fn new(params: AttentionParams, config: &TrainConfig) -> Self {
        let n = params.dim() * params.dim();
        let adam = || {
            Adam::new(
                config.learning_rate,
                config.beta1,
                config.beta2,
                config.epsilon,
                n,
            )
        };
        Self {
            params,
            adam_q: adam(),
            adam_k: adam(),
            baseline: None,
            steps_taken: 0,
        }
    }

    /// One Adam update in the ascent direction of `grad` (the optimizer
    /// descends on the negated objective). Non-finite gradients abort.
    pub fn adam_step(&mut self, grad: &PolicyGradient) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::NonFinite("policy gradient"));
        }
        let descent_q: Vec<f64> = grad.w_q.iter().map(|g| -g).collect();
        let descent_k: Vec<f64> = grad.w_k.iter().map(|g| -g).collect();
        self.adam_q.step(
            self.params
                .w_q
                .as_slice_mut()
                .expect("projection matrices are contiguous"),
            &descent_q,
        );
        self.adam_k.step(
            self.params
                .w_k
                .as_slice_mut()
                .expect("projection matrices are contiguous"),
            &descent_k,
        );
        self.steps_taken += 1;
        Ok(())
    }
}

/// One line of the JSONL training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    pub mean_reward: f64,
    pub baseline: f64,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: AttentionParams,
    pub log: Vec<TrainLogEntry>,
    /// Episodes dropped because the LLM client failed.
    pub skipped_episodes: usize,
}

/// Leave-one-out candidate pool: every record except the query's own, in
/// knowledge-base order.
fn candidate_pool(kb: &KnowledgeBase, query_index: usize) -> Vec<&CreativeRecord> {
    kb.records
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query_index)
        .map(|(_, r)| r)
        .collect()
}

/// REINFORCE training loop: round-robin leave-one-out queries, sequential
/// softmax sampling, CIDEr rewards, EMA baseline (initialized to the first
/// batch mean), Adam ascent. Parameters start at the seeded near-identity
/// and the whole trajectory is deterministic given the config (sampling
/// uses an independent stream of the same seed, so it never replays the
/// initialization noise).
///
/// Episodes whose LLM call fails are skipped and reported — never counted
/// as zero reward. A step whose entire batch was skipped logs the current
/// baseline (0 before the first successful batch) as its mean reward and
/// leaves the parameters untouched.
pub fn train_retrieval(
    kb: &KnowledgeBase,
    config: &TrainConfig,
    llm: &dyn LlmClient,
) -> Result<TrainOutcome> {
    config.validate()?;
    if kb.len() < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 records, the knowledge base has {}",
            kb.len()
        )));
    }
    let d = kb.records[0].embedding.dim();
    let params = AttentionParams::seeded_near_identity(d, config.init_eps, config.rng_seed);
    let mut state = PolicyState::new(params, config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(1);

    let mut log = Vec::with_capacity(config.steps);
    let mut skipped_episodes = 0usize;
    let mut query_cursor = 0usize;
    for step in 1..=config.steps {
        let mut episodes = Vec::with_capacity(config.batch);
        for _ in 0..config.batch {
            let query_index = query_cursor % kb.len();
            query_cursor += 1;
            let query = &kb.records[query_index];
            let pool = candidate_pool(kb, query_index);
            let pool_embeddings: Vec<&Embedding> = pool.iter().map(|r| &r.embedding).collect();
            let scores = scgat::raw_scores(&query.embedding, &pool_embeddings, &state.params)?;
            let weights = scgat::softmax_weights(&scores)?;
            let k_eff = config.k.min(pool.len());
            let selection = sample_selection(&weights, k_eff, &mut rng)?;
            let references: Vec<&CreativeRecord> =
                selection.indices.iter().map(|&i| pool[i]).collect();
            match episode_reward(query, &references, kb, llm) {
                Ok(reward) => episodes.push(Episode {
                    query: query.embedding.clone(),
                    candidates: pool_embeddings.into_iter().cloned().collect(),
                    scores,
                    selection,
                    reward,
                }),
                Err(Error::Llm(message)) => {
                    skipped_episodes += 1;
                    eprintln!(
                        "step {step}: skipping episode for {:?}: {message}",
                        query.selling_point.id
                    );
                }
                Err(other) => return Err(other),
            }
        }
        if episodes.is_empty() {
            let baseline = state.baseline.unwrap_or(0.0);
            log.push(TrainLogEntry {
                step,
                mean_reward: baseline,
                baseline,
            });
            continue;
        }
        let mean_reward =
            episodes.iter().map(|e| e.reward).sum::<f64>() / episodes.len() as f64;
        // Advantages center on the baseline as it stood before this step;
        // the first successful batch initializes it to its own mean.
        let baseline = *state.baseline.get_or_insert(mean_reward);
        let grad = reinforce_gradient(&episodes, baseline, &state.params)?;
        state.adam_step(&grad)?;
        let updated = BASELINE_DECAY * baseline + (1.0 - BASELINE_DECAY) * mean_reward;
        state.baseline = Some(updated);
        log.push(TrainLogEntry {
            step,
            mean_reward,
            baseline: updated,
        });
    }
    Ok(TrainOutcome {
        params: state.params,
        log,
        skipped_episodes,
    })
}

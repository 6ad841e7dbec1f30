//! Progressive script generation: decompose a reference script into
//! subject/scene/motion, adapt subject and scene to the target product while
//! preserving the motion template byte for byte, and synthesize the final
//! script through a pluggable LLM boundary.
//!
//! The default client is a deterministic mock that reassembles the prompt's
//! component sections into a labeled script, so every pipeline test runs
//! hermetically; an HTTP client can be configured instead.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ackb::{CreativeRecord, Script};
use crate::cider::tokenize;
use crate::error::{Error, Result};

/// The subject/scene/motion decomposition of a script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptComponents {
    pub subject: String,
    pub scene: String,
    pub motion: String,
}

impl ScriptComponents {
    /// Canonical labeled serialization.
    pub fn to_labeled(&self) -> String {
        format!(
            "subject: {}\nscene: {}\nmotion: {}",
            self.subject, self.scene, self.motion
        )
    }
}

/// Prompt material in the fixed section order: motion prior, adapted
/// components, semantic context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub motion_prior: String,
    pub adapted_subject: String,
    pub adapted_scene: String,
    /// (selling point, script) pairs from retrieval, in retrieval order.
    pub context: Vec<(String, String)>,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: String,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub script: String,
}

/// Adaptation output; `llm_fallback` is set when an external client failed
/// and the deterministic substitution was used instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adaptation {
    pub components: ScriptComponents,
    pub llm_fallback: bool,
}

pub trait LlmClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse>;

    /// External clients may fail or return free-form text; the built-in mock
    /// never does.
    fn is_external(&self) -> bool {
        false
    }
}

const MAX_TOKENS: usize = 256;

pub const FALLBACK_SUBJECT: &str = "unspecified showcase item";
pub const FALLBACK_SCENE: &str = "plain gray backdrop";
pub const FALLBACK_MOTION: &str = "static hold";

const SECTION_MOTION: &str = "## Motion prior";
const SECTION_SUBJECT: &str = "## Adapted subject";
const SECTION_SCENE: &str = "## Adapted scene";
const SECTION_CONTEXT: &str = "## Semantic context";

/// Verbs that mark a clause as a motion description in the heuristic parser.
const MOTION_VERBS: &[&str] = &[
    "falls", "fall", "drips", "drops", "ripples", "flows", "pours", "splashes", "spins",
    "rotates", "rises", "sways", "glides", "swirls", "bounces", "slides", "waves", "shakes",
    "rolls", "floats", "stirs", "sweeps", "zooms", "pans", "foams", "lathers", "crashes",
];

/// Words that mark a clause as a scene description in the heuristic parser.
const SCENE_CUES: &[&str] = &[
    "on", "in", "at", "inside", "under", "beside", "against", "over", "near", "counter",
    "table", "backdrop", "background", "studio", "room", "bathroom", "kitchen", "beach",
    "surface", "shelf",
];

/// Splits a script into its components.
///
/// A present structured decomposition is returned as-is. Otherwise the raw
/// text is scanned for `subject:`/`scene:`/`motion:` labels, and failing
/// that, clauses are classified heuristically: first clause -> subject,
/// first clause with a locative cue -> scene, first clause with a known
/// motion verb -> motion. A script in which no motion segment can be
/// identified does not parse.
pub fn parse_components(script: &Script) -> Result<ScriptComponents> {
    if let Some(c) = &script.structured {
        return Ok(c.clone());
    }
    if let Some(c) = labeled_scan(&script.raw) {
        return Ok(c);
    }
    heuristic_scan(&script.raw)
}

fn labeled_scan(raw: &str) -> Option<ScriptComponents> {
    let mut subject = None;
    let mut scene = None;
    let mut motion = None;
    for line in raw.lines() {
        let trimmed = line.trim();
        let lower = trimmed.to_lowercase();
        for (label, slot) in [
            ("subject:", &mut subject),
            ("scene:", &mut scene),
            ("motion:", &mut motion),
        ] {
            if lower.starts_with(label) && slot.is_none() {
                *slot = Some(trimmed[label.len()..].trim().to_string());
            }
        }
    }
    motion.map(|motion| ScriptComponents {
        subject: subject.unwrap_or_default(),
        scene: scene.unwrap_or_default(),
        motion,
    })
}

fn heuristic_scan(raw: &str) -> Result<ScriptComponents> {
    let clauses: Vec<&str> = raw
        .split(['.', ';', ',', '\n'])
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect();
    let has_word = |clause: &str, lexicon: &[&str]| {
        tokenize(clause).iter().any(|t| lexicon.contains(&t.as_str()))
    };
    let motion = clauses
        .iter()
        .find(|c| has_word(c, MOTION_VERBS))
        .ok_or(Error::MissingComponent {
            component: "motion",
        })?;
    let subject = clauses.first().copied().unwrap_or_default();
    let scene = clauses
        .iter()
        .find(|c| has_word(c, SCENE_CUES))
        .copied()
        .unwrap_or_default();
    Ok(ScriptComponents {
        subject: subject.to_string(),
        scene: scene.to_string(),
        motion: motion.to_string(),
    })
}

/// Last alphabetic token of at least three characters; the stand-in for a
/// phrase's head noun in the deterministic adaptation.
pub fn head_noun(text: &str) -> Option<String> {
    let tokens = tokenize(text);
    tokens
        .iter()
        .rev()
        .find(|t| t.len() >= 3 && t.chars().all(char::is_alphabetic))
        .or_else(|| tokens.last())
        .cloned()
}

/// Replaces whole-word occurrences of `from` (case-insensitive) with `to`,
/// preserving all separators.
fn substitute_word(text: &str, from: &str, to: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            if word.to_lowercase() == from {
                out.push_str(to);
            } else {
                out.push_str(word);
            }
            word.clear();
        }
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Adapts subject and scene to the target selling point; the motion field is
/// always returned byte-identical.
///
/// With the built-in mock the adaptation substitutes the reference product's
/// head noun with the target's. An external client is asked to rewrite the
/// two fields; if it fails or answers unparseably, the substitution runs
/// instead and `llm_fallback` is set.
pub fn adapt_components(
    components: &ScriptComponents,
    target_text: &str,
    context: &[(String, String)],
    llm: &dyn LlmClient,
) -> Adaptation {
    if llm.is_external() {
        match external_adapt(components, target_text, context, llm) {
            Ok(adapted) => {
                return Adaptation {
                    components: ScriptComponents {
                        motion: components.motion.clone(),
                        ..adapted
                    },
                    llm_fallback: false,
                }
            }
            Err(_) => {
                return Adaptation {
                    components: mock_adapt(components, target_text, context),
                    llm_fallback: true,
                }
            }
        }
    }
    Adaptation {
        components: mock_adapt(components, target_text, context),
        llm_fallback: false,
    }
}

fn mock_adapt(
    components: &ScriptComponents,
    target_text: &str,
    context: &[(String, String)],
) -> ScriptComponents {
    let reference_text = match context.first() {
        Some((selling, _)) => selling,
        None => return components.clone(),
    };
    let (Some(from), Some(to)) = (head_noun(reference_text), head_noun(target_text)) else {
        return components.clone();
    };
    if from == to {
        return components.clone();
    }
    ScriptComponents {
        subject: substitute_word(&components.subject, &from, &to),
        scene: substitute_word(&components.scene, &from, &to),
        motion: components.motion.clone(),
    }
}

fn external_adapt(
    components: &ScriptComponents,
    target_text: &str,
    context: &[(String, String)],
    llm: &dyn LlmClient,
) -> Result<ScriptComponents> {
    let mut prompt = format!(
        "Rewrite the subject and scene below for the target selling point, \
         keeping both consistent with the motion.\n\nTarget: {target_text}\n\
         Subject: {}\nScene: {}\nMotion: {}\n",
        components.subject, components.scene, components.motion
    );
    if !context.is_empty() {
        prompt.push_str("\nReference material:\n");
        for (i, (selling, script)) in context.iter().enumerate() {
            prompt.push_str(&format!("{}. {selling}: {script}\n", i + 1));
        }
    }
    prompt.push_str("\nRespond with exactly two lines:\nsubject: ...\nscene: ...\n");
    let response = llm.complete(&LlmRequest {
        prompt,
        max_tokens: MAX_TOKENS,
    })?;
    let scanned = labeled_partial_scan(&response.script);
    match (scanned.0, scanned.1) {
        (Some(subject), Some(scene)) => Ok(ScriptComponents {
            subject,
            scene,
            motion: components.motion.clone(),
        }),
        _ => Err(Error::Llm(
            "adaptation response missing subject/scene lines".into(),
        )),
    }
}

fn labeled_partial_scan(raw: &str) -> (Option<String>, Option<String>) {
    let mut subject = None;
    let mut scene = None;
    for line in raw.lines() {
        let trimmed = line.trim();
        let lower = trimmed.to_lowercase();
        if lower.starts_with("subject:") && subject.is_none() {
            subject = Some(trimmed["subject:".len()..].trim().to_string());
        } else if lower.starts_with("scene:") && scene.is_none() {
            scene = Some(trimmed["scene:".len()..].trim().to_string());
        }
    }
    (subject, scene)
}

/// Assembles the prompt bundle in the fixed section order.
pub fn build_prompt(
    components: &ScriptComponents,
    context: &[(String, String)],
    target_text: &str,
) -> PromptBundle {
    PromptBundle {
        motion_prior: components.motion.clone(),
        adapted_subject: components.subject.clone(),
        adapted_scene: components.scene.clone(),
        context: context.to_vec(),
        target: target_text.to_string(),
    }
}

/// Byte-stable serialization of a bundle. Sections appear in the fixed
/// order motion prior, adapted subject, adapted scene, semantic context.
pub fn render_prompt(bundle: &PromptBundle) -> String {
    let mut out = format!(
        "Write a creative advertising video script for this selling point: {}\n\n\
         {SECTION_MOTION}\n{}\n\n{SECTION_SUBJECT}\n{}\n\n{SECTION_SCENE}\n{}\n\n\
         {SECTION_CONTEXT}\n",
        bundle.target, bundle.motion_prior, bundle.adapted_subject, bundle.adapted_scene
    );
    for (i, (selling, script)) in bundle.context.iter().enumerate() {
        out.push_str(&format!("{}. selling point: {selling}\n", i + 1));
        for line in script.lines() {
            out.push_str(&format!("   {line}\n"));
        }
    }
    out
}

/// Runs the LLM on a bundle and parses the answer back into a script.
pub fn synthesize(bundle: &PromptBundle, llm: &dyn LlmClient) -> Result<Script> {
    let request = LlmRequest {
        prompt: render_prompt(bundle),
        max_tokens: MAX_TOKENS,
    };
    let response = llm.complete(&request)?;
    if response.script.trim().is_empty() {
        return Err(Error::Llm("empty script response".into()));
    }
    let components = parse_components(&Script {
        raw: response.script.clone(),
        structured: None,
    })?;
    Ok(Script {
        raw: response.script,
        structured: Some(components),
    })
}

/// Full generation result for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub script: Script,
    pub bundle: PromptBundle,
    pub llm_fallback: bool,
}

/// The full pipeline for one target: parse the top reference, adapt,
/// build the prompt, synthesize. With no references the bundle carries
/// empty component sections and the mock answers with its fallback script.
pub fn compose_script(
    target_text: &str,
    references: &[&CreativeRecord],
    llm: &dyn LlmClient,
) -> Result<Composition> {
    let context: Vec<(String, String)> = references
        .iter()
        .map(|r| (r.selling_point.text.clone(), r.script.raw.clone()))
        .collect();
    let (components, llm_fallback) = match references.first() {
        Some(top) => {
            let parsed = parse_components(&top.script)?;
            let adapted = adapt_components(&parsed, target_text, &context, llm);
            (adapted.components, adapted.llm_fallback)
        }
        None => (
            ScriptComponents {
                subject: String::new(),
                scene: String::new(),
                motion: String::new(),
            },
            false,
        ),
    };
    let bundle = build_prompt(&components, &context, target_text);
    let script = synthesize(&bundle, llm)?;
    Ok(Composition {
        script,
        bundle,
        llm_fallback,
    })
}

/// Deterministic template client: reassembles the prompt's component
/// sections into the canonical labeled script. An empty motion section
/// yields the fixed fallback script.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockLlm;

fn section(prompt: &str, header: &str) -> String {
    let mut lines = Vec::new();
    let mut inside = false;
    for line in prompt.lines() {
        if line == header {
            inside = true;
            continue;
        }
        if inside {
            if line.starts_with("## ") {
                break;
            }
            lines.push(line);
        }
    }
    lines.join("\n").trim().to_string()
}

impl LlmClient for MockLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse> {
        let motion = section(&request.prompt, SECTION_MOTION);
        if motion.is_empty() {
            return Ok(LlmResponse {
                script: ScriptComponents {
                    subject: FALLBACK_SUBJECT.to_string(),
                    scene: FALLBACK_SCENE.to_string(),
                    motion: FALLBACK_MOTION.to_string(),
                }
                .to_labeled(),
            });
        }
        let script = ScriptComponents {
            subject: section(&request.prompt, SECTION_SUBJECT),
            scene: section(&request.prompt, SECTION_SCENE),
            motion,
        }
        .to_labeled();
        Ok(LlmResponse { script })
    }
}

/// HTTP client for an external LLM endpoint. One attempt, no retries;
/// failures surface to the caller.
#[derive(Debug, Clone)]
pub struct HttpLlm {
    endpoint: String,
    timeout: Duration,
}

impl HttpLlm {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout,
        }
    }
}

impl LlmClient for HttpLlm {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse> {
        let body = serde_json::to_string(request)?;
        let response = ureq::post(&self.endpoint)
            .timeout(self.timeout)
            .set("content-type", "application/json")
            .send_string(&body)
            .map_err(|e| Error::Llm(e.to_string()))?;
        let text = response
            .into_string()
            .map_err(|e| Error::Llm(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::Llm(format!("bad response body: {e}")))
    }

    fn is_external(&self) -> bool {
        true
    }
}

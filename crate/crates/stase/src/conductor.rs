//! Plan building: fuses the routed prompt, retrieved template, and available
//! stems into a validated spatial plan.
//!
//! The default pathway is fully rule-based and deterministic. A remote
//! JSON-over-HTTP chat backend can replace it; any remote failure (transport,
//! parse, schema, validation) falls back to the rule-based plan with a
//! warning rather than an error, so the engine always renders.

use std::time::Duration;

use crate::audio_io::RirBank;
use crate::prompt_interpreter::{classify, Modifier, ParsedCue, PromptError, PromptRoute};
use crate::scene_model::{
    merge_template, validate_plan, LocalizationMode, OutputFormat, OutputSpec, ReverbKind,
    ReverbSpec, SourcePlacement, SpatialPlan, StemInfo, Template, DEFAULT_PLACEMENT,
    DEFAULT_REVERB_SEND, DEFAULT_SAMPLE_RATE, DEFAULT_WET_GAIN,
};
use crate::synonyms;
use crate::template_bank::{retrieve, TemplateBank};

/// Template used when retrieval confidence is too low to trust the top hit.
pub const FALLBACK_TEMPLATE_ID: &str = "studio_recording";

/// Direction-word angles scale by this factor under a "slightly" modifier.
pub const SLIGHT_FACTOR: f64 = 1.0 / 3.0;

const DEFAULT_REMOTE_MODEL: &str = "default";
const DEFAULT_REMOTE_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum ConductorError {
    #[error("no stems provided")]
    NoStems,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("rir {0:?} (the template's default environment) is missing from the bank")]
    UnknownRir(String),
}

/// Remote chat endpoint settings. Decoding is pinned deterministic
/// (temperature 0, top-p 1) and is not configurable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteBackend {
    pub endpoint_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
}

impl RemoteBackend {
    /// Clamps the timeout into [100, 120000] ms.
    pub fn new(endpoint_url: String, model_name: String, timeout_ms: u64) -> Self {
        Self {
            endpoint_url,
            model_name,
            timeout_ms: timeout_ms.clamp(100, 120_000),
        }
    }
}

/// How plans get built: locally by rule, or by a remote model with a
/// rule-based fallback.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConductorBackend {
    RuleBased,
    Remote(RemoteBackend),
}

impl ConductorBackend {
    /// Reads `STASE_LLM_ENDPOINT`, `STASE_LLM_MODEL`, and
    /// `STASE_LLM_TIMEOUT_MS`; without an endpoint the backend is rule-based.
    pub fn from_env() -> Self {
        let endpoint = match std::env::var("STASE_LLM_ENDPOINT") {
            Ok(e) if !e.trim().is_empty() => e,
            _ => return Self::RuleBased,
        };
        let model = std::env::var("STASE_LLM_MODEL")
            .ok()
            .filter(|m| !m.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_REMOTE_MODEL.to_string());
        let timeout_ms = std::env::var("STASE_LLM_TIMEOUT_MS")
            .ok()
            .and_then(|t| t.trim().parse().ok())
            .unwrap_or(DEFAULT_REMOTE_TIMEOUT_MS);
        Self::Remote(RemoteBackend::new(endpoint, model, timeout_ms))
    }
}

/// A stem as handed to the conductor; the instrument label is optional and
/// is inferred from the stem id when absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemInput {
    pub stem_id: String,
    pub instrument: Option<String>,
}

impl StemInput {
    pub fn from_id(stem_id: impl Into<String>) -> Self {
        Self {
            stem_id: stem_id.into(),
            instrument: None,
        }
    }
}

fn resolve_stems(inputs: &[StemInput]) -> Vec<StemInfo> {
    inputs
        .iter()
        .map(|input| StemInfo {
            stem_id: input.stem_id.clone(),
            instrument: input
                .instrument
                .clone()
                .unwrap_or_else(|| synonyms::infer_label(&input.stem_id)),
        })
        .collect()
}

/// A built plan plus non-fatal warnings (remote fallback, clamped values,
/// low retrieval confidence).
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: SpatialPlan,
    pub warnings: Vec<String>,
}

/// Picks the localization mode for one source.
///
/// Stereo output always pans. Binaural output uses the analytic ITD/ILD
/// model only where it is defined: zero elevation and front-hemisphere
/// azimuth; everything else needs measured HRIRs.
pub fn select_mode(
    azimuth_deg: f64,
    elevation_deg: f64,
    output_format: OutputFormat,
) -> LocalizationMode {
    match output_format {
        OutputFormat::Stereo => LocalizationMode::Panning,
        OutputFormat::Binaural => {
            if elevation_deg != 0.0 || azimuth_deg.abs() > 90.0 {
                LocalizationMode::Hrtf
            } else {
                LocalizationMode::ItdIld
            }
        }
    }
}

/// Resolves the reverb environment: the template default, unless the mix
/// notes mention a keyword from the RIR manifest (manifest order breaks
/// ties between matching entries).
pub fn select_rir(
    template: &Template,
    mix_notes: &str,
    rir_bank: &RirBank,
) -> Result<String, ConductorError> {
    if rir_bank.get(&template.default_environment).is_none() {
        return Err(ConductorError::UnknownRir(
            template.default_environment.clone(),
        ));
    }
    let note_tokens: std::collections::BTreeSet<String> =
        synonyms::tokenize(mix_notes).into_iter().collect();
    for entry in rir_bank.entries() {
        let matched = entry
            .keywords
            .iter()
            .flat_map(|k| synonyms::tokenize(k))
            .any(|k| note_tokens.contains(&k));
        if matched {
            return Ok(entry.rir_id.clone());
        }
    }
    Ok(template.default_environment.clone())
}

/// Builds a validated plan for the given prompt and stems.
pub fn build_plan(
    prompt: &str,
    stems: &[StemInput],
    backend: &ConductorBackend,
    bank: &TemplateBank,
    sample_rate_hz: u32,
) -> Result<PlanOutcome, ConductorError> {
    if stems.is_empty() {
        return Err(ConductorError::NoStems);
    }
    let resolved = resolve_stems(stems);
    match backend {
        ConductorBackend::RuleBased => build_rule_based(prompt, &resolved, bank, sample_rate_hz),
        ConductorBackend::Remote(remote) => {
            match try_remote(remote, prompt, &resolved, sample_rate_hz) {
                Ok(plan) => Ok(PlanOutcome {
                    plan,
                    warnings: Vec::new(),
                }),
                Err(reason) => {
                    let mut outcome = build_rule_based(prompt, &resolved, bank, sample_rate_hz)?;
                    outcome
                        .warnings
                        .insert(0, format!("remote backend fallback: {reason}"));
                    outcome.plan.mix_notes.push_str(" [remote backend fallback: rule-based plan]");
                    Ok(outcome)
                }
            }
        }
    }
}

fn build_rule_based(
    prompt: &str,
    stems: &[StemInfo],
    bank: &TemplateBank,
    sample_rate_hz: u32,
) -> Result<PlanOutcome, ConductorError> {
    let mut warnings = Vec::new();
    let route = classify(prompt)?;
    let ranking = retrieve(bank, &crate::prompt_interpreter::normalize_query(prompt));
    let template = if ranking.low_confidence {
        match bank.get(FALLBACK_TEMPLATE_ID) {
            Some(t) => {
                warnings.push(format!(
                    "low retrieval confidence (top score {:.4}); using the {} template",
                    ranking.top().score,
                    FALLBACK_TEMPLATE_ID
                ));
                t
            }
            None => {
                warnings.push(format!(
                    "low retrieval confidence (top score {:.4}) and no {} template in this bank; keeping top hit {}",
                    ranking.top().score,
                    FALLBACK_TEMPLATE_ID,
                    ranking.top().template_id
                ));
                bank.get(&ranking.top().template_id).expect("ranked id exists")
            }
        }
    } else {
        bank.get(&ranking.top().template_id).expect("ranked id exists")
    };

    let mut plan = match route {
        PromptRoute::Abstract(_) => merge_template(template, stems),
        PromptRoute::Description(cues) => {
            plan_from_cues(&cues, stems, template, &mut warnings)
        }
    };

    plan.output = OutputSpec {
        sample_rate_hz,
        format: OutputFormat::Binaural,
    };
    plan.mix_notes = prompt.trim().to_string();
    plan.music_description = prompt.trim().to_string();
    for source in &mut plan.sources {
        source.mode = select_mode(source.azimuth_deg, source.elevation_deg, plan.output.format);
    }

    let rir_id = match &plan.reverb.kind {
        ReverbKind::RirConvolution { rir_id } => rir_id.clone(),
        ReverbKind::Algorithmic { .. } => String::new(),
    };
    let report = validate_plan(
        &plan,
        stems.iter().map(|s| s.stem_id.as_str()),
        std::iter::once(rir_id.as_str()),
    );
    debug_assert!(report.is_empty(), "rule-based plan failed validation: {report:?}");
    Ok(PlanOutcome { plan, warnings })
}

/// Materializes one cue into placement coordinates, applying the "slightly"
/// scaling to direction-word defaults and clamping everything into range.
fn cue_coordinates(cue: &ParsedCue, warnings: &mut Vec<String>) -> (f64, f64, f64) {
    let mut azimuth = cue.azimuth_deg;
    let mut elevation = cue.elevation_deg;
    if cue.modifier == Some(Modifier::Slight) {
        if let Some(dw) = cue.direction_word {
            if let (Some(default), Some(az)) = (dw.default_azimuth(), azimuth) {
                if az == default && default.abs() == 90.0 {
                    azimuth = Some(default * SLIGHT_FACTOR);
                }
            }
            if let (Some(default), Some(el)) = (dw.default_elevation(), elevation) {
                if el == default {
                    elevation = Some(default * SLIGHT_FACTOR);
                }
            }
        }
    }

    let mut az = azimuth.unwrap_or(DEFAULT_PLACEMENT.0);
    let mut el = elevation.unwrap_or(DEFAULT_PLACEMENT.1);
    let mut dist = cue.distance_m.unwrap_or(DEFAULT_PLACEMENT.2);
    if !(-180.0..=180.0).contains(&az) {
        warnings.push(format!("azimuth {az} clamped into [-180, 180]"));
        az = az.clamp(-180.0, 180.0);
    }
    if !(-90.0..=90.0).contains(&el) {
        warnings.push(format!("elevation {el} clamped into [-90, 90]"));
        el = el.clamp(-90.0, 90.0);
    }
    if dist.is_nan() || dist < 0.1 {
        warnings.push(format!("distance {dist} raised to 0.1"));
        dist = 0.1;
    }
    (az, el, dist)
}

fn plan_from_cues(
    cues: &[ParsedCue],
    stems: &[StemInfo],
    template: &Template,
    warnings: &mut Vec<String>,
) -> SpatialPlan {
    // Best cue per stem by canonical token overlap; cues are reusable, so
    // "guitars left and right" style prompts can drive several stems.
    let mut cue_of_stem: Vec<Option<usize>> = Vec::with_capacity(stems.len());
    for stem in stems {
        let mut best: Option<(usize, usize)> = None;
        for (i, cue) in cues.iter().enumerate() {
            let score = synonyms::overlap(&stem.instrument, &cue.instrument);
            if score > 0 && best.is_none_or(|(s, _)| score > s) {
                best = Some((score, i));
            }
        }
        cue_of_stem.push(best.map(|(_, i)| i));
    }

    // Stems no cue names fall back to template slots.
    let unmatched: Vec<StemInfo> = stems
        .iter()
        .zip(&cue_of_stem)
        .filter(|(_, cue)| cue.is_none())
        .map(|(stem, _)| stem.clone())
        .collect();
    let merged: std::collections::BTreeMap<String, SourcePlacement> = if unmatched.is_empty() {
        Default::default()
    } else {
        merge_template(template, &unmatched)
            .sources
            .into_iter()
            .map(|s| (s.source_id.clone(), s))
            .collect()
    };

    let sources = stems
        .iter()
        .zip(&cue_of_stem)
        .map(|(stem, cue_idx)| match cue_idx {
            Some(i) => {
                let (az, el, dist) = cue_coordinates(&cues[*i], warnings);
                SourcePlacement {
                    source_id: stem.stem_id.clone(),
                    instrument: stem.instrument.clone(),
                    azimuth_deg: az,
                    elevation_deg: el,
                    distance_m: dist,
                    mode: LocalizationMode::Panning,
                    reverb_send: DEFAULT_REVERB_SEND,
                }
            }
            None => merged.get(&stem.stem_id).cloned().expect("unmatched stem merged"),
        })
        .collect();

    SpatialPlan {
        sources,
        reverb: ReverbSpec {
            kind: ReverbKind::RirConvolution {
                rir_id: template.default_environment.clone(),
            },
            wet_gain: DEFAULT_WET_GAIN,
        },
        output: OutputSpec {
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            format: OutputFormat::Binaural,
        },
        mix_notes: String::new(),
        music_description: String::new(),
    }
}

const PLAN_SCHEMA_HINT: &str = r#"Respond with exactly one JSON object and nothing else, shaped like:
{
  "sources": [
    {"source_id": "<one of the stem ids>", "instrument": "<label>",
     "azimuth_deg": -180.0..180.0, "elevation_deg": -90.0..90.0,
     "distance_m": > 0, "mode": "panning"|"itd_ild"|"hrtf",
     "reverb_send": 0.0..1.0}
  ],
  "reverb": {"kind": {"rir_convolution": {"rir_id": "<environment id>"}}, "wet_gain": 0.0..1.0},
  "output": {"sample_rate_hz": <rate>, "format": "binaural"},
  "mix_notes": "<free text>",
  "music_description": "<free text>"
}
Every source_id must name a provided stem; use each stem at most once."#;

fn try_remote(
    remote: &RemoteBackend,
    prompt: &str,
    stems: &[StemInfo],
    sample_rate_hz: u32,
) -> Result<SpatialPlan, String> {
    let stem_list = stems
        .iter()
        .map(|s| format!("- {} ({})", s.stem_id, s.instrument))
        .collect::<Vec<_>>()
        .join("\n");
    let content = format!(
        "Produce a spatial audio plan for this prompt.\n\nPrompt: {prompt}\n\nStems:\n{stem_list}\n\nTarget sample rate: {sample_rate_hz} Hz.\n\n{PLAN_SCHEMA_HINT}"
    );
    let body = serde_json::json!({
        "model": remote.model_name,
        "temperature": 0,
        "top_p": 1,
        "messages": [{"role": "user", "content": content}],
    });

    let config = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(remote.timeout_ms)))
        .build();
    let agent: ureq::Agent = config.into();
    let mut response = agent
        .post(&remote.endpoint_url)
        .header("content-type", "application/json")
        .send(body.to_string().as_bytes())
        .map_err(|e| format!("transport error: {e}"))?;
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| format!("cannot read response body: {e}"))?;

    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("response is not JSON: {e}"))?;
    let plan_text = match value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|c| c.as_str())
    {
        Some(content) => strip_code_fence(content).to_string(),
        None => text,
    };
    let plan: SpatialPlan = serde_json::from_str(plan_text.trim())
        .map_err(|e| format!("response does not parse as a plan: {e}"))?;

    if plan.output.sample_rate_hz != sample_rate_hz {
        return Err(format!(
            "remote plan sample rate {} does not match requested {}",
            plan.output.sample_rate_hz, sample_rate_hz
        ));
    }
    let rir_id = match &plan.reverb.kind {
        ReverbKind::RirConvolution { rir_id } => rir_id.clone(),
        ReverbKind::Algorithmic { .. } => String::new(),
    };
    let report = validate_plan(
        &plan,
        stems.iter().map(|s| s.stem_id.as_str()),
        std::iter::once(rir_id.as_str()),
    );
    if !report.is_empty() {
        return Err(format!(
            "remote plan failed validation: {}",
            report
                .violations
                .iter()
                .map(|v| v.code)
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    Ok(plan)
}

fn strip_code_fence(content: &str) -> &str {
    let trimmed = content.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.trim_start_matches('\n')
        .strip_suffix("```")
        .unwrap_or(rest)
        .trim()
}

//! Plan schema: the types every other stage produces or consumes.
//!
//! A [`SpatialPlan`] is the structured output of planning and the input to
//! rendering. It serializes to a strict JSON document (unknown fields are
//! rejected) so drift between the interpreter and the renderer surfaces as a
//! parse error instead of silent misbehavior.
//!
//! Azimuth convention: positive = listener's right, 0 = front, +-180 = rear.
//! Elevation: positive = up. Distances in meters.

use serde::{Deserialize, Serialize};

use crate::synonyms;

/// Per-source localization technique. Exactly one applies per source; the
/// renderer never stacks them on the same source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationMode {
    Panning,
    ItdIld,
    Hrtf,
}

/// Target output representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Stereo,
    Binaural,
}

/// Placement of one stem in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcePlacement {
    pub source_id: String,
    pub instrument: String,
    /// Degrees in [-180, 180], positive right.
    pub azimuth_deg: f64,
    /// Degrees in [-90, 90], positive up.
    pub elevation_deg: f64,
    /// Meters, > 0.
    pub distance_m: f64,
    pub mode: LocalizationMode,
    /// Linear send gain into the shared reverb bus, in [0, 1].
    pub reverb_send: f64,
}

/// Reverb algorithm selection.
///
/// Serializes externally tagged: `{"rir_convolution": {"rir_id": "..."}}` or
/// `{"algorithmic": {"rt60_s": 1.2, "predelay_ms": 10.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReverbKind {
    /// Convolve the bus with a room impulse response from the RIR bank.
    RirConvolution { rir_id: String },
    /// Schroeder reverberator with the given decay target.
    Algorithmic { rt60_s: f64, predelay_ms: f64 },
}

/// Shared reverb bus specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReverbSpec {
    pub kind: ReverbKind,
    /// Linear return gain in [0, 1]; 0 disables the bus entirely.
    pub wet_gain: f64,
}

/// Output stage settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub sample_rate_hz: u32,
    pub format: OutputFormat,
}

/// The structured plan: per-source placements plus reverb and output specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialPlan {
    pub sources: Vec<SourcePlacement>,
    pub reverb: ReverbSpec,
    pub output: OutputSpec,
    /// Free-text mixing directives; carried through, inspected by RIR
    /// keyword refinement, otherwise not rendered.
    pub mix_notes: String,
    /// Free-text pass-through describing the musical content; not rendered.
    pub music_description: String,
}

/// One instrument slot of a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSlot {
    pub slot_instrument: String,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_m: f64,
}

/// A named spatial configuration: instrument slots at fixed coordinates plus
/// a default acoustic environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub template_id: String,
    pub name: String,
    /// Lowercase retrieval tokens.
    pub keywords: Vec<String>,
    pub description: String,
    /// 1 to 6 slots.
    pub slots: Vec<TemplateSlot>,
    /// RIR id resolved against the RIR bank.
    pub default_environment: String,
}

/// Maximum number of sources a plan may carry.
pub const MAX_SOURCES: usize = 16;
/// Maximum slots per template.
pub const MAX_SLOTS: usize = 6;

/// One invariant violation found by [`validate_plan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Stable machine-readable code.
    pub code: &'static str,
    /// Which source (by id) the violation concerns, when applicable.
    pub source_id: Option<String>,
    pub message: String,
}

/// Validation outcome: empty means the plan satisfies every invariant.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: &'static str, source_id: Option<&str>, message: String) {
        self.violations.push(Violation { code, source_id: source_id.map(str::to_owned), message });
    }
}

/// Checks every plan invariant and reference; violations are data, not errors.
///
/// Pure and idempotent: the same plan always yields the identical report.
pub fn validate_plan<'a, S, R>(plan: &SpatialPlan, available_stems: S, rir_bank_ids: R) -> ValidationReport
where
    S: IntoIterator<Item = &'a str>,
    R: IntoIterator<Item = &'a str>,
{
    let stems: std::collections::BTreeSet<&str> = available_stems.into_iter().collect();
    let rirs: std::collections::BTreeSet<&str> = rir_bank_ids.into_iter().collect();
    let mut report = ValidationReport::default();

    if plan.sources.is_empty() || plan.sources.len() > MAX_SOURCES {
        report.push(
            "source_count",
            None,
            format!("plan has {} sources, expected 1..={}", plan.sources.len(), MAX_SOURCES),
        );
    }

    let mut seen = std::collections::BTreeSet::new();
    for s in &plan.sources {
        let id = s.source_id.as_str();
        if !seen.insert(id) {
            report.push("duplicate_source_id", Some(id), format!("source_id {id:?} appears more than once"));
        }
        if !(-180.0..=180.0).contains(&s.azimuth_deg) || !s.azimuth_deg.is_finite() {
            report.push("azimuth_range", Some(id), format!("azimuth {} outside [-180, 180]", s.azimuth_deg));
        }
        if !(-90.0..=90.0).contains(&s.elevation_deg) || !s.elevation_deg.is_finite() {
            report.push("elevation_range", Some(id), format!("elevation {} outside [-90, 90]", s.elevation_deg));
        }
        if s.distance_m <= 0.0 || !s.distance_m.is_finite() {
            report.push("distance_range", Some(id), format!("distance {} is not positive", s.distance_m));
        }
        if !(0.0..=1.0).contains(&s.reverb_send) || !s.reverb_send.is_finite() {
            report.push("reverb_send_range", Some(id), format!("reverb_send {} outside [0, 1]", s.reverb_send));
        }
        if !stems.contains(id) {
            report.push("missing_stem", Some(id), format!("no stem named {id:?} is available"));
        }
        if plan.output.format == OutputFormat::Stereo && s.mode == LocalizationMode::Hrtf {
            report.push("mode_format_conflict", Some(id), "hrtf mode requires binaural output".to_string());
        }
    }

    match &plan.reverb.kind {
        ReverbKind::RirConvolution { rir_id } => {
            if !rirs.contains(rir_id.as_str()) {
                report.push("unknown_rir", None, format!("rir_id {rir_id:?} not present in the RIR bank"));
            }
        }
        ReverbKind::Algorithmic { rt60_s, predelay_ms } => {
            if !(*rt60_s > 0.05 && *rt60_s <= 20.0) {
                report.push("rt60_range", None, format!("rt60 {rt60_s} outside (0.05, 20]"));
            }
            if predelay_ms.is_nan() || *predelay_ms < 0.0 {
                report.push("predelay_range", None, format!("predelay {predelay_ms} is negative"));
            }
        }
    }
    if !(0.0..=1.0).contains(&plan.reverb.wet_gain) || !plan.reverb.wet_gain.is_finite() {
        report.push("wet_gain_range", None, format!("wet_gain {} outside [0, 1]", plan.reverb.wet_gain));
    }
    if !crate::dsp_core::SUPPORTED_RATES.contains(&plan.output.sample_rate_hz) {
        report.push(
            "sample_rate",
            None,
            format!("sample rate {} Hz unsupported (44100 or 48000)", plan.output.sample_rate_hz),
        );
    }
    report
}

/// Validates a template against its own invariants.
pub fn validate_template(t: &Template) -> Result<(), String> {
    if t.template_id.is_empty() {
        return Err("template_id is empty".to_string());
    }
    if t.slots.is_empty() || t.slots.len() > MAX_SLOTS {
        return Err(format!("template {:?} has {} slots, expected 1..={}", t.template_id, t.slots.len(), MAX_SLOTS));
    }
    if t.keywords.iter().any(|k| *k != k.to_lowercase()) {
        return Err(format!("template {:?} has non-lowercase keywords", t.template_id));
    }
    for (i, s) in t.slots.iter().enumerate() {
        if !(-180.0..=180.0).contains(&s.azimuth_deg)
            || !(-90.0..=90.0).contains(&s.elevation_deg)
            || s.distance_m <= 0.0
            || !s.distance_m.is_finite()
        {
            return Err(format!("template {:?} slot {} has out-of-range coordinates", t.template_id, i));
        }
    }
    Ok(())
}

/// A stem to be placed: its id plus an instrument label.
#[derive(Debug, Clone, PartialEq)]
pub struct StemInfo {
    pub stem_id: String,
    pub instrument: String,
}

/// Default placement for stems no slot matches: front center, 2 m.
pub const DEFAULT_PLACEMENT: (f64, f64, f64) = (0.0, 0.0, 2.0);
/// Default per-source reverb send.
pub const DEFAULT_REVERB_SEND: f64 = 0.2;
/// Default reverb bus return gain.
pub const DEFAULT_WET_GAIN: f64 = 0.3;
/// Default output sample rate.
pub const DEFAULT_SAMPLE_RATE: u32 = 48000;

/// Instantiates a template for a set of stems.
///
/// Each stem takes the slot whose instrument shares the most canonical tokens
/// with its label; every slot is used at most once; stems nothing matches go
/// to the front-center default. Contention is resolved deterministically:
/// candidate (stem, slot) pairs are ranked by overlap score descending, then
/// slot index ascending, then stem order ascending, and assigned greedily.
/// Reverb is initialized from the template's default environment.
///
/// All sources come out in `Panning` mode; callers that know the output
/// format reassign modes (see the conductor's mode selection).
pub fn merge_template(template: &Template, stems: &[StemInfo]) -> SpatialPlan {
    assert!(!stems.is_empty(), "merge_template requires at least one stem");

    let mut candidates = Vec::new();
    for (stem_idx, stem) in stems.iter().enumerate() {
        for (slot_idx, slot) in template.slots.iter().enumerate() {
            let score = synonyms::overlap(&stem.instrument, &slot.slot_instrument);
            if score > 0 {
                candidates.push((score, slot_idx, stem_idx));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut slot_of_stem = vec![None; stems.len()];
    let mut slot_taken = vec![false; template.slots.len()];
    for (_, slot_idx, stem_idx) in candidates {
        if slot_of_stem[stem_idx].is_none() && !slot_taken[slot_idx] {
            slot_of_stem[stem_idx] = Some(slot_idx);
            slot_taken[slot_idx] = true;
        }
    }

    let sources = stems
        .iter()
        .zip(slot_of_stem)
        .map(|(stem, slot)| {
            let (az, el, dist) = match slot {
                Some(i) => {
                    let s = &template.slots[i];
                    (s.azimuth_deg, s.elevation_deg, s.distance_m)
                }
                None => DEFAULT_PLACEMENT,
            };
            SourcePlacement {
                source_id: stem.stem_id.clone(),
                instrument: stem.instrument.clone(),
                azimuth_deg: az,
                elevation_deg: el,
                distance_m: dist,
                mode: LocalizationMode::Panning,
                reverb_send: DEFAULT_REVERB_SEND,
            }
        })
        .collect();

    SpatialPlan {
        sources,
        reverb: ReverbSpec {
            kind: ReverbKind::RirConvolution { rir_id: template.default_environment.clone() },
            wet_gain: DEFAULT_WET_GAIN,
        },
        output: OutputSpec { sample_rate_hz: DEFAULT_SAMPLE_RATE, format: OutputFormat::Binaural },
        mix_notes: String::new(),
        music_description: String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classical() -> Template {
        serde_json::from_str(
            r#"{
              "template_id": "classical_orchestra",
              "name": "Classical Orchestra",
              "keywords": ["orchestra"],
              "description": "stage",
              "slots": [
                {"slot_instrument": "woodwinds", "azimuth_deg": 0.0, "elevation_deg": 0.0, "distance_m": 5.0},
                {"slot_instrument": "brass", "azimuth_deg": 10.0, "elevation_deg": 0.0, "distance_m": 8.0},
                {"slot_instrument": "strings", "azimuth_deg": -35.0, "elevation_deg": 0.0, "distance_m": 6.0}
              ],
              "default_environment": "concert_hall"
            }"#,
        )
        .unwrap()
    }

    fn stem(id: &str) -> StemInfo {
        StemInfo { stem_id: id.to_string(), instrument: id.to_string() }
    }

    fn valid_plan() -> SpatialPlan {
        SpatialPlan {
            sources: vec![SourcePlacement {
                source_id: "guitar".into(),
                instrument: "lead guitar".into(),
                azimuth_deg: 45.0,
                elevation_deg: 0.0,
                distance_m: 10.0,
                mode: LocalizationMode::ItdIld,
                reverb_send: 0.2,
            }],
            reverb: ReverbSpec { kind: ReverbKind::RirConvolution { rir_id: "dry_studio".into() }, wet_gain: 0.3 },
            output: OutputSpec { sample_rate_hz: 48000, format: OutputFormat::Binaural },
            mix_notes: String::new(),
            music_description: String::new(),
        }
    }

    #[test]
    fn valid_plan_has_empty_report() {
        let report = validate_plan(&valid_plan(), ["guitar"], ["dry_studio"]);
        assert!(report.is_empty(), "{report:?}");
    }

    #[test]
    fn zero_distance_is_one_range_violation() {
        let mut plan = valid_plan();
        plan.sources[0].distance_m = 0.0;
        let report = validate_plan(&plan, ["guitar"], ["dry_studio"]);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, "distance_range");
    }

    #[test]
    fn stereo_with_hrtf_is_mode_format_conflict() {
        let mut plan = valid_plan();
        plan.sources[0].mode = LocalizationMode::Hrtf;
        plan.output.format = OutputFormat::Stereo;
        let report = validate_plan(&plan, ["guitar"], ["dry_studio"]);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, "mode_format_conflict");
    }

    #[test]
    fn missing_stem_and_unknown_rir_are_reported() {
        let plan = valid_plan();
        let report = validate_plan(&plan, [], []);
        let codes: Vec<&str> = report.violations.iter().map(|v| v.code).collect();
        assert_eq!(codes, ["missing_stem", "unknown_rir"]);
    }

    #[test]
    fn validate_is_idempotent() {
        let mut plan = valid_plan();
        plan.sources[0].azimuth_deg = 200.0;
        let a = validate_plan(&plan, ["guitar"], ["dry_studio"]);
        let b = validate_plan(&plan, ["guitar"], ["dry_studio"]);
        assert_eq!(a, b);
    }

    #[test]
    fn merge_places_violin_on_strings_and_trumpet_on_brass() {
        let plan = merge_template(&classical(), &[stem("violin"), stem("trumpet")]);
        assert_eq!(plan.sources[0].azimuth_deg, -35.0);
        assert_eq!(plan.sources[1].azimuth_deg, 10.0);
        assert_eq!(plan.sources[1].distance_m, 8.0);
    }

    #[test]
    fn merge_never_duplicates_slots() {
        let stems: Vec<StemInfo> = (0..7).map(|i| StemInfo { stem_id: format!("s{i}"), instrument: "strings".into() }).collect();
        let plan = merge_template(&classical(), &stems);
        // One strings slot exists; six stems fall back to the default spot
        // because the other slots never match and no slot is reused.
        let at_default = plan.sources.iter().filter(|s| s.distance_m == 2.0 && s.azimuth_deg == 0.0).count();
        assert_eq!(at_default, 6);
    }

    #[test]
    fn merge_output_passes_validation() {
        let plan = merge_template(&classical(), &[stem("violin"), stem("mystery")]);
        let report = validate_plan(&plan, ["violin", "mystery"], ["concert_hall"]);
        assert!(report.is_empty(), "{report:?}");
    }

    #[test]
    fn merge_kick_matches_drums_via_synonyms() {
        let template = Template {
            template_id: "t".into(),
            name: "T".into(),
            keywords: vec![],
            description: String::new(),
            slots: vec![
                TemplateSlot { slot_instrument: "drums".into(), azimuth_deg: 25.0, elevation_deg: 0.0, distance_m: 3.5 },
                TemplateSlot { slot_instrument: "bass".into(), azimuth_deg: 10.0, elevation_deg: 0.0, distance_m: 2.5 },
                TemplateSlot { slot_instrument: "guitar".into(), azimuth_deg: 40.0, elevation_deg: 0.0, distance_m: 3.0 },
            ],
            default_environment: "dry_studio".into(),
        };
        let plan = merge_template(&template, &[stem("kick")]);
        assert_eq!(plan.sources[0].azimuth_deg, 25.0);
    }

    #[test]
    fn plan_json_round_trip_rejects_unknown_fields() {
        let plan = valid_plan();
        let json = serde_json::to_string_pretty(&plan).unwrap();
        let back: SpatialPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(plan, back);

        let with_extra = json.replace("\"mix_notes\"", "\"bogus\": 1, \"mix_notes\"");
        assert!(serde_json::from_str::<SpatialPlan>(&with_extra).is_err());
    }

    #[test]
    fn reverb_kind_serializes_tagged() {
        let spec = ReverbSpec { kind: ReverbKind::Algorithmic { rt60_s: 1.2, predelay_ms: 10.0 }, wet_gain: 0.25 };
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["kind"]["algorithmic"]["rt60_s"], 1.2);
        let back: ReverbSpec = serde_json::from_value(json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn seven_slot_template_is_invalid() {
        let mut t = classical();
        t.slots = (0..7)
            .map(|i| TemplateSlot {
                slot_instrument: format!("x{i}"),
                azimuth_deg: 0.0,
                elevation_deg: 0.0,
                distance_m: 1.0,
            })
            .collect();
        assert!(validate_template(&t).is_err());
    }
}

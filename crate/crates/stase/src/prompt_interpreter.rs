//! Prompt routing and explicit-cue parsing.
//!
//! A prompt either carries explicit spatial cues ("place the lead guitar at
//! 45° azimuth, 10 m distance") and routes as Description, or it does not
//! ("a grand orchestral arrangement") and routes as Abstract for template
//! retrieval. Routing is definitionally tied to the parser: a prompt is
//! Abstract exactly when no cue parses.
//!
//! The grammar is deliberately rule-based so the default pathway is
//! deterministic and testable; a remote language-model backend can replace it
//! at the conductor level.
//!
//! Grammar summary, applied per clause (clauses split on `,`, `;`, `.` and
//! the word "and"; a `.` between digits is a decimal point, not a split):
//!
//! - angle: `<number>` followed by °/deg/degree/degrees, azimuth unless the
//!   clause carries an elevation tag ("elevation"/"elevated")
//! - distance: `<number>` followed by m/meter(s)/metre(s) or ft/foot/feet
//!   (feet are converted at exactly 0.3048 m)
//! - direction words map to default angles: left -90, right +90, front 0,
//!   behind 180, center 0 (azimuth); above +45, below -45 (elevation);
//!   explicit numbers always win over direction-word defaults
//! - "slightly"/"slight" next to a direction word is recorded as a modifier;
//!   scaling (a third of the default angle) is applied when the plan is
//!   built, so the cue itself keeps the documented default
//! - a clause with spatial values but no instrument merges its values into
//!   the previous cue's unset fields
//!
//! A numeric cue keeps its instrument phrase verbatim (unknown instruments
//! resolve later against stems); a direction-word-only cue needs a known
//! instrument noun so scene adjectives ("warm", "left-field") do not parse.

use serde::{Deserialize, Serialize};

use crate::synonyms;

/// Exact feet-to-meters factor.
pub const FEET_TO_METERS: f64 = 0.3048;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt is empty")]
    EmptyPrompt,
}

/// Direction words the grammar recognizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionWord {
    Left,
    Right,
    Front,
    Behind,
    Above,
    Below,
    Center,
}

impl DirectionWord {
    fn from_token(token: &str) -> Option<Self> {
        Some(match token {
            "left" => Self::Left,
            "right" => Self::Right,
            "front" => Self::Front,
            "behind" => Self::Behind,
            "above" => Self::Above,
            "below" => Self::Below,
            "center" | "centre" => Self::Center,
            _ => return None,
        })
    }

    /// Default azimuth for horizontal direction words.
    pub fn default_azimuth(self) -> Option<f64> {
        match self {
            Self::Left => Some(-90.0),
            Self::Right => Some(90.0),
            Self::Front | Self::Center => Some(0.0),
            Self::Behind => Some(180.0),
            Self::Above | Self::Below => None,
        }
    }

    /// Default elevation for vertical direction words.
    pub fn default_elevation(self) -> Option<f64> {
        match self {
            Self::Above => Some(45.0),
            Self::Below => Some(-45.0),
            _ => None,
        }
    }
}

/// Intensity modifier attached to a direction word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modifier {
    Slight,
}

/// One parsed spatial cue: an instrument phrase plus at least one of an
/// azimuth, a distance, or a direction word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParsedCue {
    pub instrument: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_word: Option<DirectionWord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modifier: Option<Modifier>,
}

/// Routing outcome for a prompt.
#[derive(Debug, Clone, PartialEq)]
pub enum PromptRoute {
    /// At least one explicit cue parsed.
    Description(Vec<ParsedCue>),
    /// No cue parsed; the normalized query drives template retrieval.
    Abstract(String),
}

/// Lowercased, punctuation-stripped form of a prompt.
pub fn normalize_query(prompt: &str) -> String {
    synonyms::tokenize(prompt).join(" ")
}

/// Routes a prompt: Description iff at least one cue parses.
pub fn classify(prompt: &str) -> Result<PromptRoute, PromptError> {
    if prompt.trim().is_empty() {
        return Err(PromptError::EmptyPrompt);
    }
    let cues = parse_cues(prompt);
    if cues.is_empty() {
        Ok(PromptRoute::Abstract(normalize_query(prompt)))
    } else {
        Ok(PromptRoute::Description(cues))
    }
}

/// Parses all explicit spatial cues out of a prompt.
///
/// Unparseable clauses yield no cue; an all-abstract prompt yields an empty
/// list. Case-insensitive and stable under whitespace normalization.
pub fn parse_cues(prompt: &str) -> Vec<ParsedCue> {
    let mut cues: Vec<ParsedCue> = Vec::new();
    for clause in split_clauses(prompt) {
        let tokens = clause_tokens(&clause);
        if tokens.is_empty() {
            continue;
        }
        let parsed = parse_clause(&tokens);
        match parsed {
            ClauseResult::Cue(cue) => cues.push(cue),
            ClauseResult::SpatialOnly(values) => {
                if let Some(prev) = cues.last_mut() {
                    values.merge_into(prev);
                }
            }
            ClauseResult::Nothing => {}
        }
    }
    cues
}

fn split_clauses(prompt: &str) -> Vec<String> {
    let chars: Vec<char> = prompt.chars().collect();
    let mut clauses = Vec::new();
    let mut current = String::new();
    for (i, &ch) in chars.iter().enumerate() {
        let is_decimal_point = ch == '.'
            && i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_ascii_digit()
            && chars[i + 1].is_ascii_digit();
        if (ch == ',' || ch == ';' || ch == '.') && !is_decimal_point {
            clauses.push(std::mem::take(&mut current));
        } else {
            current.push(ch);
        }
    }
    clauses.push(current);

    // Split each comma-level clause again on the standalone word "and".
    let mut out = Vec::new();
    for clause in clauses {
        let mut part = String::new();
        for word in clause.split_whitespace() {
            if word.eq_ignore_ascii_case("and") {
                out.push(std::mem::take(&mut part));
            } else {
                if !part.is_empty() {
                    part.push(' ');
                }
                part.push_str(word);
            }
        }
        out.push(part);
    }
    out.into_iter().filter(|c| !c.trim().is_empty()).collect()
}

fn clause_tokens(clause: &str) -> Vec<String> {
    let spaced = clause.replace('°', " ° ");
    let mut tokens = Vec::new();
    for raw in spaced.split_whitespace() {
        let lower = raw.to_lowercase();
        let mut token = String::new();
        for (i, ch) in lower.chars().enumerate() {
            let keep = ch.is_ascii_alphanumeric()
                || ch == '°'
                || (ch == '.' && !token.is_empty() && token.chars().all(|c| c.is_ascii_digit() || c == '-' || c == '+'))
                || ((ch == '-' || ch == '+') && i == 0);
            if keep {
                token.push(ch);
            }
        }
        let token = token.trim_end_matches('.').to_string();
        if !token.is_empty() && token != "-" && token != "+" {
            tokens.push(token);
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy)]
enum Unit {
    Angle,
    Meters,
    Feet,
}

fn unit_of(token: &str) -> Option<Unit> {
    match token {
        "°" | "deg" | "degree" | "degrees" => Some(Unit::Angle),
        "m" | "meter" | "meters" | "metre" | "metres" => Some(Unit::Meters),
        "ft" | "foot" | "feet" => Some(Unit::Feet),
        _ => None,
    }
}

fn parse_number(token: &str) -> Option<f64> {
    let value: f64 = token.parse().ok()?;
    value.is_finite().then_some(value)
}

const STOPWORDS: &[&str] = &[
    "a", "an", "at", "away", "by", "dead", "from", "in", "it", "like", "listener", "listeners",
    "make", "move", "near", "of", "off", "on", "pan", "place", "placed", "please", "position",
    "positioned", "put", "sound", "the", "to", "toward", "towards", "with",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

const ELEVATION_TAGS: &[&str] = &["elevated", "elevation"];
const AZIMUTH_TAGS: &[&str] = &["az", "azimuth"];
const DISTANCE_TAGS: &[&str] = &["distance", "dist"];

#[derive(Debug, Default)]
struct SpatialValues {
    azimuth_deg: Option<f64>,
    elevation_deg: Option<f64>,
    distance_m: Option<f64>,
    direction_word: Option<DirectionWord>,
    modifier: Option<Modifier>,
}

impl SpatialValues {
    fn any(&self) -> bool {
        self.azimuth_deg.is_some()
            || self.elevation_deg.is_some()
            || self.distance_m.is_some()
            || self.direction_word.is_some()
    }

    fn merge_into(self, cue: &mut ParsedCue) {
        if cue.azimuth_deg.is_none() {
            cue.azimuth_deg = self.azimuth_deg;
        }
        if cue.elevation_deg.is_none() {
            cue.elevation_deg = self.elevation_deg;
        }
        if cue.distance_m.is_none() {
            cue.distance_m = self.distance_m;
        }
        if cue.direction_word.is_none() {
            cue.direction_word = self.direction_word;
            if cue.modifier.is_none() {
                cue.modifier = self.modifier;
            }
        }
    }
}

enum ClauseResult {
    Cue(ParsedCue),
    SpatialOnly(SpatialValues),
    Nothing,
}

fn parse_clause(tokens: &[String]) -> ClauseResult {
    let mut values = SpatialValues::default();
    let mut consumed = vec![false; tokens.len()];
    let elevation_tagged = tokens.iter().any(|t| ELEVATION_TAGS.contains(&t.as_str()));
    let mut has_numeric = false;

    // Number + unit groups.
    for i in 0..tokens.len() {
        if consumed[i] {
            continue;
        }
        let Some(value) = parse_number(&tokens[i]) else { continue };
        let Some(unit) = tokens.get(i + 1).and_then(|t| unit_of(t)) else { continue };
        consumed[i] = true;
        consumed[i + 1] = true;
        has_numeric = true;
        match unit {
            Unit::Angle => {
                if elevation_tagged && values.elevation_deg.is_none() {
                    values.elevation_deg = Some(value);
                } else if values.azimuth_deg.is_none() {
                    values.azimuth_deg = Some(value);
                }
            }
            Unit::Meters => {
                if values.distance_m.is_none() {
                    values.distance_m = Some(value);
                }
            }
            Unit::Feet => {
                if values.distance_m.is_none() {
                    values.distance_m = Some(value * FEET_TO_METERS);
                }
            }
        }
    }

    // Direction words fill only fields no explicit number has claimed.
    let mut has_direction = false;
    for (i, token) in tokens.iter().enumerate() {
        if consumed[i] {
            continue;
        }
        if let Some(dir) = DirectionWord::from_token(token) {
            consumed[i] = true;
            has_direction = true;
            if values.direction_word.is_none() {
                values.direction_word = Some(dir);
                if values.azimuth_deg.is_none() {
                    values.azimuth_deg = dir.default_azimuth();
                }
                if values.elevation_deg.is_none() {
                    values.elevation_deg = dir.default_elevation();
                }
            }
        }
    }

    let mut has_modifier = false;
    for (i, token) in tokens.iter().enumerate() {
        if token == "slightly" || token == "slight" {
            consumed[i] = true;
            has_modifier = true;
        }
    }
    if has_modifier && values.direction_word.is_some() {
        values.modifier = Some(Modifier::Slight);
    }

    // What is left, minus tags, stopwords, and stray numbers, names the
    // instrument.
    let mut instrument_tokens = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if consumed[i]
            || is_stopword(token)
            || ELEVATION_TAGS.contains(&token.as_str())
            || AZIMUTH_TAGS.contains(&token.as_str())
            || DISTANCE_TAGS.contains(&token.as_str())
            || parse_number(token).is_some()
        {
            continue;
        }
        instrument_tokens.push(token.as_str());
    }

    if !values.any() {
        return ClauseResult::Nothing;
    }
    if instrument_tokens.is_empty() {
        return ClauseResult::SpatialOnly(values);
    }
    let known = instrument_tokens.iter().any(|t| synonyms::is_known_instrument(t));
    if !has_numeric && has_direction && !known {
        // Direction words only attach to instrument nouns; adjectives in
        // abstract prompts ("left-field") must not produce cues.
        return ClauseResult::Nothing;
    }
    ClauseResult::Cue(ParsedCue {
        instrument: instrument_tokens.join(" "),
        azimuth_deg: values.azimuth_deg,
        elevation_deg: values.elevation_deg,
        distance_m: values.distance_m,
        direction_word: values.direction_word,
        modifier: values.modifier,
    })
}

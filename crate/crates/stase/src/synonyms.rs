//! Shared instrument vocabulary: synonym table, token canonicalization, and
//! label inference from stem file names.
//!
//! The deterministic pipeline needs an explicit table where a language model
//! would resolve instrument names implicitly. Matching everywhere is
//! token-overlap after canonicalization: "kick" expands to {kick, drums}, so
//! a kick stem overlaps a "drums" slot.

use std::collections::BTreeSet;

/// Synonym table: token -> section/family token it also counts as.
const SYNONYMS: &[(&str, &str)] = &[
    ("violin", "strings"),
    ("viola", "strings"),
    ("cello", "strings"),
    ("contrabass", "strings"),
    ("fiddle", "strings"),
    ("kick", "drums"),
    ("snare", "drums"),
    ("tom", "drums"),
    ("toms", "drums"),
    ("hihat", "drums"),
    ("cymbal", "drums"),
    ("cymbals", "drums"),
    ("drum", "drums"),
    ("trumpet", "brass"),
    ("trombone", "brass"),
    ("horn", "brass"),
    ("horns", "brass"),
    ("tuba", "brass"),
    ("flute", "woodwinds"),
    ("clarinet", "woodwinds"),
    ("oboe", "woodwinds"),
    ("bassoon", "woodwinds"),
    ("piccolo", "woodwinds"),
    ("sax", "woodwinds"),
    ("saxophone", "woodwinds"),
    ("keys", "piano"),
    ("keyboard", "piano"),
    ("rhodes", "piano"),
    ("voice", "vocals"),
    ("vocal", "vocals"),
    ("vox", "vocals"),
    ("singer", "vocals"),
    ("singers", "vocals"),
    ("choir", "vocals"),
    ("soprano", "vocals"),
    ("alto", "vocals"),
    ("tenor", "vocals"),
    ("congas", "percussion"),
    ("bongos", "percussion"),
    ("djembe", "percussion"),
    ("tabla", "percussion"),
    ("shaker", "percussion"),
    ("timpani", "percussion"),
    ("tambourine", "percussion"),
    ("marimba", "percussion"),
    ("synthesizer", "synth"),
    ("pad", "synth"),
];

/// Tokens the grammar accepts as instrument nouns for direction-only cues.
const KNOWN_INSTRUMENTS: &[&str] = &[
    "accordion", "alto", "banjo", "bass", "bassoon", "bongos", "brass", "cello", "choir",
    "clarinet", "congas", "contrabass", "cymbal", "cymbals", "djembe", "drum", "drums",
    "fiddle", "flute", "guitar", "harp", "hihat", "horn", "horns", "keyboard", "keys",
    "kick", "lead", "mandolin", "marimba", "oboe", "organ", "pad", "percussion", "piano",
    "piccolo", "rhodes", "sampler", "sax", "saxophone", "shaker", "singer", "singers",
    "sitar", "snare", "soprano", "strings", "synth", "synthesizer", "tabla", "tambourine",
    "tenor", "timpani", "tom", "toms", "trombone", "trumpet", "tuba", "ukulele", "viola",
    "violin", "vocal", "vocals", "voice", "vox", "woodwind", "woodwinds",
];

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        let ch = ch.to_ascii_lowercase();
        if ch.is_ascii_alphanumeric() {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Expands a label's tokens with their synonym-table families.
pub fn canonical_tokens(label: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    for token in tokenize(label) {
        if let Some(&(_, family)) = SYNONYMS.iter().find(|(from, _)| *from == token) {
            set.insert(family.to_string());
        }
        set.insert(token);
    }
    set
}

/// Number of shared canonical tokens between two labels.
pub fn overlap(a: &str, b: &str) -> usize {
    canonical_tokens(a).intersection(&canonical_tokens(b)).count()
}

/// True if the token is an instrument noun the grammar recognizes.
pub fn is_known_instrument(token: &str) -> bool {
    KNOWN_INSTRUMENTS.binary_search(&token).is_ok()
}

/// Infers an instrument label from a stem identifier such as a file name.
///
/// Known instrument tokens in the name are kept; if none are present the
/// whole tokenized name stands in as the label.
pub fn infer_label(stem_id: &str) -> String {
    let tokens = tokenize(stem_id);
    let known: Vec<&String> = tokens.iter().filter(|t| is_known_instrument(t)).collect();
    if known.is_empty() {
        tokens.join(" ")
    } else {
        known.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
    }
}

//! Template bank loading and abstract-prompt retrieval.
//!
//! Retrieval is cosine similarity between a tf-idf weighted query vector and
//! raw term-count template vectors. Template documents are the keyword list
//! plus the tokenized description. Query terms are weighted by count times
//! idf, with idf(df) = 1/(1 + ln df) computed from document frequencies only
//! (a term in no template gets idf 1, which cannot matter because its dot
//! product contribution is zero).
//!
//! This weighting keeps two invariants that stronger idf variants break:
//!
//! - ranking is scale-invariant in the query, so repeating the query text
//!   changes no score
//! - adding a template with no query-term overlap never reorders existing
//!   templates, because existing scores depend only on per-template counts
//!   and the df of query terms those templates contain, none of which the
//!   new template touches when it shares no query term

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::scene_model::{validate_template, Template};
use crate::synonyms::tokenize;

/// Top score below this flags the ranking as low-confidence.
pub const LOW_CONFIDENCE_THRESHOLD: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum BankError {
    #[error("cannot read template bank {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template bank {path} is not valid JSON: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("template bank schema violation: {0}")]
    Schema(String),
}

/// A validated, retrieval-ready set of templates.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

impl TemplateBank {
    /// Builds a bank from already-parsed templates, validating each.
    pub fn from_templates(templates: Vec<Template>) -> Result<Self, BankError> {
        if templates.is_empty() {
            return Err(BankError::Schema("bank contains no templates".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in &templates {
            validate_template(t).map_err(BankError::Schema)?;
            if !seen.insert(t.template_id.clone()) {
                return Err(BankError::Schema(format!(
                    "duplicate template_id {}",
                    t.template_id
                )));
            }
        }
        Ok(Self { templates })
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn get(&self, template_id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Loads and validates a template bank from a JSON file.
pub fn load_bank(path: &Path) -> Result<TemplateBank, BankError> {
    let text = std::fs::read_to_string(path).map_err(|source| BankError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let templates: Vec<Template> =
        serde_json::from_str(&text).map_err(|source| BankError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    TemplateBank::from_templates(templates)
}

/// One ranked retrieval hit.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub template_id: String,
    pub score: f64,
}

/// Full ranking for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// All templates, best first; ties broken by ascending template_id.
    pub hits: Vec<RetrievalHit>,
    /// True when the best score falls below [`LOW_CONFIDENCE_THRESHOLD`].
    pub low_confidence: bool,
}

impl Ranking {
    pub fn top(&self) -> &RetrievalHit {
        &self.hits[0]
    }

    /// Plain-text table of the ranking, for CLI and debug output.
    pub fn render_table(&self) -> String {
        let width = self
            .hits
            .iter()
            .map(|h| h.template_id.len())
            .max()
            .unwrap_or(0)
            .max("template".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<4} {:<width$} {:>8}", "rank", "template", "score");
        for (i, hit) in self.hits.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<4} {:<width$} {:>8.4}",
                i + 1,
                hit.template_id,
                hit.score
            );
        }
        out
    }
}

fn doc_tokens(template: &Template) -> Vec<String> {
    let mut tokens: Vec<String> = template
        .keywords
        .iter()
        .flat_map(|k| tokenize(k))
        .collect();
    tokens.extend(tokenize(&template.description));
    tokens
}

fn term_counts(tokens: &[String]) -> BTreeMap<&str, f64> {
    let mut counts = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0.0) += 1.0;
    }
    counts
}

fn idf(df: usize) -> f64 {
    if df == 0 {
        1.0
    } else {
        1.0 / (1.0 + (df as f64).ln())
    }
}

/// Ranks every template in the bank against a free-text query.
///
/// An empty or fully out-of-vocabulary query scores 0 everywhere and ranks
/// by template_id.
pub fn retrieve(bank: &TemplateBank, query: &str) -> Ranking {
    let docs: Vec<Vec<String>> = bank.templates.iter().map(doc_tokens).collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in &docs {
        let unique: std::collections::BTreeSet<&str> =
            tokens.iter().map(String::as_str).collect();
        for token in unique {
            *df.entry(token).or_insert(0) += 1;
        }
    }

    let query_tokens = tokenize(query);
    let query_counts = term_counts(&query_tokens);
    let query_weights: BTreeMap<&str, f64> = query_counts
        .iter()
        .map(|(&token, &count)| (token, count * idf(df.get(token).copied().unwrap_or(0))))
        .collect();
    let query_norm = query_weights.values().map(|w| w * w).sum::<f64>().sqrt();

    let mut hits: Vec<RetrievalHit> = bank
        .templates
        .iter()
        .zip(&docs)
        .map(|(template, tokens)| {
            let counts = term_counts(tokens);
            let doc_norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
            let dot: f64 = query_weights
                .iter()
                .map(|(token, w)| w * counts.get(token).copied().unwrap_or(0.0))
                .sum();
            let score = if query_norm == 0.0 || doc_norm == 0.0 {
                0.0
            } else {
                dot / (query_norm * doc_norm)
            };
            RetrievalHit {
                template_id: template.template_id.clone(),
                score,
            }
        })
        .collect();

    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.template_id.cmp(&b.template_id))
    });
    let low_confidence = hits[0].score < LOW_CONFIDENCE_THRESHOLD;
    Ranking {
        hits,
        low_confidence,
    }
}

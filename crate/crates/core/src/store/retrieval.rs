//! Ranking stylebook records against a selected passage.
//!
//! The lexical score of a record is
//!
//! ```text
//! (w_text * J(selected, original_text) + w_ctx * J(query context, record context)) / (w_text + w_ctx)
//! ```
//!
//! where `J` is token Jaccard similarity and a context is the receiver and
//! occasion descriptions joined by a space. With an embedder, each `J` is
//! replaced by cosine similarity mapped onto `[0, 1]` as `(c + 1) / 2`.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::domain::StylebookRecord;
use crate::error::GatewayError;
use crate::text::{cosine, text_jaccard};
use crate::{Error, Result};

pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSettings {
    pub w_text: f64,
    pub w_ctx: f64,
    pub threshold: f64,
    pub top_k: usize,
    /// Let the reranking agent reorder the top candidates.
    pub rerank: bool,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        RetrievalSettings {
            w_text: 0.6,
            w_ctx: 0.4,
            threshold: 0.25,
            top_k: 3,
            rerank: false,
        }
    }
}

impl RetrievalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.w_text < 0.0 || self.w_ctx < 0.0 || self.w_text + self.w_ctx <= 0.0 {
            return Err(Error::Config("retrieval weights must be non-negative and not both zero".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("retrieval threshold must be within [0, 1]".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("retrieval top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub selected_text: String,
    pub receiver: String,
    pub occasion: String,
}

impl RetrievalQuery {
    fn context(&self) -> String {
        format!("{} {}", self.receiver, self.occasion)
    }
}

fn record_context(r: &StylebookRecord) -> String {
    format!("{} {}", r.receiver_description, r.occasion_description)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub record: StylebookRecord,
    pub score: f64,
}

fn combine(settings: &RetrievalSettings, text: f64, ctx: f64) -> f64 {
    (settings.w_text * text + settings.w_ctx * ctx) / (settings.w_text + settings.w_ctx)
}

pub fn lexical_score(settings: &RetrievalSettings, query: &RetrievalQuery, record: &StylebookRecord) -> f64 {
    combine(
        settings,
        text_jaccard(&query.selected_text, &record.original_text),
        text_jaccard(&query.context(), &record_context(record)),
    )
}

fn embedding_scores(
    settings: &RetrievalSettings,
    query: &RetrievalQuery,
    records: &[StylebookRecord],
    embedder: &dyn Embedder,
) -> Result<Vec<f64>, GatewayError> {
    let query_ctx = query.context();
    let contexts: Vec<String> = records.iter().map(record_context).collect();
    let mut texts: Vec<&str> = vec![&query.selected_text, &query_ctx];
    for (r, ctx) in records.iter().zip(&contexts) {
        texts.push(&r.original_text);
        texts.push(ctx);
    }
    let vectors = embedder.embed(&texts)?;
    let sim = |a: usize, b: usize| (cosine(&vectors[a], &vectors[b]) + 1.0) / 2.0;
    Ok((0..records.len())
        .map(|i| combine(settings, sim(0, 2 + 2 * i), sim(1, 3 + 2 * i)))
        .collect())
}

/// Records scoring at least the threshold, best first, at most `top_k`.
/// Ties go to the newer record, then the smaller id. Embedding failures fall
/// back to lexical scoring and are reported in the returned warnings.
pub fn rank_records(
    settings: &RetrievalSettings,
    query: &RetrievalQuery,
    records: &[StylebookRecord],
    embedder: Option<&dyn Embedder>,
) -> (Vec<ScoredRecord>, Vec<String>) {
    let mut warnings = Vec::new();
    let scores = match embedder.map(|e| embedding_scores(settings, query, records, e)) {
        Some(Ok(scores)) => scores,
        Some(Err(e)) => {
            tracing::warn!(%e, "embedding failed; using lexical similarity");
            warnings.push(format!("embedding unavailable ({e}); lexical similarity used"));
            records.iter().map(|r| lexical_score(settings, query, r)).collect()
        }
        None => records.iter().map(|r| lexical_score(settings, query, r)).collect(),
    };
    let mut scored: Vec<ScoredRecord> = records
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s >= settings.threshold)
        .map(|(r, score)| ScoredRecord {
            record: r.clone(),
            score,
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.record.created_at.cmp(&a.record.created_at))
            .then_with(|| a.record.record_id.cmp(&b.record.record_id))
    });
    scored.truncate(settings.top_k);
    (scored, warnings)
}

//! Two-pass extraction of substances from full texts and aggregation into a
//! ranked candidate list.

use labloop_core::{aggregate_candidates, validate_cas, CandidateList, Role, SubstanceRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::gateway::{bindings, Gateway, GatewayError, PASSAGES, RECORDS};
use crate::literature::{fetch_fulltext, Corpus, LiteratureError};
use crate::parallel;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("article {0:?} has empty full text")]
    EmptyFulltext(String),
    #[error("article {article}: {source}")]
    Gateway { article: String, source: GatewayError },
    #[error(transparent)]
    Literature(#[from] LiteratureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageSet {
    pub article_id: String,
    pub passages: Vec<String>,
}

/// A structured record that failed the CAS check digit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rejected {
    pub article_id: String,
    pub cas: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Structured {
    pub records: Vec<SubstanceRecord>,
    pub rejected: Vec<Rejected>,
    pub retries_used: u32,
}

/// Counters written to `mining_stats.json`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MiningStats {
    pub articles_requested: usize,
    pub articles_mined: usize,
    pub missing_fulltext: Vec<String>,
    pub articles_without_substances: Vec<String>,
    pub passages: usize,
    pub records: usize,
    pub rejected_cas: usize,
    pub rejected: Vec<Rejected>,
    pub retries_used: u32,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOutcome {
    pub candidates: CandidateList,
    pub stats: MiningStats,
}

/// First pass: passages that name a substance and its use.
pub fn extract_passages(gateway: &Gateway, article_id: &str, fulltext: &str) -> Result<PassageSet, MinerError> {
    Ok(extract(gateway, article_id, fulltext)?.0)
}

fn extract(gateway: &Gateway, article_id: &str, fulltext: &str) -> Result<(PassageSet, u32), MinerError> {
    if fulltext.trim().is_empty() {
        return Err(MinerError::EmptyFulltext(article_id.to_string()));
    }
    let done = gateway
        .complete_scoped(Some(article_id), PASSAGES, &bindings([("article_id", article_id), ("fulltext", fulltext)]))
        .map_err(|source| MinerError::Gateway { article: article_id.to_string(), source })?;
    let passages = done.value["passages"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_str).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default();
    Ok((PassageSet { article_id: article_id.to_string(), passages }, done.retries_used))
}

/// Second pass: passages to records. Records whose CAS fails the check
/// digit are dropped and reported in `rejected`.
pub fn structure_records(gateway: &Gateway, set: &PassageSet, requirement: &str) -> Result<Structured, MinerError> {
    if set.passages.is_empty() {
        return Ok(Structured::default());
    }
    let text = set.passages.iter().enumerate().map(|(i, p)| format!("[{}] {p}", i + 1)).collect::<Vec<_>>().join("\n");
    let done = gateway
        .complete_scoped(Some(&set.article_id), RECORDS, &bindings([("requirement", requirement), ("passages", &text)]))
        .map_err(|source| MinerError::Gateway { article: set.article_id.clone(), source })?;
    let mut out = Structured { retries_used: done.retries_used, ..Structured::default() };
    for r in done.value["records"].as_array().into_iter().flatten() {
        let field = |k: &str| r[k].as_str().unwrap_or_default().trim().to_string();
        let cas = field("cas");
        let name = field("name");
        if !validate_cas(&cas) {
            out.rejected.push(Rejected { article_id: set.article_id.clone(), cas, name });
            continue;
        }
        let Some(role) = Role::parse(&field("role")) else { continue };
        out.records.push(SubstanceRecord {
            cas,
            name,
            role,
            purpose: field("purpose"),
            relevance: (r["relevance"].as_f64().unwrap_or(0.0) / 100.0).clamp(0.0, 1.0),
            sources: vec![set.article_id.clone()],
        });
    }
    Ok(out)
}

enum ArticleResult {
    Missing(String),
    Mined { passages: usize, structured: Structured, retries: u32 },
}

/// Fetches, extracts and structures every listed article on `workers`
/// threads, then aggregates. Articles without a full text are skipped and
/// listed in the stats; the first gateway failure (in input order) aborts.
pub fn mine(
    gateway: &Gateway,
    corpus: &Corpus,
    article_ids: &[String],
    requirement: &str,
    workers: usize,
) -> Result<MiningOutcome, MinerError> {
    let results = parallel::map(workers, article_ids, |id| -> Result<ArticleResult, MinerError> {
        let text = match fetch_fulltext(corpus, id) {
            Ok(t) if !t.trim().is_empty() => t,
            Ok(_) | Err(LiteratureError::FulltextMissing(_)) => return Ok(ArticleResult::Missing(id.clone())),
            Err(e) => return Err(e.into()),
        };
        let (set, r1) = extract(gateway, id, &text)?;
        let structured = structure_records(gateway, &set, requirement)?;
        Ok(ArticleResult::Mined { passages: set.passages.len(), retries: r1 + structured.retries_used, structured })
    });

    let mut stats = MiningStats { articles_requested: article_ids.len(), ..MiningStats::default() };
    let mut records = Vec::new();
    for (id, r) in article_ids.iter().zip(results) {
        match r? {
            ArticleResult::Missing(id) => stats.missing_fulltext.push(id),
            ArticleResult::Mined { passages, structured, retries } => {
                stats.articles_mined += 1;
                if passages == 0 {
                    stats.articles_without_substances.push(id.clone());
                }
                stats.passages += passages;
                stats.retries_used += retries;
                stats.records += structured.records.len();
                stats.rejected_cas += structured.rejected.len();
                stats.rejected.extend(structured.rejected);
                records.extend(structured.records);
            }
        }
    }
    let candidates = aggregate_candidates(&records);
    stats.candidates = candidates.len();
    Ok(MiningOutcome { candidates, stats })
}

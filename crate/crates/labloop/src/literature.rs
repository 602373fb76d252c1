//! Requirement analysis, corpus retrieval and relevance filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use labloop_core::ArticleRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{bindings, Gateway, GatewayError, KEYWORDS, RELEVANCE};
use crate::parallel;

pub use labloop_core::filter_relevant;

pub const KEYWORD_COUNT: usize = 5;

#[derive(Debug, Error)]
pub enum LiteratureError {
    #[error("the requirement is empty")]
    EmptyRequirement,
    #[error("the corpus has no articles")]
    EmptyCorpus,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("article {0:?} is not in the corpus")]
    NotInCorpus(String),
    #[error("article {0:?} has no full text")]
    FulltextMissing(String),
    #[error("model output still malformed after retries: {0}")]
    MalformedOutput(String),
    #[error("corpus index {path}: {message}")]
    BadIndex { path: PathBuf, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// One row of `index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fulltext_path: Option<String>,
}

/// A directory holding `index.json` and optional UTF-8 full-text files.
#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    entries: Vec<IndexEntry>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn open(root: &Path) -> Result<Corpus, LiteratureError> {
        let path = root.join("index.json");
        let bad = |message: String| LiteratureError::BadIndex { path: path.clone(), message };
        let text = std::fs::read_to_string(&path).map_err(|e| bad(e.to_string()))?;
        let entries: Vec<IndexEntry> = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        Corpus::from_entries(root, entries).map_err(bad)
    }

    pub fn from_entries(root: &Path, entries: Vec<IndexEntry>) -> Result<Corpus, String> {
        let mut by_id = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if by_id.insert(e.id.clone(), i).is_some() {
                return Err(format!("duplicate article id {:?}", e.id));
            }
        }
        Ok(Corpus { root: root.to_path_buf(), entries, by_id })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }
}

fn record(e: &IndexEntry) -> ArticleRecord {
    ArticleRecord {
        id: e.id.clone(),
        title: e.title.clone(),
        r#abstract: e.summary.clone(),
        fulltext: None,
        relevance: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keywords {
    pub keywords: Vec<String>,
    pub retries_used: u32,
}

/// Asks the model for exactly five distinct search keywords.
pub fn generate_keywords(gateway: &Gateway, requirement: &str) -> Result<Keywords, LiteratureError> {
    if requirement.trim().is_empty() {
        return Err(LiteratureError::EmptyRequirement);
    }
    let done = match gateway.complete(KEYWORDS, &bindings([("requirement", requirement)])) {
        Ok(c) => c,
        Err(GatewayError::ExhaustedRetries { last_error, .. }) => {
            return Err(LiteratureError::MalformedOutput(last_error))
        }
        Err(e) => return Err(e.into()),
    };
    let keywords: Vec<String> = done
        .value
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(|s| s.trim().to_string())).collect())
        .unwrap_or_default();
    let distinct: BTreeSet<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    if keywords.len() != KEYWORD_COUNT || distinct.len() != KEYWORD_COUNT || keywords.iter().any(String::is_empty) {
        return Err(LiteratureError::MalformedOutput(format!(
            "expected {KEYWORD_COUNT} distinct keywords, got {keywords:?}"
        )));
    }
    Ok(Keywords { keywords, retries_used: done.retries_used })
}

/// Term-overlap score numerator: 2 per keyword found in the title, 1 per
/// keyword found only in the abstract (case-insensitive substring match).
fn match_points(entry: &IndexEntry, keywords: &[String]) -> u32 {
    let title = entry.title.to_lowercase();
    let summary = entry.summary.to_lowercase();
    keywords
        .iter()
        .map(|k| k.to_lowercase())
        .filter(|k| !k.is_empty())
        .map(|k| {
            if title.contains(&k) {
                2
            } else if summary.contains(&k) {
                1
            } else {
                0
            }
        })
        .sum()
}

/// Match score in `[0, 1]`: title hits count double, normalized by `2 · |keywords|`.
pub fn match_score(entry: &IndexEntry, keywords: &[String]) -> f64 {
    if keywords.is_empty() {
        return 0.0;
    }
    f64::from(match_points(entry, keywords)) / (2.0 * keywords.len() as f64)
}

/// The `k` best-matching articles, best first, ties by ascending id.
pub fn search(corpus: &Corpus, keywords: &[String], k: usize) -> Result<Vec<ArticleRecord>, LiteratureError> {
    if k == 0 {
        return Err(LiteratureError::InvalidK);
    }
    if corpus.is_empty() {
        return Err(LiteratureError::EmptyCorpus);
    }
    let mut scored: Vec<(u32, &IndexEntry)> = corpus.entries.iter().map(|e| (match_points(e, keywords), e)).collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    Ok(scored.into_iter().take(k).map(|(_, e)| record(e)).collect())
}

/// Relevance of one article to the requirement, as a fraction.
pub fn score_relevance(gateway: &Gateway, article: &ArticleRecord, requirement: &str) -> Result<f64, LiteratureError> {
    let done = gateway.complete_scoped(
        Some(&article.id),
        RELEVANCE,
        &bindings([("requirement", requirement), ("title", &article.title), ("abstract", &article.r#abstract)]),
    )?;
    let pct = done.value.as_f64().unwrap_or(0.0);
    Ok((pct / 100.0).clamp(0.0, 1.0))
}

/// Scores every article on `workers` threads. Output order follows input.
pub fn score_all(
    gateway: &Gateway,
    articles: &[ArticleRecord],
    requirement: &str,
    workers: usize,
) -> Result<Vec<ArticleRecord>, LiteratureError> {
    parallel::map(workers, articles, |a| {
        let relevance = score_relevance(gateway, a, requirement)?;
        Ok(ArticleRecord { relevance: Some(relevance), ..a.clone() })
    })
    .into_iter()
    .collect()
}

pub fn fetch_fulltext(corpus: &Corpus, article_id: &str) -> Result<String, LiteratureError> {
    let entry = corpus.get(article_id).ok_or_else(|| LiteratureError::NotInCorpus(article_id.to_string()))?;
    let rel = entry.fulltext_path.as_ref().ok_or_else(|| LiteratureError::FulltextMissing(article_id.to_string()))?;
    std::fs::read_to_string(corpus.root.join(rel)).map_err(|_| LiteratureError::FulltextMissing(article_id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, title: &str, summary: &str) -> IndexEntry {
        IndexEntry { id: id.into(), title: title.into(), summary: summary.into(), fulltext_path: None }
    }

    fn corpus(entries: Vec<IndexEntry>) -> Corpus {
        Corpus::from_entries(Path::new("."), entries).unwrap()
    }

    #[test]
    fn title_hit_ranks_first() {
        let c = corpus(vec![
            entry("a", "Paper films", "nothing here"),
            entry("b", "Cobalt chloride humidity films", "an indicator"),
            entry("c", "Other", "mentions cobalt chloride in passing"),
        ]);
        let hits = search(&c, &["cobalt chloride".into()], 3).unwrap();
        let ids: Vec<_> = hits.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a"]);
    }

    #[test]
    fn oversized_k_returns_everything_and_ties_go_by_id() {
        let c = corpus(vec![entry("z", "same", "x"), entry("m", "same", "x"), entry("a", "same", "x")]);
        let hits = search(&c, &["same".into()], 10).unwrap();
        let ids: Vec<_> = hits.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["a", "m", "z"]);
    }

    #[test]
    fn empty_corpus_and_zero_k_are_errors() {
        let c = corpus(vec![]);
        assert!(matches!(search(&c, &["x".into()], 1), Err(LiteratureError::EmptyCorpus)));
        let c = corpus(vec![entry("a", "t", "s")]);
        assert!(matches!(search(&c, &["x".into()], 0), Err(LiteratureError::InvalidK)));
    }

    #[test]
    fn match_score_weights_titles_double() {
        let e = entry("a", "Humidity sensor", "a colorimetric film");
        let kw: Vec<String> = vec!["humidity".into(), "colorimetric".into()];
        assert_eq!(match_score(&e, &kw), 0.75);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(Corpus::from_entries(Path::new("."), vec![entry("a", "", ""), entry("a", "", "")]).is_err());
    }
}

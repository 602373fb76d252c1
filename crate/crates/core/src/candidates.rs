//! Cross-article aggregation of mined substances and the curation digest
//! shown to researchers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Role, SubstanceRecord};

/// One entry per CAS code, sorted by relevance descending (ties by CAS).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub entries: Vec<SubstanceRecord>,
    /// CAS → contributing article ids.
    pub provenance: BTreeMap<String, Vec<String>>,
}

impl CandidateList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, cas: &str) -> Option<&SubstanceRecord> {
        self.entries.iter().find(|e| e.cas == cas)
    }

    /// Entries at or above `threshold`, keeping provenance for those only.
    pub fn highlighted(&self, threshold: f64) -> CandidateList {
        let entries: Vec<SubstanceRecord> = self.entries.iter().filter(|e| e.relevance >= threshold).cloned().collect();
        let provenance =
            entries.iter().filter_map(|e| self.provenance.get(&e.cas).map(|p| (e.cas.clone(), p.clone()))).collect();
        CandidateList { entries, provenance }
    }
}

fn by_relevance_desc(a: &SubstanceRecord, b: &SubstanceRecord) -> Ordering {
    b.relevance.partial_cmp(&a.relevance).unwrap_or(Ordering::Equal).then_with(|| a.cas.cmp(&b.cas))
}

/// Folds per-article records into one entry per CAS code.
///
/// Relevance is the maximum over contributing records, purposes are
/// de-duplicated (most relevant first), the role is a majority vote with ties
/// broken by [`Role`] order, and the name comes from the most relevant record.
/// Records are expected to carry valid CAS codes already. The result does not
/// depend on input order.
pub fn aggregate_candidates(records: &[SubstanceRecord]) -> CandidateList {
    let mut groups: BTreeMap<&str, Vec<&SubstanceRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.cas.as_str()).or_default().push(r);
    }

    let mut entries = Vec::with_capacity(groups.len());
    let mut provenance = BTreeMap::new();
    for (cas, mut group) in groups {
        group.sort_by(|a, b| {
            by_relevance_desc(a, b)
                .then_with(|| a.name.cmp(&b.name))
                .then_with(|| a.purpose.cmp(&b.purpose))
                .then_with(|| a.role.cmp(&b.role))
        });

        let mut votes = [0usize; Role::ALL.len()];
        for r in &group {
            votes[r.role as usize] += 1;
        }
        let top = votes.iter().copied().max().unwrap_or(0);
        let role = Role::ALL.into_iter().find(|r| votes[*r as usize] == top).unwrap_or(Role::Additive);

        let mut purposes: Vec<&str> = Vec::new();
        for r in &group {
            let p = r.purpose.trim();
            if !p.is_empty() && !purposes.contains(&p) {
                purposes.push(p);
            }
        }

        let mut sources: Vec<String> = group.iter().flat_map(|r| r.sources.iter().cloned()).collect();
        sources.sort();
        sources.dedup();

        let lead = group[0];
        provenance.insert(String::from(cas), sources.clone());
        entries.push(SubstanceRecord {
            cas: String::from(cas),
            name: lead.name.clone(),
            role,
            purpose: purposes.join("; "),
            relevance: lead.relevance,
            sources,
        });
    }
    entries.sort_by(by_relevance_desc);
    CandidateList { entries, provenance }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DigestError {
    #[error("candidate list is empty")]
    EmptyList,
}

/// Human-readable report plus the listing it was rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digest {
    pub text: String,
    pub listing: Vec<SubstanceRecord>,
}

/// Renders one block per candidate, most relevant first.
pub fn curation_digest(list: &CandidateList) -> Result<Digest, DigestError> {
    if list.is_empty() {
        return Err(DigestError::EmptyList);
    }
    let mut listing = list.entries.clone();
    listing.sort_by(by_relevance_desc);

    let mut text = String::new();
    let _ = writeln!(text, "{} candidate substances", listing.len());
    for (i, e) in listing.iter().enumerate() {
        let _ = writeln!(text);
        let _ = writeln!(text, "[{}] {}", i + 1, e.name);
        let _ = writeln!(text, "    CAS:       {}", e.cas);
        let _ = writeln!(text, "    Role:      {}", e.role);
        let _ = writeln!(text, "    Purpose:   {}", e.purpose);
        let _ = writeln!(text, "    Relevance: {:.0}%", e.relevance * 100.0);
        let _ = writeln!(text, "    Sources:   {}", e.sources.join(", "));
    }
    Ok(Digest { text, listing })
}

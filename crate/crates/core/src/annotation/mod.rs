//! Human benchmark: sampling, label collection, agreement and adjudication.

pub mod server;
mod store;

use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSource, LabeledTriple, Relation, Source, Triple, ValidityLabel};
use crate::error::{Error, Result};
use crate::metrics::Confusion;
use crate::negator::generate_variants;
use crate::rng::stream;

pub use store::{AnnotationStore, Progress, SubmitAck, Task};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub triple_id: String,
    pub label: ValidityLabel,
    pub timestamp: DateTime<Utc>,
}

/// Samples `per_relation` ATOMIC originals per relation and adds their three
/// negated variants. Originals the rule engine cannot negate are skipped in
/// favour of the next draw.
pub fn sample_benchmark(test_corpus: &[Triple], per_relation: usize, seed: u64) -> Result<Vec<Triple>> {
    let mut out = Vec::with_capacity(per_relation * Relation::ALL.len() * 4);
    for relation in Relation::ALL {
        let mut candidates: Vec<&Triple> = test_corpus
            .iter()
            .filter(|t| t.source == Source::Atomic && t.is_original() && t.relation == relation)
            .collect();
        candidates.sort_by(|a, b| a.id.cmp(&b.id));
        candidates.dedup_by(|a, b| a.id == b.id);
        candidates.shuffle(&mut stream(seed, &format!("benchmark/{relation}")));
        let mut taken = 0;
        for t in &candidates {
            if taken == per_relation {
                break;
            }
            match generate_variants(t) {
                Ok(variants) => {
                    out.push((*t).clone());
                    out.extend(variants);
                    taken += 1;
                }
                Err(e) => log::debug!("skipping {}: {e}", t.id),
            }
        }
        if taken < per_relation {
            return Err(Error::Shortfall {
                relation: relation.to_string(),
                needed: per_relation,
                available: taken,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotator_a: String,
    pub annotator_b: String,
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    /// Rows are annotator A's labels, columns B's, in Valid, Invalid,
    /// Ambiguous order.
    pub confusion: Vec<Vec<u64>>,
    pub n_items: u64,
}

/// Latest label per (annotator, triple).
pub type LabelIndex = BTreeMap<(String, String), AnnotationRecord>;

/// Folds records so that the latest timestamp wins; among equal timestamps
/// the later record wins.
pub fn resolve(records: impl IntoIterator<Item = AnnotationRecord>) -> LabelIndex {
    let mut index = LabelIndex::new();
    for r in records {
        let key = (r.annotator_id.clone(), r.triple_id.clone());
        match index.get(&key) {
            Some(old) if old.timestamp > r.timestamp => {}
            _ => {
                index.insert(key, r);
            }
        }
    }
    index
}

fn labels_of<'a>(index: &'a LabelIndex, annotator: &str) -> HashMap<&'a str, ValidityLabel> {
    index
        .values()
        .filter(|r| r.annotator_id == annotator)
        .map(|r| (r.triple_id.as_str(), r.label))
        .collect()
}

/// Cohen's kappa between two annotators over the items both labeled.
pub fn agreement(index: &LabelIndex, a: &str, b: &str) -> Result<AgreementReport> {
    let la = labels_of(index, a);
    let lb = labels_of(index, b);
    let mut m = Confusion::new(3);
    for (id, x) in &la {
        if let Some(y) = lb.get(id) {
            m.add(x.index(), y.index());
        }
    }
    if m.total() == 0 {
        return Err(Error::EmptyOverlap(a.to_string(), b.to_string()));
    }
    Ok(AgreementReport {
        annotator_a: a.to_string(),
        annotator_b: b.to_string(),
        kappa: m.kappa(),
        observed_agreement: m.observed_agreement(),
        expected_agreement: m.expected_agreement(),
        n_items: m.total(),
        confusion: m.counts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdjudicationPolicy {
    /// Keep agreed items; disagreements are quarantined.
    AgreeOnly,
    /// Disagreements go to `adjudicator`, whose label wins.
    ThirdPass { adjudicator: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjudication {
    pub gold: Vec<LabeledTriple>,
    /// Disagreements dropped under AGREE_ONLY.
    pub quarantined: Vec<String>,
    /// Disagreements still waiting for the adjudicator.
    pub pending: Vec<String>,
    /// Items not labeled by both annotators.
    pub incomplete: Vec<String>,
}

/// Turns two annotators' labels into gold labels. With `strict`, any item
/// lacking a label from either annotator, or a pending adjudication, is an
/// error.
pub fn adjudicate(
    benchmark: &[Triple],
    index: &LabelIndex,
    (a, b): (&str, &str),
    policy: &AdjudicationPolicy,
    strict: bool,
) -> Result<Adjudication> {
    let la = labels_of(index, a);
    let lb = labels_of(index, b);
    let lc = match policy {
        AdjudicationPolicy::ThirdPass { adjudicator } => labels_of(index, adjudicator),
        AdjudicationPolicy::AgreeOnly => HashMap::new(),
    };
    let mut out = Adjudication::default();
    let mut sorted: Vec<&Triple> = benchmark.iter().collect();
    sorted.sort_by(|x, y| x.id.cmp(&y.id));
    for t in sorted {
        let id = t.id.as_str();
        let (Some(x), Some(y)) = (la.get(id), lb.get(id)) else {
            out.incomplete.push(t.id.clone());
            continue;
        };
        let label = if x == y {
            Some(*x)
        } else {
            match policy {
                AdjudicationPolicy::AgreeOnly => {
                    out.quarantined.push(t.id.clone());
                    None
                }
                AdjudicationPolicy::ThirdPass { .. } => {
                    let third = lc.get(id).copied();
                    if third.is_none() {
                        out.pending.push(t.id.clone());
                    }
                    third
                }
            }
        };
        if let Some(label) = label {
            out.gold.push(LabeledTriple::new(t.clone(), label, LabelSource::Gold));
        }
    }
    if strict && !(out.incomplete.is_empty() && out.pending.is_empty()) {
        return Err(Error::IncompleteAnnotation(format!(
            "{} item(s) lack both labels, {} await adjudication",
            out.incomplete.len(),
            out.pending.len()
        )));
    }
    Ok(out)
}

/// Items on which `a` and `b` disagree, by id.
pub fn disagreements(index: &LabelIndex, a: &str, b: &str) -> Vec<String> {
    let la = labels_of(index, a);
    let lb = labels_of(index, b);
    let mut ids: Vec<String> = la
        .iter()
        .filter(|(id, x)| lb.get(*id).is_some_and(|y| y != *x))
        .map(|(id, _)| id.to_string())
        .collect();
    ids.sort();
    ids
}

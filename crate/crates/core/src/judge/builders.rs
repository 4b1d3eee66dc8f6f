use std::collections::{BTreeSet, HashSet};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EventText, LabelSource, LabeledTriple, Relation, Source, Split, Triple, ValidityLabel};
use crate::error::{Error, Result};
use crate::llm::{bindings, render_template, ChatClient, ModelSettings, PromptTemplate};
use crate::rng::stream;
use crate::verbalizer::relation_phrase;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeTrainingSpec {
    pub sources: Vec<Source>,
    /// Records per relation and label, summed over sources.
    pub per_relation_per_label: usize,
    pub seed: u64,
}

impl JudgeTrainingSpec {
    pub fn total(&self) -> usize {
        self.per_relation_per_label * Relation::ALL.len() * ValidityLabel::ALL.len()
    }

    /// Per-source quota for one relation: an even split across the selected
    /// sources, any remainder going to the first.
    fn quotas(&self) -> Vec<(Source, usize)> {
        let mut sources: Vec<Source> = self.sources.clone();
        sources.sort_by_key(|s| s.as_str());
        sources.dedup();
        let n = sources.len().max(1);
        let base = self.per_relation_per_label / n;
        let extra = self.per_relation_per_label % n;
        sources
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, base + usize::from(i < extra)))
            .collect()
    }
}

fn originals(pool: &[Triple], source: Source) -> impl Iterator<Item = &Triple> {
    pool.iter()
        .filter(move |t| t.source == source && t.is_original() && t.split == Split::Train)
}

fn candidates(pool: &[Triple], source: Source, relation: Relation) -> Vec<&Triple> {
    let mut c: Vec<&Triple> = originals(pool, source).filter(|t| t.relation == relation).collect();
    c.sort_by(|a, b| a.id.cmp(&b.id));
    c.dedup_by(|a, b| a.id == b.id);
    c
}

fn shortfall(relation: Relation, source: Source, needed: usize, available: usize) -> Error {
    Error::Shortfall {
        relation: format!("{relation} ({source})"),
        needed,
        available,
    }
}

fn synthetic(triple: Triple, label: ValidityLabel) -> LabeledTriple {
    LabeledTriple::new(triple, label, LabelSource::Synthetic)
}

/// Samples source triples as Valid examples.
pub fn build_valid_set(pool: &[Triple], spec: &JudgeTrainingSpec) -> Result<Vec<LabeledTriple>> {
    let mut out = Vec::new();
    for relation in Relation::ALL {
        for (source, k) in spec.quotas() {
            let c = candidates(pool, source, relation);
            if c.len() < k {
                return Err(shortfall(relation, source, k, c.len()));
            }
            let mut rng = stream(spec.seed, &format!("valid/{source}/{relation}"));
            let mut picked = index::sample(&mut rng, c.len(), k).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| synthetic(c[i].clone(), ValidityLabel::Valid)));
        }
    }
    Ok(out)
}

type ContentKey = (Relation, String, String);

fn existing_keys(pool: &[Triple]) -> HashSet<ContentKey> {
    pool.iter()
        .map(|t| (t.relation, t.head.text().to_string(), t.tail.text().to_string()))
        .collect()
}

/// Distinct values in first-seen order of the id-sorted pool.
fn distinct<'a>(items: impl Iterator<Item = &'a EventText>) -> Vec<EventText> {
    let mut seen = BTreeSet::new();
    items
        .filter(|e| seen.insert(e.text().to_string()))
        .cloned()
        .collect()
}

fn sorted_originals(pool: &[Triple], source: Source) -> Vec<&Triple> {
    let mut v: Vec<&Triple> = originals(pool, source).collect();
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

/// Pairs random if-events with random then-events of a relation, keeping
/// only combinations absent from the pool, as Ambiguous examples.
pub fn build_ambiguous_set(pool: &[Triple], spec: &JudgeTrainingSpec) -> Result<Vec<LabeledTriple>> {
    let mut existing = existing_keys(pool);
    let mut out = Vec::new();
    for relation in Relation::ALL {
        for (source, k) in spec.quotas() {
            let sorted = sorted_originals(pool, source);
            let heads = distinct(sorted.iter().map(|t| &t.head));
            let tails = distinct(sorted.iter().filter(|t| t.relation == relation).map(|t| &t.tail));
            if k > 0 && (heads.is_empty() || tails.is_empty()) {
                return Err(shortfall(relation, source, k, 0));
            }
            let mut rng = stream(spec.seed, &format!("ambiguous/{source}/{relation}"));
            let budget = 1000 + 50 * k;
            let mut made = 0;
            let mut attempts = 0;
            while made < k {
                if attempts == budget {
                    return Err(Error::RecombinationExhausted { relation, attempts });
                }
                attempts += 1;
                let head = &heads[rng.random_range(0..heads.len())];
                let tail = &tails[rng.random_range(0..tails.len())];
                let key = (relation, head.text().to_string(), tail.text().to_string());
                if !existing.insert(key) {
                    continue;
                }
                let t = Triple::original(Source::Generated, Split::Train, head.clone(), relation, tail.clone());
                out.push(synthetic(t, ValidityLabel::Ambiguous));
                made += 1;
            }
        }
    }
    Ok(out)
}

fn clean_generation(raw: &str) -> String {
    let line = raw.trim().lines().next().unwrap_or("").trim();
    let line = line
        .split_once(':')
        .filter(|(lead, _)| lead.to_lowercase().contains("event") || lead.to_lowercase().contains("then"))
        .map_or(line, |(_, rest)| rest.trim());
    let line = line.trim_start_matches("...").trim();
    line.trim_end_matches('.').trim().trim_matches('"').trim().to_string()
}

/// Asks the backend for then-events that contradict commonsense and labels
/// the resulting triples Invalid. Empty or colliding generations are
/// discarded and another if-event is drawn.
pub fn build_invalid_set(
    pool: &[Triple],
    spec: &JudgeTrainingSpec,
    client: &ChatClient,
    template: &PromptTemplate,
    settings: &ModelSettings,
) -> Result<Vec<LabeledTriple>> {
    let mut existing = existing_keys(pool);
    let mut out = Vec::new();
    for relation in Relation::ALL {
        for (source, k) in spec.quotas() {
            if k == 0 {
                continue;
            }
            let sorted = sorted_originals(pool, source);
            let mut heads = distinct(sorted.iter().map(|t| &t.head));
            if heads.is_empty() {
                return Err(shortfall(relation, source, k, 0));
            }
            let mut rng = stream(spec.seed, &format!("invalid/{source}/{relation}"));
            heads.shuffle(&mut rng);
            let mut queue = heads.into_iter();
            let mut made = 0;
            let mut attempts = 0;
            let mut last_event = String::new();
            while made < k {
                let batch: Vec<EventText> = queue.by_ref().take(k - made).collect();
                if batch.is_empty() {
                    return Err(Error::GenerationRejected {
                        event: last_event,
                        attempts,
                    });
                }
                let requests = batch
                    .iter()
                    .map(|head| {
                        let phrase = relation_phrase(relation, head);
                        render_template(
                            template,
                            &bindings([("event", head.text()), ("relation", phrase.as_str())]),
                            settings,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (head, response) in batch.into_iter().zip(client.complete_many(&requests)) {
                    attempts += 1;
                    let tail = clean_generation(&response?.content);
                    last_event = head.text().to_string();
                    if tail.is_empty() {
                        log::debug!("empty generation for `{}`, redrawing", head.text());
                        continue;
                    }
                    let key = (relation, head.text().to_string(), tail.clone());
                    if !existing.insert(key) {
                        continue;
                    }
                    let t = Triple::original(
                        Source::Generated,
                        Split::Train,
                        head,
                        relation,
                        EventText::affirmative(&tail)?,
                    );
                    out.push(synthetic(t, ValidityLabel::Invalid));
                    made += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Valid, Ambiguous and Invalid sets concatenated in that order.
pub fn build_training_set(
    pool: &[Triple],
    spec: &JudgeTrainingSpec,
    client: &ChatClient,
    template: &PromptTemplate,
    settings: &ModelSettings,
) -> Result<Vec<LabeledTriple>> {
    let mut out = build_valid_set(pool, spec)?;
    out.extend(build_ambiguous_set(pool, spec)?);
    out.extend(build_invalid_set(pool, spec, client, template, settings)?);
    Ok(out)
}

/// Fails when any training record shares an id with the benchmark.
pub fn check_disjoint(training: &[LabeledTriple], benchmark: &[Triple]) -> Result<()> {
    let ids: HashSet<&str> = benchmark.iter().map(|t| t.id.as_str()).collect();
    let overlap = training
        .iter()
        .filter(|t| ids.contains(t.triple.id.as_str()))
        .count();
    if overlap > 0 {
        Err(Error::Overlap(overlap))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quota_split() {
        let both = JudgeTrainingSpec {
            sources: vec![Source::Anion, Source::Atomic],
            per_relation_per_label: 200,
            seed: 1,
        };
        assert_eq!(both.quotas(), vec![(Source::Anion, 100), (Source::Atomic, 100)]);
        assert_eq!(both.total(), 5400);
        let one = JudgeTrainingSpec {
            sources: vec![Source::Atomic],
            ..both
        };
        assert_eq!(one.quotas(), vec![(Source::Atomic, 200)]);
    }

    #[test]
    fn generation_cleanup() {
        assert_eq!(clean_generation("to starve forever"), "to starve forever");
        assert_eq!(clean_generation("Then event: to starve forever.\nextra"), "to starve forever");
        assert_eq!(clean_generation("  \"to fly\" "), "to fly");
        assert_eq!(clean_generation("   "), "");
    }
}

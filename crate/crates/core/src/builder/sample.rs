use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{jsonl, LabelSource, LabeledTriple, Source, Triple, ValidityLabel, Variant};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::verbalizer::verbalize;

fn root(t: &Triple) -> &str {
    t.parent_id.as_deref().unwrap_or(&t.id)
}

fn sample_sorted<'a, T>(items: &'a [T], k: usize, seed: u64, purpose: &str) -> Vec<&'a T> {
    let mut rng = stream(seed, purpose);
    let mut picked = index::sample(&mut rng, items.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &items[i]).collect()
}

/// A non-negated corpus the same size as `contrastive`.
///
/// For each source, as many Valid triples as the contrastive corpus holds
/// are drawn from that source's originals; the remainder is drawn from the
/// synthetic Invalid pool. Output is ordered by id.
pub fn build_baseline(
    originals: &[Triple],
    invalid_pool: &[LabeledTriple],
    contrastive: &[LabeledTriple],
    seed: u64,
) -> Result<Vec<LabeledTriple>> {
    let mut out = Vec::with_capacity(contrastive.len());
    let mut valid_total = 0;
    for source in [Source::Atomic, Source::Anion, Source::Generated] {
        let need = contrastive
            .iter()
            .filter(|t| t.triple.source == source && t.label == ValidityLabel::Valid)
            .count();
        if need == 0 {
            continue;
        }
        let mut candidates: Vec<&Triple> = originals
            .iter()
            .filter(|t| t.source == source && t.is_original())
            .collect();
        candidates.sort_by(|a, b| a.id.cmp(&b.id));
        candidates.dedup_by(|a, b| a.id == b.id);
        if candidates.len() < need {
            return Err(Error::Shortfall {
                relation: format!("{source} originals"),
                needed: need,
                available: candidates.len(),
            });
        }
        for t in sample_sorted(&candidates, need, seed, &format!("baseline/valid/{source}")) {
            out.push(LabeledTriple::new((*t).clone(), ValidityLabel::Valid, LabelSource::Synthetic));
        }
        valid_total += need;
    }
    let need = contrastive.len() - valid_total;
    let mut pool: Vec<&LabeledTriple> = invalid_pool
        .iter()
        .filter(|t| t.label == ValidityLabel::Invalid)
        .collect();
    pool.sort_by(|a, b| a.triple.id.cmp(&b.triple.id));
    pool.dedup_by(|a, b| a.triple.id == b.triple.id);
    if pool.len() < need {
        return Err(Error::Shortfall {
            relation: "invalid pool".into(),
            needed: need,
            available: pool.len(),
        });
    }
    out.extend(
        sample_sorted(&pool, need, seed, "baseline/invalid")
            .into_iter()
            .map(|t| (*t).clone()),
    );
    out.sort_by(|a, b| a.triple.id.cmp(&b.triple.id));
    Ok(out)
}

/// Originals together with their `variant` members. Originals without such
/// a member are dropped; `Variant::Orig` keeps originals only.
pub fn subset_by_variant(corpus: &[LabeledTriple], variant: Variant) -> Vec<LabeledTriple> {
    let roots: HashSet<&str> = corpus
        .iter()
        .filter(|t| t.triple.variant == variant)
        .map(|t| root(&t.triple))
        .collect();
    corpus
        .iter()
        .filter(|t| {
            t.triple.variant == variant || (t.triple.is_original() && roots.contains(t.triple.id.as_str()))
        })
        .cloned()
        .collect()
}

/// Draws whole groups per source until the triple count is as close to
/// `n_per_source` as whole groups allow. Input order is preserved.
pub fn sample_subset(corpus: &[LabeledTriple], n_per_source: usize, seed: u64) -> Result<Vec<LabeledTriple>> {
    let mut sizes: BTreeMap<&str, (Source, usize)> = BTreeMap::new();
    for t in corpus {
        sizes.entry(root(&t.triple)).or_insert((t.triple.source, 0)).1 += 1;
    }
    let mut chosen: HashSet<&str> = HashSet::new();
    for source in [Source::Atomic, Source::Anion, Source::Generated] {
        let mut groups: Vec<(&str, usize)> = sizes
            .iter()
            .filter(|(_, (s, _))| *s == source)
            .map(|(r, (_, n))| (*r, *n))
            .collect();
        if groups.is_empty() {
            continue;
        }
        let available: usize = groups.iter().map(|g| g.1).sum();
        if n_per_source > available {
            return Err(Error::Shortfall {
                relation: format!("{source} subset"),
                needed: n_per_source,
                available,
            });
        }
        groups.shuffle(&mut stream(seed, &format!("subset/{source}")));
        let mut best = (n_per_source, 0);
        let mut running = 0;
        for (i, (_, n)) in groups.iter().enumerate() {
            running += n;
            let gap = running.abs_diff(n_per_source);
            if gap < best.0 {
                best = (gap, i + 1);
            }
        }
        chosen.extend(groups[..best.1].iter().map(|g| g.0));
    }
    Ok(corpus
        .iter()
        .filter(|t| chosen.contains(root(&t.triple)))
        .cloned()
        .collect())
}

/// Replaces every label with a fair coin flip between Valid and Invalid.
pub fn randomize_labels(corpus: &[LabeledTriple], seed: u64) -> Vec<LabeledTriple> {
    let mut rng = stream(seed, "random-labels");
    corpus
        .iter()
        .map(|t| {
            let label = if rng.random_bool(0.5) {
                ValidityLabel::Valid
            } else {
                ValidityLabel::Invalid
            };
            LabeledTriple::new(t.triple.clone(), label, LabelSource::Random)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

/// Instruction records ordered by triple id.
pub fn training_records(corpus: &[LabeledTriple], instruction: &str) -> Result<Vec<TrainingRecord>> {
    let mut sorted: Vec<&LabeledTriple> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.triple.id.cmp(&b.triple.id));
    sorted
        .into_iter()
        .map(|t| {
            if t.label == ValidityLabel::Ambiguous {
                return Err(Error::ExportRejected {
                    id: t.triple.id.clone(),
                    label: t.label,
                });
            }
            Ok(TrainingRecord {
                instruction: instruction.to_string(),
                input: verbalize(&t.triple).text,
                output: t.label.to_string(),
            })
        })
        .collect()
}

/// Writes the training file and returns the number of records.
pub fn export_instruction_jsonl(corpus: &[LabeledTriple], instruction: &str, path: &Path) -> Result<usize> {
    let records = training_records(corpus, instruction)?;
    jsonl::write_lines(path, &records)?;
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventText, Relation, Split};

    fn orig(i: usize, source: Source) -> Triple {
        let head = match source {
            Source::Anion => EventText::negated(&format!("PersonX does not do thing {i}")),
            _ => EventText::affirmative(&format!("PersonX does thing {i}")),
        };
        Triple::original(source, Split::Train, head.unwrap(), Relation::XWant, EventText::affirmative("to rest").unwrap())
    }

    fn lt(t: Triple, l: ValidityLabel) -> LabeledTriple {
        LabeledTriple::new(t, l, LabelSource::Synthetic)
    }

    #[test]
    fn baseline_mirrors_size() {
        let originals: Vec<_> = (0..20).map(|i| orig(i, Source::Atomic)).collect();
        let pool: Vec<_> = (100..120)
            .map(|i| {
                let mut t = orig(i, Source::Generated);
                t.source = Source::Generated;
                lt(t, ValidityLabel::Invalid)
            })
            .collect();
        let contrastive = vec![
            lt(originals[0].clone(), ValidityLabel::Valid),
            lt(originals[1].clone(), ValidityLabel::Valid),
            lt(originals[2].clone(), ValidityLabel::Invalid),
        ];
        let b = build_baseline(&originals, &pool, &contrastive, 7).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.iter().filter(|t| t.label == ValidityLabel::Valid).count(), 2);
        assert_eq!(b, build_baseline(&originals, &pool, &contrastive, 7).unwrap());
        assert!(matches!(
            build_baseline(&originals, &pool[..0], &contrastive, 7),
            Err(Error::Shortfall { needed: 1, available: 0, .. })
        ));
    }

    #[test]
    fn random_labels_are_seeded() {
        let corpus: Vec<_> = (0..200).map(|i| lt(orig(i, Source::Atomic), ValidityLabel::Valid)).collect();
        let a = randomize_labels(&corpus, 1);
        assert_eq!(a, randomize_labels(&corpus, 1));
        let flipped = a.iter().filter(|t| t.label == ValidityLabel::Invalid).count();
        assert!((60..=140).contains(&flipped), "{flipped}");
        assert_ne!(
            a.iter().map(|t| t.label).collect::<Vec<_>>(),
            randomize_labels(&corpus, 2).iter().map(|t| t.label).collect::<Vec<_>>()
        );
        assert!(a.iter().all(|t| t.label_source == LabelSource::Random));
        assert!(randomize_labels(&[], 1).is_empty());
    }

    #[test]
    fn export_rejects_ambiguous() {
        let corpus = vec![lt(orig(0, Source::Atomic), ValidityLabel::Ambiguous)];
        assert!(matches!(training_records(&corpus, "x"), Err(Error::ExportRejected { .. })));
    }

    #[test]
    fn export_sorted_and_fixed_keys() {
        let dir = tempfile::tempdir().unwrap();
        let corpus: Vec<_> = (0..3).map(|i| lt(orig(i, Source::Atomic), ValidityLabel::Valid)).collect();
        let path = dir.path().join("train.jsonl");
        assert_eq!(export_instruction_jsonl(&corpus, "Decide.", &path).unwrap(), 3);
        let first = std::fs::read(&path).unwrap();
        let mut reversed = corpus.clone();
        reversed.reverse();
        export_instruction_jsonl(&reversed, "Decide.", &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.starts_with("{\"instruction\":\"Decide.\",\"input\":\"If ")));
    }
}

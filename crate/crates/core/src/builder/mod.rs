//! Corpus assembly: judging generated triples, statistics, contrastive
//! selection, baselines, ablation subsets and training-file export.

mod sample;
mod select;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{jsonl, CanonicalRecord, Form, LabelSource, LabeledTriple, Source, Triple, ValidityLabel};
use crate::error::{Error, Result};
use crate::judge::JudgeBackend;

pub use sample::{
    build_baseline, export_instruction_jsonl, randomize_labels, sample_subset, subset_by_variant,
    training_records, TrainingRecord,
};
pub use select::{
    anion_pairs, atomic_pattern, flatten_anion, flatten_atomic, group_variants, select_contrastive_anion,
    select_contrastive_atomic, VariantGroup,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelOptions {
    /// Extra attempts for a triple whose first verdict failed.
    pub retries: u32,
    /// Share of the input allowed to end up quarantined before aborting.
    pub max_quarantine_fraction: f64,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions {
            retries: 2,
            max_quarantine_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    #[serde(flatten)]
    pub triple: CanonicalRecord,
    pub error: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LabelingOutcome {
    pub labeled: Vec<LabeledTriple>,
    pub quarantined: Vec<QuarantineRecord>,
}

/// Judges every triple once. Triples whose verdict keeps failing are set
/// aside in `quarantined` rather than dropped.
pub fn label_corpus(
    triples: &[Triple],
    backend: &dyn JudgeBackend,
    options: LabelOptions,
) -> Result<LabelingOutcome> {
    let source = LabelSource::Judge(backend.id());
    let mut results = backend.judge_many(triples);
    for _ in 0..options.retries {
        let failed: Vec<usize> = (0..results.len()).filter(|&i| results[i].is_err()).collect();
        if failed.is_empty() {
            break;
        }
        let retry: Vec<Triple> = failed.iter().map(|&i| triples[i].clone()).collect();
        for (i, r) in failed.into_iter().zip(backend.judge_many(&retry)) {
            results[i] = r;
        }
    }
    let mut outcome = LabelingOutcome::default();
    for (t, r) in triples.iter().zip(results) {
        match r {
            Ok(v) => outcome
                .labeled
                .push(LabeledTriple::new(t.clone(), v.label, source.clone())),
            Err(e) => outcome.quarantined.push(QuarantineRecord {
                triple: t.into(),
                error: e.kind().to_string(),
                reason: e.to_string(),
            }),
        }
    }
    let limit = (options.max_quarantine_fraction * triples.len() as f64).floor() as usize;
    if outcome.quarantined.len() > limit {
        return Err(Error::LabelingAborted {
            quarantined: outcome.quarantined.len(),
            total: triples.len(),
            limit,
        });
    }
    Ok(outcome)
}

pub fn write_quarantine(path: &Path, records: &[QuarantineRecord]) -> Result<()> {
    jsonl::write_lines(path, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    /// `total` or a triple form such as `<¬A,R,B>`.
    pub column: String,
    pub total: u64,
    /// Counts in Valid, Invalid, Ambiguous order.
    pub counts: Vec<u64>,
    /// Column percentages in the same order; all 0 for an empty column.
    pub percent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsBlock {
    pub name: String,
    pub columns: Vec<ColumnStats>,
}

/// Label distribution per triple form, one block per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub blocks: Vec<StatsBlock>,
}

fn column(name: &str, labels: impl Iterator<Item = ValidityLabel>) -> ColumnStats {
    let mut counts = vec![0u64; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    let total: u64 = counts.iter().sum();
    let percent = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
        .collect();
    ColumnStats {
        column: name.to_string(),
        total,
        counts,
        percent,
    }
}

fn block(name: &str, labeled: &[&LabeledTriple]) -> StatsBlock {
    let mut columns = vec![column("total", labeled.iter().map(|t| t.label))];
    for form in Form::ALL {
        columns.push(column(
            form.header(),
            labeled.iter().filter(|t| t.triple.form() == form).map(|t| t.label),
        ));
    }
    StatsBlock {
        name: name.to_string(),
        columns,
    }
}

pub fn corpus_stats(labeled: &[LabeledTriple]) -> CorpusStats {
    let mut blocks = Vec::new();
    let sources: Vec<Source> = [Source::Atomic, Source::Anion, Source::Generated]
        .into_iter()
        .filter(|s| labeled.iter().any(|t| t.triple.source == *s))
        .collect();
    for s in &sources {
        let members: Vec<_> = labeled.iter().filter(|t| t.triple.source == *s).collect();
        blocks.push(block(s.as_str(), &members));
    }
    if sources.len() != 1 {
        blocks.push(block("ALL", &labeled.iter().collect::<Vec<_>>()));
    }
    CorpusStats { blocks }
}

impl CorpusStats {
    pub fn block(&self, name: &str) -> Option<&StatsBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Tab-separated table: forms as columns, labels as rows, count and
    /// percentage side by side.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("dataset\trow");
        for name in std::iter::once("total").chain(Form::ALL.iter().map(|f| f.header())) {
            let _ = write!(s, "\t{name}\t%");
        }
        s.push('\n');
        for b in &self.blocks {
            let _ = write!(s, "{}\tall", b.name);
            for c in &b.columns {
                let pct = if c.total == 0 { 0.0 } else { 100.0 };
                let _ = write!(s, "\t{}\t{pct:.1}", c.total);
            }
            s.push('\n');
            for label in ValidityLabel::ALL {
                let _ = write!(s, "{}\t{label}", b.name);
                for c in &b.columns {
                    let i = label.index();
                    let _ = write!(s, "\t{}\t{:.1}", c.counts[i], c.percent[i]);
                }
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventText, Relation, Split};
    use crate::judge::{JudgeVerdict, MockOracle};

    fn triples(n: usize) -> Vec<Triple> {
        (0..n)
            .map(|i| {
                Triple::original(
                    Source::Atomic,
                    Split::Train,
                    EventText::affirmative(&format!("PersonX plays game {i}")).unwrap(),
                    Relation::XReact,
                    EventText::affirmative("happy").unwrap(),
                )
            })
            .collect()
    }

    struct Stubborn {
        bad: String,
    }

    impl JudgeBackend for Stubborn {
        fn id(&self) -> String {
            "stubborn".into()
        }
        fn judge(&self, t: &Triple) -> Result<JudgeVerdict> {
            if t.id == self.bad {
                return Err(Error::UnparseableVerdict("hmm".into()));
            }
            MockOracle.judge(t)
        }
    }

    #[test]
    fn labels_every_triple() {
        let out = label_corpus(&triples(4), &MockOracle, LabelOptions::default()).unwrap();
        assert_eq!(out.labeled.len(), 4);
        assert!(out.quarantined.is_empty());
        assert_eq!(out.labeled[0].label_source, LabelSource::Judge("mock-oracle".into()));
    }

    #[test]
    fn persistent_failures_are_quarantined() {
        let ts = triples(4);
        let judge = Stubborn { bad: ts[2].id.clone() };
        let opts = LabelOptions {
            retries: 2,
            max_quarantine_fraction: 0.25,
        };
        let out = label_corpus(&ts, &judge, opts).unwrap();
        assert_eq!(out.labeled.len(), 3);
        assert_eq!(out.quarantined.len(), 1);
        assert_eq!(out.quarantined[0].triple.id, ts[2].id);
        assert_eq!(out.quarantined[0].error, "UnparseableVerdict");

        let strict = LabelOptions {
            max_quarantine_fraction: 0.0,
            ..opts
        };
        let err = label_corpus(&ts, &judge, strict).unwrap_err();
        assert!(matches!(err, Error::LabelingAborted { quarantined: 1, total: 4, limit: 0 }));
    }

    fn labeled(labels: &[ValidityLabel]) -> Vec<LabeledTriple> {
        triples(labels.len())
            .into_iter()
            .zip(labels)
            .map(|(t, &l)| LabeledTriple::new(t, l, LabelSource::Synthetic))
            .collect()
    }

    #[test]
    fn stats_percentages() {
        use ValidityLabel::*;
        let s = corpus_stats(&labeled(&[Valid, Valid, Valid, Invalid]));
        let b = s.block("ATOMIC").unwrap();
        assert_eq!(b.columns[1].column, "<A,R,B>");
        assert_eq!(b.columns[1].percent, vec![75.0, 25.0, 0.0]);
        assert_eq!(b.columns[2].percent, vec![0.0, 0.0, 0.0]);
        assert_eq!(s.blocks.len(), 1);
        let tsv = s.to_tsv();
        assert!(tsv.contains("ATOMIC\tValid\t3\t75.0\t3\t75.0\t0\t0.0"), "{tsv}");

        let all_valid = corpus_stats(&labeled(&[Valid; 10]));
        assert_eq!(all_valid.blocks[0].columns[1].percent[0], 100.0);
        let empty = corpus_stats(&[]);
        assert_eq!(empty.blocks.len(), 1);
        assert!(empty.blocks[0].columns.iter().all(|c| c.total == 0 && c.percent == vec![0.0; 3]));
    }
}

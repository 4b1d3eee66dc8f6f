//! Scoring prediction files against gold benchmarks.
//!
//! All rates in an [`EvalReport`] are percentages in `[0, 100]`.

mod inference;
mod mcnemar;
mod score;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::jsonl;
use crate::error::{Error, Result};

pub use inference::{
    condaqa_items, nevir_items, parse_prediction, record_items, run_inference, AnswerFormat, InferenceItem,
    InferenceJob, InferenceSummary,
};
pub use mcnemar::{binomial_upper_tail, mcnemar, mcnemar_counts, mcnemar_predictions, McNemar, McNemarMethod};
pub use score::{
    score_classification, score_condaqa, score_nevir, CondaQAInstance, EditType, GoldRecord, NevIRInstance,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
}

impl PredictionRecord {
    pub fn new(instance_id: &str, prediction: &str) -> Self {
        PredictionRecord {
            instance_id: instance_id.to_string(),
            prediction: prediction.to_string(),
            raw_output: None,
        }
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    Ok(jsonl::read_records(path)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_predictions(path: &Path, preds: &[PredictionRecord]) -> Result<()> {
    jsonl::write_lines(path, preds)
}

/// Reads any JSONL gold file.
pub fn read_gold<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(jsonl::read_records(path)?.into_iter().map(|(_, r)| r).collect())
}

/// Indexes predictions by instance id, rejecting duplicates.
pub fn index_predictions(preds: &[PredictionRecord]) -> Result<BTreeMap<&str, &str>> {
    let mut out = BTreeMap::new();
    for p in preds {
        if out.insert(p.instance_id.as_str(), p.prediction.as_str()).is_some() {
            return Err(Error::DuplicatePrediction(p.instance_id.clone()));
        }
    }
    Ok(out)
}

/// Case-folds a closed-set label and strips surrounding brackets, quotes and
/// punctuation. Inner whitespace is collapsed.
pub fn normalize_label(text: &str) -> String {
    let trimmed = text.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_'));
    trimmed
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Normalizes a free-form answer: case folding, apostrophes dropped, other
/// punctuation and brackets turned into spaces, whitespace collapsed. Every
/// spelling of "don't know" becomes `don't know`.
pub fn normalize_answer(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !matches!(c, '\'' | '’' | '`'))
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let joined = cleaned.split_whitespace().collect::<Vec<_>>().join(" ");
    match joined.as_str() {
        "dont know" | "do not know" | "idk" => "don't know".to_string(),
        _ => joined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CueCategory {
    Verbal,
    Affixal,
    Implicit,
    Diminisher,
    Other,
}

impl std::fmt::Display for CueCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CueCategory::Verbal => "VERBAL",
            CueCategory::Affixal => "AFFIXAL",
            CueCategory::Implicit => "IMPLICIT",
            CueCategory::Diminisher => "DIMINISHER",
            CueCategory::Other => "OTHER",
        })
    }
}

const VERBAL_CUES: &[&str] = &[
    "not", "n't", "never", "no", "none", "nothing", "nobody", "nowhere", "neither", "nor", "cannot",
];
const IMPLICIT_CUES: &[&str] = &[
    "lack", "lacks", "lacked", "lacking", "without", "prevent", "prevents", "prevented", "preventing",
    "fail", "fails", "failed", "failing", "failure", "absence", "absent", "refuse", "refuses", "refused",
    "deny", "denies", "denied", "avoid", "avoids", "avoided", "except", "instead", "rather",
];
const DIMINISHER_CUES: &[&str] = &[
    "rarely", "barely", "few", "hardly", "seldom", "scarcely", "little", "less",
];
const NEG_PREFIXES: &[&str] = &["non", "dis", "un", "in", "im", "il", "ir"];
const NEG_SUFFIXES: &[&str] = &["lessness", "lessly", "less"];

fn categorize_token(token: &str) -> CueCategory {
    if VERBAL_CUES.contains(&token) || token.ends_with("n't") {
        return CueCategory::Verbal;
    }
    if IMPLICIT_CUES.contains(&token) {
        return CueCategory::Implicit;
    }
    if DIMINISHER_CUES.contains(&token) {
        return CueCategory::Diminisher;
    }
    let affixed = NEG_PREFIXES
        .iter()
        .any(|p| token.strip_prefix(p).is_some_and(|rest| rest.len() >= 3))
        || NEG_SUFFIXES
            .iter()
            .any(|s| token.strip_suffix(s).is_some_and(|rest| rest.len() >= 3));
    if affixed {
        CueCategory::Affixal
    } else {
        CueCategory::Other
    }
}

/// Assigns a negation cue to a coarse category by closed lexicon lookup.
/// Multi-word cues take the category of their first recognized token.
pub fn categorize_negation_cue(cue: &str) -> CueCategory {
    let lowered = cue.trim().to_lowercase().replace('’', "'");
    lowered
        .split(|c: char| c.is_whitespace() || c == '-' || c == '/')
        .map(|t| t.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\'')))
        .filter(|t| !t.is_empty())
        .map(categorize_token)
        .find(|c| *c != CueCategory::Other)
        .unwrap_or(CueCategory::Other)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// Denominator the rate was computed over.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub dimension: String,
    pub category: String,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub metric: String,
    pub baseline: f64,
    pub value: f64,
    /// `None` when the baseline value is zero.
    pub percent_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub n: usize,
    pub metrics: Vec<Metric>,
    pub breakdowns: Vec<Breakdown>,
    /// Predictions outside the task's answer space.
    pub invalid_outputs: usize,
    /// Gold items with no prediction.
    pub missing: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<Delta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<McNemar>,
    /// Per-unit correctness, keyed by instance or pair id.
    #[serde(default)]
    pub outcomes: BTreeMap<String, bool>,
}

fn rate(correct: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * correct as f64 / n as f64
    }
}

impl EvalReport {
    pub(crate) fn new(task: &str, n: usize) -> Self {
        EvalReport {
            task: task.to_string(),
            n,
            metrics: Vec::new(),
            breakdowns: Vec::new(),
            invalid_outputs: 0,
            missing: 0,
            delta: Vec::new(),
            significance: None,
            outcomes: BTreeMap::new(),
        }
    }

    pub(crate) fn push_metric(&mut self, name: &str, correct: usize, n: usize) {
        self.metrics.push(Metric {
            name: name.to_string(),
            value: rate(correct, n),
            n,
        });
    }

    pub(crate) fn push_breakdown(&mut self, dimension: &str, category: &str, correct: usize, n: usize) {
        self.breakdowns.push(Breakdown {
            dimension: dimension.to_string(),
            category: category.to_string(),
            n,
            accuracy: rate(correct, n),
        });
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    /// Fills in percent change against `baseline` for every shared metric and
    /// McNemar's test over the shared outcome units.
    pub fn compare_to(&mut self, baseline: &EvalReport) -> Result<()> {
        self.delta = self
            .metrics
            .iter()
            .filter_map(|m| {
                let base = baseline.metric(&m.name)?;
                Some(Delta {
                    metric: m.name.clone(),
                    baseline: base,
                    value: m.value,
                    percent_change: (base != 0.0).then(|| 100.0 * (m.value - base) / base),
                })
            })
            .collect();
        if !self.outcomes.is_empty() || !baseline.outcomes.is_empty() {
            self.significance = Some(mcnemar(&self.outcomes, &baseline.outcomes)?);
        }
        Ok(())
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task\t{}\nn\t{}", self.task, self.n);
        let _ = writeln!(out, "invalid_outputs\t{}\nmissing\t{}", self.invalid_outputs, self.missing);
        let _ = writeln!(out, "\nmetric\tvalue\tn");
        for m in &self.metrics {
            let _ = writeln!(out, "{}\t{:.2}\t{}", m.name, m.value, m.n);
        }
        if !self.breakdowns.is_empty() {
            let _ = writeln!(out, "\ndimension\tcategory\taccuracy\tn");
            for b in &self.breakdowns {
                let _ = writeln!(out, "{}\t{}\t{:.2}\t{}", b.dimension, b.category, b.accuracy, b.n);
            }
        }
        if !self.delta.is_empty() {
            let _ = writeln!(out, "\nmetric\tbaseline\tvalue\tdelta_pct");
            for d in &self.delta {
                let pct = d.percent_change.map_or("n/a".to_string(), |p| format!("{p:+.2}"));
                let _ = writeln!(out, "{}\t{:.2}\t{:.2}\t{}", d.metric, d.baseline, d.value, pct);
            }
        }
        if let Some(s) = &self.significance {
            let _ = writeln!(
                out,
                "\nmcnemar\tb={}\tc={}\tstatistic={:.4}\tp={:.6}\t{:?}",
                s.b, s.c, s.statistic, s.p_value, s.method
            );
        }
        out
    }

    pub fn write(&self, json_path: &Path, table_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(table_path, self.to_table()).map_err(|e| Error::io(table_path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cue_examples() {
        assert_eq!(categorize_negation_cue("not"), CueCategory::Verbal);
        assert_eq!(categorize_negation_cue("never"), CueCategory::Verbal);
        assert_eq!(categorize_negation_cue("doesn't"), CueCategory::Verbal);
        assert_eq!(categorize_negation_cue("unmyelinated"), CueCategory::Affixal);
        assert_eq!(categorize_negation_cue("dishonest"), CueCategory::Affixal);
        assert_eq!(categorize_negation_cue("careless"), CueCategory::Affixal);
        assert_eq!(categorize_negation_cue("lack"), CueCategory::Implicit);
        assert_eq!(categorize_negation_cue("Without"), CueCategory::Implicit);
        assert_eq!(categorize_negation_cue("rarely"), CueCategory::Diminisher);
        assert_eq!(categorize_negation_cue("few"), CueCategory::Diminisher);
        assert_eq!(categorize_negation_cue("xyzzy"), CueCategory::Other);
        assert_eq!(categorize_negation_cue(""), CueCategory::Other);
        assert_eq!(categorize_negation_cue("un"), CueCategory::Other);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_label("[entailment]"), "entailment");
        assert_eq!(normalize_label(" [Not_Entailment]. "), "not_entailment");
        assert_eq!(normalize_answer("[DON'T KNOW]"), "don't know");
        assert_eq!(normalize_answer("dont know"), "don't know");
        assert_eq!(normalize_answer("Yes."), "yes");
        assert_eq!(normalize_answer("  the  Red-Cross "), "the red cross");
    }

    #[test]
    fn duplicate_predictions() {
        let preds = vec![PredictionRecord::new("a", "x"), PredictionRecord::new("a", "y")];
        assert!(matches!(index_predictions(&preds), Err(Error::DuplicatePrediction(id)) if id == "a"));
    }

    #[test]
    fn delta_and_significance() {
        let mut base = EvalReport::new("t", 4);
        base.push_metric("accuracy", 2, 4);
        base.outcomes = [("a", true), ("b", true), ("c", false), ("d", false)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let mut run = EvalReport::new("t", 4);
        run.push_metric("accuracy", 3, 4);
        run.outcomes = base.outcomes.clone();
        run.outcomes.insert("c".into(), true);
        run.compare_to(&base).unwrap();
        assert_eq!(run.delta[0].percent_change, Some(50.0));
        let s = run.significance.clone().unwrap();
        assert_eq!((s.b, s.c), (1, 0));
        assert!(run.to_table().contains("+50.00"));
        run.outcomes.remove("a");
        assert!(matches!(run.compare_to(&base), Err(Error::CoverageError(_))));
    }
}

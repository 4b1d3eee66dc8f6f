use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{categorize_negation_cue, index_predictions, normalize_answer, normalize_label, EvalReport, PredictionRecord};
use crate::error::{Error, Result};

/// A closed-set gold item (NLI, CommonsenseQA). Any other fields, such as
/// `premise`, `hypothesis` or `cue`, are kept for prompting and breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub instance_id: String,
    pub gold: String,
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
}

impl GoldRecord {
    pub fn new(instance_id: &str, gold: &str) -> Self {
        GoldRecord {
            instance_id: instance_id.to_string(),
            gold: gold.to_string(),
            fields: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditType {
    Original,
    Paraphrase,
    Scope,
    Affirmative,
}

impl EditType {
    pub const ALL: [EditType; 4] = [
        EditType::Original,
        EditType::Paraphrase,
        EditType::Scope,
        EditType::Affirmative,
    ];

    fn name(self) -> &'static str {
        match self {
            EditType::Original => "ORIGINAL",
            EditType::Paraphrase => "PARAPHRASE",
            EditType::Scope => "SCOPE",
            EditType::Affirmative => "AFFIRMATIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondaQAInstance {
    pub instance_id: String,
    pub question_id: String,
    pub bundle_id: String,
    pub edit_type: EditType,
    pub gold_answer: String,
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
}

/// One NevIR pair. The gold ranking sends `query_1` to `doc_1` and `query_2`
/// to `doc_2`. Predictions are keyed `{pair_id}:q1` and `{pair_id}:q2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NevIRInstance {
    pub pair_id: String,
    pub query_1: String,
    pub query_2: String,
    pub doc_1: String,
    pub doc_2: String,
}

impl NevIRInstance {
    pub fn query_ids(&self) -> [String; 2] {
        [format!("{}:q1", self.pair_id), format!("{}:q2", self.pair_id)]
    }
}

fn unique_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<HashSet<&'a str>> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::ValidationError(format!("gold id `{id}` appears twice")));
        }
    }
    if seen.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(seen)
}

fn check_known(preds: &BTreeMap<&str, &str>, known: &HashSet<&str>) -> Result<()> {
    match preds.keys().find(|id| !known.contains(*id)) {
        Some(id) => Err(Error::UnknownInstance(id.to_string())),
        None => Ok(()),
    }
}

fn cue_of(fields: &BTreeMap<String, Value>) -> Option<&str> {
    fields.get("cue").and_then(Value::as_str)
}

#[derive(Default)]
struct Tally(BTreeMap<(String, String), (usize, usize)>);

impl Tally {
    fn add(&mut self, dimension: &str, category: &str, correct: bool) {
        let e = self.0.entry((dimension.to_string(), category.to_string())).or_default();
        e.0 += correct as usize;
        e.1 += 1;
    }

    fn into_report(self, report: &mut EvalReport) {
        for ((dimension, category), (correct, n)) in self.0 {
            report.push_breakdown(&dimension, &category, correct, n);
        }
    }
}

/// Accuracy of closed-set predictions. Predictions outside `label_set` are
/// wrong and tallied as invalid outputs; unanswered items are wrong and
/// tallied as missing.
pub fn score_classification(
    preds: &[PredictionRecord],
    gold: &[GoldRecord],
    label_set: &[&str],
) -> Result<EvalReport> {
    let known = unique_ids(gold.iter().map(|g| g.instance_id.as_str()))?;
    let index = index_predictions(preds)?;
    check_known(&index, &known)?;
    let labels: BTreeSet<String> = label_set.iter().map(|l| normalize_label(l)).collect();
    let mut report = EvalReport::new("classification", gold.len());
    let mut tally = Tally::default();
    let mut correct = 0;
    for g in gold {
        let truth = normalize_label(&g.gold);
        if !labels.contains(&truth) {
            return Err(Error::ValidationError(format!(
                "gold label `{}` of {} is outside the label set",
                g.gold, g.instance_id
            )));
        }
        let ok = match index.get(g.instance_id.as_str()) {
            None => {
                report.missing += 1;
                false
            }
            Some(p) => {
                let p = normalize_label(p);
                if !labels.contains(&p) {
                    report.invalid_outputs += 1;
                }
                p == truth
            }
        };
        correct += ok as usize;
        tally.add("gold", &truth, ok);
        if let Some(cue) = cue_of(&g.fields) {
            tally.add("cue", &categorize_negation_cue(cue).to_string(), ok);
        }
        report.outcomes.insert(g.instance_id.clone(), ok);
    }
    report.push_metric("accuracy", correct, gold.len());
    tally.into_report(&mut report);
    Ok(report)
}

/// CondaQA accuracy plus group consistency. A group is a
/// (question_id, bundle_id) pair holding one ORIGINAL and up to one of
/// each edit. Consistency-All counts groups with all four passages;
/// per-edit consistency counts groups holding ORIGINAL and that edit.
pub fn score_condaqa(preds: &[PredictionRecord], gold: &[CondaQAInstance]) -> Result<EvalReport> {
    let known = unique_ids(gold.iter().map(|g| g.instance_id.as_str()))?;
    let index = index_predictions(preds)?;
    check_known(&index, &known)?;
    let mut report = EvalReport::new("condaqa", gold.len());
    let mut tally = Tally::default();
    let mut groups: BTreeMap<(&str, &str), BTreeMap<EditType, bool>> = BTreeMap::new();
    let mut correct = 0;
    for g in gold {
        let ok = match index.get(g.instance_id.as_str()) {
            None => {
                report.missing += 1;
                false
            }
            Some(p) => {
                let p = normalize_answer(p);
                if p.is_empty() {
                    report.invalid_outputs += 1;
                }
                !p.is_empty() && p == normalize_answer(&g.gold_answer)
            }
        };
        correct += ok as usize;
        let slot = groups.entry((&g.question_id, &g.bundle_id)).or_default();
        if slot.insert(g.edit_type, ok).is_some() {
            return Err(Error::ValidationError(format!(
                "group ({}, {}) has two {} passages",
                g.question_id,
                g.bundle_id,
                g.edit_type.name()
            )));
        }
        tally.add("edit_type", g.edit_type.name(), ok);
        if let Some(cue) = cue_of(&g.fields) {
            tally.add("cue", &categorize_negation_cue(cue).to_string(), ok);
        }
        report.outcomes.insert(g.instance_id.clone(), ok);
    }
    if let Some((q, b)) = groups.iter().find(|(_, m)| !m.contains_key(&EditType::Original)).map(|(k, _)| k) {
        return Err(Error::ValidationError(format!("group ({q}, {b}) has no ORIGINAL passage")));
    }
    report.push_metric("accuracy", correct, gold.len());
    let complete: Vec<_> = groups.values().filter(|m| m.len() == 4).collect();
    report.push_metric(
        "consistency_all",
        complete.iter().filter(|m| m.values().all(|ok| *ok)).count(),
        complete.len(),
    );
    for (name, edit) in [
        ("consistency_par", EditType::Paraphrase),
        ("consistency_sco", EditType::Scope),
        ("consistency_aff", EditType::Affirmative),
    ] {
        let with_edit: Vec<_> = groups.values().filter_map(|m| Some((m[&EditType::Original], *m.get(&edit)?))).collect();
        report.push_metric(name, with_edit.iter().filter(|(o, e)| *o && *e).count(), with_edit.len());
    }
    tally.into_report(&mut report);
    Ok(report)
}

/// Reads a document choice out of a normalized prediction.
fn parse_doc(pred: &str) -> Option<u8> {
    match normalize_label(pred).replace(' ', "").as_str() {
        "doc1" | "document1" | "1" => Some(1),
        "doc2" | "document2" | "2" => Some(2),
        _ => None,
    }
}

/// NevIR pairwise accuracy: a pair counts only when both queries pick their
/// gold document.
pub fn score_nevir(preds: &[PredictionRecord], gold: &[NevIRInstance]) -> Result<EvalReport> {
    unique_ids(gold.iter().map(|g| g.pair_id.as_str()))?;
    let query_ids: Vec<[String; 2]> = gold.iter().map(NevIRInstance::query_ids).collect();
    let known: HashSet<&str> = query_ids.iter().flatten().map(String::as_str).collect();
    let index = index_predictions(preds)?;
    check_known(&index, &known)?;
    let mut report = EvalReport::new("nevir", gold.len());
    let (mut pairs, mut q1, mut q2) = (0, 0, 0);
    for (g, ids) in gold.iter().zip(&query_ids) {
        let mut hits = [false; 2];
        for (slot, id) in ids.iter().enumerate() {
            hits[slot] = match index.get(id.as_str()) {
                None => {
                    report.missing += 1;
                    false
                }
                Some(p) => match parse_doc(p) {
                    None => {
                        report.invalid_outputs += 1;
                        false
                    }
                    Some(doc) => doc as usize == slot + 1,
                },
            };
        }
        q1 += hits[0] as usize;
        q2 += hits[1] as usize;
        let both = hits[0] && hits[1];
        pairs += both as usize;
        report.outcomes.insert(g.pair_id.clone(), both);
    }
    report.push_metric("pairwise_accuracy", pairs, gold.len());
    report.push_metric("query_1_accuracy", q1, gold.len());
    report.push_metric("query_2_accuracy", q2, gold.len());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(id: &str, x: &str) -> PredictionRecord {
        PredictionRecord::new(id, x)
    }

    #[test]
    fn classification_examples() {
        let labels = ["entailment", "not_entailment"];
        let gold: Vec<_> = ["entailment", "entailment", "not_entailment", "not_entailment"]
            .iter()
            .enumerate()
            .map(|(i, g)| GoldRecord::new(&i.to_string(), g))
            .collect();
        let preds = vec![p("0", "[entailment]"), p("1", "entailment"), p("2", "[Not_Entailment]"), p("3", "maybe")];
        let r = score_classification(&preds, &gold, &labels).unwrap();
        assert_eq!(r.metric("accuracy"), Some(75.0));
        assert_eq!(r.invalid_outputs, 1);
        let r = score_classification(&preds[..3], &gold, &labels).unwrap();
        assert_eq!((r.missing, r.invalid_outputs), (1, 0));
        assert!(matches!(
            score_classification(&[p("9", "x")], &gold, &labels),
            Err(Error::UnknownInstance(_))
        ));
        assert!(matches!(score_classification(&[], &[], &labels), Err(Error::EmptyInput)));
    }

    fn condaqa(group: &str, edit: EditType, answer: &str) -> CondaQAInstance {
        CondaQAInstance {
            instance_id: format!("{group}-{}", edit.name()),
            question_id: group.to_string(),
            bundle_id: "b".into(),
            edit_type: edit,
            gold_answer: answer.into(),
            fields: BTreeMap::new(),
        }
    }

    #[test]
    fn condaqa_scope_error() {
        let gold: Vec<_> = EditType::ALL.iter().map(|e| condaqa("q", *e, "yes")).collect();
        let mut preds: Vec<_> = gold.iter().map(|g| p(&g.instance_id, "[YES]")).collect();
        let r = score_condaqa(&preds, &gold).unwrap();
        assert!(r.metrics.iter().all(|m| m.value == 100.0));
        preds[2].prediction = "no".into();
        let r = score_condaqa(&preds, &gold).unwrap();
        assert_eq!(r.metric("consistency_all"), Some(0.0));
        assert_eq!(r.metric("consistency_sco"), Some(0.0));
        assert_eq!(r.metric("consistency_par"), Some(100.0));
        assert_eq!(r.metric("consistency_aff"), Some(100.0));
        assert_eq!(r.metric("accuracy"), Some(75.0));
    }

    #[test]
    fn condaqa_validation() {
        let gold = vec![condaqa("q", EditType::Scope, "yes")];
        assert!(matches!(score_condaqa(&[], &gold), Err(Error::ValidationError(_))));
        let mut gold = vec![condaqa("q", EditType::Original, "yes"), condaqa("q", EditType::Original, "no")];
        gold[1].instance_id = "other".into();
        assert!(matches!(score_condaqa(&[], &gold), Err(Error::ValidationError(_))));
        let gold = vec![condaqa("q", EditType::Original, "Don't know")];
        let r = score_condaqa(&[p("q-ORIGINAL", "dont know")], &gold).unwrap();
        assert_eq!(r.metric("accuracy"), Some(100.0));
        let r = score_condaqa(&[p("q-ORIGINAL", "[DON'T KNOW]")], &gold).unwrap();
        assert_eq!(r.metric("accuracy"), Some(100.0));
    }

    fn pair(id: &str) -> NevIRInstance {
        NevIRInstance {
            pair_id: id.into(),
            query_1: "q".into(),
            query_2: "not q".into(),
            doc_1: "d1".into(),
            doc_2: "d2".into(),
        }
    }

    #[test]
    fn nevir_examples() {
        let gold = vec![pair("a"), pair("b")];
        let preds = vec![p("a:q1", "[Doc1]"), p("a:q2", "Doc2"), p("b:q1", "doc1"), p("b:q2", "[Doc1]")];
        let r = score_nevir(&preds, &gold).unwrap();
        assert_eq!(r.metric("pairwise_accuracy"), Some(50.0));
        assert_eq!(r.metric("query_2_accuracy"), Some(50.0));
        let inverted = vec![p("a:q1", "Doc2"), p("a:q2", "Doc1"), p("b:q1", "Doc2"), p("b:q2", "Doc1")];
        let r = score_nevir(&inverted, &gold).unwrap();
        assert!(r.metrics.iter().all(|m| m.value == 0.0));
        let r = score_nevir(&preds[..3], &gold).unwrap();
        assert_eq!(r.missing, 1);
    }
}

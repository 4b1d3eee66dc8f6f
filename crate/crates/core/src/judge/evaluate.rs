use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::JudgeVerdict;
use crate::corpus::{LabeledTriple, Relation, ValidityLabel};
use crate::error::{Error, Result};
use crate::metrics::{Confusion, Prf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: ValidityLabel,
    #[serde(flatten)]
    pub scores: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScores {
    pub relation: Relation,
    pub n: u64,
    pub accuracy: f64,
    /// F1 per label in Valid, Invalid, Ambiguous order.
    pub f1: Vec<f64>,
    pub macro_f1: f64,
}

/// Judge quality against gold labels. Rates are fractions in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeEvaluation {
    pub n: u64,
    pub accuracy: f64,
    pub per_label: Vec<LabelScore>,
    /// Unweighted mean over the three labels.
    pub overall: Prf,
    pub confusion: Confusion,
    pub per_relation: Vec<RelationScores>,
}

pub fn evaluate_judge(verdicts: &[JudgeVerdict], gold: &[LabeledTriple]) -> Result<JudgeEvaluation> {
    if verdicts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let gold: HashMap<&str, &LabeledTriple> = gold.iter().map(|g| (g.triple.id.as_str(), g)).collect();
    let mut seen = HashSet::new();
    let mut overall = Confusion::new(3);
    let mut by_relation: BTreeMap<Relation, Confusion> = BTreeMap::new();
    for v in verdicts {
        let g = gold
            .get(v.triple_id.as_str())
            .ok_or_else(|| Error::UnknownInstance(v.triple_id.clone()))?;
        if !seen.insert(v.triple_id.as_str()) {
            return Err(Error::DuplicatePrediction(v.triple_id.clone()));
        }
        overall.add(g.label.index(), v.label.index());
        by_relation
            .entry(g.triple.relation)
            .or_insert_with(|| Confusion::new(3))
            .add(g.label.index(), v.label.index());
    }
    let per_relation = Relation::ALL
        .iter()
        .filter_map(|r| by_relation.get(r).map(|m| (*r, m)))
        .map(|(relation, m)| RelationScores {
            relation,
            n: m.total(),
            accuracy: m.accuracy(),
            f1: (0..3).map(|c| m.prf(c).f1).collect(),
            macro_f1: m.macro_prf().f1,
        })
        .collect();
    Ok(JudgeEvaluation {
        n: overall.total(),
        accuracy: overall.accuracy(),
        per_label: ValidityLabel::ALL
            .iter()
            .map(|&label| LabelScore {
                label,
                scores: overall.prf(label.index()),
            })
            .collect(),
        overall: overall.macro_prf(),
        confusion: overall,
        per_relation,
    })
}

impl JudgeEvaluation {
    pub fn label(&self, label: ValidityLabel) -> Prf {
        self.per_label[label.index()].scores
    }

    /// Plain-text report: per-label rows, the overall row, then per-relation F1.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "label\tP\tR\tF1\tsupport");
        for l in &self.per_label {
            let p = l.scores;
            let _ = writeln!(s, "{}\t{:.3}\t{:.3}\t{:.3}\t{}", l.label, p.precision, p.recall, p.f1, p.support);
        }
        let o = self.overall;
        let _ = writeln!(s, "Overall\t{:.3}\t{:.3}\t{:.3}\t{}", o.precision, o.recall, o.f1, self.n);
        let _ = writeln!(s, "accuracy\t{:.3}", self.accuracy);
        let _ = writeln!(s);
        let _ = writeln!(s, "relation\tValid F1\tInvalid F1\tAmbiguous F1\tmacro F1\tn");
        for r in &self.per_relation {
            let _ = writeln!(
                s,
                "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{}",
                r.relation, r.f1[0], r.f1[1], r.f1[2], r.macro_f1, r.n
            );
        }
        s
    }
}

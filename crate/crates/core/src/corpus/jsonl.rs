//! Canonical JSONL interchange: one object per line, fixed key order, LF endings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EventText, LabelSource, LabeledTriple, Polarity, Relation, Source, Split, Triple, ValidityLabel, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub id: String,
    pub source: Source,
    pub split: Split,
    pub variant: Variant,
    pub parent_id: Option<String>,
    pub relation: Relation,
    pub head: String,
    pub tail: String,
    pub head_negated: bool,
    pub tail_negated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    #[serde(flatten)]
    pub triple: CanonicalRecord,
    pub label: ValidityLabel,
    pub label_source: LabelSource,
}

fn polarity(negated: bool) -> Polarity {
    if negated {
        Polarity::Negated
    } else {
        Polarity::Affirmative
    }
}

impl From<&Triple> for CanonicalRecord {
    fn from(t: &Triple) -> Self {
        CanonicalRecord {
            id: t.id.clone(),
            source: t.source,
            split: t.split,
            variant: t.variant,
            parent_id: t.parent_id.clone(),
            relation: t.relation,
            head: t.head.text().to_string(),
            tail: t.tail.text().to_string(),
            head_negated: t.head.is_negated(),
            tail_negated: t.tail.is_negated(),
        }
    }
}

impl CanonicalRecord {
    pub fn into_triple(self, row: usize) -> Result<Triple> {
        if (self.variant == Variant::Orig) != self.parent_id.is_none() {
            return Err(Error::MalformedRow {
                row,
                reason: "parent_id must be present exactly when variant is not ORIG".into(),
            });
        }
        let bad = |e: Error| Error::MalformedRow {
            row,
            reason: e.to_string(),
        };
        Ok(Triple {
            head: EventText::new(&self.head, polarity(self.head_negated)).map_err(bad)?,
            tail: EventText::new(&self.tail, polarity(self.tail_negated)).map_err(bad)?,
            id: self.id,
            source: self.source,
            relation: self.relation,
            variant: self.variant,
            parent_id: self.parent_id,
            split: self.split,
        })
    }
}

impl From<&LabeledTriple> for LabeledRecord {
    fn from(t: &LabeledTriple) -> Self {
        LabeledRecord {
            triple: (&t.triple).into(),
            label: t.label,
            label_source: t.label_source.clone(),
        }
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes each item as one JSON line.
pub(crate) fn write_lines<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut out = create(path)?;
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Non-empty lines of a JSONL file, with 1-based line numbers.
pub(crate) fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    Ok(lines)
}

pub(crate) fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    read_lines(path)?
        .into_iter()
        .map(|(row, line)| {
            serde_json::from_str(&line)
                .map(|r| (row, r))
                .map_err(|e| Error::MalformedRow {
                    row,
                    reason: e.to_string(),
                })
        })
        .collect()
}

pub fn write_canonical<'a>(path: &Path, triples: impl IntoIterator<Item = &'a Triple>) -> Result<()> {
    write_lines(path, triples.into_iter().map(CanonicalRecord::from))
}

pub fn read_canonical(path: &Path) -> Result<Vec<Triple>> {
    read_records::<CanonicalRecord>(path)?
        .into_iter()
        .map(|(row, r)| r.into_triple(row))
        .collect()
}

pub fn write_labeled<'a>(path: &Path, triples: impl IntoIterator<Item = &'a LabeledTriple>) -> Result<()> {
    write_lines(path, triples.into_iter().map(LabeledRecord::from))
}

pub fn read_labeled(path: &Path) -> Result<Vec<LabeledTriple>> {
    read_records::<LabeledRecord>(path)?
        .into_iter()
        .map(|(row, r)| {
            Ok(LabeledTriple {
                triple: r.triple.into_triple(row)?,
                label: r.label,
                label_source: r.label_source,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Triple {
        Triple::original(
            Source::Atomic,
            Split::Train,
            EventText::affirmative("PersonX is hungry").unwrap(),
            Relation::XWant,
            EventText::affirmative("to eat food").unwrap(),
        )
    }

    #[test]
    fn key_order_is_fixed() {
        let line = serde_json::to_string(&CanonicalRecord::from(&sample())).unwrap();
        let keys = [
            "\"id\"", "\"source\"", "\"split\"", "\"variant\"", "\"parent_id\"", "\"relation\"",
            "\"head\"", "\"tail\"", "\"head_negated\"", "\"tail_negated\"",
        ];
        let positions: Vec<_> = keys.iter().map(|k| line.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
        assert!(line.contains("\"source\":\"ATOMIC\""));
        assert!(line.contains("\"variant\":\"ORIG\""));
        assert!(line.contains("\"parent_id\":null"));
    }

    #[test]
    fn labeled_records_carry_label_after_triple_fields() {
        let lt = LabeledTriple::new(sample(), ValidityLabel::Valid, LabelSource::Judge("mock".into()));
        let line = serde_json::to_string(&LabeledRecord::from(&lt)).unwrap();
        assert!(line.ends_with("\"label\":\"Valid\",\"label_source\":\"judge:mock\"}"), "{line}");
        let back: LabeledRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.triple.into_triple(1).unwrap(), lt.triple);
    }

    #[test]
    fn parent_lineage_is_validated_on_import() {
        let mut rec = CanonicalRecord::from(&sample());
        rec.variant = Variant::NegIf;
        assert!(matches!(rec.into_triple(7), Err(Error::MalformedRow { row: 7, .. })));
    }
}

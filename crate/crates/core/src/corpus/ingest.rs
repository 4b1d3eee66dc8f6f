//! Readers for the ATOMIC and ANION release layouts.
//!
//! Delimiter-separated files carry one row per event with an `event` column
//! and one column per relation whose cells are JSON lists of tails, e.g.
//! `["to eat food", "none"]`. The literal tail `none` marks an empty
//! annotation and produces no triple. Files ending in `.jsonl` are read as
//! canonical records, or for ANION as flat `{head, relation, tail}` records.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde_json::Value;

use super::jsonl::{read_lines, CanonicalRecord};
use super::{EventText, Relation, Source, Split, Triple, Variant};
use crate::error::{Error, Result};

/// Result of reading a source corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    /// Deduplicated triples in first-occurrence order.
    pub triples: Vec<Triple>,
    /// Number of triples before deduplication.
    pub raw_count: usize,
    /// Rows skipped, keyed by reason (`split:dev`, `negation:semi-logical`, ...).
    pub skipped: BTreeMap<String, usize>,
}

impl Ingested {
    pub fn duplicates(&self) -> usize {
        self.raw_count - self.triples.len()
    }

    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }

    fn push(&mut self, seen: &mut HashSet<String>, triple: Triple) {
        self.raw_count += 1;
        if seen.insert(triple.id.clone()) {
            self.triples.push(triple);
        }
    }

    fn skip(&mut self, reason: String) {
        *self.skipped.entry(reason).or_default() += 1;
    }
}

const IGNORED_COLUMNS: [&str; 2] = ["prefix", "split"];
const NEGATION_COLUMN: &str = "negation_type";

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    )
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

fn is_logical_negation(kind: &str) -> bool {
    let k = kind.trim().to_ascii_lowercase().replace(['-', '_'], " ");
    matches!(k.as_str(), "logical" | "logical negation" | "logical neg" | "lneg")
}

/// Parses a list-valued cell. Empty cells are empty lists; a bare string is a
/// single tail.
fn parse_cell(cell: &str, row: usize) -> Result<Vec<String>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    if !cell.starts_with('[') {
        return Ok(vec![cell.to_string()]);
    }
    let tails: Vec<String> = serde_json::from_str(cell).map_err(|e| Error::MalformedRow {
        row,
        reason: format!("cell is not a list of strings: {e}"),
    })?;
    Ok(tails)
}

fn is_empty_tail(tail: &str) -> bool {
    let t = tail.trim();
    t.is_empty() || t.eq_ignore_ascii_case("none")
}

struct Layout {
    event: usize,
    relations: Vec<(usize, Relation)>,
    split: Option<usize>,
    negation: Option<usize>,
}

fn read_layout(headers: &csv::StringRecord, extra: &[&str]) -> Result<Layout> {
    let mut event = None;
    let mut relations = Vec::new();
    let mut split = None;
    let mut negation = None;
    for (i, name) in headers.iter().enumerate() {
        let name = name.trim();
        match name {
            "event" => event = Some(i),
            "split" => split = Some(i),
            NEGATION_COLUMN if extra.contains(&NEGATION_COLUMN) => negation = Some(i),
            _ if IGNORED_COLUMNS.contains(&name) => {}
            _ => relations.push((i, name.parse::<Relation>()?)),
        }
    }
    let event = event.ok_or(Error::MalformedRow {
        row: 1,
        reason: "missing `event` column".into(),
    })?;
    Ok(Layout {
        event,
        relations,
        split,
        negation,
    })
}

fn read_delimited(path: &Path, source: Source, wanted: Split) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::MalformedRow {
                row: 0,
                reason: format!("{other:?}"),
            },
        })?;
    let mut out = Ingested::default();
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Ok(out);
    }
    let extra: &[&str] = if source == Source::Anion {
        &[NEGATION_COLUMN]
    } else {
        &[]
    };
    let layout = read_layout(&headers, extra)?;
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::MalformedRow {
                row,
                reason: e.to_string(),
            }
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if let Some(col) = layout.split {
            let value = record.get(col).unwrap_or("").trim();
            match Split::parse(value) {
                Some(s) if s == wanted => {}
                _ => {
                    out.skip(format!("split:{value}"));
                    continue;
                }
            }
        }
        if let Some(col) = layout.negation {
            let value = record.get(col).unwrap_or("").trim();
            if !is_logical_negation(value) {
                out.skip(format!("negation:{value}"));
                continue;
            }
        }
        let event = record.get(layout.event).unwrap_or("");
        let head = if source == Source::Anion {
            EventText::negated(event)
        } else {
            EventText::affirmative(event)
        }
        .map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        for &(col, relation) in &layout.relations {
            for tail in parse_cell(record.get(col).unwrap_or(""), row)? {
                if is_empty_tail(&tail) {
                    continue;
                }
                let tail = EventText::affirmative(&tail).expect("non-empty tail");
                out.push(
                    &mut seen,
                    Triple::original(source, wanted, head.clone(), relation, tail),
                );
            }
        }
    }
    Ok(out)
}

fn read_canonical_filtered(
    lines: Vec<(usize, String)>,
    source: Source,
    wanted: Split,
) -> Result<Ingested> {
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (row, line) in lines {
        let rec: CanonicalRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if rec.source != source || rec.split != wanted || rec.variant != Variant::Orig {
            out.skip(format!("filtered:{}/{}/{}", rec.source, rec.split, rec.variant));
            continue;
        }
        let triple = rec.into_triple(row)?;
        out.push(&mut seen, triple);
    }
    Ok(out)
}

/// Loads ATOMIC originals of the requested split.
pub fn load_atomic(path: &Path, split: Split) -> Result<Ingested> {
    if is_jsonl(path) {
        return read_canonical_filtered(read_lines(path)?, Source::Atomic, split);
    }
    read_delimited(path, Source::Atomic, split)
}

fn text_field<'a>(obj: &'a serde_json::Map<String, Value>, key: &'static str, index: usize) -> Result<&'a str> {
    obj.get(key)
        .and_then(Value::as_str)
        .filter(|s| !s.trim().is_empty())
        .ok_or(Error::MissingField { index, field: key })
}

/// Loads ANION logical-negation originals of the requested split. Records of
/// other negation kinds are skipped and counted.
pub fn load_anion(path: &Path, split: Split) -> Result<Ingested> {
    if !is_jsonl(path) {
        return read_delimited(path, Source::Anion, split);
    }
    let lines = read_lines(path)?;
    if lines
        .first()
        .is_some_and(|(_, l)| serde_json::from_str::<CanonicalRecord>(l).is_ok())
    {
        return read_canonical_filtered(lines, Source::Anion, split);
    }
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (index, line) in lines {
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            row: index,
            reason: e.to_string(),
        })?;
        let obj = value.as_object().ok_or(Error::MalformedRow {
            row: index,
            reason: "record is not an object".into(),
        })?;
        if let Some(kind) = obj.get(NEGATION_COLUMN).and_then(Value::as_str) {
            if !is_logical_negation(kind) {
                out.skip(format!("negation:{kind}"));
                continue;
            }
        }
        if let Some(s) = obj.get("split").and_then(Value::as_str) {
            if Split::parse(s) != Some(split) {
                out.skip(format!("split:{s}"));
                continue;
            }
        }
        let head = text_field(obj, "head", index)?;
        let relation: Relation = text_field(obj, "relation", index)?.parse()?;
        let tail = text_field(obj, "tail", index)?;
        if is_empty_tail(tail) {
            continue;
        }
        let triple = Triple::original(
            Source::Anion,
            split,
            EventText::negated(head)?,
            relation,
            EventText::affirmative(tail)?,
        );
        out.push(&mut seen, triple);
    }
    Ok(out)
}

/// Drops triples whose head or tail contains the `___` placeholder.
pub fn filter_underspecified(triples: Vec<Triple>) -> (Vec<Triple>, usize) {
    let before = triples.len();
    let kept: Vec<Triple> = triples
        .into_iter()
        .filter(|t| !t.head.contains_blank() && !t.tail.contains_blank())
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        (dir, path)
    }

    const HEADER: &str = "event,oEffect,oReact,oWant,xAttr,xEffect,xIntent,xNeed,xReact,xWant,prefix,split\n";

    #[test]
    fn atomic_row_explodes_list_cells() {
        let body = format!(
            "{HEADER}PersonX is hungry,[],[],[],\"[\"\"hungry\"\"]\",[],[],[],[],\"[\"\"to eat food\"\"]\",\"[\"\"hungry\"\"]\",trn\n"
        );
        let (_d, path) = write_tmp("atomic.csv", &body);
        let got = load_atomic(&path, Split::Train).unwrap();
        assert_eq!(got.triples.len(), 2);
        let want = &got.triples[1];
        assert_eq!(want.head.text(), "PersonX is hungry");
        assert_eq!(want.relation, Relation::XWant);
        assert_eq!(want.tail.text(), "to eat food");
        assert_eq!(want.variant, Variant::Orig);
        assert_eq!(want.source, Source::Atomic);
    }

    #[test]
    fn empty_cells_and_none_tails_yield_nothing() {
        let body = format!("{HEADER}PersonX naps,[],[],[],[],[],[],[],\"[\"\"none\"\"]\",,[],trn\n");
        let (_d, path) = write_tmp("atomic.csv", &body);
        assert!(load_atomic(&path, Split::Train).unwrap().triples.is_empty());
    }

    #[test]
    fn duplicates_collapse_to_one_deterministic_id() {
        let row = "PersonX is hungry,[],[],[],[],[],[],[],[],\"[\"\"to eat food\"\", \"\"to eat food\"\"]\",[],trn\n";
        let body = format!("{HEADER}{row}{row}");
        let (_d, path) = write_tmp("atomic.csv", &body);
        let a = load_atomic(&path, Split::Train).unwrap();
        let b = load_atomic(&path, Split::Train).unwrap();
        assert_eq!(a.triples.len(), 1);
        assert_eq!(a.raw_count, 4);
        assert_eq!(a.duplicates(), 3);
        assert_eq!(a, b);
    }

    #[test]
    fn other_splits_are_skipped() {
        let body = format!(
            "{HEADER}PersonX naps,[],[],[],[],[],[],[],[],\"[\"\"to rest\"\"]\",[],tst\nPersonX runs,[],[],[],[],[],[],[],[],\"[\"\"to rest\"\"]\",[],trn\n"
        );
        let (_d, path) = write_tmp("atomic.csv", &body);
        let got = load_atomic(&path, Split::Test).unwrap();
        assert_eq!(got.triples.len(), 1);
        assert_eq!(got.triples[0].head.text(), "PersonX naps");
        assert_eq!(got.skipped["split:trn"], 1);
    }

    #[test]
    fn unknown_relation_column_is_named() {
        let (_d, path) = write_tmp("atomic.csv", "event,xWant,xFoo\nPersonX naps,[],[]\n");
        match load_atomic(&path, Split::Train) {
            Err(Error::UnknownRelation(col)) => assert_eq!(col, "xFoo"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_its_line() {
        let body = "event,xWant\nPersonX naps,\"[\"\"ok\"\"]\"\nPersonX runs,\"[broken\"\n";
        let (_d, path) = write_tmp("atomic.csv", body);
        match load_atomic(&path, Split::Train) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tsv_layout_is_supported() {
        let (_d, path) = write_tmp("atomic.tsv", "event\txWant\nPersonX naps\t[\"to rest\"]\n");
        assert_eq!(load_atomic(&path, Split::Train).unwrap().triples.len(), 1);
    }

    #[test]
    fn anion_records_have_negated_heads() {
        let body = concat!(
            r#"{"head":"PersonX does not pay PersonY a compliment","relation":"oReact","tail":"upset","negation_type":"logical"}"#,
            "\n",
            r#"{"head":"PersonX pays PersonY an insult","relation":"oReact","tail":"hurt","negation_type":"semi-logical"}"#,
            "\n"
        );
        let (_d, path) = write_tmp("anion.jsonl", body);
        let got = load_anion(&path, Split::Train).unwrap();
        assert_eq!(got.triples.len(), 1);
        let t = &got.triples[0];
        assert!(t.head.is_negated());
        assert!(!t.tail.is_negated());
        assert_eq!(t.source, Source::Anion);
        assert_eq!(t.relation, Relation::OReact);
        assert_eq!(got.skipped["negation:semi-logical"], 1);
    }

    #[test]
    fn anion_missing_field_reports_record() {
        let body = concat!(
            r#"{"head":"PersonX does not run","relation":"xWant","tail":"to rest"}"#,
            "\n",
            r#"{"head":"PersonX does not nap","relation":"xWant"}"#,
            "\n"
        );
        let (_d, path) = write_tmp("anion.jsonl", body);
        match load_anion(&path, Split::Train) {
            Err(Error::MissingField { index, field }) => {
                assert_eq!(index, 2);
                assert_eq!(field, "tail");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn anion_csv_with_negation_column() {
        let body = "event,oReact,negation_type\n\"PersonX does not pay PersonY a compliment\",\"[\"\"upset\"\"]\",logical\nPersonX pays PersonY an insult,\"[\"\"hurt\"\"]\",commonsense contradiction\n";
        let (_d, path) = write_tmp("anion.csv", body);
        let got = load_anion(&path, Split::Train).unwrap();
        assert_eq!(got.triples.len(), 1);
        assert_eq!(got.skipped_total(), 1);
    }

    #[test]
    fn empty_anion_file_is_empty() {
        let (_d, path) = write_tmp("anion.jsonl", "");
        assert!(load_anion(&path, Split::Train).unwrap().triples.is_empty());
        let (_d2, path) = write_tmp("anion.csv", "");
        assert!(load_anion(&path, Split::Train).unwrap().triples.is_empty());
    }

    fn triple(head: &str, tail: &str) -> Triple {
        Triple::original(
            Source::Atomic,
            Split::Train,
            EventText::affirmative(head).unwrap(),
            Relation::XWant,
            EventText::affirmative(tail).unwrap(),
        )
    }

    #[test]
    fn underspecified_triples_are_dropped() {
        let input = vec![
            triple("PersonX sees ___ in the water", "to swim"),
            triple("PersonX swims", "to dry off"),
            triple("PersonX eats", "to buy ___"),
        ];
        let (kept, dropped) = filter_underspecified(input);
        assert_eq!(dropped, 2);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].head.text(), "PersonX swims");
        assert_eq!(filter_underspecified(Vec::new()), (Vec::new(), 0));
    }
}

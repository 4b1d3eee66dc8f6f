//! Data model for if-then commonsense triples and their negated variants.
//!
//! A [`Triple`] is an if-event, one of nine [`Relation`]s and a then-event.
//! Generated variants keep a pointer to the original they were derived from
//! through `parent_id`, and every triple carries a content-derived id so that
//! files can reference each other without a registry.

mod ingest;
pub(crate) mod jsonl;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use ingest::{filter_underspecified, load_anion, load_atomic, Ingested};
pub use jsonl::{
    read_canonical, read_labeled, write_canonical, write_labeled, CanonicalRecord, LabeledRecord,
};

/// Placeholder ATOMIC uses for an underspecified participant.
pub const BLANK: &str = "___";

/// The nine ATOMIC if-then relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "oEffect")]
    OEffect,
    #[serde(rename = "oReact")]
    OReact,
    #[serde(rename = "oWant")]
    OWant,
    #[serde(rename = "xAttr")]
    XAttr,
    #[serde(rename = "xEffect")]
    XEffect,
    #[serde(rename = "xIntent")]
    XIntent,
    #[serde(rename = "xNeed")]
    XNeed,
    #[serde(rename = "xReact")]
    XReact,
    #[serde(rename = "xWant")]
    XWant,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::OEffect,
        Relation::OReact,
        Relation::OWant,
        Relation::XAttr,
        Relation::XEffect,
        Relation::XIntent,
        Relation::XNeed,
        Relation::XReact,
        Relation::XWant,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Relation::OEffect => "oEffect",
            Relation::OReact => "oReact",
            Relation::OWant => "oWant",
            Relation::XAttr => "xAttr",
            Relation::XEffect => "xEffect",
            Relation::XIntent => "xIntent",
            Relation::XNeed => "xNeed",
            Relation::XReact => "xReact",
            Relation::XWant => "xWant",
        }
    }

    /// Verbalization fragment. `{object}` marks the slot filled with the
    /// object of the if-event for the `o*` relations.
    pub fn template(self) -> &'static str {
        match self {
            Relation::OEffect => "the effect of {object} is",
            Relation::OReact => "the reaction of {object} is",
            Relation::OWant => "{object} want",
            Relation::XAttr => "the attribute of PersonX is",
            Relation::XEffect => "the effect of PersonX is",
            Relation::XIntent => "the intention of PersonX is",
            Relation::XNeed => "PersonX needs",
            Relation::XReact => "the reaction of PersonX is",
            Relation::XWant => "PersonX wants",
        }
    }

    /// True for relations describing effects on others (`oEffect`, `oReact`, `oWant`).
    pub fn targets_object(self) -> bool {
        matches!(self, Relation::OEffect | Relation::OReact | Relation::OWant)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.code() == s)
            .ok_or_else(|| Error::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Affirmative,
    Negated,
}

/// Surface text of an if- or then-event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventText {
    text: String,
    polarity: Polarity,
    contains_blank: bool,
}

impl EventText {
    pub fn new(text: &str, polarity: Polarity) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::InvalidEvent("event text is empty".into()));
        }
        Ok(EventText {
            contains_blank: text.contains(BLANK),
            text: text.to_string(),
            polarity,
        })
    }

    pub fn affirmative(text: &str) -> Result<Self> {
        Self::new(text, Polarity::Affirmative)
    }

    pub fn negated(text: &str) -> Result<Self> {
        Self::new(text, Polarity::Negated)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn is_negated(&self) -> bool {
        self.polarity == Polarity::Negated
    }

    pub fn contains_blank(&self) -> bool {
        self.contains_blank
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }
}

impl fmt::Display for EventText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Source {
    Atomic,
    Anion,
    Generated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Atomic => "ATOMIC",
            Source::Anion => "ANION",
            Source::Generated => "GENERATED",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Orig,
    NegIf,
    NegThen,
    NegBoth,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Orig,
        Variant::NegIf,
        Variant::NegThen,
        Variant::NegBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Orig => "ORIG",
            Variant::NegIf => "NEG_IF",
            Variant::NegThen => "NEG_THEN",
            Variant::NegBoth => "NEG_BOTH",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::ValidationError(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    /// Accepts both the canonical names and the ATOMIC release abbreviations.
    pub fn parse(s: &str) -> Option<Split> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "trn" => Some(Split::Train),
            "test" | "tst" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Content hash of the fields that identify a triple.
pub fn triple_id(
    source: Source,
    split: Split,
    relation: Relation,
    head: &str,
    tail: &str,
    variant: Variant,
) -> String {
    let mut hasher = Sha256::new();
    for part in [
        source.as_str(),
        split.as_str(),
        relation.code(),
        head,
        tail,
        variant.as_str(),
    ] {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    hex::encode(&hasher.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub id: String,
    pub source: Source,
    pub head: EventText,
    pub relation: Relation,
    pub tail: EventText,
    pub variant: Variant,
    pub parent_id: Option<String>,
    pub split: Split,
}

impl Triple {
    /// An original triple as it appears in a source corpus.
    pub fn original(
        source: Source,
        split: Split,
        head: EventText,
        relation: Relation,
        tail: EventText,
    ) -> Self {
        let id = triple_id(source, split, relation, head.text(), tail.text(), Variant::Orig);
        Triple {
            id,
            source,
            head,
            relation,
            tail,
            variant: Variant::Orig,
            parent_id: None,
            split,
        }
    }

    /// A variant derived from `parent`, keeping its source, split and relation.
    pub fn derived(parent: &Triple, variant: Variant, head: EventText, tail: EventText) -> Self {
        debug_assert!(variant != Variant::Orig);
        let id = triple_id(
            parent.source,
            parent.split,
            parent.relation,
            head.text(),
            tail.text(),
            variant,
        );
        Triple {
            id,
            source: parent.source,
            head,
            relation: parent.relation,
            tail,
            variant,
            parent_id: Some(parent.id.clone()),
            split: parent.split,
        }
    }

    pub fn is_original(&self) -> bool {
        self.variant == Variant::Orig
    }

    /// Surface form by polarity of the two events, i.e. the column this
    /// triple falls under in a statistics table.
    pub fn form(&self) -> Form {
        match (self.head.is_negated(), self.tail.is_negated()) {
            (false, false) => Form::Plain,
            (true, false) => Form::NegatedIf,
            (false, true) => Form::NegatedThen,
            (true, true) => Form::NegatedBoth,
        }
    }

    /// Key used for duplicate detection within one source.
    pub fn content_key(&self) -> (Relation, &str, &str) {
        (self.relation, self.head.text(), self.tail.text())
    }
}

/// Polarity pattern of a triple: ⟨A,R,B⟩, ⟨¬A,R,B⟩, ⟨A,R,¬B⟩ or ⟨¬A,R,¬B⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Form {
    Plain,
    NegatedIf,
    NegatedThen,
    NegatedBoth,
}

impl Form {
    pub const ALL: [Form; 4] = [Form::Plain, Form::NegatedIf, Form::NegatedThen, Form::NegatedBoth];

    pub fn header(self) -> &'static str {
        match self {
            Form::Plain => "<A,R,B>",
            Form::NegatedIf => "<¬A,R,B>",
            Form::NegatedThen => "<A,R,¬B>",
            Form::NegatedBoth => "<¬A,R,¬B>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ValidityLabel {
    Valid,
    Invalid,
    Ambiguous,
}

impl ValidityLabel {
    pub const ALL: [ValidityLabel; 3] = [
        ValidityLabel::Valid,
        ValidityLabel::Invalid,
        ValidityLabel::Ambiguous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValidityLabel::Valid => "Valid",
            ValidityLabel::Invalid => "Invalid",
            ValidityLabel::Ambiguous => "Ambiguous",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> char {
        match self {
            ValidityLabel::Valid => 'V',
            ValidityLabel::Invalid => 'I',
            ValidityLabel::Ambiguous => 'A',
        }
    }
}

impl fmt::Display for ValidityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValidityLabel {
    type Err = Error;

    /// Exact label names, ignoring case.
    fn from_str(s: &str) -> Result<Self> {
        ValidityLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::ValidationError(format!("unknown label `{s}`")))
    }
}

/// Where a label came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelSource {
    Judge(String),
    Annotator(String),
    Synthetic,
    Random,
    Gold,
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSource::Judge(model) => write!(f, "judge:{model}"),
            LabelSource::Annotator(id) => write!(f, "annotator:{id}"),
            LabelSource::Synthetic => f.write_str("synthetic"),
            LabelSource::Random => f.write_str("random"),
            LabelSource::Gold => f.write_str("gold"),
        }
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(LabelSource::Synthetic),
            "random" => Ok(LabelSource::Random),
            "gold" => Ok(LabelSource::Gold),
            _ => {
                if let Some(model) = s.strip_prefix("judge:") {
                    Ok(LabelSource::Judge(model.to_string()))
                } else if let Some(id) = s.strip_prefix("annotator:") {
                    Ok(LabelSource::Annotator(id.to_string()))
                } else {
                    Err(Error::ValidationError(format!("unknown label source `{s}`")))
                }
            }
        }
    }
}

impl Serialize for LabelSource {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelSource {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: ValidityLabel,
    pub label_source: LabelSource,
}

impl LabeledTriple {
    pub fn new(triple: Triple, label: ValidityLabel, label_source: LabelSource) -> Self {
        LabeledTriple {
            triple,
            label,
            label_source,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_relations_with_distinct_codes() {
        let codes: std::collections::BTreeSet<_> = Relation::ALL.iter().map(|r| r.code()).collect();
        assert_eq!(codes.len(), 9);
        for r in Relation::ALL {
            assert_eq!(r.code().parse::<Relation>().unwrap(), r);
        }
        assert!(matches!("xFoo".parse::<Relation>(), Err(Error::UnknownRelation(c)) if c == "xFoo"));
    }

    #[test]
    fn event_text_is_trimmed_and_flags_blanks() {
        let e = EventText::affirmative("  PersonX sees ___ in the water ").unwrap();
        assert_eq!(e.text(), "PersonX sees ___ in the water");
        assert!(e.contains_blank());
        assert!(EventText::affirmative("   ").is_err());
    }

    #[test]
    fn id_depends_on_every_identifying_field() {
        let base = triple_id(Source::Atomic, Split::Train, Relation::XWant, "a", "b", Variant::Orig);
        assert_eq!(base.len(), 32);
        assert_ne!(base, triple_id(Source::Anion, Split::Train, Relation::XWant, "a", "b", Variant::Orig));
        assert_ne!(base, triple_id(Source::Atomic, Split::Test, Relation::XWant, "a", "b", Variant::Orig));
        assert_ne!(base, triple_id(Source::Atomic, Split::Train, Relation::XNeed, "a", "b", Variant::Orig));
        assert_ne!(base, triple_id(Source::Atomic, Split::Train, Relation::XWant, "a", "b", Variant::NegIf));
        // field boundaries are delimited
        assert_ne!(
            triple_id(Source::Atomic, Split::Train, Relation::XWant, "ab", "c", Variant::Orig),
            triple_id(Source::Atomic, Split::Train, Relation::XWant, "a", "bc", Variant::Orig)
        );
    }

    #[test]
    fn label_parsing_is_closed() {
        assert_eq!("valid".parse::<ValidityLabel>().unwrap(), ValidityLabel::Valid);
        assert_eq!("AMBIGUOUS".parse::<ValidityLabel>().unwrap(), ValidityLabel::Ambiguous);
        assert!("Maybe".parse::<ValidityLabel>().is_err());
    }

    #[test]
    fn label_source_round_trips_through_text() {
        for src in [
            LabelSource::Judge("llama-70b".into()),
            LabelSource::Annotator("ann1".into()),
            LabelSource::Synthetic,
            LabelSource::Random,
            LabelSource::Gold,
        ] {
            assert_eq!(src.to_string().parse::<LabelSource>().unwrap(), src);
        }
    }
}

//! Renders triples as `If ..., then ...` statements.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{jsonl, EventText, Relation, Triple};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub triple_id: String,
    #[serde(rename = "statement")]
    pub text: String,
}

/// The participant an o-relation refers to.
pub fn extract_object(head: &EventText) -> &'static str {
    let has = |name: &str| {
        head.tokens()
            .any(|t| t.trim_end_matches(|c: char| !c.is_alphanumeric()).trim_end_matches("'s") == name)
    };
    if has("PersonY") {
        "PersonY"
    } else if has("PersonZ") {
        "PersonZ"
    } else {
        "others"
    }
}

/// The relation phrase with its object slot filled from `head`.
pub fn relation_phrase(relation: Relation, head: &EventText) -> String {
    relation.template().replace("{object}", extract_object(head))
}

pub fn verbalize(triple: &Triple) -> Statement {
    let tail = triple.tail.text();
    let end = if tail.ends_with(['.', '!', '?']) { "" } else { "." };
    Statement {
        triple_id: triple.id.clone(),
        text: format!(
            "If {}, then {} {tail}{end}",
            triple.head.text(),
            relation_phrase(triple.relation, &triple.head)
        ),
    }
}

/// Writes `{triple_id, statement}` lines.
pub fn export_statements<'a>(path: &Path, triples: impl IntoIterator<Item = &'a Triple>) -> Result<()> {
    jsonl::write_lines(path, triples.into_iter().map(verbalize))
}

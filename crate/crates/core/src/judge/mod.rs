//! Validity judging: verdict parsing, judge backends, training-set builders
//! and judge evaluation against gold labels.

mod builders;
mod evaluate;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{jsonl, Source, Triple, ValidityLabel, Variant};
use crate::error::{Error, Result};
use crate::llm::{bindings, render_template, ChatClient, ModelSettings, PromptTemplate};
use crate::rng::hash64;
use crate::verbalizer::verbalize;

pub use builders::{
    build_ambiguous_set, build_invalid_set, build_training_set, build_valid_set, check_disjoint,
    JudgeTrainingSpec,
};
pub use evaluate::{evaluate_judge, JudgeEvaluation, RelationScores};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub triple_id: String,
    pub label: ValidityLabel,
    pub raw_output: String,
    pub backend_id: String,
}

/// Reads a label out of free-form model output.
///
/// Brackets and punctuation are ignored and matching is case-insensitive. The
/// earliest label word wins; `invalid` beats `valid` when both start at the
/// same place.
pub fn parse_verdict(raw: &str) -> Result<ValidityLabel> {
    let cleaned: String = raw
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    let mut best: Option<(usize, ValidityLabel)> = None;
    let mut offset = 0;
    for word in cleaned.split(' ') {
        let label = match word {
            "invalid" => Some(ValidityLabel::Invalid),
            "valid" => Some(ValidityLabel::Valid),
            "ambiguous" => Some(ValidityLabel::Ambiguous),
            _ => None,
        };
        if let Some(label) = label {
            if best.is_none_or(|(pos, _)| offset < pos) {
                best = Some((offset, label));
            }
        }
        offset += word.len() + 1;
    }
    best.map(|(_, l)| l)
        .ok_or_else(|| Error::UnparseableVerdict(raw.to_string()))
}

/// Something that assigns validity labels to triples.
pub trait JudgeBackend: Send + Sync {
    fn id(&self) -> String;

    fn judge(&self, triple: &Triple) -> Result<JudgeVerdict>;

    /// Judges a batch; results keep input order.
    fn judge_many(&self, triples: &[Triple]) -> Vec<Result<JudgeVerdict>> {
        triples.iter().map(|t| self.judge(t)).collect()
    }
}

impl<J: JudgeBackend + ?Sized> JudgeBackend for Arc<J> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn judge(&self, triple: &Triple) -> Result<JudgeVerdict> {
        (**self).judge(triple)
    }
    fn judge_many(&self, triples: &[Triple]) -> Vec<Result<JudgeVerdict>> {
        (**self).judge_many(triples)
    }
}

pub fn judge_label(triple: &Triple, backend: &dyn JudgeBackend) -> Result<JudgeVerdict> {
    backend.judge(triple)
}

fn flip(label: ValidityLabel) -> ValidityLabel {
    match label {
        ValidityLabel::Valid => ValidityLabel::Invalid,
        ValidityLabel::Invalid => ValidityLabel::Valid,
        ValidityLabel::Ambiguous => ValidityLabel::Ambiguous,
    }
}

/// Offline judge whose labels are a pure function of the triple.
///
/// * an original is Valid, Invalid or Ambiguous with weights 7:2:1 by the
///   hash of its id;
/// * a then-negated variant (tail starts with `not`) takes the opposite of
///   its parent's label;
/// * an if-negated variant keeps (4 in 10), flips (4 in 10) or turns
///   Ambiguous (2 in 10) by a hash of its parent id;
/// * a doubly negated variant of an ANION original flips its parent; one of
///   an ATOMIC original flips the if-negated sibling's label;
/// * synthetic triples are Ambiguous or Invalid by the hash of their id.
#[derive(Debug, Clone, Default)]
pub struct MockOracle;

impl MockOracle {
    fn original_label(id: &str) -> ValidityLabel {
        match hash64(id) % 10 {
            0..=6 => ValidityLabel::Valid,
            7 | 8 => ValidityLabel::Invalid,
            _ => ValidityLabel::Ambiguous,
        }
    }

    fn neg_if_label(parent: &str) -> ValidityLabel {
        let base = Self::original_label(parent);
        match hash64(&format!("{parent}/NEG_IF")) % 10 {
            0..=3 => base,
            4..=7 => flip(base),
            _ => ValidityLabel::Ambiguous,
        }
    }

    pub fn label(triple: &Triple) -> ValidityLabel {
        let parent = triple.parent_id.as_deref().unwrap_or(&triple.id);
        match (triple.source, triple.variant) {
            (Source::Generated, _) => {
                if hash64(&triple.id).is_multiple_of(2) {
                    ValidityLabel::Ambiguous
                } else {
                    ValidityLabel::Invalid
                }
            }
            (_, Variant::Orig) => Self::original_label(&triple.id),
            (_, Variant::NegThen) => flip(Self::original_label(parent)),
            (_, Variant::NegIf) => Self::neg_if_label(parent),
            (Source::Anion, Variant::NegBoth) => flip(Self::original_label(parent)),
            (_, Variant::NegBoth) => flip(Self::neg_if_label(parent)),
        }
    }
}

impl JudgeBackend for MockOracle {
    fn id(&self) -> String {
        "mock-oracle".into()
    }

    fn judge(&self, triple: &Triple) -> Result<JudgeVerdict> {
        let label = Self::label(triple);
        let raw_output = format!("[{label}]");
        Ok(JudgeVerdict {
            triple_id: triple.id.clone(),
            label: parse_verdict(&raw_output)?,
            raw_output,
            backend_id: self.id(),
        })
    }
}

/// Chat model prompted with the judge instructions.
pub struct RemoteJudge {
    client: Arc<ChatClient>,
    template: PromptTemplate,
    settings: ModelSettings,
}

impl RemoteJudge {
    pub fn new(client: Arc<ChatClient>, template: PromptTemplate, settings: ModelSettings) -> Self {
        RemoteJudge {
            client,
            template,
            settings,
        }
    }

    fn verdict(&self, triple: &Triple, raw: String) -> Result<JudgeVerdict> {
        Ok(JudgeVerdict {
            triple_id: triple.id.clone(),
            label: parse_verdict(&raw)?,
            raw_output: raw,
            backend_id: self.id(),
        })
    }

    fn request(&self, triple: &Triple) -> Result<crate::llm::ChatRequest> {
        let statement = verbalize(triple).text;
        render_template(&self.template, &bindings([("statement", statement.as_str())]), &self.settings)
    }
}

impl JudgeBackend for RemoteJudge {
    fn id(&self) -> String {
        format!("{}@{}", self.settings.model, self.client.backend_id())
    }

    fn judge(&self, triple: &Triple) -> Result<JudgeVerdict> {
        let response = self.client.complete(&self.request(triple)?)?;
        self.verdict(triple, response.content)
    }

    fn judge_many(&self, triples: &[Triple]) -> Vec<Result<JudgeVerdict>> {
        self.client.map_concurrent(triples, |t| self.judge(t))
    }
}

pub fn write_verdicts(path: &Path, verdicts: &[JudgeVerdict]) -> Result<()> {
    jsonl::write_lines(path, verdicts)
}

pub fn read_verdicts(path: &Path) -> Result<Vec<JudgeVerdict>> {
    Ok(jsonl::read_records(path)?.into_iter().map(|(_, v)| v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventText, Relation, Split};
    use crate::llm::{assets, ClientConfig, MockBackend};
    use crate::negator::generate_variants;

    #[test]
    fn verdict_parsing() {
        use ValidityLabel::*;
        for (raw, want) in [
            ("Valid", Valid),
            ("[INVALID]", Invalid),
            ("[Ambiguous]", Ambiguous),
            ("it is valid or invalid", Valid),
            ("Label: invalid.", Invalid),
            ("(ambiguous) but valid", Ambiguous),
        ] {
            assert_eq!(parse_verdict(raw).unwrap(), want, "{raw}");
        }
        assert!(matches!(parse_verdict("perhaps"), Err(Error::UnparseableVerdict(r)) if r == "perhaps"));
        assert!(parse_verdict("validity").is_err());
    }

    fn atomic() -> Triple {
        Triple::original(
            Source::Atomic,
            Split::Train,
            EventText::affirmative("PersonX takes a picture").unwrap(),
            Relation::XWant,
            EventText::affirmative("to look at the picture").unwrap(),
        )
    }

    #[test]
    fn oracle_flips_then_negations() {
        let t = atomic();
        let variants = generate_variants(&t).unwrap();
        let orig = MockOracle.judge(&t).unwrap().label;
        let neg_then = MockOracle.judge(&variants[1]).unwrap().label;
        assert_eq!(neg_then, flip(orig));
        let v = MockOracle.judge(&variants[2]).unwrap();
        assert_eq!(parse_verdict(&v.raw_output).unwrap(), v.label);
    }

    #[test]
    fn remote_judge_parses_bracketed_output() {
        let client = Arc::new(
            ChatClient::new(MockBackend::canned("[Ambiguous]"), ClientConfig::default()).unwrap(),
        );
        let judge = RemoteJudge::new(client, assets::judge(), ModelSettings::default());
        assert_eq!(judge.judge(&atomic()).unwrap().label, ValidityLabel::Ambiguous);

        let client = Arc::new(ChatClient::new(MockBackend::canned("perhaps"), ClientConfig::default()).unwrap());
        let judge = RemoteJudge::new(client, assets::judge(), ModelSettings::default());
        assert!(matches!(judge.judge(&atomic()), Err(Error::UnparseableVerdict(_))));
    }

    #[test]
    fn remote_judge_sends_the_statement() {
        let backend = MockBackend::new("echo", |r| {
            let last = &r.messages.last().unwrap().content;
            assert_eq!(
                last,
                "Statement: If PersonX takes a picture, then PersonX wants to look at the picture."
            );
            Ok("Valid".into())
        });
        let client = Arc::new(ChatClient::new(backend, ClientConfig::default()).unwrap());
        let judge = RemoteJudge::new(client, assets::judge(), ModelSettings::default());
        assert_eq!(judge.judge_many(&[atomic()])[0].as_ref().unwrap().label, ValidityLabel::Valid);
    }
}

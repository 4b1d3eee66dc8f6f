//! Adds the negation cue `not` to events and derives negated triple variants.
//!
//! If-events are finite clauses (`PersonX takes a picture`), so the cue goes
//! after an auxiliary when the clause has one and otherwise is hosted by
//! do-support (`PersonX does not take a picture`). Then-events are bare verb
//! phrases or modifiers and simply receive the cue in front
//! (`not look at the picture`, `not excited`).

mod generative;
pub mod lexicon;

use serde::{Deserialize, Serialize};

use crate::corpus::{EventText, Source, Triple, Variant};
use crate::error::{Error, Result};
use lexicon::{VerbForm, NEGATION_CUE};

pub use generative::{GenerativeNegator, GenerativeOutcome, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NegationRule {
    AuxInsert,
    DoSupport,
    CuePrefix,
}

/// How a negation was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegationRuleTrace {
    pub rule_applied: NegationRule,
    /// Index of the inserted cue in `result_tokens`.
    pub cue_position: usize,
    pub original_tokens: Vec<String>,
    pub result_tokens: Vec<String>,
}

/// Splits trailing sentence punctuation from a token.
fn split_punct(token: &str) -> (&str, &str) {
    let core = token.trim_end_matches(['.', ',', '!', '?', ';', ':']);
    (core, &token[core.len()..])
}

fn lower(token: &str) -> String {
    split_punct(token).0.to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Person {
    Third,
    Other,
}

struct Clause {
    /// First token after the subject (where do-support is inserted).
    insert_at: usize,
    /// The finite verb or auxiliary.
    verb_at: usize,
    person: Person,
}

fn is_cue(word: &str) -> bool {
    word == NEGATION_CUE || word == "never" || word.ends_with("n't")
}

fn is_aux_at(tokens: &[String], i: usize) -> bool {
    let word = lower(&tokens[i]);
    if lexicon::ALWAYS_AUX.contains(&word.as_str()) {
        return true;
    }
    let next = tokens[i + 1..]
        .iter()
        .map(|t| lower(t))
        .find(|w| !lexicon::is_adverb(w));
    let Some(next) = next else {
        return false;
    };
    if lexicon::PERFECT_AUX.contains(&word.as_str()) {
        return lexicon::is_participle(&next);
    }
    if lexicon::DO_AUX.contains(&word.as_str()) {
        return lexicon::is_known_verb(&next);
    }
    false
}

fn locate_clause(tokens: &[String]) -> Option<Clause> {
    let first = lower(tokens.first()?);
    let person = if lexicon::OTHER_PERSON_SUBJECTS.contains(&first.as_str()) {
        Some(Person::Other)
    } else if lexicon::THIRD_PERSON_SUBJECTS.contains(&first.as_str()) {
        Some(Person::Third)
    } else {
        None
    };
    if let Some(person) = person {
        let insert_at = 1;
        let verb_at = (insert_at..tokens.len()).find(|&i| !lexicon::is_adverb(&lower(&tokens[i])))?;
        let word = lower(&tokens[verb_at]);
        if !word.chars().all(|c| c.is_ascii_alphabetic() || c == '-' || c == '\'') {
            return None;
        }
        if lexicon::THIRD_PERSON_SUBJECTS.contains(&word.as_str()) {
            return None;
        }
        return Some(Clause {
            insert_at,
            verb_at,
            person,
        });
    }
    // Noun-phrase or empty subject: the first token the tables recognise as
    // an auxiliary or inflected verb heads the clause.
    let verb_at = (0..tokens.len()).find(|&i| {
        let word = lower(&tokens[i]);
        if lexicon::ALWAYS_AUX.contains(&word.as_str()) {
            return true;
        }
        matches!(
            lexicon::classify_verb(&word, false),
            Some(VerbForm::ThirdSingular { .. }) | Some(VerbForm::Past { .. })
        )
    })?;
    let mut insert_at = verb_at;
    while insert_at > 0 && lexicon::is_adverb(&lower(&tokens[insert_at - 1])) {
        insert_at -= 1;
    }
    Some(Clause {
        insert_at,
        verb_at,
        person: Person::Third,
    })
}

fn match_case(template: &str, word: &str) -> String {
    if template.chars().next().is_some_and(char::is_uppercase) {
        let mut c = word.chars();
        match c.next() {
            Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
            None => String::new(),
        }
    } else {
        word.to_string()
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Negates an if-event clause.
pub fn negate_head(event: &EventText) -> Result<(EventText, NegationRuleTrace)> {
    if event.is_negated() {
        return Err(Error::AlreadyNegated(event.text().to_string()));
    }
    let original = tokenize(event.text());
    let clause =
        locate_clause(&original).ok_or_else(|| Error::UnnegatableEvent(event.text().to_string()))?;
    let after_verb = original.get(clause.verb_at + 1).map(|t| lower(t));
    if is_cue(&lower(&original[clause.verb_at]))
        || after_verb.as_deref().is_some_and(is_cue)
        || original[clause.insert_at..clause.verb_at]
            .iter()
            .any(|t| is_cue(&lower(t)))
    {
        return Err(Error::AlreadyNegated(event.text().to_string()));
    }

    let mut result = original.clone();
    let (rule, cue_position) = if is_aux_at(&original, clause.verb_at) {
        result.insert(clause.verb_at + 1, NEGATION_CUE.to_string());
        (NegationRule::AuxInsert, clause.verb_at + 1)
    } else {
        let verb_token = &original[clause.verb_at];
        let (core, punct) = split_punct(verb_token);
        let word = core.to_lowercase();
        let (aux, lemma) = match lexicon::classify_verb(&word, true) {
            Some(VerbForm::ThirdSingular { lemma }) => ("does", lemma),
            Some(VerbForm::Past { lemma }) => ("did", lemma),
            Some(VerbForm::Base) | None => match clause.person {
                Person::Third => ("does", word.clone()),
                Person::Other => ("do", word.clone()),
            },
        };
        result[clause.verb_at] = format!("{}{punct}", match_case(core, &lemma));
        let aux = if clause.insert_at == 0 {
            match_case(verb_token, aux)
        } else {
            aux.to_string()
        };
        if clause.insert_at == 0 {
            result[clause.verb_at] = result[clause.verb_at].to_lowercase();
        }
        result.insert(clause.insert_at, NEGATION_CUE.to_string());
        result.insert(clause.insert_at, aux);
        (NegationRule::DoSupport, clause.insert_at + 1)
    };
    let negated = EventText::negated(&result.join(" "))?;
    Ok((
        negated,
        NegationRuleTrace {
            rule_applied: rule,
            cue_position,
            original_tokens: original,
            result_tokens: result,
        },
    ))
}

/// Negates a then-event by prefixing the cue.
pub fn negate_tail(event: &EventText) -> Result<(EventText, NegationRuleTrace)> {
    let text = event.text();
    let first = text.split_whitespace().next().map(|w| w.to_lowercase());
    if event.is_negated() || first.as_deref() == Some(NEGATION_CUE) {
        return Err(Error::AlreadyNegated(text.to_string()));
    }
    let original = tokenize(text);
    let mut result = Vec::with_capacity(original.len() + 1);
    result.push(NEGATION_CUE.to_string());
    result.extend(original.iter().cloned());
    let negated = EventText::negated(&format!("{NEGATION_CUE} {text}"))?;
    Ok((
        negated,
        NegationRuleTrace {
            rule_applied: NegationRule::CuePrefix,
            cue_position: 0,
            original_tokens: original,
            result_tokens: result,
        },
    ))
}

/// Derives the negated variants of an original triple.
///
/// ATOMIC originals yield ⟨¬A,R,B⟩, ⟨A,R,¬B⟩ and ⟨¬A,R,¬B⟩. ANION originals
/// already have a negated if-event, so only the then-event is negated,
/// giving ⟨¬A,R,¬B′⟩.
pub fn generate_variants(triple: &Triple) -> Result<Vec<Triple>> {
    if !triple.is_original() {
        return Err(Error::NotAnOriginal(triple.id.clone()));
    }
    let (neg_tail, _) = negate_tail(&triple.tail)?;
    match triple.source {
        Source::Anion => Ok(vec![Triple::derived(
            triple,
            Variant::NegBoth,
            triple.head.clone(),
            neg_tail,
        )]),
        Source::Atomic | Source::Generated => {
            let (neg_head, _) = negate_head(&triple.head)?;
            Ok(vec![
                Triple::derived(triple, Variant::NegIf, neg_head.clone(), triple.tail.clone()),
                Triple::derived(triple, Variant::NegThen, triple.head.clone(), neg_tail.clone()),
                Triple::derived(triple, Variant::NegBoth, neg_head, neg_tail),
            ])
        }
    }
}

/// Result of negating a whole corpus: originals followed by their variants,
/// plus originals the rule engine could not negate.
#[derive(Debug, Clone, Default)]
pub struct NegatedCorpus {
    pub triples: Vec<Triple>,
    pub failures: Vec<(String, String)>,
}

/// Negates every original, keeping input order: each original is followed
/// directly by its variants. Failures are reported, not fatal.
pub fn negate_corpus(originals: &[Triple]) -> NegatedCorpus {
    let mut out = NegatedCorpus::default();
    for t in originals {
        match generate_variants(t) {
            Ok(variants) => {
                out.triples.push(t.clone());
                out.triples.extend(variants);
            }
            Err(e) => out.failures.push((t.id.clone(), e.to_string())),
        }
    }
    out
}

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{lexicon, negate_head, negate_tail};
use crate::corpus::EventText;
use crate::error::{Error, Result};
use crate::llm::{bindings, render_template, ChatClient, ModelSettings, PromptTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerativeOutcome {
    pub event: EventText,
    /// The backend rewrite was rejected and the rule engine answered instead.
    pub fallback: bool,
}

/// Negates events through a chat backend prompted with exemplars.
pub struct GenerativeNegator<'a> {
    client: &'a ChatClient,
    template: PromptTemplate,
    settings: ModelSettings,
    allow_fallback: bool,
    min_overlap: f64,
    fallbacks: AtomicUsize,
}

fn normalize(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(normalize)
        .filter(|t| !t.is_empty() && t != lexicon::NEGATION_CUE && !lexicon::STOPWORDS.contains(&t.as_str()))
        .map(|t| lexicon::lemmatize(&t))
        .collect()
}

/// Share of the original's content tokens (lemmatized, stopwords removed)
/// that survive in the rewrite.
pub fn content_overlap(original: &str, rewrite: &str) -> f64 {
    let before = content_tokens(original);
    if before.is_empty() {
        return 1.0;
    }
    let after = content_tokens(rewrite);
    before.intersection(&after).count() as f64 / before.len() as f64
}

fn has_cue(text: &str) -> bool {
    text.split_whitespace()
        .any(|t| normalize(t) == lexicon::NEGATION_CUE)
}

fn clean(raw: &str) -> &str {
    let line = raw.trim().lines().next().unwrap_or("").trim();
    line.strip_prefix("Event:").map(str::trim).unwrap_or(line)
}

impl<'a> GenerativeNegator<'a> {
    pub fn new(client: &'a ChatClient, template: PromptTemplate, settings: ModelSettings) -> Self {
        GenerativeNegator {
            client,
            template,
            settings,
            allow_fallback: true,
            min_overlap: 0.8,
            fallbacks: AtomicUsize::new(0),
        }
    }

    pub fn with_fallback(mut self, allow: bool) -> Self {
        self.allow_fallback = allow;
        self
    }

    /// Times the rule engine stood in for a rejected rewrite.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::SeqCst)
    }

    fn accept(&self, event: &EventText, side: Side, raw: &str) -> Result<GenerativeOutcome> {
        let rewrite = clean(raw);
        if has_cue(rewrite) && content_overlap(event.text(), rewrite) >= self.min_overlap {
            return Ok(GenerativeOutcome {
                event: EventText::negated(rewrite)?,
                fallback: false,
            });
        }
        if !self.allow_fallback {
            return Err(Error::RewriteRejected {
                original: event.text().to_string(),
                rewrite: rewrite.to_string(),
            });
        }
        self.fallbacks.fetch_add(1, Ordering::SeqCst);
        log::debug!("rewrite `{rewrite}` rejected for `{}`, using rules", event.text());
        let (negated, _) = match side {
            Side::Head => negate_head(event)?,
            Side::Tail => negate_tail(event)?,
        };
        Ok(GenerativeOutcome {
            event: negated,
            fallback: true,
        })
    }

    pub fn negate(&self, event: &EventText, side: Side) -> Result<GenerativeOutcome> {
        self.negate_many(&[(event.clone(), side)]).remove(0)
    }

    /// Negates a batch through the client's bounded concurrency; results
    /// keep input order.
    pub fn negate_many(&self, events: &[(EventText, Side)]) -> Vec<Result<GenerativeOutcome>> {
        let requests: Vec<Result<_>> = events
            .iter()
            .map(|(e, _)| {
                if e.is_negated() {
                    return Err(Error::AlreadyNegated(e.text().to_string()));
                }
                render_template(&self.template, &bindings([("event", e.text())]), &self.settings)
            })
            .collect();
        let ready: Vec<_> = requests.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
        let mut responses = self.client.complete_many(&ready).into_iter();
        requests
            .into_iter()
            .zip(events)
            .map(|(req, (event, side))| {
                req?;
                let response = responses.next().expect("one response per request")?;
                self.accept(event, *side, &response.content)
            })
            .collect()
    }
}

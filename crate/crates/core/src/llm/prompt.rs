use std::collections::BTreeMap;
use std::path::Path;

use super::{ChatMessage, ChatRequest, ModelSettings, Role};
use crate::error::{Error, Result};

/// A chat prompt asset.
///
/// Assets are plain text split into messages by header lines of the form
/// `### system`, `### user` or `### assistant`. Text without any header is a
/// single user message. `{name}` is a placeholder; `{{` and `}}` are literal
/// braces. Any other brace is kept as is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub messages: Vec<(Role, String)>,
}

fn header_role(line: &str) -> Option<Role> {
    match line.trim_end() {
        "### system" => Some(Role::System),
        "### user" => Some(Role::User),
        "### assistant" => Some(Role::Assistant),
        _ => None,
    }
}

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Self {
        let mut messages: Vec<(Role, String)> = Vec::new();
        let mut current: Option<(Role, Vec<&str>)> = None;
        let mut preamble: Vec<&str> = Vec::new();
        for line in text.lines() {
            if let Some(role) = header_role(line) {
                if let Some((r, body)) = current.take() {
                    messages.push((r, body.join("\n").trim().to_string()));
                }
                current = Some((role, Vec::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push(line);
            } else {
                preamble.push(line);
            }
        }
        if let Some((r, body)) = current {
            messages.push((r, body.join("\n").trim().to_string()));
        }
        let preamble = preamble.join("\n").trim().to_string();
        if !preamble.is_empty() {
            messages.insert(0, (Role::User, preamble));
        }
        PromptTemplate {
            name: name.to_string(),
            messages,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::parse(&name, &text))
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (_, body) in &self.messages {
            for piece in scan(body) {
                if let Piece::Slot(n) = piece {
                    if !names.iter().any(|x| x == n) {
                        names.push(n.to_string());
                    }
                }
            }
        }
        names
    }

    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<Vec<ChatMessage>> {
        self.messages
            .iter()
            .map(|(role, body)| {
                let mut out = String::with_capacity(body.len());
                for piece in scan(body) {
                    match piece {
                        Piece::Text(t) => out.push_str(t),
                        Piece::Slot(n) => out.push_str(
                            bindings
                                .get(n)
                                .ok_or_else(|| Error::TemplateError(n.to_string()))?,
                        ),
                    }
                }
                Ok(ChatMessage {
                    role: *role,
                    content: out,
                })
            })
            .collect()
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn scan(body: &str) -> Vec<Piece<'_>> {
    let mut pieces = Vec::new();
    let bytes = body.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                pieces.push(Piece::Text(&body[start..=i]));
                i += 2;
                start = i;
            }
            b'{' => match body[i + 1..].find('}') {
                Some(len) if is_ident(&body[i + 1..i + 1 + len]) => {
                    pieces.push(Piece::Text(&body[start..i]));
                    pieces.push(Piece::Slot(&body[i + 1..i + 1 + len]));
                    i += len + 2;
                    start = i;
                }
                _ => i += 1,
            },
            _ => i += 1,
        }
    }
    pieces.push(Piece::Text(&body[start..]));
    pieces
}

/// Renders a template into a request for the given model.
pub fn render_template(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
    settings: &ModelSettings,
) -> Result<ChatRequest> {
    let request = ChatRequest {
        model: settings.model.clone(),
        messages: template.render(bindings)?,
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
    };
    request.validate()?;
    Ok(request)
}

pub fn bindings<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

macro_rules! asset {
    ($fn:ident, $file:literal) => {
        pub fn $fn() -> PromptTemplate {
            PromptTemplate::parse($file, include_str!(concat!("../../assets/", $file, ".txt")))
        }
    };
}

/// Prompt assets bundled with the crate.
pub mod assets {
    use super::PromptTemplate;

    asset!(invalid_generation, "invalid_generation");
    asset!(judge, "judge");
    asset!(negation, "negation");
    asset!(condaqa, "condaqa");
    asset!(rte, "rte");
    asset!(nli, "nli");
    asset!(nevir, "nevir");
    asset!(commonsenseqa, "commonsenseqa");

    /// Default instruction line for exported training records.
    pub fn instruction() -> &'static str {
        include_str!("../../assets/instruction.txt").trim_end()
    }

    pub fn by_name(name: &str) -> Option<PromptTemplate> {
        Some(match name {
            "invalid_generation" => invalid_generation(),
            "judge" => judge(),
            "negation" => negation(),
            "condaqa" => condaqa(),
            "rte" => rte(),
            "nli" => nli(),
            "nevir" => nevir(),
            "commonsenseqa" => commonsenseqa(),
            _ => return None,
        })
    }
}

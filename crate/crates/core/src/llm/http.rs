use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatResponse, SendError, Usage};
use crate::error::{Error, Result};

/// OpenAI-compatible chat-completion endpoint.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpBackend {
    /// `api_key_env` names the environment variable holding the credential.
    /// An unset variable means requests are sent without authorization.
    pub fn new(base_url: &str, api_key_env: Option<&str>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::BackendUnavailable {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key_env.and_then(|name| std::env::var(name).ok()),
        })
    }
}

pub(crate) fn parse_body(body: &Value) -> std::result::Result<ChatResponse, SendError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| SendError::Protocol("response has no choices".into()))?;
    let finish_reason = choice
        .get("finish_reason")
        .and_then(Value::as_str)
        .unwrap_or("stop")
        .to_string();
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .or_else(|| choice.get("text").and_then(Value::as_str));
    let content = match content {
        Some(c) => c.to_string(),
        None if finish_reason != "stop" => String::new(),
        None => return Err(SendError::Protocol("choice has no message content".into())),
    };
    let usage = body
        .get("usage")
        .and_then(|u| serde_json::from_value::<Usage>(u.clone()).ok())
        .unwrap_or_default();
    Ok(ChatResponse {
        content,
        finish_reason,
        usage,
    })
}

impl ChatBackend for HttpBackend {
    fn id(&self) -> String {
        self.url.clone()
    }

    fn send(&self, request: &ChatRequest) -> std::result::Result<ChatResponse, SendError> {
        let payload = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut builder = self.client.post(&self.url).json(&payload);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| SendError::Transient(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| SendError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(SendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(SendError::Fatal(format!("HTTP {status}: {text}")));
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| SendError::Protocol(e.to_string()))?;
        parse_body(&body)
    }
}

//! OpenAI-style chat-completion endpoint.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ClientError;

#[derive(Debug, Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    content: Option<Value>,
}

#[derive(Debug)]
pub struct HttpBackend {
    client: Client,
    url: String,
    model: String,
    api_key: Option<String>,
    temperature: Option<f64>,
    max_retries: u32,
    backoff: Duration,
}

enum Attempt {
    Done(String),
    Retry(ClientError),
    Fail(ClientError),
}

impl HttpBackend {
    pub fn new(
        url: &str,
        model: &str,
        api_key: Option<String>,
        temperature: Option<f64>,
        max_retries: u32,
        backoff: Duration,
        timeout: Duration,
    ) -> Result<Self, ClientError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::InvalidConfig(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: url.to_string(),
            model: model.to_string(),
            api_key,
            temperature,
            max_retries,
            backoff,
        })
    }

    /// Sends one request, retrying transient failures with exponential
    /// backoff (`backoff`, 2×, 4×, ...).
    pub fn complete(&self, system: &str, user: &str) -> Result<String, ClientError> {
        let body = ChatRequest {
            model: &self.model,
            messages: [
                Message {
                    role: "system",
                    content: system,
                },
                Message {
                    role: "user",
                    content: user,
                },
            ],
            temperature: self.temperature,
        };
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    let delay = self.backoff.saturating_mul(1 << attempt.min(16));
                    log::debug!("retrying after {delay:?}: {e}");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Attempt {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(ClientError::BackendUnavailable(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(ClientError::BackendUnavailable(e.to_string())),
        };
        match status {
            s if s.is_success() => match extract_content(&text) {
                Ok(c) => Attempt::Done(c),
                Err(e) => Attempt::Fail(e),
            },
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                Attempt::Fail(ClientError::AuthError(format!("{status}: {}", snippet(&text))))
            }
            StatusCode::TOO_MANY_REQUESTS => Attempt::Retry(ClientError::RateLimited(snippet(&text))),
            s if s.is_server_error() || s == StatusCode::REQUEST_TIMEOUT => {
                Attempt::Retry(ClientError::BackendUnavailable(format!("{status}: {}", snippet(&text))))
            }
            _ => Attempt::Fail(ClientError::Rejected(format!("{status}: {}", snippet(&text)))),
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

/// `choices[0].message.content`, as a string or a list of text parts.
fn extract_content(body: &str) -> Result<String, ClientError> {
    let parsed: ChatResponse =
        serde_json::from_str(body).map_err(|e| ClientError::Protocol(format!("{e}: {}", snippet(body))))?;
    let content = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| ClientError::Protocol("response has no message content".into()))?;
    match content {
        Value::String(s) => Ok(s),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        other => Err(ClientError::Protocol(format!("unexpected content {other}"))),
    }
}

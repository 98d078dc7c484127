//! Chat-completions client for the generation step.

use serde::{Deserialize, Serialize};

use crate::config::Endpoint;

#[derive(Debug, Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: [ChatMessage<'a>; 1],
    pub temperature: f64,
}

#[derive(Debug, Serialize)]
pub struct ChatMessage<'a> {
    pub role: &'a str,
    pub content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

#[derive(Debug)]
pub enum GenerateError {
    /// No endpoint configured.
    MissingUrl,
    /// Transport failure or non-success status.
    Http(String),
    /// The endpoint answered with something other than a chat completion.
    BadResponse(String),
}

impl std::fmt::Display for GenerateError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::MissingUrl => write!(
                f,
                "no generation endpoint configured; set REPOSCOPE_LLM_URL or --llm-url"
            ),
            Self::Http(m) => write!(f, "generation request failed: {m}"),
            Self::BadResponse(m) => write!(f, "unexpected generation response: {m}"),
        }
    }
}

impl std::error::Error for GenerateError {}

pub fn request_body<'a>(prompt: &'a str, endpoint: &'a Endpoint) -> ChatRequest<'a> {
    ChatRequest {
        model: &endpoint.model,
        messages: [ChatMessage {
            role: "user",
            content: prompt,
        }],
        temperature: endpoint.temperature,
    }
}

fn send_once(prompt: &str, endpoint: &Endpoint, url: &str) -> Result<String, GenerateError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(endpoint.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut request = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = &endpoint.key {
        request = request.header("Authorization", format!("Bearer {key}"));
    }
    let mut response = request
        .send_json(request_body(prompt, endpoint))
        .map_err(|e| GenerateError::Http(e.to_string()))?;
    let status = response.status();
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| GenerateError::Http(e.to_string()))?;
    if !status.is_success() {
        return Err(GenerateError::Http(format!("{url} returned {status}: {}", body.trim())));
    }
    let parsed: ChatResponse = serde_json::from_str(&body).map_err(|e| GenerateError::BadResponse(e.to_string()))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| GenerateError::BadResponse("no completion in `choices`".into()))
}

/// Sends `prompt` as a single user message and returns the first completion
/// verbatim. Transport and status failures are retried `endpoint.retries`
/// times; malformed replies are not.
pub fn generate(prompt: &str, endpoint: &Endpoint) -> Result<String, GenerateError> {
    let url = endpoint.url.as_deref().ok_or(GenerateError::MissingUrl)?;
    let mut attempt = 0;
    loop {
        match send_once(prompt, endpoint, url) {
            Err(GenerateError::Http(m)) if attempt < endpoint.retries => {
                eprintln!("warning: {m}; retrying");
                attempt += 1;
                std::thread::sleep(std::time::Duration::from_millis(250 * u64::from(attempt)));
            }
            other => return other,
        }
    }
}

use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{BackendConfig, ChatBackend, CompletionRequest, GatewayError, Part};

/// Chat-completions client using the common multi-part message schema with
/// base64 PNG data URLs.
#[derive(Debug)]
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    max_tokens: u32,
    temperature: f64,
}

impl RemoteBackend {
    pub fn from_config(config: &BackendConfig) -> Result<Self, GatewayError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| GatewayError::Config("missing endpoint".into()))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                GatewayError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            model: config.model.clone(),
            api_key,
            max_tokens: config.max_tokens,
            temperature: config.temperature,
        })
    }

    pub fn body(&self, request: &CompletionRequest) -> Value {
        let messages: Vec<Value> = request
            .turns
            .iter()
            .map(|t| {
                let content: Vec<Value> = t
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Text(text) => json!({ "type": "text", "text": text }),
                        Part::Image { png, .. } => {
                            let b64 = base64::engine::general_purpose::STANDARD.encode(png);
                            json!({
                                "type": "image_url",
                                "image_url": { "url": format!("data:image/png;base64,{b64}") }
                            })
                        }
                    })
                    .collect();
                json!({ "role": t.role.as_str(), "content": content })
            })
            .collect();
        json!({
            "model": self.model,
            "messages": messages,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        })
    }

    fn send(&self, body: &Value) -> Result<String, GatewayError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(GatewayError::Http {
                status: status.as_u16(),
                body: text.chars().take(512).collect(),
            });
        }
        assistant_text(&text)
    }
}

/// Extracts `choices[0].message.content`, joining text parts if the content
/// is a list.
pub(crate) fn assistant_text(body: &str) -> Result<String, GatewayError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join("")),
        _ => Err(GatewayError::BadResponse(body.chars().take(200).collect())),
    }
}

impl ChatBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let body = self.body(request);
        match self.send(&body) {
            Err(GatewayError::Timeout) => {
                tracing::warn!("completion timed out, retrying once");
                self.send(&body)
            }
            other => other,
        }
    }
}

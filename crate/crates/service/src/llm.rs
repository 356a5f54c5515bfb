//! Chat-completion transport for external negotiation policies.

use serde_json::{json, Value};
use srb_core::agents::ChatTransport;
use std::sync::Mutex;
use std::time::Duration;

pub const TOKEN_ENV: &str = "SRB_LLM_TOKEN";

/// One request/response pair, with the bearer token removed.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Exchange {
    pub endpoint: String,
    pub request: Value,
    pub response: Option<Value>,
    pub error: Option<String>,
}

/// POSTs OpenAI-style chat requests to `endpoint`.
pub struct HttpChatTransport {
    pub endpoint: String,
    pub model: String,
    token: Option<String>,
    exchanges: Mutex<Vec<Exchange>>,
}

impl HttpChatTransport {
    /// Reads the bearer token from `SRB_LLM_TOKEN` when set.
    pub fn from_env(endpoint: &str, model: &str) -> Self {
        Self::new(endpoint, model, std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()))
    }

    pub fn new(endpoint: &str, model: &str, token: Option<String>) -> Self {
        Self { endpoint: endpoint.into(), model: model.into(), token, exchanges: Mutex::new(Vec::new()) }
    }

    /// Exchanges so far, oldest first.
    pub fn exchanges(&self) -> Vec<Exchange> {
        self.exchanges.lock().expect("exchange log").clone()
    }

    fn redact(&self, text: String) -> String {
        match &self.token {
            Some(t) => text.replace(t.as_str(), "[REDACTED]"),
            None => text,
        }
    }

    fn call(&self, body: &Value, timeout: Duration) -> Result<Value, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        let mut req = agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(body).map_err(|e| self.redact(e.to_string()))?;
        resp.body_mut().read_json::<Value>().map_err(|e| self.redact(e.to_string()))
    }
}

/// Text of the first choice of a chat-completion response.
pub fn reply_text(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string)
}

impl ChatTransport for HttpChatTransport {
    fn complete(&self, system: &str, user: &str, timeout: Duration) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "messages": [
                { "role": "system", "content": system },
                { "role": "user", "content": user },
            ],
            "temperature": 0,
        });
        let result = self.call(&body, timeout);
        let text = match &result {
            Ok(v) => reply_text(v).ok_or_else(|| "response has no choices[0].message.content".to_string()),
            Err(e) => Err(e.clone()),
        };
        self.exchanges.lock().expect("exchange log").push(Exchange {
            endpoint: self.endpoint.clone(),
            request: body,
            response: result.ok(),
            error: text.as_ref().err().cloned(),
        });
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_text_reads_first_choice() {
        let v = json!({ "choices": [{ "message": { "role": "assistant", "content": "{\"offer_id\": 2}" } }] });
        assert_eq!(reply_text(&v).as_deref(), Some("{\"offer_id\": 2}"));
        assert_eq!(reply_text(&json!({})), None);
    }

    #[test]
    fn unreachable_endpoint_is_an_error_without_token() {
        let t = HttpChatTransport::new("http://127.0.0.1:9/v1/chat/completions", "m", Some("sekret".into()));
        let err = t.complete("s", "u", Duration::from_millis(200)).unwrap_err();
        assert!(!err.contains("sekret"));
        let log = t.exchanges();
        assert_eq!(log.len(), 1);
        assert!(!serde_json::to_string(&log).unwrap().contains("sekret"));
    }
}

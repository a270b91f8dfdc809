use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::{BackendError, ModelBackend, ModelRequest, ModelResponse};

/// Environment variable holding the upstream bearer token.
pub const API_KEY_ENV: &str = "SHIELD_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub timeout: Duration,
    /// Upper bound on concurrent in-flight upstream requests.
    pub max_in_flight: usize,
    pub api_key: Option<String>,
    /// Replaces the endpoint of every request's model spec when set.
    pub endpoint_override: Option<String>,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            timeout: Duration::from_secs(30),
            max_in_flight: 8,
            api_key: None,
            endpoint_override: None,
        }
    }
}

impl HttpBackendConfig {
    pub fn from_env() -> Self {
        HttpBackendConfig {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            ..Default::default()
        }
    }
}

/// Chat-completions client: one POST per request, reply read from
/// `choices[0].message.content`.
#[derive(Clone)]
pub struct HttpBackend {
    client: reqwest::Client,
    permits: Arc<Semaphore>,
    config: HttpBackendConfig,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::InvalidRequest(format!("building HTTP client: {e}")))?;
        Ok(HttpBackend {
            client,
            permits: Arc::new(Semaphore::new(config.max_in_flight.max(1))),
            config,
        })
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    /// The JSON body sent upstream for `req`.
    pub fn wire_body(req: &ModelRequest) -> Value {
        json!({
            "model": req.model.name,
            "temperature": req.attributes.temperature,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
        })
    }
}

#[async_trait]
impl ModelBackend for HttpBackend {
    async fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError> {
        if req.user.trim().is_empty() {
            return Err(BackendError::InvalidRequest("user prompt is empty".into()));
        }
        let endpoint = self.config.endpoint_override.as_deref().unwrap_or(&req.model.endpoint);
        let _permit = self.permits.acquire().await.expect("semaphore is never closed");

        let mut call = self.client.post(endpoint).json(&Self::wire_body(req));
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let reply = call.send().await.map_err(map_transport_error)?;
        let status = reply.status();
        if !status.is_success() {
            return Err(BackendError::UpstreamStatus(status.as_u16()));
        }
        let body = reply.bytes().await.map_err(map_transport_error)?;
        let value: Value = serde_json::from_slice(&body)
            .map_err(|e| BackendError::MalformedUpstreamBody(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(ModelResponse::new)
            .ok_or_else(|| {
                BackendError::MalformedUpstreamBody("missing choices[0].message.content".into())
            })
    }
}

fn map_transport_error(e: reqwest::Error) -> BackendError {
    if e.is_timeout() || e.is_connect() {
        BackendError::Timeout(e.to_string())
    } else if e.is_decode() || e.is_body() {
        BackendError::MalformedUpstreamBody(e.to_string())
    } else {
        BackendError::Timeout(e.to_string())
    }
}

//! Sends rendered prompts to a model backend: an OpenAI-style chat
//! endpoint or a deterministic mock. Responses are cached on disk, network
//! calls are retried and rate limited, and batches run on a bounded pool.

pub mod cache;
pub mod http;
pub mod limiter;
pub mod mock;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use dualtask_core::RenderedPrompt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::ResponseCache;
pub use mock::{Cell, MockBackend, MockPolicy};

use cache::CachedRequest;
use http::HttpBackend;
use limiter::RateLimiter;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClientError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    /// Leave the temperature out of the request, for models that reject it.
    pub omit_temperature: bool,
    pub max_retries: u32,
    /// First retry delay; doubles on each further retry.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub requests_per_minute: Option<u32>,
    pub cache_dir: Option<PathBuf>,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub mock: MockPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint_url: None,
            model_name: "mock".into(),
            temperature: 0.0,
            omit_temperature: false,
            max_retries: 4,
            backoff_ms: 500,
            timeout_secs: 120,
            requests_per_minute: None,
            cache_dir: None,
            api_key_env: "DUALTASK_API_KEY".into(),
            mock: MockPolicy::default(),
        }
    }
}

impl BackendConfig {
    pub fn mock(policy: MockPolicy) -> Self {
        BackendConfig {
            model_name: format!("mock-{}", policy.seed),
            mock: policy,
            ..BackendConfig::default()
        }
    }

    pub fn http(url: &str, model: &str) -> Self {
        BackendConfig {
            kind: BackendKind::HttpChat,
            endpoint_url: Some(url.to_string()),
            model_name: model.to_string(),
            ..BackendConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if self.model_name.trim().is_empty() {
            return Err(ClientError::InvalidConfig("model_name is empty".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ClientError::InvalidConfig(format!("temperature {}", self.temperature)));
        }
        match self.kind {
            BackendKind::HttpChat if self.endpoint_url.as_deref().is_none_or(str::is_empty) => {
                Err(ClientError::InvalidConfig("http_chat needs endpoint_url".into()))
            }
            BackendKind::Mock => self.mock.validate(),
            BackendKind::HttpChat => Ok(()),
        }
    }
}

#[derive(Debug)]
enum Backend {
    Mock(MockBackend),
    Http(HttpBackend),
}

/// A configured backend with its cache and rate limiter.
#[derive(Debug)]
pub struct ModelClient {
    config: BackendConfig,
    backend: Backend,
    cache: Option<ResponseCache>,
    limiter: RateLimiter,
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl ModelClient {
    pub fn new(config: BackendConfig) -> Result<Self, ClientError> {
        config.validate()?;
        if config.temperature != 0.0 && !config.omit_temperature {
            log::warn!(
                "temperature set to {}; runs are only reproducible at 0.0 and some models reject the parameter",
                config.temperature
            );
        }
        let backend = match config.kind {
            BackendKind::Mock => Backend::Mock(MockBackend::new(config.mock.clone())?),
            BackendKind::HttpChat => {
                let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
                if api_key.is_none() {
                    log::info!("{} is not set; sending requests without an API key", config.api_key_env);
                }
                Backend::Http(HttpBackend::new(
                    config.endpoint_url.as_deref().unwrap_or_default(),
                    &config.model_name,
                    api_key,
                    (!config.omit_temperature).then_some(config.temperature),
                    config.max_retries,
                    Duration::from_millis(config.backoff_ms),
                    Duration::from_secs(config.timeout_secs),
                )?)
            }
        };
        let cache = config.cache_dir.as_deref().map(ResponseCache::open).transpose()?;
        Ok(ModelClient {
            limiter: RateLimiter::new(config.requests_per_minute),
            config,
            backend,
            cache,
            backend_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Requests that reached the backend (cache misses).
    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> usize {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn complete(&self, prompt: &RenderedPrompt) -> Result<String, ClientError> {
        let request = CachedRequest {
            model: self.config.model_name.clone(),
            system: prompt.system_text.clone(),
            user: prompt.user_text.clone(),
            temperature: (!self.config.omit_temperature).then_some(self.config.temperature),
        };
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&request)) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.backend_calls.fetch_add(1, Ordering::Relaxed);
        let text = match &self.backend {
            Backend::Mock(m) => m.respond(prompt)?,
            Backend::Http(h) => {
                self.limiter.acquire();
                h.complete(&prompt.system_text, &prompt.user_text)?
            }
        };
        if let Some(c) = &self.cache {
            c.put(&request, &text)?;
        }
        Ok(text)
    }

    /// Completes every prompt with at most `parallelism` in flight.
    /// Output order matches input order; failures stay per prompt.
    pub fn run_batch(&self, prompts: &[RenderedPrompt], parallelism: usize) -> Vec<Result<String, ClientError>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| prompts.par_iter().map(|p| self.complete(p)).collect())
    }
}

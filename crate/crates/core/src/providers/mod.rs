//! Uniform client layer over black-box image-generation and reasoning
//! models: one canonical request/response shape, content-addressed response
//! caching, bounded concurrency, and retries with exponential backoff.
//! Deterministic mocks make every pipeline testable at desk scale.

mod cache;
mod http;
mod mock;

pub use cache::ResponseCache;
pub use http::HttpProvider;
pub use mock::{MockProvider, RequestLogEntry, ScriptStep};

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{content_digest, image_digest, png_bytes, ContentDigest};

/// What a request asks the model to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    ImageGeneration,
    TextReasoning,
}

impl RequestKind {
    fn as_str(&self) -> &'static str {
        match self {
            RequestKind::ImageGeneration => "image_generation",
            RequestKind::TextReasoning => "text_reasoning",
        }
    }
}

/// One model call in the canonical shape adapters map onto vendor APIs.
#[derive(Debug, Clone)]
pub struct ModelRequest {
    pub kind: RequestKind,
    pub prompt: String,
    pub input_images: Vec<RgbImage>,
    pub params: BTreeMap<String, String>,
}

impl ModelRequest {
    pub fn text(prompt: impl Into<String>) -> Self {
        ModelRequest {
            kind: RequestKind::TextReasoning,
            prompt: prompt.into(),
            input_images: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn image_generation(prompt: impl Into<String>) -> Self {
        ModelRequest {
            kind: RequestKind::ImageGeneration,
            prompt: prompt.into(),
            input_images: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_images(mut self, images: Vec<RgbImage>) -> Self {
        self.input_images = images;
        self
    }
}

/// Token/image counts reported (or synthesized) for one response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub images: u64,
}

/// A model response in canonical shape.
#[derive(Debug, Clone, Default)]
pub struct ModelResponse {
    pub images: Vec<RgbImage>,
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub from_cache: bool,
}

/// Retry schedule for transient failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 250,
            multiplier: 2.0,
        }
    }
}

/// Per-unit prices for cost accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub usd_per_image: f64,
    pub usd_per_video_second: f64,
    pub usd_per_1k_input_tokens: f64,
    pub usd_per_1k_output_tokens: f64,
}

impl Default for UnitCosts {
    fn default() -> Self {
        UnitCosts {
            usd_per_image: 0.134,
            usd_per_video_second: 0.10,
            usd_per_1k_input_tokens: 0.0,
            usd_per_1k_output_tokens: 0.0,
        }
    }
}

impl UnitCosts {
    /// Nominal cost of one response under these prices.
    pub fn response_cost(&self, usage: &Usage) -> f64 {
        usage.images as f64 * self.usd_per_image
            + usage.input_tokens as f64 / 1000.0 * self.usd_per_1k_input_tokens
            + usage.output_tokens as f64 / 1000.0 * self.usd_per_1k_output_tokens
    }
}

/// Identity and operating parameters of one model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub provider_id: String,
    pub model_id: String,
    #[serde(default)]
    pub endpoint: String,
    /// Environment variable holding the bearer token; None for providers
    /// that need no auth (mocks).
    #[serde(default)]
    pub auth_env_var: Option<String>,
    pub max_concurrency: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub unit_costs: UnitCosts,
}

impl ProviderSpec {
    pub fn mock(provider_id: &str, model_id: &str) -> Self {
        ProviderSpec {
            provider_id: provider_id.to_string(),
            model_id: model_id.to_string(),
            endpoint: String::new(),
            auth_env_var: None,
            max_concurrency: 4,
            retry: RetryPolicy::default(),
            unit_costs: UnitCosts::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("auth token env var `{0}` is not set")]
    AuthMissing(String),
    #[error("transient failure (status {status:?}): {message}")]
    Transient { status: Option<u16>, message: String },
    #[error("request rejected (status {status:?}): {message}")]
    Rejected { status: Option<u16>, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("mock script exhausted after {0} requests")]
    ScriptExhausted(usize),
    #[error("retries exhausted after {attempts} attempts; last: {last}")]
    ExhaustedRetries {
        attempts: u32,
        #[source]
        last: Box<ProviderError>,
    },
    #[error("cache error: {0}")]
    Cache(String),
}

impl ProviderError {
    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::Transient { .. })
    }

    /// Status code of the final failure, when the failure carried one.
    pub fn last_status(&self) -> Option<u16> {
        match self {
            ProviderError::Transient { status, .. } | ProviderError::Rejected { status, .. } => {
                *status
            }
            ProviderError::ExhaustedRetries { last, .. } => last.last_status(),
            _ => None,
        }
    }
}

/// One raw model call; retries, caching, and admission live in
/// [`ProviderClient`].
pub trait Provider: Send + Sync {
    fn spec(&self) -> &ProviderSpec;
    fn call(&self, request: &ModelRequest) -> Result<ModelResponse, ProviderError>;
}

/// Content-addressed key for a request against a provider: SHA-256 over a
/// length-framed encoding of (provider, model, kind, prompt, input-image
/// digests in order, params sorted by key).
pub fn cache_key(request: &ModelRequest, spec: &ProviderSpec) -> ContentDigest {
    let mut buf = Vec::new();
    let mut frame = |tag: &str, bytes: &[u8]| {
        buf.extend_from_slice(tag.as_bytes());
        buf.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        buf.extend_from_slice(bytes);
    };
    frame("provider", spec.provider_id.as_bytes());
    frame("model", spec.model_id.as_bytes());
    frame("kind", request.kind.as_str().as_bytes());
    frame("prompt", request.prompt.as_bytes());
    for image in &request.input_images {
        frame("image", image_digest(image).as_str().as_bytes());
    }
    for (key, value) in &request.params {
        frame("param", format!("{key}={value}").as_bytes());
    }
    content_digest(&buf)
}

/// Counting semaphore bounding in-flight requests per provider.
pub struct AdmissionGate {
    state: Mutex<usize>,
    available: Condvar,
    max: usize,
}

impl AdmissionGate {
    pub fn new(max: usize) -> Arc<Self> {
        Arc::new(AdmissionGate {
            state: Mutex::new(0),
            available: Condvar::new(),
            max: max.max(1),
        })
    }

    pub fn acquire(self: &Arc<Self>) -> GatePermit {
        let mut in_flight = self.state.lock().expect("gate lock");
        while *in_flight >= self.max {
            in_flight = self.available.wait(in_flight).expect("gate wait");
        }
        *in_flight += 1;
        GatePermit { gate: Arc::clone(self) }
    }
}

pub struct GatePermit {
    gate: Arc<AdmissionGate>,
}

impl Drop for GatePermit {
    fn drop(&mut self) {
        let mut in_flight = self.gate.state.lock().expect("gate lock");
        *in_flight -= 1;
        self.gate.available.notify_one();
    }
}

/// A provider wrapped with its cache, retry policy, and admission gate —
/// the execution surface the pipeline uses.
pub struct ProviderClient {
    provider: Arc<dyn Provider>,
    cache: Option<Arc<ResponseCache>>,
    gate: Arc<AdmissionGate>,
}

impl ProviderClient {
    pub fn new(provider: Arc<dyn Provider>, cache: Option<Arc<ResponseCache>>) -> Self {
        let gate = AdmissionGate::new(provider.spec().max_concurrency);
        ProviderClient { provider, cache, gate }
    }

    pub fn spec(&self) -> &ProviderSpec {
        self.provider.spec()
    }

    /// Execute a request: serve from cache when possible, otherwise call
    /// the provider under the admission gate, retrying transient failures
    /// with exponential backoff, and record the success in the cache.
    pub fn execute(&self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let key = cache_key(request, self.provider.spec());
        if let Some(cache) = &self.cache {
            if let Some(mut hit) = cache
                .get(&self.provider.spec().provider_id, &key)
                .map_err(|e| ProviderError::Cache(e.to_string()))?
            {
                hit.from_cache = true;
                return Ok(hit);
            }
        }

        let _permit = self.gate.acquire();
        let retry = self.provider.spec().retry;
        let mut attempt = 0u32;
        let response = loop {
            attempt += 1;
            match self.provider.call(request) {
                Ok(response) => break response,
                Err(err) if err.is_transient() && attempt < retry.max_attempts => {
                    let backoff = retry.base_backoff_ms as f64
                        * retry.multiplier.powi(attempt as i32 - 1);
                    std::thread::sleep(std::time::Duration::from_millis(backoff as u64));
                }
                Err(err) if err.is_transient() => {
                    return Err(ProviderError::ExhaustedRetries {
                        attempts: attempt,
                        last: Box::new(err),
                    });
                }
                Err(err) => return Err(err),
            }
        };

        if let Some(cache) = &self.cache {
            cache
                .put(&self.provider.spec().provider_id, &key, &response)
                .map_err(|e| ProviderError::Cache(e.to_string()))?;
        }
        Ok(response)
    }
}

/// Canonical JSON request body for the HTTP wire contract.
#[derive(Debug, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub kind: RequestKind,
    pub prompt: String,
    /// Base64-encoded PNG bytes, in order.
    #[serde(default)]
    pub images: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

/// Canonical JSON response body for the HTTP wire contract.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct WireResponse {
    #[serde(default)]
    pub text: String,
    /// Base64-encoded PNG bytes.
    #[serde(default)]
    pub images: Vec<String>,
    #[serde(default)]
    pub usage: Usage,
}

pub(crate) fn encode_images(images: &[RgbImage]) -> Vec<String> {
    use base64::Engine;
    images
        .iter()
        .map(|img| base64::engine::general_purpose::STANDARD.encode(png_bytes(img)))
        .collect()
}

pub(crate) fn decode_images(encoded: &[String]) -> Result<Vec<RgbImage>, ProviderError> {
    use base64::Engine;
    encoded
        .iter()
        .map(|data| {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(data)
                .map_err(|e| ProviderError::MalformedResponse(format!("bad base64: {e}")))?;
            crate::domain::decode_image(&bytes)
                .map_err(|e| ProviderError::MalformedResponse(format!("bad image: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ProviderSpec {
        ProviderSpec::mock("mock", "mock-model")
    }

    #[test]
    fn cache_key_is_content_addressed() {
        let a = ModelRequest::text("hello");
        let b = ModelRequest::text("hello");
        assert_eq!(cache_key(&a, &spec()), cache_key(&b, &spec()));

        let c = ModelRequest::text("hello!");
        assert_ne!(cache_key(&a, &spec()), cache_key(&c, &spec()));
    }

    #[test]
    fn cache_key_orders_input_images() {
        let img1 = RgbImage::from_pixel(4, 4, image::Rgb([10, 20, 30]));
        let img2 = RgbImage::from_pixel(4, 4, image::Rgb([30, 20, 10]));
        let fwd = ModelRequest::image_generation("p").with_images(vec![img1.clone(), img2.clone()]);
        let rev = ModelRequest::image_generation("p").with_images(vec![img2, img1]);
        assert_ne!(cache_key(&fwd, &spec()), cache_key(&rev, &spec()));
    }

    #[test]
    fn cache_key_separates_kinds_and_models() {
        let text = ModelRequest::text("p");
        let image = ModelRequest::image_generation("p");
        assert_ne!(cache_key(&text, &spec()), cache_key(&image, &spec()));

        let mut other = spec();
        other.model_id = "different".into();
        assert_ne!(cache_key(&text, &spec()), cache_key(&text, &other));
    }

    #[test]
    fn gate_bounds_in_flight() {
        let gate = AdmissionGate::new(2);
        let p1 = gate.acquire();
        let _p2 = gate.acquire();
        let gate2 = Arc::clone(&gate);
        let handle = std::thread::spawn(move || {
            let _p3 = gate2.acquire();
        });
        // third acquire blocks until a permit drops
        std::thread::sleep(std::time::Duration::from_millis(20));
        assert!(!handle.is_finished());
        drop(p1);
        handle.join().unwrap();
    }
}

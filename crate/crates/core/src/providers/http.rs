//! HTTP adapter for the canonical wire contract: POST a JSON body
//! `{model, kind, prompt, images: [base64 PNG], params}` with bearer auth
//! from the environment, expect `{text?, images?, usage?}` back.
//! Per-vendor adapters sit behind the same [`Provider`] trait; this one is
//! the reference shape.

use std::time::{Duration, Instant};

use super::{
    decode_images, encode_images, ModelRequest, ModelResponse, Provider, ProviderError,
    ProviderSpec, WireRequest, WireResponse,
};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(300);

pub struct HttpProvider {
    spec: ProviderSpec,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(spec: ProviderSpec) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .expect("http client builds");
        HttpProvider { spec, client }
    }

    fn bearer_token(&self) -> Result<Option<String>, ProviderError> {
        match &self.spec.auth_env_var {
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ProviderError::AuthMissing(var.clone())),
            None => Ok(None),
        }
    }
}

impl Provider for HttpProvider {
    fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    fn call(&self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let token = self.bearer_token()?;
        let body = WireRequest {
            model: self.spec.model_id.clone(),
            kind: request.kind,
            prompt: request.prompt.clone(),
            images: encode_images(&request.input_images),
            params: request.params.clone(),
        };

        let started = Instant::now();
        let mut builder = self.client.post(&self.spec.endpoint).json(&body);
        if let Some(token) = token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| {
            // connection-level failures are worth retrying
            ProviderError::Transient { status: None, message: e.to_string() }
        })?;

        let status = response.status();
        let code = status.as_u16();
        if status.is_server_error() || code == 429 {
            return Err(ProviderError::Transient {
                status: Some(code),
                message: format!("http {code}"),
            });
        }
        if !status.is_success() {
            return Err(ProviderError::Rejected {
                status: Some(code),
                message: format!("http {code}"),
            });
        }

        let wire: WireResponse = response
            .json()
            .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
        let images = decode_images(&wire.images)?;
        Ok(ModelResponse {
            images,
            text: wire.text,
            usage: wire.usage,
            latency_ms: started.elapsed().as_millis() as u64,
            from_cache: false,
        })
    }
}

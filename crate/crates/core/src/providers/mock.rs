//! Deterministic in-process providers for desk-scale runs and tests.
//!
//! Two dispatch modes: an ordered script consumed one step per request
//! (with optional cycling), or keyed rules matched against the prompt so
//! responses stay attached to their question under concurrency. Every
//! request is logged for assertions, and the peak number of overlapping
//! calls is tracked so concurrency limits are observable.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use image::RgbImage;

use crate::domain::{image_digest, ContentDigest};

use super::{ModelRequest, ModelResponse, Provider, ProviderError, ProviderSpec, RequestKind, Usage};

/// One canned reaction: a response payload or a scripted failure.
#[derive(Debug, Clone)]
pub enum ScriptStep {
    Text(String),
    Image(RgbImage),
    Images(Vec<RgbImage>),
    Fail { status: Option<u16>, message: String },
}

impl ScriptStep {
    fn into_response(self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        match self {
            ScriptStep::Text(text) => Ok(synth_response(request, text, vec![])),
            ScriptStep::Image(image) => Ok(synth_response(request, String::new(), vec![image])),
            ScriptStep::Images(images) => Ok(synth_response(request, String::new(), images)),
            ScriptStep::Fail { status, message } => {
                Err(ProviderError::Transient { status, message })
            }
        }
    }
}

/// Deterministic usage so mock runs cost the same every time.
fn synth_response(request: &ModelRequest, text: String, images: Vec<RgbImage>) -> ModelResponse {
    let usage = Usage {
        input_tokens: (request.prompt.len() as u64).div_ceil(4),
        output_tokens: (text.len() as u64).div_ceil(4),
        images: images.len() as u64,
    };
    ModelResponse {
        images,
        text,
        usage,
        latency_ms: 0,
        from_cache: false,
    }
}

/// What the mock saw: enough to assert call counts, payloads, and ordering.
#[derive(Debug, Clone)]
pub struct RequestLogEntry {
    pub seq: usize,
    pub kind: RequestKind,
    pub prompt: String,
    pub input_image_digests: Vec<ContentDigest>,
}

enum Dispatch {
    Ordered { steps: Mutex<VecDeque<ScriptStep>>, cycle: bool },
    Keyed { rules: Vec<(String, ScriptStep)>, fallback: Option<ScriptStep> },
}

/// Scripted provider; see the module docs for the two dispatch modes.
pub struct MockProvider {
    spec: ProviderSpec,
    dispatch: Dispatch,
    log: Mutex<Vec<RequestLogEntry>>,
    served: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    hold_ms: u64,
}

impl MockProvider {
    /// Provider that replays `steps` in order and errors when they run out.
    pub fn scripted(spec: ProviderSpec, steps: Vec<ScriptStep>) -> Self {
        MockProvider {
            spec,
            dispatch: Dispatch::Ordered { steps: Mutex::new(steps.into()), cycle: false },
            log: Mutex::new(Vec::new()),
            served: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            hold_ms: 0,
        }
    }

    /// Like [`MockProvider::scripted`] but the script repeats forever.
    pub fn cycling(spec: ProviderSpec, steps: Vec<ScriptStep>) -> Self {
        MockProvider {
            spec,
            dispatch: Dispatch::Ordered { steps: Mutex::new(steps.into()), cycle: true },
            log: Mutex::new(Vec::new()),
            served: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            hold_ms: 0,
        }
    }

    /// Provider that answers by the first rule whose needle occurs in the
    /// prompt. Keeps responses attached to questions under concurrency.
    pub fn keyed(
        spec: ProviderSpec,
        rules: Vec<(String, ScriptStep)>,
        fallback: Option<ScriptStep>,
    ) -> Self {
        MockProvider {
            spec,
            dispatch: Dispatch::Keyed { rules, fallback },
            log: Mutex::new(Vec::new()),
            served: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            hold_ms: 0,
        }
    }

    /// Hold each call open for `ms` so overlap windows are observable.
    pub fn with_hold_ms(mut self, ms: u64) -> Self {
        self.hold_ms = ms;
        self
    }

    pub fn log(&self) -> Vec<RequestLogEntry> {
        self.log.lock().expect("mock log").clone()
    }

    pub fn calls(&self) -> usize {
        self.log.lock().expect("mock log").len()
    }

    /// Peak number of concurrently open calls observed so far.
    pub fn max_observed_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    fn next_step(&self, request: &ModelRequest) -> Result<ScriptStep, ProviderError> {
        match &self.dispatch {
            Dispatch::Ordered { steps, cycle } => {
                let mut queue = steps.lock().expect("mock script");
                match queue.pop_front() {
                    Some(step) => {
                        if *cycle {
                            queue.push_back(step.clone());
                        }
                        Ok(step)
                    }
                    None => Err(ProviderError::ScriptExhausted(
                        self.served.load(Ordering::SeqCst),
                    )),
                }
            }
            Dispatch::Keyed { rules, fallback } => rules
                .iter()
                .find(|(needle, _)| request.prompt.contains(needle))
                .map(|(_, step)| step.clone())
                .or_else(|| fallback.clone())
                .ok_or_else(|| {
                    ProviderError::MalformedResponse(format!(
                        "no mock rule matches prompt: {:.60}",
                        request.prompt
                    ))
                }),
        }
    }
}

impl Provider for MockProvider {
    fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    fn call(&self, request: &ModelRequest) -> Result<ModelResponse, ProviderError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if self.hold_ms > 0 {
            std::thread::sleep(std::time::Duration::from_millis(self.hold_ms));
        }

        let seq = self.served.fetch_add(1, Ordering::SeqCst);
        self.log.lock().expect("mock log").push(RequestLogEntry {
            seq,
            kind: request.kind,
            prompt: request.prompt.clone(),
            input_image_digests: request.input_images.iter().map(image_digest).collect(),
        });

        let result = self
            .next_step(request)
            .and_then(|step| step.into_response(request));
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panels::render_grid_fixture;
    use crate::providers::ProviderClient;
    use std::sync::Arc;

    fn fast_retry_spec(max_attempts: u32) -> ProviderSpec {
        let mut spec = ProviderSpec::mock("mock", "m");
        spec.retry.max_attempts = max_attempts;
        spec.retry.base_backoff_ms = 1;
        spec
    }

    #[test]
    fn scripted_responses_in_order() {
        let comic = render_grid_fixture(2, 2, 16, 16, 4, 0);
        let provider = MockProvider::scripted(
            ProviderSpec::mock("mock", "m"),
            vec![
                ScriptStep::Image(comic.clone()),
                ScriptStep::Text("7".into()),
            ],
        );
        let first = provider.call(&ModelRequest::image_generation("draw")).unwrap();
        assert_eq!(image_digest(&first.images[0]), image_digest(&comic));
        let second = provider.call(&ModelRequest::text("read")).unwrap();
        assert_eq!(second.text, "7");
        assert!(matches!(
            provider.call(&ModelRequest::text("again")),
            Err(ProviderError::ScriptExhausted(_))
        ));
    }

    #[test]
    fn fail_fail_ok_succeeds_on_third_attempt() {
        let provider = Arc::new(MockProvider::scripted(
            fast_retry_spec(5),
            vec![
                ScriptStep::Fail { status: Some(429), message: "slow down".into() },
                ScriptStep::Fail { status: Some(500), message: "oops".into() },
                ScriptStep::Text("ok".into()),
            ],
        ));
        let client = ProviderClient::new(Arc::clone(&provider) as Arc<dyn Provider>, None);
        let response = client.execute(&ModelRequest::text("go")).unwrap();
        assert_eq!(response.text, "ok");
        assert_eq!(provider.calls(), 3);
    }

    #[test]
    fn always_failing_exhausts_retries() {
        let provider = Arc::new(MockProvider::cycling(
            fast_retry_spec(2),
            vec![ScriptStep::Fail { status: Some(503), message: "down".into() }],
        ));
        let client = ProviderClient::new(Arc::clone(&provider) as Arc<dyn Provider>, None);
        let err = client.execute(&ModelRequest::text("go")).unwrap_err();
        match err {
            ProviderError::ExhaustedRetries { attempts, last } => {
                assert_eq!(attempts, 2);
                assert_eq!(last.last_status(), Some(503));
            }
            other => panic!("expected exhausted retries, got {other}"),
        }
        assert_eq!(provider.calls(), 2);
    }

    #[test]
    fn keyed_rules_match_prompt_content() {
        let provider = MockProvider::keyed(
            ProviderSpec::mock("mock", "m"),
            vec![
                ("6 times 7".into(), ScriptStep::Text("42".into())),
                ("capital".into(), ScriptStep::Text("paris".into())),
            ],
            None,
        );
        let r = provider.call(&ModelRequest::text("What is 6 times 7?")).unwrap();
        assert_eq!(r.text, "42");
        assert!(provider.call(&ModelRequest::text("unknown")).is_err());
    }

    #[test]
    fn concurrency_gate_is_observable() {
        let provider = Arc::new(
            MockProvider::cycling(
                {
                    let mut spec = ProviderSpec::mock("mock", "m");
                    spec.max_concurrency = 1;
                    spec
                },
                vec![ScriptStep::Text("x".into())],
            )
            .with_hold_ms(5),
        );
        let client = Arc::new(ProviderClient::new(
            Arc::clone(&provider) as Arc<dyn Provider>,
            None,
        ));
        std::thread::scope(|scope| {
            for _ in 0..4 {
                let client = Arc::clone(&client);
                scope.spawn(move || {
                    client.execute(&ModelRequest::text("go")).unwrap();
                });
            }
        });
        assert_eq!(provider.calls(), 4);
        assert_eq!(provider.max_observed_in_flight(), 1);
    }

    #[test]
    fn cached_execution_issues_no_second_call() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(crate::providers::ResponseCache::new(dir.path()));
        let provider = Arc::new(MockProvider::cycling(
            ProviderSpec::mock("mock", "m"),
            vec![ScriptStep::Text("answer".into())],
        ));
        let client = ProviderClient::new(Arc::clone(&provider) as Arc<dyn Provider>, Some(cache));
        let request = ModelRequest::text("same request");
        let first = client.execute(&request).unwrap();
        assert!(!first.from_cache);
        let second = client.execute(&request).unwrap();
        assert!(second.from_cache);
        assert_eq!(second.text, first.text);
        assert_eq!(provider.calls(), 1);
    }
}

//! Execution paths over single questions and resumable batches.
//!
//! Path 1 treats comic generation as the reasoning itself: generate,
//! segment, read the answer out of the final panel with an extractor
//! model. Path 2 hands the generated comic (optionally perturbed) to a
//! reasoning model as conditioning context. The incremental variant chains
//! panel-by-panel generation, each step conditioned on the previous panel.
//!
//! Batches run questions concurrently under a global admission limit,
//! checkpoint a journal after every record, and resume by skipping done
//! records, so a killed run replays to the same ledger without duplicate
//! provider calls.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Benchmark;
use crate::domain::{
    content_digest, image_digest, png_bytes, ComicArtifact, ContentDigest, EvalRecord,
    GridLayout, PerturbationRecord, Provenance, Question, ReasoningPath, RecordStatus, Rect,
    RunLedger, Timestamps, UsageTotals,
};
use crate::panels::{self, SegmentationHints};
use crate::perturb;
use crate::prompts::{self, PromptSpec};
use crate::providers::{
    ModelRequest, ModelResponse, Provider, ProviderClient, ProviderSpec, ResponseCache,
};
use crate::scoring::{match_answers, normalize_answer};

/// Gutter width used when the harness composes panels itself.
const COMPOSE_GUTTER_PX: u32 = 8;

/// Time source for record timestamps. Injectable so resumed and
/// uninterrupted runs can produce bit-identical ledgers under test.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Constant clock for reproducible ledgers.
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

/// Which structural perturbation a run applies to Path 2 comics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKind {
    Shuffle { sigma: f64 },
    Deletion { rho: f64, intermediate_only: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPolicy {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    pub seed: u64,
}

/// Everything a batch needs: which benchmark, which path, the prompt
/// condition, the models, and the execution limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub benchmark_id: String,
    pub path: ReasoningPath,
    pub prompt_spec: PromptSpec,
    pub generator: ProviderSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoner: Option<ProviderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<ProviderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationPolicy>,
    #[serde(default)]
    pub segmentation: SegmentationHints,
    pub max_concurrency: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.prompt_spec
            .validate()
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        match self.path {
            ReasoningPath::Path2 if self.reasoner.is_none() => Err(PipelineError::ConfigInvalid(
                "path2 requires a reasoner provider".into(),
            )),
            ReasoningPath::Path1 | ReasoningPath::Incremental if self.extractor.is_none() => Err(
                PipelineError::ConfigInvalid("path1/incremental require an extractor".into()),
            ),
            ReasoningPath::Incremental if self.prompt_spec.panel_budget.is_none() => Err(
                PipelineError::ConfigInvalid("incremental path requires a panel budget".into()),
            ),
            _ if self.max_concurrency == 0 => Err(PipelineError::ConfigInvalid(
                "max_concurrency must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Digest of the canonical JSON encoding; ledgers remember it so a
    /// resume against a different config is refused.
    pub fn digest(&self) -> ContentDigest {
        content_digest(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run config: {0}")]
    ConfigInvalid(String),
    #[error("config names benchmark `{expected}` but got `{got}`")]
    BenchmarkMismatch { expected: String, got: String },
    #[error("ledger carries config digest {ledger} but run config digests to {config}")]
    ConfigDigestMismatch { ledger: String, config: String },
    #[error(transparent)]
    Ledger(#[from] crate::domain::LedgerError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The models a runner talks to. Mock and HTTP providers are
/// interchangeable here.
pub struct ProviderSet {
    pub generator: Arc<dyn Provider>,
    pub reasoner: Option<Arc<dyn Provider>>,
    pub extractor: Option<Arc<dyn Provider>>,
}

/// Executes single questions and batches under one config.
pub struct PipelineRunner {
    config: RunConfig,
    generator: ProviderClient,
    reasoner: Option<ProviderClient>,
    extractor: Option<ProviderClient>,
    clock: Arc<dyn Clock>,
    /// Composite/panel PNGs are persisted here by digest for audit.
    artifact_dir: Option<PathBuf>,
}

/// Scratch carried through one question's execution so failures still
/// report the usage and cost spent getting there.
struct Attempt {
    usage: UsageTotals,
    cost_usd: f64,
    artifact_digest: Option<ContentDigest>,
    panel_count: Option<usize>,
    panel_bboxes: Vec<Rect>,
    perturbation: Option<PerturbationRecord>,
    started_ms: u64,
}

impl Attempt {
    fn absorb(&mut self, response: &ModelResponse, spec: &ProviderSpec) {
        self.usage.input_tokens += response.usage.input_tokens;
        self.usage.output_tokens += response.usage.output_tokens;
        self.usage.images_generated += response.usage.images;
        self.cost_usd += spec.unit_costs.response_cost(&response.usage);
    }
}

impl PipelineRunner {
    pub fn new(
        config: RunConfig,
        providers: ProviderSet,
        cache: Option<Arc<ResponseCache>>,
        clock: Arc<dyn Clock>,
        artifact_dir: Option<PathBuf>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(PipelineRunner {
            config,
            generator: ProviderClient::new(providers.generator, cache.clone()),
            reasoner: providers
                .reasoner
                .map(|p| ProviderClient::new(p, cache.clone())),
            extractor: providers.extractor.map(|p| ProviderClient::new(p, cache)),
            clock,
            artifact_dir,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn persist_image(&self, image: &RgbImage) -> ContentDigest {
        let digest = image_digest(image);
        if let Some(dir) = &self.artifact_dir {
            let path = dir.join(format!("{digest}.png"));
            if !path.exists() {
                let _ = std::fs::create_dir_all(dir);
                let _ = std::fs::write(path, png_bytes(image));
            }
        }
        digest
    }

    fn new_attempt(&self) -> Attempt {
        Attempt {
            usage: UsageTotals::default(),
            cost_usd: 0.0,
            artifact_digest: None,
            panel_count: None,
            panel_bboxes: Vec::new(),
            perturbation: None,
            started_ms: self.clock.now_ms(),
        }
    }

    fn finish(
        &self,
        question: &Question,
        attempt: Attempt,
        status: RecordStatus,
        failure_reason: Option<String>,
        raw_output: String,
        extracted_answer: String,
        correct: bool,
    ) -> EvalRecord {
        EvalRecord {
            question_id: question.id.clone(),
            path: self.config.path,
            prompt_spec: self.config.prompt_spec.clone(),
            status,
            failure_reason,
            artifact_digest: attempt.artifact_digest,
            panel_count: attempt.panel_count,
            panel_bboxes: attempt.panel_bboxes,
            perturbation: attempt.perturbation,
            raw_output,
            extracted_answer,
            answer_type: question.answer_type,
            correct,
            usage: attempt.usage,
            cost_usd: attempt.cost_usd,
            timestamps: Timestamps {
                started_unix_ms: attempt.started_ms,
                finished_unix_ms: self.clock.now_ms(),
            },
        }
    }

    fn fail(&self, question: &Question, attempt: Attempt, reason: String) -> EvalRecord {
        self.finish(
            question,
            attempt,
            RecordStatus::Failed,
            Some(reason),
            String::new(),
            String::new(),
            false,
        )
    }

    fn generation_request(&self, prompt: String, question: &Question) -> Result<ModelRequest, String> {
        let mut request = ModelRequest::image_generation(prompt);
        request
            .params
            .insert("seed".to_string(), self.config.seed.to_string());
        if let Some(path) = &question.input_image {
            let bytes = std::fs::read(path).map_err(|e| format!("input image {path:?}: {e}"))?;
            let image =
                crate::domain::decode_image(&bytes).map_err(|e| format!("input image: {e}"))?;
            request.input_images.push(image);
        }
        Ok(request)
    }

    /// Generate the comic and segment it; shared front half of both paths.
    fn generate_artifact(
        &self,
        question: &Question,
        attempt: &mut Attempt,
    ) -> Result<ComicArtifact, String> {
        let prompt = prompts::render_generation_prompt(question, &self.config.prompt_spec)
            .map_err(|e| format!("prompt: {e}"))?;
        let prompt_digest = content_digest(prompt.as_bytes());
        let request = self.generation_request(prompt, question)?;
        let response = self
            .generator
            .execute(&request)
            .map_err(|e| format!("generator: {e}"))?;
        attempt.absorb(&response, self.generator.spec());
        let composite = response
            .images
            .first()
            .ok_or_else(|| "generator returned no image".to_string())?;

        let mut artifact = panels::segment(composite, &self.config.segmentation)
            .map_err(|e| format!("segmentation: {e}"))?;
        artifact.provenance = Provenance {
            provider_id: self.generator.spec().provider_id.clone(),
            model_id: self.generator.spec().model_id.clone(),
            prompt_digest: Some(prompt_digest),
            params: request.params.clone(),
            shuffle: None,
            deletion: None,
        };
        Ok(artifact)
    }

    fn note_artifact(&self, artifact: &ComicArtifact, attempt: &mut Attempt) {
        attempt.artifact_digest = Some(self.persist_image(&artifact.composite));
        attempt.panel_count = Some(artifact.panel_count);
        attempt.panel_bboxes = artifact.panels.iter().map(|p| p.bbox).collect();
    }

    /// End-to-end visualized reasoning: the answer is read from the last
    /// panel by the extractor model. Never invokes a reasoner.
    pub fn run_path1(&self, question: &Question) -> EvalRecord {
        let mut attempt = self.new_attempt();
        let artifact = match self.generate_artifact(question, &mut attempt) {
            Ok(artifact) => artifact,
            Err(reason) => return self.fail(question, attempt, reason),
        };
        self.note_artifact(&artifact, &mut attempt);
        self.extract_and_score(question, attempt, &artifact.composite)
    }

    /// Shared back half of path 1 and the incremental path.
    fn extract_and_score(
        &self,
        question: &Question,
        mut attempt: Attempt,
        composite: &RgbImage,
    ) -> EvalRecord {
        let extractor = self.extractor.as_ref().expect("validated config");
        let prompt = match prompts::render_extraction_prompt(question) {
            Ok(p) => p,
            Err(e) => return self.fail(question, attempt, format!("extraction prompt: {e}")),
        };
        let request = ModelRequest::text(prompt).with_images(vec![composite.clone()]);
        let response = match extractor.execute(&request) {
            Ok(r) => r,
            Err(e) => return self.fail(question, attempt, format!("extractor: {e}")),
        };
        attempt.absorb(&response, extractor.spec());

        let raw = response.text.clone();
        let answer = raw.trim();
        let extracted = normalize_answer(answer, question.answer_type);
        let correct = match_answers(answer, &question.gold_answer, question.answer_type);
        self.finish(question, attempt, RecordStatus::Done, None, raw, extracted, correct)
    }

    /// Comic-as-context: generate, optionally perturb, then hand the
    /// composite to the reasoner and parse its final ANSWER line.
    pub fn run_path2(&self, question: &Question) -> EvalRecord {
        let mut attempt = self.new_attempt();
        let mut artifact = match self.generate_artifact(question, &mut attempt) {
            Ok(artifact) => artifact,
            Err(reason) => return self.fail(question, attempt, reason),
        };

        if let Some(policy) = &self.config.perturbation {
            let plan_seed = policy.seed ^ stable_id_hash(&question.id);
            let perturbed = match policy.kind {
                PerturbationKind::Shuffle { sigma } => {
                    let plan = perturb::sample_permutation(artifact.panel_count, sigma, plan_seed);
                    attempt.perturbation = Some(plan.record());
                    perturb::apply_shuffle(&artifact, &plan)
                }
                PerturbationKind::Deletion { rho, intermediate_only } => {
                    match perturb::sample_deletion(
                        artifact.panel_count,
                        rho,
                        plan_seed,
                        intermediate_only,
                    ) {
                        Ok(plan) => {
                            attempt.perturbation = Some(plan.record());
                            perturb::apply_deletion(&artifact, &plan)
                        }
                        Err(e) => {
                            return self.fail(question, attempt, format!("perturbation: {e}"))
                        }
                    }
                }
            };
            artifact = match perturbed {
                Ok(a) => a,
                Err(e) => return self.fail(question, attempt, format!("perturbation: {e}")),
            };
        }
        self.note_artifact(&artifact, &mut attempt);

        let reasoner = self.reasoner.as_ref().expect("validated config");
        let prompt = match prompts::render_reasoning_prompt(question, artifact.panel_count) {
            Ok(p) => p,
            Err(e) => return self.fail(question, attempt, format!("reasoning prompt: {e}")),
        };
        let request = ModelRequest::text(prompt).with_images(vec![artifact.composite.clone()]);
        let response = match reasoner.execute(&request) {
            Ok(r) => r,
            Err(e) => return self.fail(question, attempt, format!("reasoner: {e}")),
        };
        attempt.absorb(&response, reasoner.spec());

        let raw = response.text.clone();
        match parse_answer_line(&raw) {
            Some(answer) => {
                let extracted = normalize_answer(&answer, question.answer_type);
                let correct = match_answers(&answer, &question.gold_answer, question.answer_type);
                self.finish(question, attempt, RecordStatus::Done, None, raw, extracted, correct)
            }
            // the model answered but not in the declared format: scored
            // incorrect, not retried
            None => self.finish(
                question,
                attempt,
                RecordStatus::Done,
                Some("extraction_failed".into()),
                raw,
                String::new(),
                false,
            ),
        }
    }

    /// Panel-by-panel chaining: N generator calls, each conditioned on the
    /// previous panel image, assembled into one composite, then extracted
    /// like path 1.
    pub fn run_incremental(&self, question: &Question) -> EvalRecord {
        let mut attempt = self.new_attempt();
        let total = self
            .config
            .prompt_spec
            .panel_budget
            .expect("validated config");

        let mut panel_images: Vec<RgbImage> = Vec::with_capacity(total as usize);
        for panel_num in 1..=total {
            let prompt = match prompts::render_incremental_prompt(
                question,
                &self.config.prompt_spec,
                panel_num,
                total,
            ) {
                Ok(p) => p,
                Err(e) => return self.fail(question, attempt, format!("prompt: {e}")),
            };
            let mut request = ModelRequest::image_generation(prompt);
            request
                .params
                .insert("seed".to_string(), self.config.seed.to_string());
            if let Some(prev) = panel_images.last() {
                request.input_images.push(prev.clone());
            }
            let response = match self.generator.execute(&request) {
                Ok(r) => r,
                Err(e) => {
                    // panels generated so far stay persisted for audit
                    return self.fail(
                        question,
                        attempt,
                        format!("generator at panel {panel_num}/{total}: {e}"),
                    );
                }
            };
            attempt.absorb(&response, self.generator.spec());
            let image = match response.images.first() {
                Some(image) => image.clone(),
                None => {
                    return self.fail(
                        question,
                        attempt,
                        format!("generator returned no image at panel {panel_num}/{total}"),
                    )
                }
            };
            self.persist_image(&image);
            panel_images.push(image);
        }

        let layout = square_layout(total);
        let artifact = match panels::compose_artifact(
            panel_images,
            layout,
            Provenance {
                provider_id: self.generator.spec().provider_id.clone(),
                model_id: self.generator.spec().model_id.clone(),
                prompt_digest: None,
                params: Default::default(),
                shuffle: None,
                deletion: None,
            },
        ) {
            Ok(a) => a,
            Err(e) => return self.fail(question, attempt, format!("compose: {e}")),
        };
        self.note_artifact(&artifact, &mut attempt);
        self.extract_and_score(question, attempt, &artifact.composite)
    }

    /// Run one question down the configured path.
    pub fn run_question(&self, question: &Question) -> EvalRecord {
        match self.config.path {
            ReasoningPath::Path1 => self.run_path1(question),
            ReasoningPath::Path2 => self.run_path2(question),
            ReasoningPath::Incremental => self.run_incremental(question),
        }
    }

    /// Execute a whole benchmark, checkpointing every record to
    /// `out_path`. Restarting with the same config resumes pending and
    /// failed questions only; done records are never re-executed. The
    /// final file is rewritten in benchmark order, so an interrupted run
    /// converges to the same bytes as an uninterrupted one (given
    /// deterministic providers and clock).
    pub fn run_batch(
        &self,
        benchmark: &Benchmark,
        out_path: &Path,
    ) -> Result<RunLedger, PipelineError> {
        if benchmark.id != self.config.benchmark_id {
            return Err(PipelineError::BenchmarkMismatch {
                expected: self.config.benchmark_id.clone(),
                got: benchmark.id.clone(),
            });
        }
        let config_digest = self.config.digest();
        let run_id = derive_run_id(&config_digest, &benchmark.id);

        let mut ledger = if out_path.exists() {
            let existing = RunLedger::read_jsonl(out_path)?;
            if existing.config_digest != config_digest {
                return Err(PipelineError::ConfigDigestMismatch {
                    ledger: existing.config_digest.to_string(),
                    config: config_digest.to_string(),
                });
            }
            existing
        } else {
            RunLedger::new(run_id, config_digest.clone())
        };

        let todo: Vec<&Question> = benchmark
            .questions
            .iter()
            .filter(|q| !ledger.is_done(&q.id, self.config.path, &self.config.prompt_spec))
            .collect();

        if !todo.is_empty() {
            let journal = Mutex::new(JournalWriter::open(out_path, &ledger)?);
            let queue: Mutex<VecDeque<&Question>> = Mutex::new(todo.iter().copied().collect());
            let fresh: Mutex<Vec<EvalRecord>> = Mutex::new(Vec::new());
            let workers = self.config.max_concurrency.min(todo.len()).max(1);

            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let question = match queue.lock().expect("queue").pop_front() {
                            Some(q) => q,
                            None => break,
                        };
                        let record = self.run_question(question);
                        journal
                            .lock()
                            .expect("journal")
                            .append(&record)
                            .expect("journal append");
                        fresh.lock().expect("records").push(record);
                    });
                }
            });

            for record in fresh.into_inner().expect("records") {
                // duplicate-done cannot happen: todo excluded done keys
                ledger.append(record)?;
            }
        }

        let ledger = canonicalize(ledger, benchmark);
        ledger.write_jsonl(out_path)?;
        Ok(ledger)
    }
}

/// Records sorted by benchmark position (stable, so earlier attempts for
/// the same question keep their relative order).
fn canonicalize(ledger: RunLedger, benchmark: &Benchmark) -> RunLedger {
    let position = |id: &str| {
        benchmark
            .questions
            .iter()
            .position(|q| q.id == id)
            .unwrap_or(usize::MAX)
    };
    let mut indexed: Vec<(usize, EvalRecord)> = ledger
        .records()
        .iter()
        .cloned()
        .map(|r| (position(&r.question_id), r))
        .collect();
    indexed.sort_by_key(|(pos, _)| *pos);
    let mut out = RunLedger::new(ledger.run_id.clone(), ledger.config_digest.clone());
    for (_, record) in indexed {
        // re-appending preserved records cannot violate the done-once rule
        out.append(record).expect("canonical order preserves keys");
    }
    out
}

fn derive_run_id(config_digest: &ContentDigest, benchmark_id: &str) -> String {
    let digest = content_digest(format!("run:{config_digest}:{benchmark_id}").as_bytes());
    digest.as_str()[..16].to_string()
}

fn stable_id_hash(id: &str) -> u64 {
    let digest = content_digest(id.as_bytes());
    let bytes = hex::decode(&digest.as_str()[..16]).expect("digest is hex");
    u64::from_le_bytes(bytes.try_into().expect("eight bytes"))
}

/// Near-square grid used when the harness lays out panels itself.
fn square_layout(n: u32) -> GridLayout {
    let cols = (n as f64).sqrt().ceil() as u32;
    let rows = n.div_ceil(cols.max(1));
    GridLayout::new(rows.max(1), cols.max(1), COMPOSE_GUTTER_PX)
}

/// Last "ANSWER:" line of a model reply, with the payload trimmed.
pub fn parse_answer_line(text: &str) -> Option<String> {
    text.lines().rev().find_map(|line| {
        line.find("ANSWER:")
            .map(|at| line[at + "ANSWER:".len()..].trim().to_string())
    })
}

/// Incremental journal: header once, then one record line per completion,
/// flushed so a killed process loses at most the in-flight record.
struct JournalWriter {
    file: std::fs::File,
}

impl JournalWriter {
    fn open(path: &Path, ledger: &RunLedger) -> Result<Self, PipelineError> {
        use std::io::Write;
        let io_err = |source| PipelineError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(io_err)?;
            }
        }
        // rewrite the journal with what we already trust, then append
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(ledger.to_jsonl().as_bytes()).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
        Ok(JournalWriter { file })
    }

    fn append(&mut self, record: &EvalRecord) -> std::io::Result<()> {
        use std::io::Write;
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_answer_line_takes_the_last() {
        let text = "I think...\nANSWER: 3\nwait no\nANSWER: (B)";
        assert_eq!(parse_answer_line(text).unwrap(), "(B)");
        assert!(parse_answer_line("no answer here").is_none());
    }

    #[test]
    fn square_layouts() {
        assert_eq!((square_layout(4).rows, square_layout(4).cols), (2, 2));
        assert_eq!((square_layout(6).rows, square_layout(6).cols), (2, 3));
        assert_eq!((square_layout(8).rows, square_layout(8).cols), (3, 3));
        assert_eq!((square_layout(1).rows, square_layout(1).cols), (1, 1));
    }

    #[test]
    fn stable_hash_is_stable() {
        assert_eq!(stable_id_hash("q1"), stable_id_hash("q1"));
        assert_ne!(stable_id_hash("q1"), stable_id_hash("q2"));
    }
}

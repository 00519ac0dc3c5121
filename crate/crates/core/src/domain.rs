//! Shared domain types: questions, panels, comic artifacts, evaluation
//! records, and the append-only run ledger.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Ledger appends are serialized by the pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::perturb::{DeletionPlan, ShufflePlan};
use crate::prompts::PromptSpec;

/// SHA-256 digest rendered as 64 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentDigest(pub String);

impl fmt::Display for ContentDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl ContentDigest {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// SHA-256 over a byte sequence. Equal bytes always produce equal digests;
/// this is the cache key and audit primitive used throughout the harness.
pub fn content_digest(bytes: &[u8]) -> ContentDigest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    ContentDigest(hex::encode(hasher.finalize()))
}

/// Canonical digest of an image: SHA-256 over its lossless PNG encoding.
pub fn image_digest(image: &RgbImage) -> ContentDigest {
    content_digest(&png_bytes(image))
}

/// Encode an image as PNG bytes. Encoding is deterministic for identical
/// pixel data, which makes PNG bytes a canonical serialization for digests.
pub fn png_bytes(image: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    image
        .write_to(
            &mut std::io::Cursor::new(&mut out),
            image::ImageFormat::Png,
        )
        .expect("in-memory PNG encoding cannot fail");
    out
}

/// Decode PNG (or any supported raster) bytes into an RGB image.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, image::ImageError> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}

/// How a benchmark answer is typed for normalization and matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Numeric,
    FreeText,
    MultipleChoice,
    Boolean,
}

/// One benchmark instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    /// The question text handed to generation and reasoning prompts.
    pub text: String,
    /// Optional input image (resolved path), attached to generation calls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_image: Option<PathBuf>,
    pub gold_answer: String,
    pub answer_type: AnswerType,
    pub benchmark_id: String,
    /// Schema-specific fields the prompt templates key on
    /// (country, options, statement_to_judge, question_types, ...).
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Axis-aligned rectangle in composite-pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }
}

/// One cell of a comic grid: a reasoning state at position `index`.
#[derive(Debug, Clone)]
pub struct Panel {
    pub image: RgbImage,
    /// 1-based position in reading order, contiguous within an artifact.
    pub index: usize,
    pub bbox: Rect,
}

impl Panel {
    pub fn digest(&self) -> ContentDigest {
        image_digest(&self.image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadingOrder {
    RowMajor,
}

/// Grid placement for a panel sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub rows: u32,
    pub cols: u32,
    pub gutter_px: u32,
    pub reading_order: ReadingOrder,
}

impl GridLayout {
    pub fn new(rows: u32, cols: u32, gutter_px: u32) -> Self {
        GridLayout {
            rows,
            cols,
            gutter_px,
            reading_order: ReadingOrder::RowMajor,
        }
    }

    pub fn capacity(&self) -> usize {
        self.rows as usize * self.cols as usize
    }
}

/// Where an artifact came from: which model produced it under which prompt,
/// plus any structural perturbations applied afterwards.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub provider_id: String,
    pub model_id: String,
    pub prompt_digest: Option<ContentDigest>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle: Option<ShufflePlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deletion: Option<DeletionPlan>,
}

/// A composite comic image together with its ordered panel sequence.
///
/// `panel_count` is the number of *detected* panels, which may differ from
/// any prompted budget; both ends of that comparison are recorded elsewhere.
#[derive(Debug, Clone)]
pub struct ComicArtifact {
    pub composite: RgbImage,
    pub panels: Vec<Panel>,
    pub layout: GridLayout,
    pub provenance: Provenance,
    pub panel_count: usize,
}

impl ComicArtifact {
    pub fn composite_digest(&self) -> ContentDigest {
        image_digest(&self.composite)
    }

    pub fn panel_digests(&self) -> Vec<ContentDigest> {
        self.panels.iter().map(Panel::digest).collect()
    }
}

/// One invariant violation found by [`validate_artifact`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Name of the violated invariant.
    pub invariant: String,
    pub detail: String,
}

/// Outcome of artifact validation; empty means every invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every `ComicArtifact` invariant. Violations are data, not failures:
/// the report names each broken invariant so callers can record or reject.
pub fn validate_artifact(artifact: &ComicArtifact) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |invariant: &str, detail: String| {
        violations.push(Violation {
            invariant: invariant.to_string(),
            detail,
        });
    };

    if artifact.panel_count != artifact.panels.len() {
        push(
            "panel_count",
            format!(
                "panel_count {} != panels.len() {}",
                artifact.panel_count,
                artifact.panels.len()
            ),
        );
    }

    for (pos, panel) in artifact.panels.iter().enumerate() {
        if panel.index != pos + 1 {
            push(
                "non-contiguous index",
                format!("panel at position {} has index {}", pos, panel.index),
            );
        }
    }

    let (cw, ch) = artifact.composite.dimensions();
    for panel in &artifact.panels {
        if panel.bbox.right() > cw || panel.bbox.bottom() > ch {
            push(
                "bbox bounds",
                format!("panel {} bbox {:?} exceeds composite {}x{}", panel.index, panel.bbox, cw, ch),
            );
        }
    }

    for (i, a) in artifact.panels.iter().enumerate() {
        for b in artifact.panels.iter().skip(i + 1) {
            if a.bbox.intersects(&b.bbox) {
                push(
                    "bbox overlap",
                    format!("panels {} and {} overlap", a.index, b.index),
                );
            }
        }
    }

    if artifact.layout.capacity() < artifact.panels.len() {
        push(
            "grid capacity",
            format!(
                "layout {}x{} cannot hold {} panels",
                artifact.layout.rows,
                artifact.layout.cols,
                artifact.panels.len()
            ),
        );
    }

    ValidationReport { violations }
}

/// Which execution path produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningPath {
    Path1,
    Path2,
    Incremental,
}

impl fmt::Display for ReasoningPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReasoningPath::Path1 => f.write_str("path1"),
            ReasoningPath::Path2 => f.write_str("path2"),
            ReasoningPath::Incremental => f.write_str("incremental"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Done,
    Failed,
}

/// Model usage accumulated over one pipeline execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub images_generated: u64,
    /// Analytic stand-in for the video paradigm; comics never execute video.
    pub seconds_video_equivalent: f64,
}

/// Wall-clock bounds of one execution, unix milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

/// Realized perturbation parameters carried on a record for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationRecord {
    Shuffle {
        requested_sigma: f64,
        realized_sigma: f64,
        displaced: usize,
        t: usize,
    },
    Deletion {
        requested_rho: f64,
        realized_rho: f64,
        deleted: usize,
        t: usize,
    },
}

/// One pipeline execution of one question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub path: ReasoningPath,
    pub prompt_spec: PromptSpec,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_digest: Option<ContentDigest>,
    /// Number of detected panels (None when generation/segmentation failed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_count: Option<usize>,
    /// Panel bounding boxes in composite coordinates, for audit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub panel_bboxes: Vec<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationRecord>,
    pub raw_output: String,
    pub extracted_answer: String,
    pub answer_type: AnswerType,
    pub correct: bool,
    pub usage: UsageTotals,
    pub cost_usd: f64,
    pub timestamps: Timestamps,
}

impl EvalRecord {
    /// Identity used for replay idempotence: one done record per key.
    pub fn replay_key(&self) -> (String, ReasoningPath, ContentDigest) {
        (self.question_id.clone(), self.path, self.prompt_spec.digest())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid ledger line: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("ledger file {path} has no header line")]
    MissingHeader { path: PathBuf },
    #[error("duplicate done record for question `{question_id}` on {path}")]
    DuplicateDone {
        question_id: String,
        path: ReasoningPath,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LedgerHeader {
    run_id: String,
    config_digest: ContentDigest,
}

/// Append-only record of a batch evaluation.
///
/// Serialized as JSONL: a header line `{run_id, config_digest}` followed by
/// one record per line. Replaying a fully-done ledger changes nothing.
#[derive(Debug, Clone)]
pub struct RunLedger {
    pub run_id: String,
    pub config_digest: ContentDigest,
    records: Vec<EvalRecord>,
}

impl RunLedger {
    pub fn new(run_id: impl Into<String>, config_digest: ContentDigest) -> Self {
        RunLedger {
            run_id: run_id.into(),
            config_digest,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Append one record. At most one done record may exist per
    /// (question_id, path, prompt_spec) key.
    pub fn append(&mut self, record: EvalRecord) -> Result<(), LedgerError> {
        if record.status == RecordStatus::Done && self.has_done(&record) {
            return Err(LedgerError::DuplicateDone {
                question_id: record.question_id.clone(),
                path: record.path,
            });
        }
        self.records.push(record);
        Ok(())
    }

    fn has_done(&self, record: &EvalRecord) -> bool {
        let key = record.replay_key();
        self.records
            .iter()
            .any(|r| r.status == RecordStatus::Done && r.replay_key() == key)
    }

    pub fn is_done(&self, question_id: &str, path: ReasoningPath, spec: &PromptSpec) -> bool {
        let digest = spec.digest();
        self.records.iter().any(|r| {
            r.status == RecordStatus::Done
                && r.question_id == question_id
                && r.path == path
                && r.prompt_spec.digest() == digest
        })
    }

    /// Status per question id: the last record wins; absent means pending.
    pub fn status_by_question(&self) -> BTreeMap<String, QuestionStatus> {
        let mut map = BTreeMap::new();
        for r in &self.records {
            let status = match r.status {
                RecordStatus::Done => QuestionStatus::Done,
                RecordStatus::Failed => QuestionStatus::Failed,
            };
            map.insert(r.question_id.clone(), status);
        }
        map
    }

    /// Last record per replay key, in first-appearance order. Failed
    /// attempts superseded by a later done record are filtered out.
    pub fn effective_records(&self) -> Vec<&EvalRecord> {
        let mut latest: BTreeMap<(String, ReasoningPath, ContentDigest), usize> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            latest.insert(r.replay_key(), i);
        }
        let mut keep: Vec<usize> = latest.into_values().collect();
        keep.sort_unstable();
        keep.into_iter().map(|i| &self.records[i]).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let header = LedgerHeader {
            run_id: self.run_id.clone(),
            config_digest: self.config_digest.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), LedgerError> {
        let io_err = |source| LedgerError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(io_err)?;
            }
        }
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, LedgerError> {
        let file = std::fs::File::open(path).map_err(|source| LedgerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines().enumerate();

        let header: LedgerHeader = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|source| LedgerError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&line).map_err(|source| LedgerError::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    source,
                })?
            }
            None => return Err(LedgerError::MissingHeader { path: path.to_path_buf() }),
        };

        let mut ledger = RunLedger::new(header.run_id, header.config_digest);
        for (idx, line) in lines {
            let line = line.map_err(|source| LedgerError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: EvalRecord =
                serde_json::from_str(&line).map_err(|source| LedgerError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    source,
                })?;
            ledger.records.push(record);
        }
        Ok(ledger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::PromptSpec;

    fn solid(w: u32, h: u32, rgb: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, image::Rgb(rgb))
    }

    fn artifact_with_panels(indices: &[usize], bboxes: &[Rect]) -> ComicArtifact {
        let panels: Vec<Panel> = indices
            .iter()
            .zip(bboxes)
            .map(|(&index, &bbox)| Panel {
                image: solid(bbox.w, bbox.h, [40, 80, 120]),
                index,
                bbox,
            })
            .collect();
        ComicArtifact {
            composite: solid(100, 100, [40, 80, 120]),
            panel_count: panels.len(),
            panels,
            layout: GridLayout::new(2, 2, 4),
            provenance: Provenance::default(),
        }
    }

    fn grid_bboxes() -> Vec<Rect> {
        vec![
            Rect { x: 0, y: 0, w: 40, h: 40 },
            Rect { x: 50, y: 0, w: 40, h: 40 },
            Rect { x: 0, y: 50, w: 40, h: 40 },
            Rect { x: 50, y: 50, w: 40, h: 40 },
        ]
    }

    #[test]
    fn valid_artifact_has_empty_report() {
        let artifact = artifact_with_panels(&[1, 2, 3, 4], &grid_bboxes());
        assert!(validate_artifact(&artifact).is_ok());
    }

    #[test]
    fn index_gap_is_reported() {
        let bboxes = grid_bboxes();
        let artifact = artifact_with_panels(&[1, 2, 4], &bboxes[..3]);
        let report = validate_artifact(&artifact);
        assert!(report
            .violations
            .iter()
            .any(|v| v.invariant == "non-contiguous index"));
    }

    #[test]
    fn bbox_overlap_is_reported() {
        let bboxes = vec![
            Rect { x: 0, y: 0, w: 40, h: 40 },
            Rect { x: 30, y: 30, w: 40, h: 40 },
        ];
        let artifact = artifact_with_panels(&[1, 2], &bboxes);
        let report = validate_artifact(&artifact);
        assert!(report.violations.iter().any(|v| v.invariant == "bbox overlap"));
    }

    #[test]
    fn digest_of_empty_input_matches_sha256() {
        // Standard SHA-256 of the empty byte sequence.
        assert_eq!(
            content_digest(b"").as_str(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn digest_is_deterministic_and_input_sensitive() {
        assert_eq!(content_digest(b"panel"), content_digest(b"panel"));
        assert_ne!(content_digest(b"panel"), content_digest(b"panes"));
    }

    #[test]
    fn ledger_roundtrip_and_done_tracking() {
        let spec = PromptSpec::default_for(crate::datasets::SchemaId::Gsm8k);
        let mut ledger = RunLedger::new("run-1", content_digest(b"cfg"));
        let record = EvalRecord {
            question_id: "q1".into(),
            path: ReasoningPath::Path1,
            prompt_spec: spec.clone(),
            status: RecordStatus::Done,
            failure_reason: None,
            artifact_digest: Some(content_digest(b"img")),
            panel_count: Some(4),
            panel_bboxes: vec![],
            perturbation: None,
            raw_output: "7".into(),
            extracted_answer: "7".into(),
            answer_type: AnswerType::Numeric,
            correct: true,
            usage: UsageTotals::default(),
            cost_usd: 0.134,
            timestamps: Timestamps::default(),
        };
        ledger.append(record.clone()).unwrap();
        assert!(ledger.is_done("q1", ReasoningPath::Path1, &spec));
        assert!(matches!(
            ledger.append(record.clone()),
            Err(LedgerError::DuplicateDone { .. })
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        ledger.write_jsonl(&path).unwrap();
        let loaded = RunLedger::read_jsonl(&path).unwrap();
        assert_eq!(loaded.to_jsonl(), ledger.to_jsonl());
    }

    #[test]
    fn effective_records_keep_last_per_key() {
        let spec = PromptSpec::default_for(crate::datasets::SchemaId::Gsm8k);
        let mut ledger = RunLedger::new("run-1", content_digest(b"cfg"));
        let mut failed = EvalRecord {
            question_id: "q1".into(),
            path: ReasoningPath::Path1,
            prompt_spec: spec,
            status: RecordStatus::Failed,
            failure_reason: Some("provider".into()),
            artifact_digest: None,
            panel_count: None,
            panel_bboxes: vec![],
            perturbation: None,
            raw_output: String::new(),
            extracted_answer: String::new(),
            answer_type: AnswerType::Numeric,
            correct: false,
            usage: UsageTotals::default(),
            cost_usd: 0.0,
            timestamps: Timestamps::default(),
        };
        ledger.append(failed.clone()).unwrap();
        failed.status = RecordStatus::Done;
        failed.correct = true;
        ledger.append(failed).unwrap();
        let effective = ledger.effective_records();
        assert_eq!(effective.len(), 1);
        assert_eq!(effective[0].status, RecordStatus::Done);
    }
}

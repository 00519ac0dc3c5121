//! Benchmark ingest, deterministic subset sampling, and selection of
//! human-verification samples.
//!
//! Benchmarks are JSONL files, one question object per line:
//! `{id, text, image_path?, gold_answer, answer_type, metadata{}}`.
//! `image_path` is resolved relative to the dataset file. Fixtures ship
//! in-repo; nothing is downloaded.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnswerType, Question, RunLedger};

/// Which question schema a benchmark file follows. A single generic JSONL
/// layout serves every benchmark; schemas differ only in which metadata
/// keys must be present for their prompt templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaId {
    Math500,
    Gsm8k,
    MathVista,
    DocVqa,
    CulturalBenchEasy,
    CulturalBenchHard,
    Generic,
}

impl SchemaId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemaId::Math500 => "math500",
            SchemaId::Gsm8k => "gsm8k",
            SchemaId::MathVista => "mathvista",
            SchemaId::DocVqa => "docvqa",
            SchemaId::CulturalBenchEasy => "culturalbench_easy",
            SchemaId::CulturalBenchHard => "culturalbench_hard",
            SchemaId::Generic => "generic",
        }
    }

    /// Metadata keys the schema's prompt templates require on every question.
    pub fn required_metadata(&self) -> &'static [&'static str] {
        match self {
            SchemaId::CulturalBenchEasy => &["country", "options"],
            SchemaId::CulturalBenchHard => &["country", "statement_to_judge"],
            SchemaId::DocVqa => &["question_types"],
            _ => &[],
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "math500" => Ok(SchemaId::Math500),
            "gsm8k" => Ok(SchemaId::Gsm8k),
            "mathvista" => Ok(SchemaId::MathVista),
            "docvqa" => Ok(SchemaId::DocVqa),
            "culturalbench_easy" => Ok(SchemaId::CulturalBenchEasy),
            "culturalbench_hard" => Ok(SchemaId::CulturalBenchHard),
            "generic" => Ok(SchemaId::Generic),
            other => Err(format!("unknown benchmark schema `{other}`")),
        }
    }
}

/// An ordered, validated set of questions sharing one schema.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub id: String,
    pub schema: SchemaId,
    pub questions: Vec<Question>,
}

impl Benchmark {
    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse error: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: missing field `{field}` required by schema {schema}")]
    SchemaViolation {
        path: PathBuf,
        line: usize,
        field: String,
        schema: SchemaId,
    },
    #[error("{path}:{line}: duplicate question id `{id}`")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("benchmark {0} is empty")]
    Empty(PathBuf),
    #[error("sample size {requested} exceeds benchmark size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample size must be positive (got {0})")]
    SampleEmpty(String),
    #[error("verification sampling requires a non-empty ledger")]
    EmptyLedger,
}

#[derive(Debug, Deserialize)]
struct RawQuestion {
    id: String,
    text: String,
    #[serde(default)]
    image_path: Option<String>,
    gold_answer: String,
    answer_type: AnswerType,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Parse a JSONL benchmark file. Every line must satisfy the schema's
/// invariants; errors carry the offending line number and field. Question
/// order in the file is preserved.
pub fn load_benchmark(path: &Path, schema: SchemaId) -> Result<Benchmark, DatasetError> {
    let content = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let benchmark_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(schema.as_str())
        .to_string();
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut questions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuestion =
            serde_json::from_str(line).map_err(|source| DatasetError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                source,
            })?;
        let violation = |field: &str| DatasetError::SchemaViolation {
            path: path.to_path_buf(),
            line: line_no,
            field: field.to_string(),
            schema,
        };
        if raw.gold_answer.trim().is_empty() {
            return Err(violation("gold_answer"));
        }
        for field in schema.required_metadata() {
            if !raw.metadata.contains_key(*field) {
                return Err(violation(field));
            }
        }
        if raw.answer_type == AnswerType::MultipleChoice && !raw.metadata.contains_key("options") {
            return Err(violation("options"));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(DatasetError::DuplicateId {
                path: path.to_path_buf(),
                line: line_no,
                id: raw.id,
            });
        }
        questions.push(Question {
            id: raw.id,
            text: raw.text,
            input_image: raw.image_path.map(|p| base_dir.join(p)),
            gold_answer: raw.gold_answer,
            answer_type: raw.answer_type,
            benchmark_id: benchmark_id.clone(),
            metadata: raw.metadata,
        });
    }

    if questions.is_empty() {
        return Err(DatasetError::Empty(path.to_path_buf()));
    }
    Ok(Benchmark {
        id: benchmark_id,
        schema,
        questions,
    })
}

/// Serialize a benchmark back to its JSONL layout (load ∘ serialize = id).
pub fn serialize_benchmark(benchmark: &Benchmark) -> String {
    let mut out = String::new();
    for q in &benchmark.questions {
        #[derive(Serialize)]
        struct RawOut<'a> {
            id: &'a str,
            text: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            image_path: Option<String>,
            gold_answer: &'a str,
            answer_type: AnswerType,
            metadata: &'a BTreeMap<String, String>,
        }
        let raw = RawOut {
            id: &q.id,
            text: &q.text,
            image_path: q
                .input_image
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned()),
            gold_answer: &q.gold_answer,
            answer_type: q.answer_type,
            metadata: &q.metadata,
        };
        out.push_str(&serde_json::to_string(&raw).expect("question serializes"));
        out.push('\n');
    }
    out
}

/// Requested subset size: an absolute count or a fraction of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSize {
    Count(usize),
    Fraction(f64),
}

/// Round half up; the fixed rounding rule for every fractional count in the
/// harness, so sample sizes stay reproducible.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Uniform sample without replacement, bit-deterministic under `seed`.
/// The subset keeps the benchmark's original question order.
pub fn sample_instances(
    benchmark: &Benchmark,
    size: SampleSize,
    seed: u64,
) -> Result<Benchmark, DatasetError> {
    let n = benchmark.len();
    let count = match size {
        SampleSize::Count(c) => c,
        SampleSize::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(DatasetError::SampleEmpty(format!("fraction {f}")));
            }
            round_half_up(f * n as f64)
        }
    };
    if count == 0 {
        return Err(DatasetError::SampleEmpty("0".to_string()));
    }
    if count > n {
        return Err(DatasetError::SampleTooLarge {
            requested: count,
            available: n,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    let questions = picked
        .into_iter()
        .map(|i| benchmark.questions[i].clone())
        .collect();
    Ok(Benchmark {
        id: benchmark.id.clone(),
        schema: benchmark.schema,
        questions,
    })
}

/// Pick the question ids to route to human verification: a uniform,
/// seed-deterministic sample of round-half-up(N * rate) distinct ids from
/// the ledger, in first-appearance order.
pub fn verification_sample(
    ledger: &RunLedger,
    rate: f64,
    seed: u64,
) -> Result<Vec<String>, DatasetError> {
    if ledger.is_empty() {
        return Err(DatasetError::EmptyLedger);
    }
    let mut seen = HashSet::new();
    let ids: Vec<&str> = ledger
        .records()
        .iter()
        .filter(|r| seen.insert(r.question_id.as_str()))
        .map(|r| r.question_id.as_str())
        .collect();
    let n = ids.len();
    let count = round_half_up(n as f64 * rate).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| ids[i].to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    const GSM_LINES: [&str; 3] = [
        r#"{"id":"g1","text":"2+2?","gold_answer":"4","answer_type":"numeric","metadata":{}}"#,
        r#"{"id":"g2","text":"3+4?","gold_answer":"7","answer_type":"numeric","metadata":{}}"#,
        r#"{"id":"g3","text":"10-3?","gold_answer":"7","answer_type":"numeric","metadata":{}}"#,
    ];

    #[test]
    fn loads_valid_gsm8k_fixture() {
        let f = write_jsonl(&GSM_LINES);
        let b = load_benchmark(f.path(), SchemaId::Gsm8k).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.questions[0].id, "g1");
    }

    #[test]
    fn missing_gold_answer_names_line_and_field() {
        let f = write_jsonl(&[
            GSM_LINES[0],
            r#"{"id":"g2","text":"3+4?","gold_answer":"","answer_type":"numeric","metadata":{}}"#,
        ]);
        match load_benchmark(f.path(), SchemaId::Gsm8k) {
            Err(DatasetError::SchemaViolation { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "gold_answer");
            }
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn culturalbench_easy_requires_options() {
        let f = write_jsonl(&[
            r#"{"id":"c1","text":"Which greeting?","gold_answer":"A","answer_type":"multiple_choice","metadata":{"country":"Japan"}}"#,
        ]);
        match load_benchmark(f.path(), SchemaId::CulturalBenchEasy) {
            Err(DatasetError::SchemaViolation { field, .. }) => assert_eq!(field, "options"),
            other => panic!("expected schema violation, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_deterministic_and_order_preserving() {
        let lines: Vec<String> = (0..100)
            .map(|i| {
                format!(
                    r#"{{"id":"q{i}","text":"t{i}","gold_answer":"1","answer_type":"numeric","metadata":{{}}}}"#
                )
            })
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_jsonl(&refs);
        let b = load_benchmark(f.path(), SchemaId::Gsm8k).unwrap();

        let s1 = sample_instances(&b, SampleSize::Fraction(0.5), 7).unwrap();
        let s2 = sample_instances(&b, SampleSize::Fraction(0.5), 7).unwrap();
        assert_eq!(s1.len(), 50);
        let ids1: Vec<_> = s1.questions.iter().map(|q| q.id.clone()).collect();
        let ids2: Vec<_> = s2.questions.iter().map(|q| q.id.clone()).collect();
        assert_eq!(ids1, ids2);

        // order preserved: positions in the original benchmark are increasing
        let positions: Vec<usize> = s1
            .questions
            .iter()
            .map(|q| b.questions.iter().position(|o| o.id == q.id).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identity_sample_and_oversample() {
        let f = write_jsonl(&GSM_LINES);
        let b = load_benchmark(f.path(), SchemaId::Gsm8k).unwrap();
        let id = sample_instances(&b, SampleSize::Count(3), 1).unwrap();
        let ids: Vec<_> = id.questions.iter().map(|q| q.id.clone()).collect();
        assert_eq!(ids, vec!["g1", "g2", "g3"]);
        assert!(matches!(
            sample_instances(&b, SampleSize::Count(4), 1),
            Err(DatasetError::SampleTooLarge { .. })
        ));
    }

    #[test]
    fn serialize_load_roundtrip() {
        let f = write_jsonl(&GSM_LINES);
        let b = load_benchmark(f.path(), SchemaId::Gsm8k).unwrap();
        let text = serialize_benchmark(&b);
        let f2 = write_jsonl(&text.lines().collect::<Vec<_>>());
        let b2 = load_benchmark(f2.path(), SchemaId::Gsm8k).unwrap();
        assert_eq!(serialize_benchmark(&b2), text);
    }
}

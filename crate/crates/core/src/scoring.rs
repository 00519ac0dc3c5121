//! Answer normalization and matching, accuracy aggregation, panel-count
//! histograms, human-verification agreement, and the comic-vs-video cost
//! model.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AnswerType, RecordStatus, RunLedger};

/// Canonical form for numeric strings that fail to parse. It never matches
/// anything: comparisons treat it as automatically unequal.
pub const INVALID_NUMERIC: &str = "#invalid";

/// Relative tolerance for numeric comparison after the exact-string fast
/// path. Wide enough for decimal-rendering drift, far too tight to admit a
/// wrong answer on integer benchmarks.
const NUMERIC_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("ledger has no records")]
    EmptyLedger,
    #[error("annotation references unknown question id `{0}`")]
    UnknownQuestion(String),
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),
}

/// Per-unit media generation prices: video is billed per second, a comic is
/// one fixed-price composite image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// USD per generated video second.
    pub alpha: f64,
    /// USD per generated composite image.
    pub beta: f64,
}

impl CostModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ScoringError> {
        if !(alpha > 0.0) {
            return Err(ScoringError::InvalidCostModel(format!(
                "alpha must be > 0, got {alpha}"
            )));
        }
        if !(beta >= 0.0) {
            return Err(ScoringError::InvalidCostModel(format!(
                "beta must be >= 0, got {beta}"
            )));
        }
        Ok(CostModel { alpha, beta })
    }
}

/// One human verification pass over one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub question_id: String,
    pub annotator_id: String,
    /// Answer the annotator read off the comic, before normalization.
    pub read_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<Rubric>,
    pub agrees_with_extractor: bool,
}

/// 1-5 structural scores: reasoning flow, cross-panel consistency, and
/// visual-textual fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub logic: u8,
    pub state: u8,
    pub quality: u8,
}

impl Rubric {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("logic", self.logic), ("state", self.state), ("quality", self.quality)] {
            if !(1..=5).contains(&v) {
                return Err(format!("rubric {name} value {v} outside 1..=5"));
            }
        }
        Ok(())
    }
}

fn answer_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*answer\s*:\s*").unwrap())
}

/// Strip every leading "ANSWER:" prefix. Repeated stripping keeps
/// normalization idempotent when model output stutters.
fn strip_answer_prefix(s: &str) -> &str {
    let mut cur = s;
    loop {
        let stripped = match answer_prefix_re().find(cur) {
            Some(m) => &cur[m.end()..],
            None => return cur,
        };
        cur = stripped;
    }
}

fn choice_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\(?\s*([A-Za-z])\s*[.)]?$").unwrap())
}

fn parenthesized_choice_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([A-Za-z])\)").unwrap())
}

/// Normalize a raw answer string to its canonical comparison form.
/// Idempotent for every answer type.
pub fn normalize_answer(raw: &str, answer_type: AnswerType) -> String {
    match answer_type {
        AnswerType::Numeric => normalize_numeric(raw),
        AnswerType::MultipleChoice => normalize_choice(raw),
        AnswerType::Boolean => normalize_boolean(raw),
        AnswerType::FreeText => normalize_free_text(raw),
    }
}

fn normalize_numeric(raw: &str) -> String {
    let mut s = strip_answer_prefix(raw.trim())
        .trim()
        .trim_matches('$')
        .trim()
        .to_string();
    if let Some(inner) = unwrap_latex_command(&s, "\\boxed{") {
        s = inner.trim().to_string();
    }
    if let Some(frac) = parse_latex_fraction(&s) {
        return render_decimal(frac);
    }
    // thousands separators only when they follow the 1,234,567 shape
    let candidate = s.replace(',', "");
    let grouped_ok = !s.contains(',')
        || s.split(',').skip(1).all(|g| g.len() == 3 && g.chars().all(|c| c.is_ascii_digit()));
    let cleaned = if grouped_ok { candidate } else { s.clone() };
    let cleaned = cleaned.trim().trim_end_matches('%').trim().to_string();

    if let Ok(i) = cleaned.parse::<i128>() {
        return i.to_string();
    }
    if let Some(frac) = parse_plain_fraction(&cleaned) {
        return render_decimal(frac);
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() => render_decimal(v),
        _ => INVALID_NUMERIC.to_string(),
    }
}

/// Pull the raw balanced-brace body out of `\cmd{...}` if present.
fn unwrap_latex_command(s: &str, opener: &str) -> Option<String> {
    Some(unwrap_with_end(s, opener)?.0)
}

/// Raw body plus the index just past its closing brace.
fn unwrap_with_end(s: &str, opener: &str) -> Option<(String, usize)> {
    let start = s.find(opener)?;
    let body_start = start + opener.len();
    let mut depth = 1usize;
    for (i, c) in s[body_start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((s[body_start..body_start + i].to_string(), body_start + i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_latex_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    let opener = if s.starts_with("\\frac{") {
        "\\frac{"
    } else if s.starts_with("\\dfrac{") {
        "\\dfrac{"
    } else {
        return None;
    };
    let (numerator, after) = unwrap_with_end(s, opener)?;
    let (denominator, _) = unwrap_with_end(&s[after..], "{")?;
    let n: f64 = numerator.trim().parse().ok()?;
    let d: f64 = denominator.trim().parse().ok()?;
    if d == 0.0 {
        return None;
    }
    Some(n / d)
}

fn parse_plain_fraction(s: &str) -> Option<f64> {
    let (n, d) = s.split_once('/')?;
    let n: f64 = n.trim().parse().ok()?;
    let d: f64 = d.trim().parse().ok()?;
    if d == 0.0 {
        return None;
    }
    Some(n / d)
}

/// Shortest round-trip decimal rendering; integers drop the fraction.
fn render_decimal(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn normalize_choice(raw: &str) -> String {
    let s = strip_answer_prefix(raw.trim()).trim();
    if let Some(cap) = choice_re().captures(s) {
        return cap[1].to_ascii_uppercase();
    }
    if let Some(cap) = parenthesized_choice_re()
        .captures_iter(s)
        .last()
    {
        return cap[1].to_ascii_uppercase();
    }
    s.to_ascii_uppercase()
}

fn normalize_boolean(raw: &str) -> String {
    let s = strip_answer_prefix(raw.trim());
    let cleaned = s.trim().trim_end_matches(['.', '!']).trim();
    match cleaned.to_ascii_lowercase().as_str() {
        "true" | "yes" => "TRUE".to_string(),
        "false" | "no" => "FALSE".to_string(),
        _ => cleaned.to_ascii_uppercase(),
    }
}

fn normalize_free_text(raw: &str) -> String {
    let lowered = raw.trim().to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(['.', '!', '?', ',', ';', ':'])
        .trim_end()
        .to_string()
}

/// Normalize both sides, then compare. Numeric answers get a relative
/// tolerance after the exact-string fast path; unparseable numerics never
/// match.
pub fn match_answers(pred: &str, gold: &str, answer_type: AnswerType) -> bool {
    let np = normalize_answer(pred, answer_type);
    let ng = normalize_answer(gold, answer_type);
    if answer_type == AnswerType::Numeric {
        if np == INVALID_NUMERIC || ng == INVALID_NUMERIC {
            return false;
        }
        if np == ng {
            return true;
        }
        let (a, b): (f64, f64) = match (np.parse(), ng.parse()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return false,
        };
        let scale = a.abs().max(b.abs());
        return (a - b).abs() <= NUMERIC_REL_TOL * scale;
    }
    np == ng
}

/// Round to one decimal place (accuracy percentages).
fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Round to two decimal places (histogram and rate percentages).
fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Accuracy over the ledger's effective records as a percentage with one
/// decimal. Failed records count as incorrect; the denominator is every
/// record, so unfinished work lowers the score instead of hiding.
pub fn accuracy(ledger: &RunLedger) -> Result<f64, ScoringError> {
    let records = ledger.effective_records();
    if records.is_empty() {
        return Err(ScoringError::EmptyLedger);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(round1(100.0 * correct as f64 / records.len() as f64))
}

/// Frequency of detected panel counts across done records, as percentages
/// summing to 100 (within rounding).
pub fn panel_histogram(ledger: &RunLedger) -> BTreeMap<usize, f64> {
    let counts: Vec<usize> = ledger
        .effective_records()
        .iter()
        .filter(|r| r.status == RecordStatus::Done)
        .filter_map(|r| r.panel_count)
        .collect();
    histogram_from_counts(&counts)
}

/// Histogram over raw panel counts; exposed separately so fixtures and
/// reports can feed counts directly.
pub fn histogram_from_counts(counts: &[usize]) -> BTreeMap<usize, f64> {
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in counts {
        *freq.entry(c).or_insert(0) += 1;
    }
    let total = counts.len();
    freq.into_iter()
        .map(|(k, n)| (k, round2(100.0 * n as f64 / total as f64)))
        .collect()
}

/// Comparison of video and comic generation cost for one reasoning task of
/// duration `t` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub video_usd: f64,
    pub comic_usd: f64,
    /// comic / video; undefined at t = 0.
    pub ratio: Option<f64>,
    /// 100 * (1 - ratio); undefined at t = 0.
    pub reduction_pct: Option<f64>,
    /// Duration at which the two cost curves intersect, beta / alpha.
    pub break_even_s: f64,
}

/// Video cost scales linearly with duration while a comic costs one image;
/// this computes both sides plus the break-even duration.
pub fn cost_compare(t: f64, model: &CostModel) -> CostComparison {
    let video_usd = model.alpha * t;
    let comic_usd = model.beta;
    let ratio = (t > 0.0).then(|| comic_usd / video_usd);
    CostComparison {
        video_usd,
        comic_usd,
        ratio,
        reduction_pct: ratio.map(|r| 100.0 * (1.0 - r)),
        break_even_s: model.beta / model.alpha,
    }
}

/// Per-dimension rubric means across all annotations carrying one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRubric {
    pub logic: f64,
    pub state: f64,
    pub quality: f64,
}

/// Agreement between human verification annotations and the automated
/// extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Percent of each annotator's samples matching the extractor.
    pub per_annotator_rate: BTreeMap<String, f64>,
    /// Percent of sampled items where a majority of annotators match.
    pub consensus_rate: f64,
    pub mean_rubric: Option<MeanRubric>,
    /// Items where at least one annotator disagreed, for human resolution.
    pub disagreements: Vec<String>,
}

/// Compare annotator readings against extracted answers under the same
/// matching rules the scorer uses. Consensus is simple majority per item.
pub fn agreement(
    annotations: &[AnnotationRecord],
    ledger: &RunLedger,
) -> Result<AgreementReport, ScoringError> {
    let extracted: BTreeMap<&str, (&str, AnswerType)> = ledger
        .effective_records()
        .iter()
        .map(|r| (r.question_id.as_str(), (r.extracted_answer.as_str(), r.answer_type)))
        .collect();

    let mut per_annotator: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut per_item: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut rubric_sums = (0.0f64, 0.0f64, 0.0f64, 0usize);

    for ann in annotations {
        let (answer, answer_type) = extracted
            .get(ann.question_id.as_str())
            .copied()
            .ok_or_else(|| ScoringError::UnknownQuestion(ann.question_id.clone()))?;
        let matched = match_answers(&ann.read_answer, answer, answer_type);
        let by_annotator = per_annotator.entry(ann.annotator_id.clone()).or_insert((0, 0));
        by_annotator.1 += 1;
        if matched {
            by_annotator.0 += 1;
        }
        let by_item = per_item.entry(ann.question_id.as_str()).or_insert((0, 0));
        by_item.1 += 1;
        if matched {
            by_item.0 += 1;
        }
        if let Some(rubric) = &ann.rubric {
            rubric_sums.0 += rubric.logic as f64;
            rubric_sums.1 += rubric.state as f64;
            rubric_sums.2 += rubric.quality as f64;
            rubric_sums.3 += 1;
        }
    }

    let per_annotator_rate = per_annotator
        .into_iter()
        .map(|(id, (hit, n))| (id, round2(100.0 * hit as f64 / n as f64)))
        .collect();

    let items = per_item.len();
    let agreeing = per_item
        .iter()
        .filter(|(_, (hit, n))| 2 * hit > *n)
        .count();
    let consensus_rate = if items == 0 {
        0.0
    } else {
        round2(100.0 * agreeing as f64 / items as f64)
    };
    let disagreements = per_item
        .iter()
        .filter(|(_, (hit, n))| hit < n)
        .map(|(id, _)| id.to_string())
        .collect();

    let mean_rubric = (rubric_sums.3 > 0).then(|| MeanRubric {
        logic: round2(rubric_sums.0 / rubric_sums.3 as f64),
        state: round2(rubric_sums.1 / rubric_sums.3 as f64),
        quality: round2(rubric_sums.2 / rubric_sums.3 as f64),
    });

    Ok(AgreementReport {
        per_annotator_rate,
        consensus_rate,
        mean_rubric,
        disagreements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn numeric_normalization_cases() {
        assert_eq!(normalize_answer("42.0", AnswerType::Numeric), "42");
        assert_eq!(normalize_answer(" 1,234 ", AnswerType::Numeric), "1234");
        assert_eq!(normalize_answer("\\boxed{\\frac{1}{2}}", AnswerType::Numeric), "0.5");
        assert_eq!(normalize_answer("\\boxed{17}", AnswerType::Numeric), "17");
        assert_eq!(normalize_answer("3/4", AnswerType::Numeric), "0.75");
        assert_eq!(normalize_answer("$12$", AnswerType::Numeric), "12");
        assert_eq!(normalize_answer("not a number", AnswerType::Numeric), INVALID_NUMERIC);
    }

    #[test]
    fn choice_normalization_cases() {
        assert_eq!(normalize_answer("ANSWER: (A)", AnswerType::MultipleChoice), "A");
        assert_eq!(normalize_answer("b.", AnswerType::MultipleChoice), "B");
        assert_eq!(normalize_answer("(C)", AnswerType::MultipleChoice), "C");
        assert_eq!(normalize_answer("D", AnswerType::MultipleChoice), "D");
        assert_eq!(
            normalize_answer("the best option is (B) here", AnswerType::MultipleChoice),
            "B"
        );
    }

    #[test]
    fn boolean_and_free_text_cases() {
        assert_eq!(normalize_answer("true", AnswerType::Boolean), "TRUE");
        assert_eq!(normalize_answer("ANSWER: False.", AnswerType::Boolean), "FALSE");
        assert_eq!(
            normalize_answer("  The   Eiffel Tower. ", AnswerType::FreeText),
            "the eiffel tower"
        );
    }

    #[test]
    fn matching_cases() {
        assert!(match_answers("42", "42.0", AnswerType::Numeric));
        assert!(match_answers("true", "TRUE", AnswerType::Boolean));
        assert!(!match_answers("B", "A", AnswerType::MultipleChoice));
        assert!(match_answers("0.3333333", "0.33333333", AnswerType::Numeric));
        assert!(!match_answers("junk", "junk", AnswerType::Numeric));
    }

    #[test]
    fn cost_compare_paper_constants() {
        let model = CostModel::new(0.10, 0.134).unwrap();
        let cmp = cost_compare(10.0, &model);
        assert!((cmp.video_usd - 1.0).abs() < 1e-9);
        assert!((cmp.comic_usd - 0.134).abs() < 1e-9);
        assert!((cmp.ratio.unwrap() - 0.134).abs() < 1e-9);
        assert!((cmp.reduction_pct.unwrap() - 86.6).abs() < 1e-9);
        assert!((cmp.break_even_s - 1.34).abs() < 1e-9);
        // at the break-even duration the curves cross
        let at_even = cost_compare(cmp.break_even_s, &model);
        assert!((at_even.video_usd - at_even.comic_usd).abs() < 1e-12);
        // free comics reduce cost by 100%
        let free = cost_compare(10.0, &CostModel::new(0.10, 0.0).unwrap());
        assert!((free.reduction_pct.unwrap() - 100.0).abs() < 1e-9);
        // undefined ratio at t = 0
        assert!(cost_compare(0.0, &model).ratio.is_none());
    }

    #[test]
    fn histogram_from_counts_sums_to_100() {
        let hist = histogram_from_counts(&[1, 4, 4, 4]);
        assert_eq!(hist.get(&1), Some(&25.0));
        assert_eq!(hist.get(&4), Some(&75.0));
        let total: f64 = hist.values().sum();
        assert!((total - 100.0).abs() <= 0.01);
    }

    #[test]
    fn rubric_range_is_enforced() {
        assert!(Rubric { logic: 5, state: 1, quality: 3 }.validate().is_ok());
        assert!(Rubric { logic: 6, state: 1, quality: 3 }.validate().is_err());
        assert!(Rubric { logic: 0, state: 1, quality: 3 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in ".{0,40}") {
            for ty in [AnswerType::Numeric, AnswerType::MultipleChoice, AnswerType::Boolean, AnswerType::FreeText] {
                let once = normalize_answer(&raw, ty);
                let twice = normalize_answer(&once, ty);
                prop_assert_eq!(&once, &twice, "type {:?} raw {:?}", ty, raw);
            }
        }

        #[test]
        fn match_is_symmetric(a in "[0-9]{1,6}(\\.[0-9]{1,3})?", b in "[0-9]{1,6}(\\.[0-9]{1,3})?") {
            prop_assert_eq!(
                match_answers(&a, &b, AnswerType::Numeric),
                match_answers(&b, &a, AnswerType::Numeric)
            );
            prop_assert!(match_answers(&a, &a, AnswerType::Numeric));
        }
    }
}

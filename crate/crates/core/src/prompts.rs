//! Prompt templates and their rendering rules.
//!
//! Templates are plain-text files embedded from `templates/`, addressed by
//! stable ids, with `{name}` placeholders. Rendering is pure: the same
//! (question, spec) always produces byte-identical text, and a checksum
//! test pins every template against accidental edits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::SchemaId;
use crate::domain::{content_digest, AnswerType, ContentDigest, Question};

/// Narrative style applied to the generation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    Default,
    Documentary,
    Detective,
    SliceOfLife,
}

/// Whether panels may embed text (bubbles, narration) or must stay purely
/// visual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchoring {
    WithText,
    PureVisual,
}

/// Single-pass comic generation vs panel-by-panel chaining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    Global,
    Incremental,
}

/// Panel budgets the harness accepts when one is fixed at all.
pub const PANEL_BUDGETS: [u32; 5] = [1, 2, 4, 6, 8];

/// Fully determines the rendered template for one run condition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSpec {
    pub style: Style,
    pub anchoring: Anchoring,
    /// Prompted number of panels; None leaves the count to the model.
    pub panel_budget: Option<u32>,
    pub mode: GenerationMode,
    pub benchmark_schema: SchemaId,
}

impl PromptSpec {
    pub fn default_for(schema: SchemaId) -> Self {
        PromptSpec {
            style: Style::Default,
            anchoring: Anchoring::WithText,
            panel_budget: None,
            mode: GenerationMode::Global,
            benchmark_schema: schema,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.mode == GenerationMode::Incremental && self.panel_budget.is_none() {
            return Err(PromptError::InvalidSpec(
                "incremental mode requires a panel budget".into(),
            ));
        }
        if let Some(n) = self.panel_budget {
            if !PANEL_BUDGETS.contains(&n) {
                return Err(PromptError::InvalidSpec(format!(
                    "panel budget {n} not in {PANEL_BUDGETS:?}"
                )));
            }
        }
        if self.anchoring == Anchoring::PureVisual
            && !matches!(
                self.benchmark_schema,
                SchemaId::CulturalBenchEasy | SchemaId::CulturalBenchHard
            )
        {
            return Err(PromptError::InvalidSpec(format!(
                "pure_visual anchoring has no template for schema {}",
                self.benchmark_schema
            )));
        }
        if self.style != Style::Default && !is_math_schema(self.benchmark_schema) {
            return Err(PromptError::InvalidSpec(format!(
                "style variants are defined for math schemas only, not {}",
                self.benchmark_schema
            )));
        }
        Ok(())
    }

    /// Stable digest over the canonical JSON encoding; the replay key part.
    pub fn digest(&self) -> ContentDigest {
        content_digest(serde_json::to_string(self).expect("spec serializes").as_bytes())
    }
}

fn is_math_schema(schema: SchemaId) -> bool {
    matches!(
        schema,
        SchemaId::Math500 | SchemaId::Gsm8k | SchemaId::MathVista
    )
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("unresolvable placeholder `{{{0}}}`")]
    UnresolvedPlaceholder(String),
    #[error("panel_num {panel_num} out of range 1..={total}")]
    PanelOutOfRange { panel_num: u32, total: u32 },
    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),
}

macro_rules! templates {
    ($(($id:expr, $path:expr)),+ $(,)?) => {
        &[$(($id, include_str!($path))),+]
    };
}

/// Every template shipped with the harness, `(id, text)`. Texts are stored
/// verbatim; ids are stable and addressable from run configs and tests.
pub const TEMPLATES: &[(&str, &str)] = templates![
    ("generation/math_problem", "../templates/generation/math_problem.txt"),
    ("generation/mathvista", "../templates/generation/mathvista.txt"),
    ("generation/culturalbench_easy", "../templates/generation/culturalbench_easy.txt"),
    (
        "generation/culturalbench_easy_pure_visual",
        "../templates/generation/culturalbench_easy_pure_visual.txt"
    ),
    ("generation/culturalbench_hard", "../templates/generation/culturalbench_hard.txt"),
    (
        "generation/culturalbench_hard_pure_visual",
        "../templates/generation/culturalbench_hard_pure_visual.txt"
    ),
    ("generation/docvqa", "../templates/generation/docvqa.txt"),
    ("generation/generic", "../templates/generation/generic.txt"),
    ("generation/style_documentary", "../templates/generation/style_documentary.txt"),
    ("generation/style_detective", "../templates/generation/style_detective.txt"),
    ("generation/style_slice_of_life", "../templates/generation/style_slice_of_life.txt"),
    ("generation/global_budget", "../templates/generation/global_budget.txt"),
    ("generation/incremental_first", "../templates/generation/incremental_first.txt"),
    ("generation/incremental_middle", "../templates/generation/incremental_middle.txt"),
    ("generation/incremental_final", "../templates/generation/incremental_final.txt"),
    ("extraction/default", "../templates/extraction/default.txt"),
    ("reasoning/default", "../templates/reasoning/default.txt"),
];

/// Template text by id, with the file's trailing newline stripped.
pub fn template_text(id: &str) -> Result<&'static str, PromptError> {
    TEMPLATES
        .iter()
        .find(|(tid, _)| *tid == id)
        .map(|(_, text)| text.trim_end_matches('\n'))
        .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
}

/// Substitute `{name}` placeholders. Every placeholder present in the
/// template must resolve; nothing else in the text is touched.
fn substitute(template: &str, vars: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        match tail.find('}') {
            Some(close) => {
                let name = &tail[..close];
                match vars.get(name) {
                    Some(value) => out.push_str(value),
                    None => return Err(PromptError::UnresolvedPlaceholder(name.to_string())),
                }
                rest = &tail[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn question_vars<'a>(question: &'a Question) -> BTreeMap<&'a str, String> {
    let mut vars: BTreeMap<&str, String> = BTreeMap::new();
    vars.insert("question", question.text.clone());
    vars.insert("Question", question.text.clone());
    vars.insert("q", question.text.clone());
    for (key, value) in &question.metadata {
        vars.insert(key.as_str(), value.clone());
    }
    vars
}

/// Template id used for a generation prompt under `spec`, before
/// placeholder substitution.
pub fn generation_template_id(spec: &PromptSpec) -> Result<&'static str, PromptError> {
    spec.validate()?;
    if spec.style != Style::Default {
        return Ok(match spec.style {
            Style::Documentary => "generation/style_documentary",
            Style::Detective => "generation/style_detective",
            Style::SliceOfLife => "generation/style_slice_of_life",
            Style::Default => unreachable!(),
        });
    }
    if spec.mode == GenerationMode::Global && spec.panel_budget.is_some() {
        if !is_math_schema(spec.benchmark_schema) {
            return Err(PromptError::InvalidSpec(format!(
                "panel-budget template is defined for math schemas only, not {}",
                spec.benchmark_schema
            )));
        }
        return Ok("generation/global_budget");
    }
    Ok(match (spec.benchmark_schema, spec.anchoring) {
        (SchemaId::Math500 | SchemaId::Gsm8k, _) => "generation/math_problem",
        (SchemaId::MathVista, _) => "generation/mathvista",
        (SchemaId::DocVqa, _) => "generation/docvqa",
        (SchemaId::CulturalBenchEasy, Anchoring::WithText) => "generation/culturalbench_easy",
        (SchemaId::CulturalBenchEasy, Anchoring::PureVisual) => {
            "generation/culturalbench_easy_pure_visual"
        }
        (SchemaId::CulturalBenchHard, Anchoring::WithText) => "generation/culturalbench_hard",
        (SchemaId::CulturalBenchHard, Anchoring::PureVisual) => {
            "generation/culturalbench_hard_pure_visual"
        }
        (SchemaId::Generic, _) => "generation/generic",
    })
}

/// Render the comic-generation prompt for a question under a spec.
pub fn render_generation_prompt(
    question: &Question,
    spec: &PromptSpec,
) -> Result<String, PromptError> {
    let template = template_text(generation_template_id(spec)?)?;
    let mut vars = question_vars(question);
    if let Some(n) = spec.panel_budget {
        vars.insert("num_panels", n.to_string());
        vars.insert("num_panels-1", n.saturating_sub(1).to_string());
        vars.insert("total_panels", n.to_string());
    }
    substitute(template, &vars)
}

/// Render one step of the incremental chaining protocol. The first,
/// intermediate, and final steps each have their own template; when the
/// budget is a single panel the final-step template is used.
pub fn render_incremental_prompt(
    question: &Question,
    spec: &PromptSpec,
    panel_num: u32,
    total: u32,
) -> Result<String, PromptError> {
    spec.validate()?;
    if spec.panel_budget != Some(total) {
        return Err(PromptError::InvalidSpec(format!(
            "total {total} does not match spec panel budget {:?}",
            spec.panel_budget
        )));
    }
    if panel_num < 1 || panel_num > total {
        return Err(PromptError::PanelOutOfRange { panel_num, total });
    }
    let id = if panel_num == total {
        "generation/incremental_final"
    } else if panel_num == 1 {
        "generation/incremental_first"
    } else {
        "generation/incremental_middle"
    };
    let mut vars = question_vars(question);
    vars.insert("panel_num", panel_num.to_string());
    vars.insert("total_panels", total.to_string());
    substitute(template_text(id)?, &vars)
}

/// Render the final-panel answer extraction prompt. For multiple-choice
/// questions with recorded options, the options are carried inside the
/// question value so the extractor can echo a choice verbatim.
pub fn render_extraction_prompt(question: &Question) -> Result<String, PromptError> {
    let template = template_text("extraction/default")?;
    let q = match question.metadata.get("options") {
        Some(options) if question.answer_type == AnswerType::MultipleChoice => {
            format!("{}\nOptions:{}", question.text, options)
        }
        _ => question.text.clone(),
    };
    let mut vars = BTreeMap::new();
    vars.insert("q", q);
    substitute(template, &vars)
}

fn answer_format_instruction(answer_type: AnswerType) -> &'static str {
    match answer_type {
        AnswerType::Numeric => "Give the final answer as a number.",
        AnswerType::MultipleChoice => {
            "Give the final answer as the letter of the chosen option, like \"ANSWER: (A)\"."
        }
        AnswerType::Boolean => "Give the final answer as TRUE or FALSE.",
        AnswerType::FreeText => "Give the final answer as a short phrase.",
    }
}

/// Render the prompt that asks a reasoning model to answer using the
/// attached comic as context. `panel_count` is the detected panel count of
/// the comic handed over.
pub fn render_reasoning_prompt(
    question: &Question,
    panel_count: usize,
) -> Result<String, PromptError> {
    let template = template_text("reasoning/default")?;
    let q = match question.metadata.get("options") {
        Some(options) if question.answer_type == AnswerType::MultipleChoice => {
            format!("{}\nOptions:{}", question.text, options)
        }
        _ => question.text.clone(),
    };
    let mut vars = BTreeMap::new();
    vars.insert("question", q);
    vars.insert("panel_count", panel_count.to_string());
    vars.insert(
        "answer_format",
        answer_format_instruction(question.answer_type).to_string(),
    );
    substitute(template, &vars)
}

/// Every (schema, style, anchoring, mode, budget) combination the harness
/// declares valid, paired with the golden-file stem that pins its rendering.
pub fn valid_combinations() -> Vec<(PromptSpec, &'static str)> {
    use GenerationMode::{Global, Incremental};
    let mut combos = Vec::new();
    let spec = |schema, style, anchoring, budget, mode| PromptSpec {
        style,
        anchoring,
        panel_budget: budget,
        mode,
        benchmark_schema: schema,
    };

    for (schema, stem) in [
        (SchemaId::Math500, "math500_default"),
        (SchemaId::Gsm8k, "gsm8k_default"),
        (SchemaId::MathVista, "mathvista_default"),
        (SchemaId::DocVqa, "docvqa_default"),
        (SchemaId::CulturalBenchEasy, "culturalbench_easy_default"),
        (SchemaId::CulturalBenchHard, "culturalbench_hard_default"),
        (SchemaId::Generic, "generic_default"),
    ] {
        combos.push((
            spec(schema, Style::Default, Anchoring::WithText, None, Global),
            stem,
        ));
    }
    for (schema, stem) in [
        (SchemaId::CulturalBenchEasy, "culturalbench_easy_pure_visual"),
        (SchemaId::CulturalBenchHard, "culturalbench_hard_pure_visual"),
    ] {
        combos.push((
            spec(schema, Style::Default, Anchoring::PureVisual, None, Global),
            stem,
        ));
    }
    for (style, stem) in [
        (Style::Documentary, "gsm8k_style_documentary"),
        (Style::Detective, "gsm8k_style_detective"),
        (Style::SliceOfLife, "gsm8k_style_slice_of_life"),
    ] {
        combos.push((
            spec(SchemaId::Gsm8k, style, Anchoring::WithText, None, Global),
            stem,
        ));
    }
    combos.push((
        spec(SchemaId::Math500, Style::Default, Anchoring::WithText, Some(4), Global),
        "math500_budget4_global",
    ));
    combos.push((
        spec(SchemaId::Math500, Style::Default, Anchoring::WithText, Some(4), Incremental),
        "math500_budget4_incremental",
    ));
    combos
}

#[cfg(test)]
mod tests {
    use super::*;

    fn question(schema: SchemaId) -> Question {
        let mut metadata = BTreeMap::new();
        match schema {
            SchemaId::CulturalBenchEasy => {
                metadata.insert("country".to_string(), "Japan".to_string());
                metadata.insert(
                    "options".to_string(),
                    " A. Bow B. Wave C. Salute D. Nod".to_string(),
                );
            }
            SchemaId::CulturalBenchHard => {
                metadata.insert("country".to_string(), "Japan".to_string());
                metadata.insert(
                    "statement_to_judge".to_string(),
                    "People bow when greeting.".to_string(),
                );
            }
            SchemaId::DocVqa => {
                metadata.insert("question_types".to_string(), "(table/list)".to_string());
            }
            _ => {}
        }
        Question {
            id: "q1".into(),
            text: "What is 6 times 7?".into(),
            input_image: None,
            gold_answer: "42".into(),
            answer_type: if schema == SchemaId::CulturalBenchEasy {
                AnswerType::MultipleChoice
            } else {
                AnswerType::Numeric
            },
            benchmark_id: schema.as_str().into(),
            metadata,
        }
    }

    #[test]
    fn gsm8k_default_renders_base_template() {
        let q = question(SchemaId::Gsm8k);
        let spec = PromptSpec::default_for(SchemaId::Gsm8k);
        let text = render_generation_prompt(&q, &spec).unwrap();
        assert_eq!(
            text,
            "Please help me draw a comic to solve this math problem: What is 6 times 7?"
        );
    }

    #[test]
    fn slice_of_life_style_renders_style_sentence() {
        let q = question(SchemaId::Gsm8k);
        let mut spec = PromptSpec::default_for(SchemaId::Gsm8k);
        spec.style = Style::SliceOfLife;
        let text = render_generation_prompt(&q, &spec).unwrap();
        assert!(text.starts_with("Please help me draw a Slice-of-Life style comic"));
    }

    #[test]
    fn pure_visual_contains_anchoring_ban() {
        let q = question(SchemaId::CulturalBenchEasy);
        let mut spec = PromptSpec::default_for(SchemaId::CulturalBenchEasy);
        spec.anchoring = Anchoring::PureVisual;
        let text = render_generation_prompt(&q, &spec).unwrap();
        assert!(text.contains("DO NOT contain any text, speech bubbles"));
        assert!(text.contains("about Japan"));
    }

    #[test]
    fn pure_visual_rejected_outside_culturalbench() {
        let mut spec = PromptSpec::default_for(SchemaId::Gsm8k);
        spec.anchoring = Anchoring::PureVisual;
        assert!(matches!(
            spec.validate(),
            Err(PromptError::InvalidSpec(_))
        ));
    }

    #[test]
    fn unresolved_placeholder_is_named() {
        let mut q = question(SchemaId::DocVqa);
        q.metadata.clear();
        let spec = PromptSpec::default_for(SchemaId::DocVqa);
        match render_generation_prompt(&q, &spec) {
            Err(PromptError::UnresolvedPlaceholder(name)) => assert_eq!(name, "question_types"),
            other => panic!("expected unresolved placeholder, got {other:?}"),
        }
    }

    #[test]
    fn incremental_cases_select_by_position() {
        let q = question(SchemaId::Math500);
        let spec = PromptSpec {
            style: Style::Default,
            anchoring: Anchoring::WithText,
            panel_budget: Some(4),
            mode: GenerationMode::Incremental,
            benchmark_schema: SchemaId::Math500,
        };
        let first = render_incremental_prompt(&q, &spec, 1, 4).unwrap();
        assert!(first.contains("This is the FIRST step image"));
        let mid = render_incremental_prompt(&q, &spec, 2, 4).unwrap();
        assert!(mid.contains("Continue logically from the previous step"));
        assert!(mid.contains("Step 2 of 4"));
        let last = render_incremental_prompt(&q, &spec, 4, 4).unwrap();
        assert!(last.contains("the FINAL step"));
        assert!(matches!(
            render_incremental_prompt(&q, &spec, 5, 4),
            Err(PromptError::PanelOutOfRange { .. })
        ));
    }

    #[test]
    fn single_panel_budget_uses_final_template() {
        let q = question(SchemaId::Math500);
        let spec = PromptSpec {
            style: Style::Default,
            anchoring: Anchoring::WithText,
            panel_budget: Some(1),
            mode: GenerationMode::Incremental,
            benchmark_schema: SchemaId::Math500,
        };
        let only = render_incremental_prompt(&q, &spec, 1, 1).unwrap();
        assert!(only.contains("the FINAL step"));
    }

    #[test]
    fn extraction_prompt_reads_last_panel() {
        let q = question(SchemaId::Gsm8k);
        let text = render_extraction_prompt(&q).unwrap();
        assert!(text.contains("identify the final answer shown in the last panel"));
        assert!(text.contains("Only output the final answer."));
        assert!(text.ends_with("Question: What is 6 times 7?"));
    }

    #[test]
    fn reasoning_prompt_ends_with_answer_instruction() {
        let q = question(SchemaId::Gsm8k);
        let text = render_reasoning_prompt(&q, 4).unwrap();
        assert!(text.contains("comic of 4 panels"));
        assert!(text.ends_with("in the format \"ANSWER: <x>\"."));
    }

    #[test]
    fn rendering_is_pure() {
        let q = question(SchemaId::CulturalBenchHard);
        let spec = PromptSpec::default_for(SchemaId::CulturalBenchHard);
        let a = render_generation_prompt(&q, &spec).unwrap();
        let b = render_generation_prompt(&q, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_template_substitutes_arithmetic_placeholder() {
        let q = question(SchemaId::Math500);
        let spec = PromptSpec {
            style: Style::Default,
            anchoring: Anchoring::WithText,
            panel_budget: Some(6),
            mode: GenerationMode::Global,
            benchmark_schema: SchemaId::Math500,
        };
        let text = render_generation_prompt(&q, &spec).unwrap();
        assert!(text.contains("complete 6-panel comic strip"));
        assert!(text.contains("Panel 2-5: Show the logical reasoning steps"));
        assert!(text.contains("Generate ALL 6 panels"));
    }
}

//! Static report emission: CSV tables, hand-rolled SVG charts, an index
//! page, and the human-verification review sheet workflow.
//!
//! Reports are pure functions of their ledgers: iteration is over sorted
//! keys, floats are printed with fixed precision, and nothing timestamps
//! the output, so re-rendering the same ledger is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::datasets::Benchmark;
use crate::domain::{PerturbationRecord, RecordStatus, RunLedger};
use crate::scoring::{
    accuracy, agreement, cost_compare, histogram_from_counts, AgreementReport, AnnotationRecord,
    CostModel, Rubric,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger `{0}` has no records")]
    EmptyLedger(String),
    #[error("review sample id `{0}` not present in ledger")]
    UnknownSample(String),
    #[error("annotations row {row}: {detail}")]
    BadAnnotation { row: usize, detail: String },
    #[error(transparent)]
    Scoring(#[from] crate::scoring::ScoringError),
}

/// One ledger with the label it appears under in tables and charts.
pub struct LabeledLedger {
    pub label: String,
    pub ledger: RunLedger,
}

/// Everything a report is rendered from.
pub struct ReportBundle {
    pub runs: Vec<LabeledLedger>,
    pub cost_model: Option<CostModel>,
}

impl ReportBundle {
    pub fn new(runs: Vec<LabeledLedger>, cost_model: Option<CostModel>) -> Self {
        ReportBundle { runs, cost_model }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Render the bundle into `out_dir`: `index.html`, `tables/*.csv`, and
/// `charts/*.svg`. Returns the files written.
pub fn render_report(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    let mut warnings: Vec<String> = Vec::new();

    // accuracy table
    let mut accuracy_csv = String::from("label,records,correct,failed,accuracy_pct\n");
    let mut accuracy_rows = Vec::new();
    for run in &bundle.runs {
        let records = run.ledger.effective_records();
        if records.is_empty() {
            warnings.push(format!("run `{}` has no records", run.label));
            continue;
        }
        let correct = records.iter().filter(|r| r.correct).count();
        let failed = records
            .iter()
            .filter(|r| r.status == RecordStatus::Failed)
            .count();
        let acc = accuracy(&run.ledger)?;
        writeln!(
            accuracy_csv,
            "{},{},{},{},{:.1}",
            run.label,
            records.len(),
            correct,
            failed,
            acc
        )
        .expect("string write");
        accuracy_rows.push((run.label.clone(), records.len(), correct, failed, acc));
    }
    let path = out_dir.join("tables/accuracy.csv");
    write_file(&path, &accuracy_csv)?;
    written.push(path);

    // panel histogram table + chart
    let mut histogram_csv = String::from("label,panel_count,pct\n");
    let mut histogram_series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for run in &bundle.runs {
        let counts: Vec<usize> = run
            .ledger
            .effective_records()
            .iter()
            .filter(|r| r.status == RecordStatus::Done)
            .filter_map(|r| r.panel_count)
            .collect();
        if counts.is_empty() {
            warnings.push(format!("run `{}` has no panel counts", run.label));
            continue;
        }
        let histogram = histogram_from_counts(&counts);
        let mut points = Vec::new();
        for (panel_count, pct) in &histogram {
            writeln!(histogram_csv, "{},{},{:.2}", run.label, panel_count, pct)
                .expect("string write");
            points.push((*panel_count as f64, *pct));
        }
        histogram_series.push((run.label.clone(), points));
    }
    let path = out_dir.join("tables/panel_histogram.csv");
    write_file(&path, &histogram_csv)?;
    written.push(path);
    if !histogram_series.is_empty() {
        let svg = line_chart(
            "Panel count distribution",
            "panels detected",
            "frequency (%)",
            &histogram_series,
            &[],
        );
        let path = out_dir.join("charts/panel_histogram.svg");
        write_file(&path, &svg)?;
        written.push(path);
    }

    // perturbation curves: requested level -> accuracy, per kind
    let mut perturb_csv = String::from("label,kind,requested,realized_mean,accuracy_pct\n");
    let mut shuffle_points = Vec::new();
    let mut deletion_points = Vec::new();
    for run in &bundle.runs {
        let records = run.ledger.effective_records();
        let mut requested = Vec::new();
        let mut realized = Vec::new();
        let mut kind = None;
        for record in &records {
            match &record.perturbation {
                Some(PerturbationRecord::Shuffle { requested_sigma, realized_sigma, .. }) => {
                    kind = Some("shuffle");
                    requested.push(*requested_sigma);
                    realized.push(*realized_sigma);
                }
                Some(PerturbationRecord::Deletion { requested_rho, realized_rho, .. }) => {
                    kind = Some("deletion");
                    requested.push(*requested_rho);
                    realized.push(*realized_rho);
                }
                None => {}
            }
        }
        let Some(kind) = kind else { continue };
        let acc = accuracy(&run.ledger)?;
        let req_mean = requested.iter().sum::<f64>() / requested.len() as f64;
        let real_mean = realized.iter().sum::<f64>() / realized.len() as f64;
        writeln!(
            perturb_csv,
            "{},{},{:.3},{:.3},{:.1}",
            run.label, kind, req_mean, real_mean, acc
        )
        .expect("string write");
        if kind == "shuffle" {
            shuffle_points.push((req_mean, acc));
        } else {
            deletion_points.push((req_mean, acc));
        }
    }
    let path = out_dir.join("tables/perturbation.csv");
    write_file(&path, &perturb_csv)?;
    written.push(path);
    if !shuffle_points.is_empty() || !deletion_points.is_empty() {
        shuffle_points.sort_by(|a, b| a.0.total_cmp(&b.0));
        deletion_points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut series = Vec::new();
        if !shuffle_points.is_empty() {
            series.push(("shuffle".to_string(), shuffle_points));
        }
        if !deletion_points.is_empty() {
            series.push(("deletion".to_string(), deletion_points));
        }
        let svg = line_chart(
            "Accuracy under temporal perturbation",
            "perturbation intensity",
            "accuracy (%)",
            &series,
            &[],
        );
        let path = out_dir.join("charts/perturbation.svg");
        write_file(&path, &svg)?;
        written.push(path);
    }

    // panel budget curve when the runs fix budgets
    let mut budget_points = Vec::new();
    for run in &bundle.runs {
        let records = run.ledger.effective_records();
        if let Some(budget) = records
            .first()
            .and_then(|r| r.prompt_spec.panel_budget)
        {
            budget_points.push((budget as f64, accuracy(&run.ledger)?));
        }
    }
    if !budget_points.is_empty() {
        budget_points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let svg = line_chart(
            "Accuracy by panel budget",
            "panel budget N",
            "accuracy (%)",
            &[("accuracy".to_string(), budget_points)],
            &[],
        );
        let path = out_dir.join("charts/panel_budget.svg");
        write_file(&path, &svg)?;
        written.push(path);
    }

    // cost curves with the break-even marker
    if let Some(model) = &bundle.cost_model {
        let cmp = cost_compare(10.0, model);
        let mut cost_csv = String::from("t_seconds,video_usd,comic_usd\n");
        let mut video = Vec::new();
        let mut comic = Vec::new();
        for step in 0..=48 {
            let t = step as f64 * 0.25;
            let at = cost_compare(t, model);
            writeln!(cost_csv, "{:.2},{:.4},{:.4}", t, at.video_usd, at.comic_usd)
                .expect("string write");
            video.push((t, at.video_usd));
            comic.push((t, at.comic_usd));
        }
        let path = out_dir.join("tables/cost.csv");
        write_file(&path, &cost_csv)?;
        written.push(path);

        let marker = VerticalMarker {
            x: cmp.break_even_s,
            label: format!("break-even t={:.2}s", cmp.break_even_s),
        };
        let svg = line_chart(
            "Media generation cost",
            "task duration t (s)",
            "cost (USD)",
            &[("video".to_string(), video), ("comic".to_string(), comic)],
            &[marker],
        );
        let path = out_dir.join("charts/cost.svg");
        write_file(&path, &svg)?;
        written.push(path);
    }

    // index page
    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\
         <title>Run report</title></head>\n<body>\n<h1>Run report</h1>\n",
    );
    html.push_str("<h2>Accuracy</h2>\n<table border=\"1\"><tr><th>run</th><th>records</th>\
                   <th>correct</th><th>failed</th><th>accuracy %</th></tr>\n");
    for (label, records, correct, failed, acc) in &accuracy_rows {
        writeln!(
            html,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{}</td><td>{:.1}</td></tr>",
            esc(label),
            records,
            correct,
            failed,
            acc
        )
        .expect("string write");
    }
    html.push_str("</table>\n");
    for chart in ["panel_histogram", "perturbation", "panel_budget", "cost"] {
        let file = out_dir.join(format!("charts/{chart}.svg"));
        if file.exists() {
            writeln!(html, "<h2>{chart}</h2>\n<img src=\"charts/{chart}.svg\">").expect("write");
        }
    }
    if !warnings.is_empty() {
        html.push_str("<h2>Warnings</h2>\n<table border=\"1\"><tr><th>warning</th></tr>\n");
        for warning in &warnings {
            writeln!(html, "<tr><td>{}</td></tr>", esc(warning)).expect("string write");
        }
        html.push_str("</table>\n");
    }
    html.push_str("</body></html>\n");
    let path = out_dir.join("index.html");
    write_file(&path, &html)?;
    written.push(path);

    Ok(written)
}

struct VerticalMarker {
    x: f64,
    label: String,
}

const CHART_W: f64 = 640.0;
const CHART_H: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const SERIES_COLORS: [&str; 6] = ["#3b6fb5", "#d97b29", "#58915a", "#b54d4d", "#7b5ab5", "#4d9b9b"];

/// Minimal deterministic polyline chart.
fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    markers: &[VerticalMarker],
) -> String {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (0.0f64, f64::NEG_INFINITY);
    for (x, y) in &points {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    for marker in markers {
        x_min = x_min.min(marker.x);
        x_max = x_max.max(marker.x);
    }
    if !x_min.is_finite() || !x_max.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
    }
    if x_max - x_min < 1e-9 {
        x_max = x_min + 1.0;
    }
    if !y_max.is_finite() || y_max - y_min < 1e-9 {
        y_max = y_min + 1.0;
    }

    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" \
         viewBox=\"0 0 {CHART_W} {CHART_H}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .expect("svg");
    writeln!(svg, "<rect width=\"{CHART_W}\" height=\"{CHART_H}\" fill=\"white\"/>").expect("svg");
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        CHART_W / 2.0,
        esc(title)
    )
    .expect("svg");

    // axes
    writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    )
    .expect("svg");
    writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>",
        MARGIN_T + plot_h
    )
    .expect("svg");

    // axis ticks: five per axis
    for tick in 0..=4 {
        let fx = x_min + (x_max - x_min) * tick as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * tick as f64 / 4.0;
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.2}</text>",
            sx(fx),
            MARGIN_T + plot_h + 18.0,
            fx
        )
        .expect("svg");
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>",
            MARGIN_L - 6.0,
            sy(fy) + 4.0,
            fy
        )
        .expect("svg");
    }
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        CHART_H - 12.0,
        esc(x_label)
    )
    .expect("svg");
    writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        esc(y_label)
    )
    .expect("svg");

    for (i, (label, pts)) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        )
        .expect("svg");
        for (x, y) in pts {
            writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                sx(*x),
                sy(*y)
            )
            .expect("svg");
        }
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>",
            MARGIN_L + plot_w - 150.0,
            MARGIN_T + 16.0 * (i + 1) as f64,
            esc(label)
        )
        .expect("svg");
    }

    for marker in markers {
        writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{MARGIN_T}\" x2=\"{:.2}\" y2=\"{:.1}\" \
             stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
            sx(marker.x),
            sx(marker.x),
            MARGIN_T + plot_h
        )
        .expect("svg");
        writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.1}\" fill=\"gray\">{}</text>",
            sx(marker.x) + 4.0,
            MARGIN_T + 14.0,
            esc(&marker.label)
        )
        .expect("svg");
    }

    svg.push_str("</svg>\n");
    svg
}

/// Write the human-verification review sheet: one HTML page with the
/// question, the comic, and the extractor's answer hidden behind a
/// disclosure control (annotators read independently first), plus a CSV
/// skeleton matching the annotation schema.
pub fn emit_review_sheet(
    sample_ids: &[String],
    ledger: &RunLedger,
    benchmark: &Benchmark,
    artifact_dir: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    let records: BTreeMap<&str, &crate::domain::EvalRecord> = ledger
        .effective_records()
        .into_iter()
        .map(|r| (r.question_id.as_str(), r))
        .collect();

    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\
         <title>Verification review sheet</title></head>\n<body>\n\
         <h1>Verification review sheet</h1>\n\
         <p>Read the comic and record the answer you see in the CSV before \
         opening the extractor's answer.</p>\n",
    );
    let mut csv = String::from("question_id,annotator_id,read_answer,logic,state,quality\n");

    for id in sample_ids {
        let record = records
            .get(id.as_str())
            .ok_or_else(|| ReportError::UnknownSample(id.clone()))?;
        let question = benchmark
            .question(id)
            .ok_or_else(|| ReportError::UnknownSample(id.clone()))?;

        writeln!(html, "<hr>\n<h2>{}</h2>", esc(id)).expect("string write");
        writeln!(html, "<p>{}</p>", esc(&question.text)).expect("string write");
        let image_tag = record
            .artifact_digest
            .as_ref()
            .and_then(|digest| {
                let dir = artifact_dir?;
                let path = dir.join(format!("{digest}.png"));
                let bytes = fs::read(path).ok()?;
                use base64::Engine;
                Some(format!(
                    "<img alt=\"comic\" src=\"data:image/png;base64,{}\">",
                    base64::engine::general_purpose::STANDARD.encode(bytes)
                ))
            })
            .unwrap_or_else(|| "<p><em>comic image unavailable</em></p>".to_string());
        html.push_str(&image_tag);
        html.push('\n');
        writeln!(
            html,
            "<details><summary>extractor's answer (open after reading)</summary>\
             <code>{}</code></details>",
            esc(&record.extracted_answer)
        )
        .expect("string write");

        writeln!(csv, "{id},,,,,").expect("string write");
    }
    html.push_str("</body></html>\n");

    let html_path = out_dir.join("review.html");
    write_file(&html_path, &html)?;
    let csv_path = out_dir.join("annotations_skeleton.csv");
    write_file(&csv_path, &csv)?;
    Ok(vec![html_path, csv_path])
}

/// Parse filled annotation CSVs back in. Rubric cells may be blank (all
/// three at once); values must sit in 1..=5 or the row is named in the
/// error. `agrees_with_extractor` is recomputed from the read answer.
pub fn ingest_annotations(
    csv_path: &Path,
    ledger: &RunLedger,
) -> Result<Vec<AnnotationRecord>, ReportError> {
    let extracted: BTreeMap<&str, (&str, crate::domain::AnswerType)> = ledger
        .effective_records()
        .into_iter()
        .map(|r| (r.question_id.as_str(), (r.extracted_answer.as_str(), r.answer_type)))
        .collect();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(csv_path)
        .map_err(|e| ReportError::BadAnnotation { row: 0, detail: e.to_string() })?;

    let mut annotations = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 2; // header is row 1
        let row = row.map_err(|e| ReportError::BadAnnotation {
            row: row_no,
            detail: e.to_string(),
        })?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let question_id = field(0);
        let annotator_id = field(1);
        let read_answer = field(2);
        let rubric_fields = [field(3), field(4), field(5)];

        let (answer, answer_type) = extracted
            .get(question_id.as_str())
            .copied()
            .ok_or_else(|| ReportError::BadAnnotation {
                row: row_no,
                detail: format!("unknown question id `{question_id}`"),
            })?;

        let rubric = if rubric_fields.iter().all(|f| f.is_empty()) {
            None
        } else {
            let mut values = [0u8; 3];
            for (slot, text) in values.iter_mut().zip(&rubric_fields) {
                *slot = text.parse().map_err(|_| ReportError::BadAnnotation {
                    row: row_no,
                    detail: format!("rubric value `{text}` is not an integer"),
                })?;
            }
            let rubric = Rubric { logic: values[0], state: values[1], quality: values[2] };
            rubric.validate().map_err(|detail| ReportError::BadAnnotation {
                row: row_no,
                detail,
            })?;
            Some(rubric)
        };

        let agrees = crate::scoring::match_answers(&read_answer, answer, answer_type);
        annotations.push(AnnotationRecord {
            question_id,
            annotator_id,
            read_answer,
            rubric,
            agrees_with_extractor: agrees,
        });
    }
    Ok(annotations)
}

/// Agreement over ingested annotations, ready for printing.
pub fn verify_agreement(
    annotations: &[AnnotationRecord],
    ledger: &RunLedger,
) -> Result<AgreementReport, ReportError> {
    Ok(agreement(annotations, ledger)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{
        content_digest, AnswerType, EvalRecord, ReasoningPath, Timestamps, UsageTotals,
    };
    use crate::prompts::PromptSpec;

    fn record(id: &str, correct: bool, panel_count: usize) -> EvalRecord {
        EvalRecord {
            question_id: id.into(),
            path: ReasoningPath::Path1,
            prompt_spec: PromptSpec::default_for(crate::datasets::SchemaId::Gsm8k),
            status: RecordStatus::Done,
            failure_reason: None,
            artifact_digest: Some(content_digest(id.as_bytes())),
            panel_count: Some(panel_count),
            panel_bboxes: vec![],
            perturbation: None,
            raw_output: "7".into(),
            extracted_answer: "7".into(),
            answer_type: AnswerType::Numeric,
            correct,
            usage: UsageTotals::default(),
            cost_usd: 0.134,
            timestamps: Timestamps::default(),
        }
    }

    fn sample_ledger() -> RunLedger {
        let mut ledger = RunLedger::new("r", content_digest(b"c"));
        for i in 0..4 {
            ledger.append(record(&format!("q{i}"), i != 3, 4)).unwrap();
        }
        ledger
    }

    #[test]
    fn report_renders_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = ReportBundle::new(
            vec![LabeledLedger { label: "base".into(), ledger: sample_ledger() }],
            Some(CostModel::new(0.10, 0.134).unwrap()),
        );
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        render_report(&bundle, &out1).unwrap();
        render_report(&bundle, &out2).unwrap();
        for rel in [
            "index.html",
            "tables/accuracy.csv",
            "tables/panel_histogram.csv",
            "charts/cost.svg",
        ] {
            let a = fs::read(out1.join(rel)).unwrap();
            let b = fs::read(out2.join(rel)).unwrap();
            assert_eq!(a, b, "{rel} differs across renders");
        }
        let cost_svg = fs::read_to_string(out1.join("charts/cost.svg")).unwrap();
        assert!(cost_svg.contains("break-even t=1.34s"));
        let accuracy_csv = fs::read_to_string(out1.join("tables/accuracy.csv")).unwrap();
        assert!(accuracy_csv.contains("base,4,3,0,75.0"));
    }

    #[test]
    fn review_sheet_hides_answer_and_skeleton_matches() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = sample_ledger();
        let benchmark = Benchmark {
            id: "fixture".into(),
            schema: crate::datasets::SchemaId::Gsm8k,
            questions: (0..4)
                .map(|i| crate::domain::Question {
                    id: format!("q{i}"),
                    text: format!("question {i}"),
                    input_image: None,
                    gold_answer: "7".into(),
                    answer_type: AnswerType::Numeric,
                    benchmark_id: "fixture".into(),
                    metadata: Default::default(),
                })
                .collect(),
        };
        let ids = vec!["q0".to_string(), "q2".to_string()];
        emit_review_sheet(&ids, &ledger, &benchmark, None, dir.path()).unwrap();

        let html = fs::read_to_string(dir.path().join("review.html")).unwrap();
        assert!(html.contains("<details>"));
        assert!(html.contains("question 0"));
        let csv = fs::read_to_string(dir.path().join("annotations_skeleton.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3); // header + 2 samples

        let unknown = vec!["zz".to_string()];
        assert!(matches!(
            emit_review_sheet(&unknown, &ledger, &benchmark, None, dir.path()),
            Err(ReportError::UnknownSample(_))
        ));
    }

    #[test]
    fn annotations_roundtrip_and_rubric_validation() {
        let dir = tempfile::tempdir().unwrap();
        let ledger = sample_ledger();
        let csv_path = dir.path().join("filled.csv");
        fs::write(
            &csv_path,
            "question_id,annotator_id,read_answer,logic,state,quality\n\
             q0,ann1,7,4,5,5\n\
             q0,ann2,7,,,\n\
             q1,ann1,8,5,5,5\n",
        )
        .unwrap();
        let annotations = ingest_annotations(&csv_path, &ledger).unwrap();
        assert_eq!(annotations.len(), 3);
        assert!(annotations[0].agrees_with_extractor);
        assert!(!annotations[2].agrees_with_extractor);
        assert_eq!(annotations[1].rubric, None);

        let report = verify_agreement(&annotations, &ledger).unwrap();
        assert_eq!(report.per_annotator_rate["ann2"], 100.0);
        assert_eq!(report.disagreements, vec!["q1".to_string()]);

        fs::write(
            &csv_path,
            "question_id,annotator_id,read_answer,logic,state,quality\nq0,ann1,7,6,5,5\n",
        )
        .unwrap();
        match ingest_annotations(&csv_path, &ledger) {
            Err(ReportError::BadAnnotation { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected rubric error, got {other:?}"),
        }
    }
}

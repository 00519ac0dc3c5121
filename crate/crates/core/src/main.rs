//! Command-line harness: batch runs, perturbation sweeps, the
//! information-theory simulator, static reports, and the human
//! verification workflow.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use comicbench::datasets::{self, Benchmark, SchemaId};
use comicbench::domain::{ReasoningPath, RecordStatus, RunLedger};
use comicbench::infotheory::{self, DependencyPattern, SynthSpec};
use comicbench::panels::{render_grid_fixture, SegmentationHints};
use comicbench::pipeline::{
    PerturbationKind, PerturbationPolicy, PipelineRunner, ProviderSet, RunConfig, SystemClock,
};
use comicbench::prompts::{Anchoring, GenerationMode, PromptSpec, Style};
use comicbench::providers::{
    HttpProvider, MockProvider, Provider, ProviderSpec, ResponseCache, ScriptStep,
};
use comicbench::report::{
    emit_review_sheet, ingest_annotations, render_report, verify_agreement, LabeledLedger,
    ReportBundle,
};
use comicbench::scoring::{accuracy, CostModel};

#[derive(Parser)]
#[command(name = "comicbench", version, about = "Comic-mediated reasoning evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a benchmark through one reasoning path into a ledger.
    Run(RunArgs),
    /// One ledger per grid point of shuffle/deletion intensities.
    PerturbSweep(PerturbSweepArgs),
    /// Exact information-theory simulator on synthetic trajectories.
    TheorySim(TheorySimArgs),
    /// Render CSV/SVG/HTML reports from ledgers.
    Report(ReportArgs),
    /// Emit a human-verification review sheet, or ingest filled annotations.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark JSONL file.
    #[arg(long)]
    benchmark: PathBuf,
    /// Benchmark schema (math500, gsm8k, mathvista, docvqa,
    /// culturalbench_easy, culturalbench_hard, generic).
    #[arg(long)]
    schema: SchemaId,
    /// Reasoning path: 1, 2, or incremental.
    #[arg(long, value_parser = parse_path)]
    path: ReasoningPath,
    /// TOML run config (providers, limits, prompt spec defaults).
    #[arg(long)]
    config: PathBuf,
    /// Output ledger (JSONL). Existing ledgers resume.
    #[arg(long)]
    out: PathBuf,
    /// Prompt condition overrides: "style=detective,anchoring=pure_visual,
    /// budget=4,mode=incremental".
    #[arg(long)]
    prompt_spec: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PerturbSweepArgs {
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    schema: SchemaId,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, one ledger per grid point.
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated shuffle intensities, e.g. "0,0.2,0.4,0.6,0.8,1.0".
    #[arg(long)]
    sigma_grid: Option<String>,
    /// Comma-separated deletion ratios.
    #[arg(long)]
    rho_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    perturb_seed: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TheorySimArgs {
    /// copy_chain, parity, or noisy_markov.
    #[arg(long, value_parser = parse_pattern)]
    pattern: DependencyPattern,
    #[arg(long = "T")]
    t: usize,
    #[arg(long = "K")]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    /// USD per video second.
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    /// USD per composite image.
    #[arg(long, default_value_t = 0.134)]
    beta: f64,
    /// Output CSV path.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Ledger files; repeat for several runs.
    #[arg(long, required = true)]
    ledger: Vec<PathBuf>,
    /// Labels matching --ledger order; defaults to file stems.
    #[arg(long)]
    label: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.10)]
    alpha: f64,
    #[arg(long, default_value_t = 0.134)]
    beta: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    ledger: PathBuf,
    /// Ingest a filled annotations CSV and print agreement.
    #[arg(long)]
    ingest: Option<PathBuf>,
    /// Benchmark file (sheet emission only).
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    schema: Option<SchemaId>,
    /// Fraction of evaluation instances to sample.
    #[arg(long, default_value_t = 0.2)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the review sheet.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_path(s: &str) -> Result<ReasoningPath, String> {
    match s {
        "1" | "path1" => Ok(ReasoningPath::Path1),
        "2" | "path2" => Ok(ReasoningPath::Path2),
        "incremental" => Ok(ReasoningPath::Incremental),
        other => Err(format!("unknown path `{other}` (expected 1, 2, or incremental)")),
    }
}

fn parse_pattern(s: &str) -> Result<DependencyPattern, String> {
    match s {
        "copy_chain" => Ok(DependencyPattern::CopyChain),
        "parity" => Ok(DependencyPattern::Parity),
        "noisy_markov" => Ok(DependencyPattern::NoisyMarkov),
        other => Err(format!("unknown pattern `{other}`")),
    }
}

/// Provider entry in the TOML config: the spec plus how to instantiate it.
#[derive(Debug, Deserialize)]
struct ProviderConfig {
    #[serde(flatten)]
    spec: ProviderSpec,
    /// "http" (default) or "mock".
    #[serde(default = "default_provider_type")]
    r#type: String,
    /// Mock script JSON (see `MockScriptFile`).
    #[serde(default)]
    script: Option<PathBuf>,
}

fn default_provider_type() -> String {
    "http".to_string()
}

#[derive(Debug, Deserialize)]
struct ProvidersConfig {
    generator: ProviderConfig,
    #[serde(default)]
    reasoner: Option<ProviderConfig>,
    #[serde(default)]
    extractor: Option<ProviderConfig>,
}

#[derive(Debug, Deserialize)]
struct FileConfig {
    #[serde(default)]
    max_concurrency: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    prompt_spec: Option<PromptSpecConfig>,
    #[serde(default)]
    segmentation: Option<SegmentationHints>,
    #[serde(default)]
    perturbation: Option<PerturbationPolicy>,
    providers: ProvidersConfig,
    #[serde(default)]
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
struct PromptSpecConfig {
    #[serde(default)]
    style: Option<Style>,
    #[serde(default)]
    anchoring: Option<Anchoring>,
    #[serde(default)]
    panel_budget: Option<u32>,
    #[serde(default)]
    mode: Option<GenerationMode>,
}

/// Mock script file: ordered steps and/or prompt-keyed rules.
#[derive(Debug, Deserialize)]
struct MockScriptFile {
    #[serde(default)]
    steps: Vec<StepConfig>,
    #[serde(default)]
    cycle: bool,
    #[serde(default)]
    rules: Vec<RuleConfig>,
    #[serde(default)]
    fallback: Option<StepConfig>,
}

#[derive(Debug, Deserialize)]
struct RuleConfig {
    needle: String,
    #[serde(flatten)]
    step: StepConfig,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StepConfig {
    Text(String),
    Grid {
        rows: u32,
        cols: u32,
        #[serde(default = "default_cell")]
        cell_w: u32,
        #[serde(default = "default_cell")]
        cell_h: u32,
        #[serde(default = "default_gutter")]
        gutter: u32,
        #[serde(default)]
        seed: u64,
    },
    ImagePath(PathBuf),
    Fail {
        status: Option<u16>,
        message: String,
    },
}

fn default_cell() -> u32 {
    64
}

fn default_gutter() -> u32 {
    4
}

impl StepConfig {
    fn into_step(self, base_dir: &Path) -> Result<ScriptStep, String> {
        Ok(match self {
            StepConfig::Text(text) => ScriptStep::Text(text),
            StepConfig::Grid { rows, cols, cell_w, cell_h, gutter, seed } => {
                ScriptStep::Image(render_grid_fixture(rows, cols, cell_w, cell_h, gutter, seed))
            }
            StepConfig::ImagePath(path) => {
                let resolved = base_dir.join(path);
                let bytes = std::fs::read(&resolved)
                    .map_err(|e| format!("cannot read {resolved:?}: {e}"))?;
                ScriptStep::Image(
                    comicbench::domain::decode_image(&bytes)
                        .map_err(|e| format!("bad image {resolved:?}: {e}"))?,
                )
            }
            StepConfig::Fail { status, message } => ScriptStep::Fail { status, message },
        })
    }
}

fn build_provider(config: ProviderConfig, base_dir: &Path) -> Result<Arc<dyn Provider>, String> {
    match config.r#type.as_str() {
        "http" => Ok(Arc::new(HttpProvider::new(config.spec))),
        "mock" => {
            let script_path = config
                .script
                .ok_or_else(|| "mock provider needs a `script` file".to_string())?;
            let resolved = base_dir.join(&script_path);
            let text = std::fs::read_to_string(&resolved)
                .map_err(|e| format!("cannot read {resolved:?}: {e}"))?;
            let file: MockScriptFile =
                serde_json::from_str(&text).map_err(|e| format!("bad mock script: {e}"))?;
            let provider = if !file.rules.is_empty() {
                let mut rules = Vec::new();
                for rule in file.rules {
                    rules.push((rule.needle, rule.step.into_step(base_dir)?));
                }
                let fallback = match file.fallback {
                    Some(step) => Some(step.into_step(base_dir)?),
                    None => None,
                };
                MockProvider::keyed(config.spec, rules, fallback)
            } else {
                let mut steps = Vec::new();
                for step in file.steps {
                    steps.push(step.into_step(base_dir)?);
                }
                if file.cycle {
                    MockProvider::cycling(config.spec, steps)
                } else {
                    MockProvider::scripted(config.spec, steps)
                }
            };
            Ok(Arc::new(provider))
        }
        other => Err(format!("unknown provider type `{other}`")),
    }
}

fn parse_prompt_spec_flag(text: &str, spec: &mut PromptSpec) -> Result<(), String> {
    for pair in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{pair}`"))?;
        match (key.trim(), value.trim()) {
            ("style", "default") => spec.style = Style::Default,
            ("style", "documentary") => spec.style = Style::Documentary,
            ("style", "detective") => spec.style = Style::Detective,
            ("style", "slice_of_life") => spec.style = Style::SliceOfLife,
            ("anchoring", "with_text") => spec.anchoring = Anchoring::WithText,
            ("anchoring", "pure_visual") => spec.anchoring = Anchoring::PureVisual,
            ("mode", "global") => spec.mode = GenerationMode::Global,
            ("mode", "incremental") => spec.mode = GenerationMode::Incremental,
            ("budget", "free") => spec.panel_budget = None,
            ("budget", n) => {
                spec.panel_budget =
                    Some(n.parse().map_err(|_| format!("bad budget `{n}`"))?);
            }
            (key, value) => return Err(format!("unknown prompt-spec entry `{key}={value}`")),
        }
    }
    Ok(())
}

struct LoadedConfig {
    file: FileConfig,
    base_dir: PathBuf,
}

fn load_config(path: &Path) -> Result<LoadedConfig, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
    let file: FileConfig = toml::from_str(&text).map_err(|e| format!("bad config: {e}"))?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    Ok(LoadedConfig { file, base_dir })
}

struct PreparedRun {
    config: RunConfig,
    providers: ProviderSet,
    cache: Option<Arc<ResponseCache>>,
    benchmark: Benchmark,
}

#[allow(clippy::too_many_arguments)]
fn prepare_run(
    benchmark_path: &Path,
    schema: SchemaId,
    path: ReasoningPath,
    config_path: &Path,
    prompt_spec_flag: Option<&str>,
    seed_flag: Option<u64>,
    perturbation_override: Option<PerturbationPolicy>,
) -> Result<PreparedRun, String> {
    let loaded = load_config(config_path)?;
    let benchmark =
        datasets::load_benchmark(benchmark_path, schema).map_err(|e| e.to_string())?;

    let mut prompt_spec = PromptSpec::default_for(schema);
    if let Some(cfg) = &loaded.file.prompt_spec {
        if let Some(style) = cfg.style {
            prompt_spec.style = style;
        }
        if let Some(anchoring) = cfg.anchoring {
            prompt_spec.anchoring = anchoring;
        }
        if let Some(mode) = cfg.mode {
            prompt_spec.mode = mode;
        }
        prompt_spec.panel_budget = cfg.panel_budget;
    }
    if let Some(flag) = prompt_spec_flag {
        parse_prompt_spec_flag(flag, &mut prompt_spec)?;
    }

    let config = RunConfig {
        benchmark_id: benchmark.id.clone(),
        path,
        prompt_spec,
        generator: loaded.file.providers.generator.spec.clone(),
        reasoner: loaded.file.providers.reasoner.as_ref().map(|p| p.spec.clone()),
        extractor: loaded.file.providers.extractor.as_ref().map(|p| p.spec.clone()),
        perturbation: perturbation_override.or(loaded.file.perturbation),
        segmentation: loaded.file.segmentation.unwrap_or_default(),
        max_concurrency: loaded.file.max_concurrency.unwrap_or(1),
        seed: seed_flag.or(loaded.file.seed).unwrap_or(0),
    };

    let generator = build_provider(loaded.file.providers.generator, &loaded.base_dir)?;
    let reasoner = match loaded.file.providers.reasoner {
        Some(p) => Some(build_provider(p, &loaded.base_dir)?),
        None => None,
    };
    let extractor = match loaded.file.providers.extractor {
        Some(p) => Some(build_provider(p, &loaded.base_dir)?),
        None => None,
    };
    let cache = loaded
        .file
        .cache_dir
        .map(|dir| Arc::new(ResponseCache::new(loaded.base_dir.join(dir))));

    Ok(PreparedRun {
        config,
        providers: ProviderSet { generator, reasoner, extractor },
        cache,
        benchmark,
    })
}

fn artifacts_dir_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("ledger");
    out.with_file_name(format!("{stem}_artifacts"))
}

fn execute_batch(prepared: PreparedRun, out: &Path) -> Result<RunLedger, String> {
    let runner = PipelineRunner::new(
        prepared.config,
        prepared.providers,
        prepared.cache,
        Arc::new(SystemClock),
        Some(artifacts_dir_for(out)),
    )
    .map_err(|e| e.to_string())?;
    runner
        .run_batch(&prepared.benchmark, out)
        .map_err(|e| e.to_string())
}

fn summarize(ledger: &RunLedger) -> (usize, usize, f64) {
    let records = ledger.effective_records();
    let failed = records
        .iter()
        .filter(|r| r.status == RecordStatus::Failed)
        .count();
    let cost: f64 = records.iter().map(|r| r.cost_usd).sum();
    (records.len(), failed, cost)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let prepared = prepare_run(
        &args.benchmark,
        args.schema,
        args.path,
        &args.config,
        args.prompt_spec.as_deref(),
        args.seed,
        None,
    )?;
    let ledger = execute_batch(prepared, &args.out)?;
    let (records, failed, cost) = summarize(&ledger);
    let acc = accuracy(&ledger).map_err(|e| e.to_string())?;
    println!(
        "run {}: {} records, {} failed, accuracy {:.1}%, cost ${:.4} -> {}",
        ledger.run_id,
        records,
        failed,
        acc,
        cost,
        args.out.display()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad grid value `{s}`: {e}")))
        .collect()
}

fn cmd_perturb_sweep(args: PerturbSweepArgs) -> Result<ExitCode, String> {
    let mut points: Vec<(String, PerturbationKind)> = Vec::new();
    if let Some(grid) = &args.sigma_grid {
        for sigma in parse_grid(grid)? {
            points.push((
                format!("shuffle_{sigma:.2}"),
                PerturbationKind::Shuffle { sigma },
            ));
        }
    }
    if let Some(grid) = &args.rho_grid {
        for rho in parse_grid(grid)? {
            points.push((
                format!("deletion_{rho:.2}"),
                PerturbationKind::Deletion { rho, intermediate_only: true },
            ));
        }
    }
    if points.is_empty() {
        return Err("provide --sigma-grid and/or --rho-grid".to_string());
    }

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| format!("cannot create {:?}: {e}", args.out_dir))?;
    let mut any_failed = false;
    for (name, kind) in points {
        let policy = PerturbationPolicy { kind, seed: args.perturb_seed };
        let prepared = prepare_run(
            &args.benchmark,
            args.schema,
            ReasoningPath::Path2,
            &args.config,
            None,
            args.seed,
            Some(policy),
        )?;
        let out = args.out_dir.join(format!("{name}.jsonl"));
        let ledger = execute_batch(prepared, &out)?;
        let (records, failed, _) = summarize(&ledger);
        let acc = accuracy(&ledger).map_err(|e| e.to_string())?;
        println!("{name}: {records} records, {failed} failed, accuracy {acc:.1}%");
        any_failed |= failed > 0;
    }
    Ok(if any_failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_theory_sim(args: TheorySimArgs) -> Result<ExitCode, String> {
    let spec = SynthSpec {
        t: args.t,
        alphabet: args.alphabet,
        pattern: args.pattern,
        per_item_cost: args.beta,
    };
    let model = infotheory::synth_instance(&spec, args.seed).map_err(|e| e.to_string())?;
    let submodular = infotheory::verify_submodular(&model).map_err(|e| e.to_string())?;
    let profile = infotheory::video_redundancy_profile(&model).map_err(|e| e.to_string())?;

    let mut csv = String::from(
        "k,greedy_bits,opt_bits,greedy_over_opt,video_prefix_bits,eta_comic_bits_per_usd,eta_video_bits_per_usd\n",
    );
    for k in 1..=args.k.min(args.t) {
        let greedy = infotheory::greedy_select(&model, k).map_err(|e| e.to_string())?;
        let opt = infotheory::brute_force_select(&model, k).map_err(|e| e.to_string())?;
        let ratio = if opt.value_bits > 1e-12 {
            greedy.value_bits / opt.value_bits
        } else {
            1.0
        };
        let video_prefix: f64 = profile.iter().take(k).sum();
        let eta_comic =
            infotheory::efficiency(greedy.value_bits, args.beta).map_err(|e| e.to_string())?;
        let eta_video = infotheory::efficiency(video_prefix, args.alpha * k as f64)
            .map_err(|e| e.to_string())?;
        csv.push_str(&format!(
            "{k},{:.6},{:.6},{:.4},{:.6},{:.4},{:.4}\n",
            greedy.value_bits, opt.value_bits, ratio, video_prefix, eta_comic, eta_video
        ));
    }
    if let Some(dir) = args.report.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {dir:?}: {e}"))?;
        }
    }
    std::fs::write(&args.report, &csv)
        .map_err(|e| format!("cannot write {:?}: {e}", args.report))?;
    println!(
        "theory-sim {:?} T={} K={} seed={} submodular_verified={} -> {}",
        args.pattern,
        args.t,
        args.k,
        args.seed,
        submodular,
        args.report.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, String> {
    let mut runs = Vec::new();
    for (i, path) in args.ledger.iter().enumerate() {
        let ledger = RunLedger::read_jsonl(path).map_err(|e| e.to_string())?;
        let label = args
            .label
            .get(i)
            .cloned()
            .unwrap_or_else(|| {
                path.file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("run")
                    .to_string()
            });
        runs.push(LabeledLedger { label, ledger });
    }
    let model = CostModel::new(args.alpha, args.beta).map_err(|e| e.to_string())?;
    let bundle = ReportBundle::new(runs, Some(model));
    let files = render_report(&bundle, &args.out).map_err(|e| e.to_string())?;
    println!("report: wrote {} files under {}", files.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let ledger = RunLedger::read_jsonl(&args.ledger).map_err(|e| e.to_string())?;

    if let Some(csv_path) = &args.ingest {
        let annotations = ingest_annotations(csv_path, &ledger).map_err(|e| e.to_string())?;
        let report = verify_agreement(&annotations, &ledger).map_err(|e| e.to_string())?;
        println!("agreement over {} annotations:", annotations.len());
        for (annotator, rate) in &report.per_annotator_rate {
            println!("  annotator {annotator}: {rate:.2}%");
        }
        println!("  consensus (majority): {:.2}%", report.consensus_rate);
        if let Some(rubric) = &report.mean_rubric {
            println!(
                "  rubric means: logic {:.2}, state {:.2}, quality {:.2}",
                rubric.logic, rubric.state, rubric.quality
            );
        }
        if report.disagreements.is_empty() {
            println!("  no disagreements");
        } else {
            println!("  disagreements to resolve: {}", report.disagreements.join(", "));
        }
        return Ok(ExitCode::SUCCESS);
    }

    let benchmark_path = args
        .benchmark
        .as_ref()
        .ok_or_else(|| "--benchmark is required to emit a review sheet".to_string())?;
    let schema = args
        .schema
        .ok_or_else(|| "--schema is required to emit a review sheet".to_string())?;
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| "--out is required to emit a review sheet".to_string())?;
    let benchmark = datasets::load_benchmark(benchmark_path, schema).map_err(|e| e.to_string())?;
    let samples =
        datasets::verification_sample(&ledger, args.rate, args.seed).map_err(|e| e.to_string())?;
    let artifact_dir = artifacts_dir_for(&args.ledger);
    let files = emit_review_sheet(
        &samples,
        &ledger,
        &benchmark,
        artifact_dir.exists().then_some(artifact_dir.as_path()),
        out,
    )
    .map_err(|e| e.to_string())?;
    println!(
        "review sheet: {} samples -> {}",
        samples.len(),
        files
            .iter()
            .map(|f| f.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::PerturbSweep(args) => cmd_perturb_sweep(args),
        Command::TheorySim(args) => cmd_theory_sim(args),
        Command::Report(args) => cmd_report(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

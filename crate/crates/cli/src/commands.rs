use std::cell::RefCell;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use masgram_core::backend::{HttpBackend, HttpConfig, LlmBackend, RetryPolicy, ScriptedBackend};
use masgram_core::components::PromptCatalog;
use masgram_core::eval::{evaluate_sequence, load_dataset, render_table, EvalConfig, EvalError, EvalReport, Judge, TaskRecord};
use masgram_core::executor::{digest, Executor};
use masgram_core::grammar::{
    base_mases, default_grammar, enumerate, recognize, sample, ComponentSequence, GrammarSpec, SampleConfig,
};
use masgram_core::search::{search, Evaluation, Evaluator, SearchConfig, SearchError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::config::{read, BackendKind, RunConfig};
use crate::error::CliError;
use crate::rundir::{read_log, RunDir, SearchLog, BEST, REPORTS, SEARCH_LOG, SNAPSHOT};

fn io(e: std::io::Error) -> CliError {
    CliError::io("writing output", e)
}

pub fn load_grammar(path: Option<&Path>) -> Result<GrammarSpec, CliError> {
    match path {
        Some(path) => GrammarSpec::parse(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        None => Ok(default_grammar()),
    }
}

fn load_prompts(config: &RunConfig) -> Result<PromptCatalog, CliError> {
    match &config.backend.prompts {
        Some(path) => PromptCatalog::from_toml(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        None => Ok(PromptCatalog::default()),
    }
}

/// Builds the configured backend. For HTTP the credential is checked here,
/// before anything is written.
pub fn build_backend(config: &RunConfig) -> Result<Box<dyn LlmBackend>, CliError> {
    let b = &config.backend;
    match b.kind {
        BackendKind::Scripted => match &b.script {
            Some(path) => ScriptedBackend::from_json(&read(path)?)
                .map(|s| Box::new(s) as Box<dyn LlmBackend>)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
            None => Ok(Box::new(ScriptedBackend::echo())),
        },
        BackendKind::Http => {
            let key = std::env::var(&b.api_key_env)
                .ok()
                .filter(|k| !k.trim().is_empty())
                .ok_or_else(|| CliError::Backend(format!("credential variable `{}` is not set", b.api_key_env)))?;
            let mut http = HttpConfig::new(&b.endpoint, &key);
            http.retry = RetryPolicy {
                max_attempts: b.retries,
                base: Duration::from_millis(b.retry_base_ms),
                ..RetryPolicy::default()
            };
            http.request_timeout = Duration::from_secs(b.request_timeout_secs);
            http.max_tokens = b.max_tokens;
            http.concurrency = b.concurrency;
            Ok(Box::new(HttpBackend::new(http)))
        }
    }
}

fn load_tasks(path: Option<&PathBuf>, seed: u64, size: Option<usize>, what: &str) -> Result<Vec<TaskRecord>, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("no {what} dataset configured")))?;
    load_dataset(path, seed, size).map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))
}

fn eval_config(config: &RunConfig) -> EvalConfig {
    EvalConfig {
        trials: config.eval.trials,
        task_timeout: Some(Duration::from_secs(config.eval.task_timeout_secs)),
        workers: config.eval.workers,
    }
}

fn eval_error(e: EvalError) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses and recognizes a sequence, citing the recognizer on rejection.
pub fn accept(grammar: &GrammarSpec, text: &str) -> Result<(ComponentSequence, Vec<String>), CliError> {
    let seq: ComponentSequence = text.parse().map_err(|e| CliError::Rejected(format!("cannot parse `{text}`: {e}")))?;
    match recognize(grammar, &seq).into_result() {
        Ok(derivation) => Ok((seq, derivation.lines(grammar))),
        Err(reason) => Err(CliError::Rejected(format!("`{seq}` rejected: {reason}"))),
    }
}

/// Scores candidates for the search and keeps their transcripts.
struct RunEvaluator<'a> {
    executor: Executor<'a>,
    tasks: &'a [TaskRecord],
    judge: Option<Judge<'a>>,
    config: EvalConfig,
    dir: &'a RunDir,
    count: usize,
}

impl Evaluator for RunEvaluator<'_> {
    type Error = CliError;

    fn evaluate(&mut self, sequence: &ComponentSequence) -> Result<Evaluation, CliError> {
        let out = evaluate_sequence(&self.executor, sequence, self.tasks, self.judge.as_ref(), &self.config)
            .map_err(eval_error)?;
        self.count += 1;
        self.dir
            .write_lines(&format!("transcripts/eval-{:04}.jsonl", self.count), &out.runs)?;
        if out.report.failed_runs == out.runs.len() {
            let first = out.runs[0].error.clone().unwrap_or_default();
            return Err(CliError::Backend(format!("every run failed; first error: {first}")));
        }
        Ok(Evaluation {
            score: out.report.accuracy_mean,
            dollars: out.report.dollars,
            calls: out.report.calls + out.report.judge_calls,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub sequence: String,
    pub score: f64,
    pub evaluation: usize,
    pub iteration: u32,
    pub dollars: f64,
    pub derivation: Vec<String>,
    pub strategy: String,
    pub seed: u64,
    pub evaluations: usize,
    pub generation_cost: f64,
    pub validation_cost: f64,
    pub validation_calls: usize,
}

pub fn cmd_search(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let backend = build_backend(config)?;
    let grammar = load_grammar(config.grammar.path.as_deref())?;
    let prompts = load_prompts(config)?;
    let tasks = load_tasks(
        config.eval.validation.as_ref(),
        config.eval.split_seed,
        config.eval.validation_size,
        "validation",
    )?;

    let dir = RunDir::create(&config.run_dir)?;
    dir.write_snapshot(config)?;
    let log = RefCell::new(SearchLog::create(&dir, config.clock)?);
    let log_error: RefCell<Option<CliError>> = RefCell::new(None);

    let executor = Executor::new(backend.as_ref(), &config.backend.model)
        .with_prompts(prompts)
        .with_prices(config.price_table());
    let judge = config.eval.judge_model.as_deref().map(|m| Judge::new(backend.as_ref(), m));
    let mut evaluator = RunEvaluator {
        executor,
        tasks: &tasks,
        judge,
        config: eval_config(config),
        dir: &dir,
        count: 0,
    };
    let search_config = SearchConfig {
        iterations: config.search.iterations,
        strategy: config.search.strategy,
        seed: config.search.seed,
        sample: SampleConfig {
            max_depth: config.grammar.max_depth,
            resample_budget: config.grammar.resample_budget,
        },
    };
    info!(strategy = %search_config.strategy, iterations = search_config.iterations, tasks = tasks.len(), "starting search");
    let result = search(&grammar, &search_config, &mut evaluator, &mut |event| {
        if let Err(e) = log.borrow_mut().append(event) {
            log_error.borrow_mut().get_or_insert(e);
        }
    });
    if let Some(e) = log_error.into_inner() {
        return Err(e);
    }
    let outcome = result.map_err(|e| match e {
        SearchError::Evaluator { source, .. } => source,
        other => CliError::Config(other.to_string()),
    })?;

    let state = &outcome.state;
    let best = state.best().expect("search returned a best sequence");
    let (_, derivation) = accept(&grammar, &best.sequence.to_string())?;
    let record = BestRecord {
        sequence: best.sequence.to_string(),
        score: best.score,
        evaluation: best.evaluation,
        iteration: best.iteration,
        dollars: best.dollars,
        derivation,
        strategy: config.search.strategy.to_string(),
        seed: config.search.seed,
        evaluations: state.history.len(),
        generation_cost: state.generation_cost,
        validation_cost: state.validation_cost,
        validation_calls: state.validation_calls,
    };
    dir.write_json(BEST, &record)?;
    dir.write_json(&format!("{REPORTS}/search-state.json"), state)?;

    writeln!(out, "best: {}", record.sequence).map_err(io)?;
    writeln!(
        out,
        "score {:.4} at evaluation {} (iteration {}) of {}",
        record.score, record.evaluation, record.iteration, record.evaluations
    )
    .map_err(io)?;
    writeln!(
        out,
        "generation cost ${:.2}, validation cost ${:.4} over {} calls",
        record.generation_cost, record.validation_cost, record.validation_calls
    )
    .map_err(io)?;
    writeln!(out, "run directory: {}", dir.root().display()).map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Validation,
    Test,
}

pub fn cmd_eval(config: &RunConfig, sequence: &str, split: Split, out: &mut dyn Write) -> Result<EvalReport, CliError> {
    let grammar = load_grammar(config.grammar.path.as_deref())?;
    let (seq, _) = accept(&grammar, sequence)?;
    let backend = build_backend(config)?;
    let prompts = load_prompts(config)?;
    let tasks = match split {
        Split::Validation => load_tasks(
            config.eval.validation.as_ref(),
            config.eval.split_seed,
            config.eval.validation_size,
            "validation",
        )?,
        Split::Test => load_tasks(config.eval.test.as_ref(), config.eval.split_seed, config.eval.test_size, "test")?,
    };

    let dir = RunDir::create(&config.run_dir)?;
    if !dir.path(SNAPSHOT).exists() {
        dir.write_snapshot(config)?;
    }
    let executor = Executor::new(backend.as_ref(), &config.backend.model)
        .with_prompts(prompts)
        .with_prices(config.price_table());
    let judge = config.eval.judge_model.as_deref().map(|m| Judge::new(backend.as_ref(), m));
    let output = evaluate_sequence(&executor, &seq, &tasks, judge.as_ref(), &eval_config(config)).map_err(eval_error)?;
    let tag = &digest(&seq.to_string())[..12];
    let split_name = match split {
        Split::Validation => "validation",
        Split::Test => "test",
    };
    dir.write_json(&format!("{REPORTS}/eval-{split_name}-{tag}.json"), &output.report)?;
    dir.write_lines(&format!("transcripts/eval-{split_name}-{tag}.jsonl"), &output.runs)?;
    write!(out, "{}", render_table(std::slice::from_ref(&output.report))).map_err(io)?;
    writeln!(
        out,
        "{} tasks x {} trials on {split_name}; judge calls {}; failed runs {}",
        tasks.len(),
        config.eval.trials,
        output.report.judge_calls,
        output.report.failed_runs
    )
    .map_err(io)?;
    if output.report.failed_runs == output.runs.len() {
        let first = output.runs[0].error.clone().unwrap_or_default();
        return Err(CliError::Backend(format!("every run failed; first error: {first}")));
    }
    Ok(output.report)
}

pub fn cmd_baselines(out: &mut dyn Write) -> Result<(), CliError> {
    for mas in base_mases() {
        writeln!(out, "{:<12} {}", mas.name, mas.sequence).map_err(io)?;
    }
    Ok(())
}

pub fn cmd_derive(grammar: &GrammarSpec, sequence: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let (_, lines) = accept(grammar, sequence)?;
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn cmd_grammar(grammar: &GrammarSpec, out: &mut dyn Write) -> Result<(), CliError> {
    write!(out, "{}", grammar.to_text()).map_err(io)
}

pub fn cmd_enumerate(grammar: &GrammarSpec, max_len: usize, out: &mut dyn Write) -> Result<(), CliError> {
    for seq in enumerate(grammar, max_len) {
        writeln!(out, "{seq}").map_err(io)?;
    }
    Ok(())
}

pub fn cmd_sample(grammar: &GrammarSpec, count: usize, seed: u64, config: SampleConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let seq = sample(grammar, &mut rng, config).map_err(|e| CliError::Config(e.to_string()))?;
        writeln!(out, "{seq}").map_err(io)?;
    }
    Ok(())
}

/// Summarizes a finished run directory.
pub fn cmd_report(run_dir: &Path, top: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let best_path = run_dir.join(BEST);
    let best: BestRecord = serde_json::from_str(&read(&best_path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", best_path.display())))?;
    let log = read_log(&run_dir.join(SEARCH_LOG))?;
    let mut evaluated: Vec<_> = log.iter().filter(|r| r.event == "evaluated").collect();
    let skipped = log.iter().filter(|r| r.event == "skipped").count();
    let duplicates = log.iter().filter(|r| r.event == "duplicate").count();

    writeln!(out, "best        {}", best.sequence).map_err(io)?;
    writeln!(out, "score       {:.4}", best.score).map_err(io)?;
    writeln!(out, "found at    evaluation {} / iteration {}", best.evaluation, best.iteration).map_err(io)?;
    writeln!(out, "strategy    {} (seed {})", best.strategy, best.seed).map_err(io)?;
    writeln!(
        out,
        "evaluations {} (skipped {skipped}, duplicates {duplicates})",
        evaluated.len()
    )
    .map_err(io)?;
    writeln!(out, "generation  ${:.2}", best.generation_cost).map_err(io)?;
    writeln!(out, "validation  ${:.4} ({} calls)", best.validation_cost, best.validation_calls).map_err(io)?;
    writeln!(out, "derivation").map_err(io)?;
    for line in &best.derivation {
        writeln!(out, "  {line}").map_err(io)?;
    }

    evaluated.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.evaluation.cmp(&b.evaluation))
    });
    writeln!(out, "\ntop {}", top.min(evaluated.len())).map_err(io)?;
    for r in evaluated.iter().take(top) {
        writeln!(
            out,
            "  #{:<4} {:.4}  {}",
            r.evaluation.unwrap_or(0),
            r.score.unwrap_or(0.0),
            r.sequence.as_deref().unwrap_or("")
        )
        .map_err(io)?;
    }

    let mut reports = Vec::new();
    if let Ok(entries) = std::fs::read_dir(run_dir.join(REPORTS)) {
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            let is_eval = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("eval-") && n.ends_with(".json"));
            if is_eval {
                let report: EvalReport = serde_json::from_str(&read(&path)?)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                reports.push(report);
            }
        }
    }
    if !reports.is_empty() {
        writeln!(out, "\nevaluations").map_err(io)?;
        write!(out, "{}", render_table(&reports)).map_err(io)?;
    }
    Ok(())
}

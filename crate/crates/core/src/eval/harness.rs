use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use super::answer::{extract_answer, judge_equivalence, Judge};
use super::dataset::TaskRecord;
use crate::backend::{CostLedger, Exchange, PricingError};
use crate::components::{CallRecord, TaskContext};
use crate::executor::Executor;
use crate::grammar::ComponentSequence;
use crate::search::{Evaluation, Evaluator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Correct,
    Incorrect,
    Timeout,
}

pub const DEFAULT_TRIALS: u32 = 5;
pub const DEFAULT_TASK_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    pub trials: u32,
    /// Wall-clock limit per (task, trial) run; checked before each call.
    pub task_timeout: Option<Duration>,
    /// Runs in flight at once.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            task_timeout: Some(DEFAULT_TASK_TIMEOUT),
            workers: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no tasks to evaluate")]
    NoTasks,
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("task `{0}` has a blank question")]
    BlankQuestion(String),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Everything one (task, trial) run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub trial: u32,
    pub outcome: Outcome,
    pub gold: String,
    pub predicted: Option<String>,
    pub final_answer: Option<String>,
    pub calls: Vec<CallRecord>,
    pub judge: Option<Exchange>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sequence: ComponentSequence,
    /// Outcomes per task id, one per trial in trial order.
    pub per_problem: BTreeMap<String, Vec<Outcome>>,
    pub trial_accuracy: Vec<f64>,
    pub accuracy_mean: f64,
    /// Sample standard deviation over trials; 0 for a single trial.
    pub accuracy_std: f64,
    pub dollars: f64,
    /// Pipeline calls, excluding judge calls.
    pub calls: usize,
    pub judge_calls: usize,
    /// Runs that ended in an error other than a timeout.
    pub failed_runs: usize,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    /// Trial-major: all tasks of trial 0, then trial 1, ...
    pub runs: Vec<RunRecord>,
    /// Pipeline and judge usage combined.
    pub ledger: CostLedger,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_one(
    executor: &Executor<'_>,
    sequence: &ComponentSequence,
    task: &TaskRecord,
    trial: u32,
    judge: Option<&Judge<'_>>,
    timeout: Option<Duration>,
) -> (RunRecord, CostLedger) {
    let context = TaskContext::new(&task.question).expect("questions checked non-blank");
    let deadline = timeout.map(|t| Instant::now() + t);
    let mut record = RunRecord {
        task_id: task.id.clone(),
        trial,
        outcome: Outcome::Incorrect,
        gold: task.gold.clone(),
        predicted: None,
        final_answer: None,
        calls: Vec::new(),
        judge: None,
        error: None,
    };
    match executor.execute(sequence, &context, deadline) {
        Ok(result) => {
            let predicted = extract_answer(&result.final_answer.content);
            let eq = judge_equivalence(predicted.as_deref(), &task.gold, judge);
            record.outcome = if eq.equal { Outcome::Correct } else { Outcome::Incorrect };
            record.predicted = predicted;
            record.final_answer = Some(result.final_answer.content);
            record.calls = result.calls;
            record.judge = eq.exchange;
            (record, result.ledger)
        }
        Err(failure) => {
            if failure.is_timeout() {
                warn!(task = %task.id, trial, "run timed out");
                record.outcome = Outcome::Timeout;
            } else {
                warn!(task = %task.id, trial, error = %failure, "run failed");
            }
            record.error = Some(failure.error.to_string());
            record.calls = failure.calls;
            (record, failure.ledger)
        }
    }
}

/// Runs `sequence` on every task `config.trials` times and scores the final
/// answers. Individual run failures count as incorrect.
pub fn evaluate_sequence(
    executor: &Executor<'_>,
    sequence: &ComponentSequence,
    tasks: &[TaskRecord],
    judge: Option<&Judge<'_>>,
    config: &EvalConfig,
) -> Result<EvalOutput, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::NoTasks);
    }
    if config.trials == 0 {
        return Err(EvalError::ZeroTrials);
    }
    if let Some(t) = tasks.iter().find(|t| t.question.trim().is_empty()) {
        return Err(EvalError::BlankQuestion(t.id.clone()));
    }
    for model in std::iter::once(executor.model()).chain(judge.map(Judge::model)) {
        if !executor.prices().contains(model) {
            return Err(PricingError::UnknownModel(model.to_string()).into());
        }
    }

    let total = tasks.len() * config.trials as usize;
    let job = |i: usize| {
        let trial = (i / tasks.len()) as u32;
        run_one(executor, sequence, &tasks[i % tasks.len()], trial, judge, config.task_timeout)
    };
    let results: Vec<(RunRecord, CostLedger)> = if config.workers <= 1 {
        (0..total).map(job).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<(RunRecord, CostLedger)>>> = Mutex::new(vec![None; total]);
        std::thread::scope(|scope| {
            for _ in 0..config.workers.min(total) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= total {
                        break;
                    }
                    let out = job(i);
                    slots.lock().expect("result slots poisoned")[i] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|s| s.expect("every job ran"))
            .collect()
    };

    let mut ledger = CostLedger::new(executor.prices().clone());
    let mut per_problem: BTreeMap<String, Vec<Outcome>> = BTreeMap::new();
    let mut correct = vec![0usize; config.trials as usize];
    let (mut calls, mut judge_calls, mut failed_runs) = (0, 0, 0);
    let mut runs = Vec::with_capacity(total);
    for (run, run_ledger) in results {
        ledger.absorb(&run_ledger);
        calls += run.calls.len();
        if let Some(exchange) = &run.judge {
            ledger.record(&exchange.request.request_tag, &exchange.response);
            judge_calls += 1;
        }
        if run.error.is_some() && run.outcome != Outcome::Timeout {
            failed_runs += 1;
        }
        if run.outcome == Outcome::Correct {
            correct[run.trial as usize] += 1;
        }
        per_problem.entry(run.task_id.clone()).or_default().push(run.outcome);
        runs.push(run);
    }
    let trial_accuracy: Vec<f64> = correct.iter().map(|&c| c as f64 / tasks.len() as f64).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&trial_accuracy);
    let dollars = ledger.total()?;
    debug!(%sequence, accuracy_mean, dollars, "evaluated");
    Ok(EvalOutput {
        report: EvalReport {
            sequence: sequence.clone(),
            per_problem,
            trial_accuracy,
            accuracy_mean,
            accuracy_std,
            dollars,
            calls,
            judge_calls,
            failed_runs,
        },
        runs,
        ledger,
    })
}

/// Aligned text table: one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let header = ["system", "accuracy (%)", "dollars", "calls"];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.sequence.to_string(),
                format!("{:.1} ± {:.1}", r.accuracy_mean * 100.0, r.accuracy_std * 100.0),
                format!("{:.4}", r.dollars),
                r.calls.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut out = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            let pad = w - cell.chars().count();
            out.push_str("  ");
            out.push_str(&" ".repeat(pad));
            out.push_str(cell);
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&line(widths.map(|w| "-".repeat(w)).each_ref().map(String::as_str)));
    for row in &rows {
        out.push_str(&line(row.each_ref().map(String::as_str)));
    }
    out
}

type Sink<'a> = Box<dyn FnMut(&EvalOutput) + 'a>;

/// Scores candidates by validation accuracy for the search loop.
pub struct HarnessEvaluator<'a> {
    executor: Executor<'a>,
    tasks: Vec<TaskRecord>,
    judge: Option<Judge<'a>>,
    config: EvalConfig,
    sink: Option<Sink<'a>>,
}

impl<'a> HarnessEvaluator<'a> {
    pub fn new(executor: Executor<'a>, tasks: Vec<TaskRecord>, judge: Option<Judge<'a>>, config: EvalConfig) -> Self {
        Self {
            executor,
            tasks,
            judge,
            config,
            sink: None,
        }
    }

    /// Called with every full evaluation, e.g. to persist transcripts.
    pub fn with_sink(mut self, sink: impl FnMut(&EvalOutput) + 'a) -> Self {
        self.sink = Some(Box::new(sink));
        self
    }
}

impl Evaluator for HarnessEvaluator<'_> {
    type Error = EvalError;

    fn evaluate(&mut self, sequence: &ComponentSequence) -> Result<Evaluation, EvalError> {
        let output = evaluate_sequence(&self.executor, sequence, &self.tasks, self.judge.as_ref(), &self.config)?;
        if let Some(sink) = self.sink.as_mut() {
            sink(&output);
        }
        Ok(Evaluation {
            score: output.report.accuracy_mean,
            dollars: output.report.dollars,
            calls: output.report.calls + output.report.judge_calls,
        })
    }
}

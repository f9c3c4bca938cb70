//! Datasets, answer scoring and repeated-trial evaluation.

mod answer;
mod dataset;
mod harness;

pub use answer::{check_equivalence, extract_answer, judge_equivalence, normalize, Equivalence, Judge, JUDGE_SYSTEM};
pub use dataset::{load_dataset, parse_dataset, sample_records, DatasetError, TaskRecord};
pub use harness::{
    evaluate_sequence, mean_std, render_table, EvalConfig, EvalError, EvalOutput, EvalReport, HarnessEvaluator,
    Outcome, RunRecord, DEFAULT_TASK_TIMEOUT, DEFAULT_TRIALS,
};

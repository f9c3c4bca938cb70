use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use masgram_core::backend::{ModelPrice, PriceTable};
use masgram_core::eval::{DEFAULT_TASK_TIMEOUT, DEFAULT_TRIALS};
use masgram_core::grammar::{DEFAULT_MAX_DEPTH, DEFAULT_RESAMPLE_BUDGET};
use masgram_core::search::{Strategy, DEFAULT_ITERATIONS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Scripted,
    Http,
}

/// Timestamps in the search log. `logical` derives them from the evaluation
/// index so reruns are byte-identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    Logical,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    /// JSON rule script for the scripted backend; echo when absent.
    pub script: Option<PathBuf>,
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub concurrency: usize,
    pub retries: u32,
    pub retry_base_ms: u64,
    pub request_timeout_secs: u64,
    pub max_tokens: Option<u32>,
    /// TOML prompt catalog overriding the built-in templates.
    pub prompts: Option<PathBuf>,
    /// Dollars per million tokens, merged over the built-in table.
    pub prices: BTreeMap<String, ModelPrice>,
}

impl Default for BackendSettings {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            script: None,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            concurrency: 8,
            retries: 5,
            retry_base_ms: 1000,
            request_timeout_secs: 120,
            max_tokens: None,
            prompts: None,
            prices: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarSettings {
    /// Grammar text file; the built-in grammar when absent.
    pub path: Option<PathBuf>,
    pub max_depth: usize,
    pub resample_budget: usize,
}

impl Default for GrammarSettings {
    fn default() -> Self {
        Self {
            path: None,
            max_depth: DEFAULT_MAX_DEPTH,
            resample_budget: DEFAULT_RESAMPLE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub strategy: Strategy,
    pub iterations: u32,
    pub seed: u64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            strategy: Strategy::Forced,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub validation_size: Option<usize>,
    pub test_size: Option<usize>,
    pub split_seed: u64,
    pub trials: u32,
    /// Model asked to settle answers that differ after normalization.
    pub judge_model: Option<String>,
    pub task_timeout_secs: u64,
    pub workers: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            validation: None,
            test: None,
            validation_size: None,
            test_size: None,
            split_seed: 0,
            trials: DEFAULT_TRIALS,
            judge_model: None,
            task_timeout_secs: DEFAULT_TASK_TIMEOUT.as_secs(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: PathBuf,
    pub clock: Clock,
    pub backend: BackendSettings,
    pub grammar: GrammarSettings,
    pub search: SearchSettings,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_dir: PathBuf::from("runs/latest"),
            clock: Clock::Logical,
            backend: BackendSettings::default(),
            grammar: GrammarSettings::default(),
            search: SearchSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

fn parse_price(text: &str) -> Result<(String, ModelPrice), String> {
    let (model, rest) = text.split_once('=').ok_or("expected MODEL=INPUT,OUTPUT")?;
    let (input, output) = rest.split_once(',').ok_or("expected MODEL=INPUT,OUTPUT")?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad price `{s}`: {e}"));
    Ok((
        model.trim().to_string(),
        ModelPrice {
            input: num(input)?,
            output: num(output)?,
        },
    ))
}

/// Command-line overrides; each flag replaces the matching config field.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub clock: Option<Clock>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub script: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub retry_base_ms: Option<u64>,
    #[arg(long)]
    pub request_timeout_secs: Option<u64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Price per million tokens, as MODEL=INPUT,OUTPUT. Repeatable.
    #[arg(long = "price", value_parser = parse_price)]
    pub prices: Vec<(String, ModelPrice)>,
    #[arg(long)]
    pub grammar: Option<PathBuf>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub resample_budget: Option<usize>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validation set (JSON lines).
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Held-out test set (JSON lines).
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub validation_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u32>,
    #[arg(long)]
    pub judge_model: Option<String>,
    #[arg(long)]
    pub task_timeout_secs: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
}

macro_rules! apply {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
    (some $target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = Some(v);
        }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Loads `--config` if given, applies the flags and validates.
    pub fn resolve(overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = match &overrides.config {
            Some(path) => Self::from_toml(&read(path)?)?,
            None => Self::default(),
        };
        config.apply(overrides.clone());
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: Overrides) {
        apply!(self.run_dir, o.run_dir);
        apply!(self.clock, o.clock);
        let b = &mut self.backend;
        apply!(b.kind, o.backend);
        apply!(some b.script, o.script);
        apply!(b.endpoint, o.endpoint);
        apply!(b.model, o.model);
        apply!(b.api_key_env, o.api_key_env);
        apply!(b.concurrency, o.concurrency);
        apply!(b.retries, o.retries);
        apply!(b.retry_base_ms, o.retry_base_ms);
        apply!(b.request_timeout_secs, o.request_timeout_secs);
        apply!(some b.max_tokens, o.max_tokens);
        apply!(some b.prompts, o.prompts);
        b.prices.extend(o.prices);
        let g = &mut self.grammar;
        apply!(some g.path, o.grammar);
        apply!(g.max_depth, o.max_depth);
        apply!(g.resample_budget, o.resample_budget);
        let s = &mut self.search;
        apply!(s.strategy, o.strategy);
        apply!(s.iterations, o.iterations);
        apply!(s.seed, o.seed);
        let e = &mut self.eval;
        apply!(some e.validation, o.validation);
        apply!(some e.test, o.test);
        apply!(some e.validation_size, o.validation_size);
        apply!(some e.test_size, o.test_size);
        apply!(e.split_seed, o.split_seed);
        apply!(e.trials, o.trials);
        apply!(some e.judge_model, o.judge_model);
        apply!(e.task_timeout_secs, o.task_timeout_secs);
        apply!(e.workers, o.workers);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("backend.concurrency", self.backend.concurrency as u64),
            ("backend.retries", u64::from(self.backend.retries)),
            ("backend.request_timeout_secs", self.backend.request_timeout_secs),
            ("grammar.max_depth", self.grammar.max_depth as u64),
            ("grammar.resample_budget", self.grammar.resample_budget as u64),
            ("search.iterations", u64::from(self.search.iterations)),
            ("eval.trials", u64::from(self.eval.trials)),
            ("eval.workers", self.eval.workers as u64),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        for size in [self.eval.validation_size, self.eval.test_size].into_iter().flatten() {
            if size == 0 {
                return Err(CliError::Config("sample sizes must be positive".into()));
            }
        }
        if self.backend.model.trim().is_empty() {
            return Err(CliError::Config("backend.model is empty".into()));
        }
        for (model, price) in &self.backend.prices {
            if !(price.input >= 0.0 && price.output >= 0.0) {
                return Err(CliError::Config(format!("price for {model} must be non-negative")));
            }
        }
        let prices = self.price_table();
        for model in std::iter::once(&self.backend.model).chain(self.eval.judge_model.as_ref()) {
            if !prices.contains(model) {
                return Err(CliError::Config(format!(
                    "no price for model `{model}`; add one with --price {model}=INPUT,OUTPUT"
                )));
            }
        }
        Ok(())
    }

    pub fn price_table(&self) -> PriceTable {
        let mut table = PriceTable::default();
        for (model, price) in &self.backend.prices {
            table.insert(model, *price);
        }
        table
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BackendError, ChatRequest, ChatResponse, LlmBackend};

/// Rough token estimate used by the scripted backend: one token per four
/// characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Debug, Clone)]
pub enum Matcher {
    Contains(String),
    Pattern(Regex),
}

impl Matcher {
    fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::Contains(needle) => text.contains(needle.as_str()),
            Matcher::Pattern(re) => re.is_match(text),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptRule {
    pub matcher: Matcher,
    pub response: String,
    /// How many times the rule may fire; `None` is unlimited.
    pub budget: Option<usize>,
}

impl ScriptRule {
    pub fn contains(needle: &str, response: &str) -> Self {
        Self {
            matcher: Matcher::Contains(needle.to_string()),
            response: response.to_string(),
            budget: None,
        }
    }

    pub fn pattern(pattern: &str, response: &str) -> Result<Self, ScriptError> {
        Ok(Self {
            matcher: Matcher::Pattern(Regex::new(pattern)?),
            response: response.to_string(),
            budget: None,
        })
    }

    pub fn limited(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }
}

/// What to answer when no rule matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fallback {
    /// Reply with the request's user text.
    Echo,
    Fixed(String),
    Error,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("invalid script JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid rule pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("rule {0} needs exactly one of `contains` or `pattern`")]
    Matcher(usize),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptFile {
    #[serde(default)]
    rules: Vec<RuleFile>,
    #[serde(default = "default_fallback")]
    fallback: Fallback,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    contains: Option<String>,
    pattern: Option<String>,
    response: String,
    budget: Option<usize>,
}

fn default_fallback() -> Fallback {
    Fallback::Echo
}

/// Deterministic backend driven by an ordered rule table matched against the
/// request's user text. The first matching rule with budget left answers.
///
/// Without budgets the backend is a pure function of the request. Budgets
/// make it stateful: each firing is counted across all callers.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    fallback: Fallback,
    fired: Mutex<Vec<usize>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>, fallback: Fallback) -> Self {
        let fired = Mutex::new(vec![0; rules.len()]);
        Self {
            rules,
            fallback,
            fired,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn echo() -> Self {
        Self::new(Vec::new(), Fallback::Echo)
    }

    pub fn constant(text: &str) -> Self {
        Self::new(Vec::new(), Fallback::Fixed(text.to_string()))
    }

    /// Parses the JSON script format:
    ///
    /// ```json
    /// {"rules": [{"contains": "step by step", "response": "\\boxed{4}", "budget": 2},
    ///            {"pattern": "Solution \\d", "response": "..."}],
    ///  "fallback": "echo"}
    /// ```
    ///
    /// `fallback` is `"echo"`, `"error"` or `{"fixed": "text"}`.
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let file: ScriptFile = serde_json::from_str(text)?;
        let rules = file
            .rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let matcher = match (r.contains, r.pattern) {
                    (Some(c), None) => Matcher::Contains(c),
                    (None, Some(p)) => Matcher::Pattern(Regex::new(&p)?),
                    _ => return Err(ScriptError::Matcher(i)),
                };
                Ok(ScriptRule {
                    matcher,
                    response: r.response,
                    budget: r.budget,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(rules, file.fallback))
    }

    /// Total `complete` invocations, including failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn pick(&self, text: &str) -> Option<String> {
        let mut fired = self.fired.lock().expect("script state poisoned");
        for (i, rule) in self.rules.iter().enumerate() {
            if !rule.matcher.matches(text) {
                continue;
            }
            if rule.budget.is_some_and(|b| fired[i] >= b) {
                continue;
            }
            fired[i] += 1;
            return Some(rule.response.clone());
        }
        None
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        request.validate()?;
        let content = match self.pick(&request.user_text) {
            Some(text) => text,
            None => match &self.fallback {
                Fallback::Echo => request.user_text.clone(),
                Fallback::Fixed(text) => text.clone(),
                Fallback::Error => {
                    return Err(BackendError::Unscripted {
                        tag: request.request_tag.clone(),
                    })
                }
            },
        };
        let prompt = format!("{}{}", request.system_text, request.user_text);
        Ok(ChatResponse {
            prompt_tokens: estimate_tokens(&prompt),
            completion_tokens: estimate_tokens(&content),
            content,
            model: request.model.clone(),
        })
    }
}

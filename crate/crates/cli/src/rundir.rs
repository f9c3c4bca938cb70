//! Run directory layout:
//!
//! ```text
//! <run_dir>/
//!   config.snapshot      resolved configuration, written before any call
//!   search.log.jsonl     one record per search event
//!   best.json            best sequence with score and costs
//!   transcripts/         full request/response text per evaluation
//!   reports/             evaluation reports and the final search state
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use masgram_core::search::{SearchEvent, SkipRecord};
use serde::{Deserialize, Serialize};

use crate::config::{Clock, RunConfig};
use crate::error::CliError;

pub const SNAPSHOT: &str = "config.snapshot";
pub const SEARCH_LOG: &str = "search.log.jsonl";
pub const BEST: &str = "best.json";
pub const TRANSCRIPTS: &str = "transcripts";
pub const REPORTS: &str = "reports";

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        for dir in [root.to_path_buf(), root.join(TRANSCRIPTS), root.join(REPORTS)] {
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&format!("creating {}", dir.display()), e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("value serializes");
        self.write(name, &(text + "\n"))
    }

    /// JSON lines, one value per line.
    pub fn write_lines<T: Serialize>(&self, name: &str, values: &[T]) -> Result<(), CliError> {
        let mut text = String::new();
        for v in values {
            text.push_str(&serde_json::to_string(v).expect("value serializes"));
            text.push('\n');
        }
        self.write(name, &text)
    }

    pub fn write_snapshot(&self, config: &RunConfig) -> Result<(), CliError> {
        self.write(SNAPSHOT, &config.to_toml())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub event: String,
    pub iteration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dollars: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calls: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub timestamp: String,
}

impl LogRecord {
    fn from_event(event: SearchEvent<'_>) -> Self {
        let blank = |event: &str, iteration| LogRecord {
            event: event.into(),
            iteration,
            evaluation: None,
            forced: None,
            sequence: None,
            score: None,
            dollars: None,
            calls: None,
            reason: None,
            timestamp: String::new(),
        };
        match event {
            SearchEvent::Evaluated(r) => LogRecord {
                evaluation: Some(r.evaluation),
                forced: r.forced.map(|t| t.to_string()),
                sequence: Some(r.sequence.to_string()),
                score: Some(r.score),
                dollars: Some(r.dollars),
                calls: Some(r.calls),
                ..blank("evaluated", r.iteration)
            },
            SearchEvent::Skipped(SkipRecord {
                iteration,
                forced,
                reason,
            }) => LogRecord {
                forced: forced.map(|t| t.to_string()),
                reason: Some(reason.clone()),
                ..blank("skipped", *iteration)
            },
            SearchEvent::Duplicate { iteration, sequence } => LogRecord {
                sequence: Some(sequence.to_string()),
                ..blank("duplicate", iteration)
            },
        }
    }
}

/// Appends search events to `search.log.jsonl`, flushing after each line.
pub struct SearchLog {
    out: BufWriter<File>,
    clock: Clock,
    tick: i64,
}

impl SearchLog {
    pub fn create(dir: &RunDir, clock: Clock) -> Result<Self, CliError> {
        let path = dir.path(SEARCH_LOG);
        let file = File::create(&path).map_err(|e| CliError::io(&format!("creating {}", path.display()), e))?;
        Ok(Self {
            out: BufWriter::new(file),
            clock,
            tick: 0,
        })
    }

    fn timestamp(&mut self) -> String {
        self.tick += 1;
        let time = match self.clock {
            Clock::Logical => DateTime::<Utc>::from_timestamp(self.tick, 0).expect("small tick"),
            Clock::System => Utc::now(),
        };
        time.to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    pub fn append(&mut self, event: SearchEvent<'_>) -> Result<(), CliError> {
        let mut record = LogRecord::from_event(event);
        record.timestamp = self.timestamp();
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::io("writing search log", e))
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

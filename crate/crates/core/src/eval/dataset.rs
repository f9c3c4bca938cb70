use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// One problem with its reference answer. Multiple-choice items carry the
/// options inside `question` and the option letter as `gold`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub question: String,
    pub gold: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("dataset is empty")]
    Empty,
    #[error("sample of {requested} requested from {available} records")]
    SampleTooLarge { requested: usize, available: usize },
}

/// Reads a JSON-lines file of `{"id", "question", "gold"}` objects. Blank
/// lines are ignored; numeric ids and golds are accepted as text.
///
/// With `sample_size`, draws that many records uniformly without
/// replacement using `split_seed`, keeping file order among the chosen.
pub fn load_dataset(
    path: &Path,
    split_seed: u64,
    sample_size: Option<usize>,
) -> Result<Vec<TaskRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let records = parse_dataset(&text)?;
    match sample_size {
        Some(k) => sample_records(records, split_seed, k),
        None => Ok(records),
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<TaskRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse = |message: String| DatasetError::Parse { line, message };
        let value: Value = serde_json::from_str(raw).map_err(|e| parse(e.to_string()))?;
        let object = value.as_object().ok_or_else(|| parse("expected a JSON object".into()))?;
        let field = |name: &str| -> Result<String, DatasetError> {
            let text = match object.get(name) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                Some(_) => return Err(parse(format!("field `{name}` must be a string or number"))),
                None => return Err(parse(format!("missing field `{name}`"))),
            };
            if text.trim().is_empty() {
                return Err(parse(format!("field `{name}` is empty")));
            }
            Ok(text)
        };
        let record = TaskRecord {
            id: field("id")?,
            question: field("question")?,
            gold: field("gold")?,
        };
        if !ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId { line, id: record.id });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(records)
}

pub fn sample_records(records: Vec<TaskRecord>, seed: u64, k: usize) -> Result<Vec<TaskRecord>, DatasetError> {
    if k > records.len() {
        return Err(DatasetError::SampleTooLarge {
            requested: k,
            available: records.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, records.len(), k).into_vec();
    chosen.sort_unstable();
    let mut chosen = chosen.into_iter().peekable();
    Ok(records
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| chosen.next_if_eq(&i).map(|_| r))
        .collect())
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ChatResponse;

/// Dollars per one million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(BTreeMap<String, ModelPrice>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PricingError {
    #[error("no price configured for model `{0}`")]
    UnknownModel(String),
}

impl PriceTable {
    pub fn empty() -> Self {
        Self(BTreeMap::new())
    }

    pub fn with(mut self, model: &str, input: f64, output: f64) -> Self {
        self.insert(model, ModelPrice { input, output });
        self
    }

    pub fn insert(&mut self, model: &str, price: ModelPrice) {
        self.0.insert(model.to_string(), price);
    }

    pub fn get(&self, model: &str) -> Option<ModelPrice> {
        self.0.get(model).copied()
    }

    pub fn contains(&self, model: &str) -> bool {
        self.0.contains_key(model)
    }

    pub fn cost(
        &self,
        model: &str,
        prompt_tokens: u64,
        completion_tokens: u64,
    ) -> Result<f64, PricingError> {
        let price = self
            .get(model)
            .ok_or_else(|| PricingError::UnknownModel(model.to_string()))?;
        Ok(prompt_tokens as f64 * price.input / 1e6 + completion_tokens as f64 * price.output / 1e6)
    }
}

impl Default for PriceTable {
    /// Published list prices for the OpenAI models commonly used as backbone
    /// and judge.
    fn default() -> Self {
        Self::empty()
            .with("gpt-4o-mini", 0.15, 0.60)
            .with("gpt-4.1-mini", 0.40, 1.60)
            .with("gpt-5", 1.25, 10.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub request_tag: String,
    pub model: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Token usage of a set of calls, priced on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    entries: Vec<LedgerEntry>,
    prices: PriceTable,
}

impl CostLedger {
    pub fn new(prices: PriceTable) -> Self {
        Self {
            entries: Vec::new(),
            prices,
        }
    }

    pub fn record(&mut self, request_tag: &str, response: &ChatResponse) {
        self.entries.push(LedgerEntry {
            request_tag: request_tag.to_string(),
            model: response.model.clone(),
            prompt_tokens: response.prompt_tokens,
            completion_tokens: response.completion_tokens,
        });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    pub fn calls(&self) -> usize {
        self.entries.len()
    }

    pub fn entry_cost(&self, entry: &LedgerEntry) -> Result<f64, PricingError> {
        self.prices
            .cost(&entry.model, entry.prompt_tokens, entry.completion_tokens)
    }

    pub fn total(&self) -> Result<f64, PricingError> {
        ledger_total(self)
    }

    /// Appends the entries of `other`, keeping this ledger's price table.
    pub fn absorb(&mut self, other: &CostLedger) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Sum of per-entry dollars.
pub fn ledger_total(ledger: &CostLedger) -> Result<f64, PricingError> {
    ledger
        .entries
        .iter()
        .map(|e| ledger.entry_cost(e))
        .sum::<Result<f64, _>>()
}

//! The gradient log: run metadata plus one record per itemized batch.
//!
//! This is the contract between the trainer and the explorer UI. It is
//! written as compact JSON:
//!
//! ```json
//! {"schema_version":1,
//!  "meta":{"hidden_size":100,"batch_size":25,"horizon":5,"record_interval":100,
//!          "vocab":"\n !\"#...","optimizer":"adagrad","learning_rate":0.1,
//!          "init_scale":0.01,"seed":1,"corpus_id":"corpus.c"},
//!  "records":[{"batch_index":0,"char_offset":0,"true_labels":"...",
//!              "predicted_labels":"...","magnitudes":[[m00],[m10,m11],...],
//!              "max_gradient":0.0012,"batch_loss":114.3}]}
//! ```
//!
//! `magnitudes[t][d]` is the mean absolute entry of the contribution of the
//! loss at position `t` to the recurrent-weight gradient through step
//! `t - d`. Rows are ragged: row `t` has `min(horizon, t) + 1` entries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::backprop::ItemizedGradients;
use crate::error::FormatError;
use crate::rnn::ForwardTrace;
use crate::vocab::Vocabulary;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub hidden_size: usize,
    pub batch_size: usize,
    pub horizon: usize,
    pub record_interval: usize,
    /// Vocabulary symbols in index order.
    pub vocab: String,
    pub optimizer: String,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub corpus_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchRecord {
    pub batch_index: usize,
    /// Position of the batch's first input symbol in the corpus.
    pub char_offset: usize,
    pub true_labels: String,
    pub predicted_labels: String,
    pub magnitudes: Vec<Vec<f64>>,
    pub max_gradient: f64,
    /// Sum of the per-position losses.
    pub batch_loss: f64,
}

impl BatchRecord {
    pub fn from_itemized(
        batch_index: usize,
        char_offset: usize,
        trace: &ForwardTrace,
        item: &ItemizedGradients,
        vocab: &Vocabulary,
    ) -> crate::Result<Self> {
        Ok(Self {
            batch_index,
            char_offset,
            true_labels: vocab.decode(&trace.targets)?,
            predicted_labels: vocab.decode(&trace.predictions())?,
            magnitudes: item.magnitudes().to_vec(),
            max_gradient: item.max_magnitude(),
            batch_loss: trace.total_loss,
        })
    }

    /// Per-position prediction correctness.
    pub fn correct(&self) -> Vec<bool> {
        self.true_labels
            .chars()
            .zip(self.predicted_labels.chars())
            .map(|(a, b)| a == b)
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let correct = self.correct();
        if correct.is_empty() {
            return 0.0;
        }
        correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
    }

    /// Largest stored magnitude, 0 for an empty table.
    pub fn computed_max(&self) -> f64 {
        self.magnitudes.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Mean magnitude at each distance `d = 0..=horizon`, averaged over
    /// the origins that reach that far. Distances no origin reaches are
    /// omitted.
    pub fn mean_by_distance(&self) -> Vec<f64> {
        let depth = self.magnitudes.iter().map(Vec::len).max().unwrap_or(0);
        (0..depth)
            .map(|d| {
                let vals: Vec<f64> = self.magnitudes.iter().filter_map(|row| row.get(d).copied()).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientLog {
    schema_version: u32,
    meta: RunMeta,
    records: Vec<BatchRecord>,
}

/// Mirror of [`GradientLog`] used only for parsing, before validation.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLog {
    schema_version: u32,
    meta: RunMeta,
    records: Vec<BatchRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogSummary {
    pub record_count: usize,
    pub global_max_gradient: f64,
    pub per_record_max: Vec<f64>,
    pub accuracy_per_record: Vec<f64>,
}

impl GradientLog {
    pub fn new(meta: RunMeta) -> Result<Self, FormatError> {
        validate_meta(&meta)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            meta,
            records: Vec::new(),
        })
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn records(&self) -> &[BatchRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, batch_index: usize) -> Option<&BatchRecord> {
        self.records
            .binary_search_by_key(&batch_index, |r| r.batch_index)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn append_record(&mut self, record: BatchRecord) -> Result<(), FormatError> {
        let i = self.records.len();
        if let Some(last) = self.records.last() {
            if record.batch_index <= last.batch_index {
                return Err(FormatError::invalid(
                    format!("records[{i}].batch_index"),
                    format!(
                        "batch index {} does not follow previous index {}",
                        record.batch_index, last.batch_index
                    ),
                ));
            }
        }
        let vocab: HashSet<char> = self.meta.vocab.chars().collect();
        validate_record(&self.meta, &vocab, &record, &format!("records[{i}]"))?;
        self.records.push(record);
        Ok(())
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("gradient log serialization cannot fail")
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| FormatError::Parse {
            path: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        check_schema_version(&value)?;
        let raw: RawLog = serde_path_to_error::deserialize(value).map_err(|e| FormatError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;

        let mut log = GradientLog::new(raw.meta).map_err(|e| prefix_path(e, "meta"))?;
        log.schema_version = raw.schema_version;
        for record in raw.records {
            log.append_record(record)?;
        }
        Ok(log)
    }

    pub fn summary(&self) -> Result<LogSummary, FormatError> {
        if self.records.is_empty() {
            return Err(FormatError::invalid("records", "log has no records"));
        }
        let per_record_max: Vec<f64> = self.records.iter().map(|r| r.max_gradient).collect();
        Ok(LogSummary {
            record_count: self.records.len(),
            global_max_gradient: per_record_max.iter().copied().fold(0.0, f64::max),
            accuracy_per_record: self.records.iter().map(BatchRecord::accuracy).collect(),
            per_record_max,
        })
    }
}

/// Checks `schema_version` before anything else so that files from a
/// different version report that rather than some incidental field error.
pub(crate) fn check_schema_version(value: &serde_json::Value) -> Result<(), FormatError> {
    match value.get("schema_version") {
        None => Err(FormatError::Parse {
            path: "schema_version".into(),
            message: "missing field `schema_version`".into(),
        }),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => Ok(()),
        Some(v) => Err(FormatError::SchemaVersion {
            found: v.to_string(),
            expected: SCHEMA_VERSION,
        }),
    }
}

fn prefix_path(e: FormatError, prefix: &str) -> FormatError {
    match e {
        FormatError::Invalid { path, message } => FormatError::Invalid {
            path: format!("{prefix}.{path}"),
            message,
        },
        other => other,
    }
}

fn validate_meta(meta: &RunMeta) -> Result<(), FormatError> {
    if meta.hidden_size == 0 {
        return Err(FormatError::invalid("hidden_size", "must be at least 1"));
    }
    if meta.batch_size < 2 {
        return Err(FormatError::invalid("batch_size", "must be at least 2"));
    }
    if meta.record_interval == 0 {
        return Err(FormatError::invalid("record_interval", "must be at least 1"));
    }
    if let Err(e) = Vocabulary::from_symbols(meta.vocab.chars().collect()) {
        return Err(FormatError::invalid("vocab", e.to_string()));
    }
    if !matches!(meta.optimizer.as_str(), "sgd" | "adagrad") {
        return Err(FormatError::invalid(
            "optimizer",
            format!("unknown optimizer {:?}", meta.optimizer),
        ));
    }
    if !(meta.learning_rate.is_finite() && meta.learning_rate >= 0.0) {
        return Err(FormatError::invalid("learning_rate", "must be finite and non-negative"));
    }
    if !(meta.init_scale.is_finite() && meta.init_scale >= 0.0) {
        return Err(FormatError::invalid("init_scale", "must be finite and non-negative"));
    }
    Ok(())
}

fn validate_record(
    meta: &RunMeta,
    vocab: &HashSet<char>,
    record: &BatchRecord,
    at: &str,
) -> Result<(), FormatError> {
    let n = meta.batch_size;
    for (name, labels) in [
        ("true_labels", &record.true_labels),
        ("predicted_labels", &record.predicted_labels),
    ] {
        let count = labels.chars().count();
        if count != n {
            return Err(FormatError::invalid(
                format!("{at}.{name}"),
                format!("{count} characters, batch size is {n}"),
            ));
        }
        if let Some(c) = labels.chars().find(|c| !vocab.contains(c)) {
            return Err(FormatError::invalid(
                format!("{at}.{name}"),
                format!("symbol {c:?} is not in the vocabulary"),
            ));
        }
    }

    if record.magnitudes.len() != n {
        return Err(FormatError::invalid(
            format!("{at}.magnitudes"),
            format!("{} origins, batch size is {n}", record.magnitudes.len()),
        ));
    }
    for (t, row) in record.magnitudes.iter().enumerate() {
        let expected = meta.horizon.min(t) + 1;
        if row.len() != expected {
            return Err(FormatError::invalid(
                format!("{at}.magnitudes[{t}]"),
                format!("{} entries, expected {expected}", row.len()),
            ));
        }
        if let Some(d) = row.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(FormatError::invalid(
                format!("{at}.magnitudes[{t}][{d}]"),
                "magnitude must be finite and non-negative",
            ));
        }
    }

    let max = record.computed_max();
    if record.max_gradient != max {
        return Err(FormatError::invalid(
            format!("{at}.max_gradient"),
            format!("{} differs from the largest magnitude {max}", record.max_gradient),
        ));
    }
    if !(record.batch_loss.is_finite() && record.batch_loss >= 0.0) {
        return Err(FormatError::invalid(
            format!("{at}.batch_loss"),
            "must be finite and non-negative",
        ));
    }
    Ok(())
}

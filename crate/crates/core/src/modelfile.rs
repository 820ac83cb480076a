//! JSON persistence for trained weights.
//!
//! Same conventions as the gradient log: compact JSON, decimal scalars,
//! matrices as row-major nested arrays.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::gradlog::{check_schema_version, SCHEMA_VERSION};
use crate::rnn::ModelParams;
use crate::vocab::Vocabulary;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    hidden_size: usize,
    vocab_size: usize,
    vocab: String,
    u: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

pub fn save_model(params: &ModelParams, vocab: &Vocabulary) -> Vec<u8> {
    let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        hidden_size: params.hidden_size(),
        vocab_size: params.vocab_size(),
        vocab: vocab.to_string(),
        u: rows(&params.u),
        w: rows(&params.w),
        v: rows(&params.v),
    };
    serde_json::to_vec(&file).expect("model serialization cannot fail")
}

pub fn load_model(bytes: &[u8]) -> Result<(ModelParams, Vocabulary), FormatError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| FormatError::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    check_schema_version(&value)?;
    let file: ModelFile = serde_path_to_error::deserialize(value).map_err(|e| FormatError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;

    let vocab = Vocabulary::from_symbols(file.vocab.chars().collect())
        .map_err(|e| FormatError::invalid("vocab", e.to_string()))?;
    if vocab.len() != file.vocab_size {
        return Err(FormatError::invalid(
            "vocab_size",
            format!("{} but vocab has {} symbols", file.vocab_size, vocab.len()),
        ));
    }
    let (h, c) = (file.hidden_size, file.vocab_size);
    if h == 0 {
        return Err(FormatError::invalid("hidden_size", "must be at least 1"));
    }
    let u = matrix("u", file.u, h, c)?;
    let w = matrix("w", file.w, h, h)?;
    let v = matrix("v", file.v, c, h)?;
    let params = ModelParams::from_matrices(u, w, v).map_err(|e| FormatError::invalid("", e.to_string()))?;
    Ok((params, vocab))
}

fn matrix(name: &str, rows: Vec<Vec<f64>>, nrows: usize, ncols: usize) -> Result<Array2<f64>, FormatError> {
    if rows.len() != nrows {
        return Err(FormatError::invalid(name, format!("{} rows, expected {nrows}", rows.len())));
    }
    let mut flat = Vec::with_capacity(nrows * ncols);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != ncols {
            return Err(FormatError::invalid(
                format!("{name}[{i}]"),
                format!("{} columns, expected {ncols}", row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(FormatError::invalid(format!("{name}[{i}][{j}]"), "non-finite weight"));
        }
        flat.extend(row);
    }
    Ok(Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked above"))
}

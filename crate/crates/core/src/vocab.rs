//! Character vocabulary and one-hot encoding.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array1;

use crate::error::{Error, Result};

/// Ordered set of distinct Unicode scalar values with a dense index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl Vocabulary {
    /// Collects the distinct symbols of `text`, sorted by code point.
    pub fn build(text: &str) -> Result<Self> {
        let distinct: BTreeSet<char> = text.chars().collect();
        Self::from_symbols(distinct.into_iter().collect())
    }

    /// Takes the symbols in the given order. Used when reloading a
    /// vocabulary from a model or log file.
    pub fn from_symbols(symbols: Vec<char>) -> Result<Self> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(Error::DuplicateSymbol(c));
            }
        }
        if symbols.len() < 2 {
            return Err(Error::DegenerateCorpus(symbols.len()));
        }
        Ok(Self { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Result<usize> {
        self.index.get(&c).copied().ok_or(Error::UnknownSymbol(c))
    }

    pub fn symbol(&self, index: usize) -> Result<char> {
        self.symbols.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            size: self.len(),
        })
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars().map(|c| self.index_of(c)).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Result<String> {
        indices.iter().map(|&i| self.symbol(i)).collect()
    }
}

impl std::fmt::Display for Vocabulary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = self.symbols.iter().collect();
        f.write_str(&s)
    }
}

pub fn one_hot(index: usize, size: usize) -> Result<Array1<f64>> {
    if index >= size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    let mut v = Array1::zeros(size);
    v[index] = 1.0;
    Ok(v)
}

//! Words over the alphabet `{0, …, q−1}`.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("symbol {symbol} at position {pos} is not below q = {q}")]
    Symbol { pos: usize, symbol: u8, q: u32 },
    #[error("alphabet size {0} outside 2..=256")]
    Alphabet(u32),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("alphabet mismatch: q = {0} vs q = {1}")]
    AlphabetMismatch(u32, u32),
}

/// A q-ary word; symbols are stored one per byte, so `q ≤ 256`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QaryWord {
    q: u32,
    symbols: Vec<u8>,
}

impl QaryWord {
    pub fn new(q: u32, symbols: Vec<u8>) -> Result<Self, WordError> {
        if !(2..=256).contains(&q) {
            return Err(WordError::Alphabet(q));
        }
        if let Some((pos, &symbol)) = symbols.iter().enumerate().find(|(_, &s)| s as u32 >= q) {
            return Err(WordError::Symbol { pos, symbol, q });
        }
        Ok(Self { q, symbols })
    }

    pub fn zeros(q: u32, len: usize) -> Self {
        assert!((2..=256).contains(&q));
        Self {
            q,
            symbols: vec![0; len],
        }
    }

    /// Caller guarantees every symbol is below `q`.
    pub(crate) fn from_raw(q: u32, symbols: Vec<u8>) -> Self {
        debug_assert!(symbols.iter().all(|&s| (s as u32) < q));
        Self { q, symbols }
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    #[inline]
    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<u8> {
        self.symbols
    }

    pub fn weight(&self) -> usize {
        self.symbols.iter().filter(|&&s| s != 0).count()
    }

    pub fn distance(&self, other: &Self) -> usize {
        assert_eq!(self.len(), other.len());
        self.symbols
            .iter()
            .zip(&other.symbols)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Symbol-wise `self + other mod q`.
    pub fn add(&self, other: &Self) -> Result<Self, WordError> {
        self.zip_with(other, |a, b, q| ((a as u32 + b as u32) % q) as u8)
    }

    /// Symbol-wise `self − other mod q`.
    pub fn sub(&self, other: &Self) -> Result<Self, WordError> {
        self.zip_with(other, |a, b, q| ((a as u32 + q - b as u32) % q) as u8)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u8, u8, u32) -> u8) -> Result<Self, WordError> {
        if self.q != other.q {
            return Err(WordError::AlphabetMismatch(self.q, other.q));
        }
        if self.len() != other.len() {
            return Err(WordError::Length(self.len(), other.len()));
        }
        let symbols = self
            .symbols
            .iter()
            .zip(&other.symbols)
            .map(|(&a, &b)| f(a, b, self.q))
            .collect();
        Ok(Self { q: self.q, symbols })
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            q: self.q,
            symbols: self.symbols[start..end].to_vec(),
        }
    }

    /// Copy padded with zeros (or truncated) to `len`.
    pub fn resized(&self, len: usize) -> Self {
        let mut symbols = self.symbols.clone();
        symbols.resize(len, 0);
        Self { q: self.q, symbols }
    }

    pub fn extend_from(&mut self, other: &Self) {
        assert_eq!(self.q, other.q);
        self.symbols.extend_from_slice(&other.symbols);
    }
}

impl fmt::Debug for QaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QaryWord(q={}, ", self.q)?;
        for s in self.symbols.iter().take(64) {
            write!(f, "{s:x}")?;
        }
        if self.len() > 64 {
            write!(f, "…[{}]", self.len())?;
        }
        write!(f, ")")
    }
}

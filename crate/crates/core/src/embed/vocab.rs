use std::collections::HashSet;

use crate::error::{Error, Result};

/// Token strings with their training-set frequency counts.
///
/// The frequency rank (0 = most frequent) sorts by descending count with ties
/// broken by token index, so it is a bijection on `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    freq: Vec<u64>,
    /// `order[r]` = token index holding frequency rank `r`.
    order: Vec<usize>,
    /// `rank_of[i]` = frequency rank of token `i`.
    rank_of: Vec<usize>,
}

impl Vocab {
    pub fn new(tokens: Vec<String>, freq: Vec<u64>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("vocab must be non-empty"));
        }
        if tokens.len() != freq.len() {
            return Err(Error::invalid(format!(
                "tokens ({}) and freq ({}) lengths differ",
                tokens.len(),
                freq.len()
            )));
        }
        let mut seen = HashSet::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if !seen.insert(t.as_str()) {
                return Err(Error::invalid(format!("duplicate token `{t}` at index {i}")));
            }
        }
        let mut order: Vec<usize> = (0..tokens.len()).collect();
        order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
        let mut rank_of = vec![0usize; tokens.len()];
        for (r, &i) in order.iter().enumerate() {
            rank_of[i] = r;
        }
        Ok(Vocab { tokens, freq, order, rank_of })
    }

    /// Vocab with token names `t0..tN` and synthetic descending frequencies
    /// (token index == frequency rank). Handy for tables without real counts.
    pub fn synthetic(n: usize) -> Result<Self> {
        let tokens = (0..n).map(|i| format!("t{i}")).collect();
        let freq = (0..n).map(|i| (n - i) as u64).collect();
        Vocab::new(tokens, freq)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn freq(&self, i: usize) -> u64 {
        self.freq[i]
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freq
    }

    /// Frequency rank of token `i` (0 = most frequent).
    pub fn rank_of(&self, i: usize) -> usize {
        self.rank_of[i]
    }

    /// Token index holding rank `r`.
    pub fn token_at_rank(&self, r: usize) -> usize {
        self.order[r]
    }
}

//! Sequence and token-level metrics: corpus BLEU over token IDs, token F1
//! grouped by training-frequency bucket, and token F1 grouped by an arbitrary
//! token-class function.
//!
//! Token matching for F1 is position-wise: hypothesis token `t` at position
//! `i` is a true positive iff the reference holds `t` at position `i`.
//! Mismatches charge a false positive to the hypothesis token's group and a
//! false negative to the reference token's group; length overhang is charged
//! the same way.

use std::collections::{BTreeMap, HashMap};

use crate::embed::Vocab;
use crate::error::{Error, Result};

/// BLEU smoothing of zero n-gram precisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Exponential decay: the k-th zero precision becomes
    /// `1 / (2^k * max(total_n, 1))`.
    #[default]
    Exp,
    /// No smoothing: any zero precision makes the score 0.
    None,
}

impl std::str::FromStr for Smoothing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Smoothing::Exp),
            "none" => Ok(Smoothing::None),
            other => Err(Error::invalid(format!("smoothing `{other}` (want exp|none)"))),
        }
    }
}

fn ngram_counts(seq: &[usize], n: usize) -> HashMap<&[usize], u64> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU in [0, 100] over token-ID sequences: geometric mean of
/// modified n-gram precisions (n = 1..=max_n) times the brevity penalty.
pub fn corpus_bleu(
    hyps: &[Vec<usize>],
    refs: &[Vec<usize>],
    max_n: usize,
    smoothing: Smoothing,
) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "hypothesis count {} != reference count {}",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n must be >= 1"));
    }
    if refs.iter().all(|r| r.is_empty()) {
        return Err(Error::invalid("all references are empty"));
    }
    let mut correct = vec![0u64; max_n];
    let mut total = vec![0u64; max_n];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, rf) in hyps.iter().zip(refs) {
        hyp_len += hyp.len() as u64;
        ref_len += rf.len() as u64;
        for n in 1..=max_n {
            let hc = ngram_counts(hyp, n);
            let rc = ngram_counts(rf, n);
            for (gram, &count) in &hc {
                total[n - 1] += count;
                if let Some(&r) = rc.get(gram) {
                    correct[n - 1] += count.min(r);
                }
            }
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_prec_sum = 0.0;
    let mut zero_streak = 0u32;
    for n in 0..max_n {
        let p = if correct[n] > 0 {
            correct[n] as f64 / total[n] as f64
        } else {
            match smoothing {
                Smoothing::None => return Ok(0.0),
                Smoothing::Exp => {
                    zero_streak += 1;
                    1.0 / (f64::powi(2.0, zero_streak as i32) * (total[n].max(1)) as f64)
                }
            }
        };
        log_prec_sum += p.ln();
    }
    let bp = if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * bp * (log_prec_sum / max_n as f64).exp())
}

/// Contiguous frequency buckets covering [0, inf): with ascending boundaries
/// `[b0, b1, ..]`, bucket 0 holds frequencies in `[0, b0)`, bucket i holds
/// `[b_{i-1}, b_i)`, and the last bucket holds `[b_last, inf)`. Bucket 0 is
/// the rarest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSpec {
    boundaries: Vec<u64>,
}

impl BucketSpec {
    pub fn new(boundaries: Vec<u64>) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(Error::invalid("bucket spec needs at least one boundary"));
        }
        if !boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid(format!(
                "boundaries must be strictly increasing, got {boundaries:?}"
            )));
        }
        Ok(BucketSpec { boundaries })
    }

    /// One bucket covering everything.
    pub fn single() -> Self {
        BucketSpec { boundaries: vec![u64::MAX] }
    }

    /// Three buckets with boundaries at the 33rd/67th percentile of token
    /// frequency mass (walking tokens from rare to frequent).
    pub fn mass_terciles(vocab: &Vocab) -> Result<Self> {
        let total: u64 = vocab.freqs().iter().sum();
        if total == 0 {
            return Err(Error::invalid("vocab has zero total frequency"));
        }
        let mut by_freq: Vec<u64> = vocab.freqs().to_vec();
        by_freq.sort_unstable();
        let mut cum = 0u64;
        let mut b = Vec::new();
        for &f in &by_freq {
            cum += f;
            if b.is_empty() && 3 * cum >= total {
                b.push(f);
            } else if b.len() == 1 && 3 * cum >= 2 * total && f > b[0] {
                b.push(f);
                break;
            }
        }
        match b.len() {
            2 => BucketSpec::new(b),
            1 => BucketSpec::new(vec![b[0], b[0] + 1]),
            _ => Err(Error::invalid("could not derive tercile boundaries")),
        }
    }

    pub fn n_buckets(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    pub fn bucket_of(&self, freq: u64) -> usize {
        self.boundaries.partition_point(|&b| b <= freq)
    }
}

/// Match counts and derived scores for one group of tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct GroupCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl GroupCounts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Gold occurrences of this group's tokens.
    pub fn gold(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Predicted occurrences of this group's tokens.
    pub fn predicted(&self) -> u64 {
        self.tp + self.fp
    }

    fn add(&mut self, other: &GroupCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Position-wise token F1 aggregated by frequency bucket.
#[derive(Debug, Clone)]
pub struct F1Report {
    pub spec: BucketSpec,
    /// Indexed by bucket (0 = rarest).
    pub buckets: Vec<GroupCounts>,
    /// Tokens outside the vocabulary (never dropped silently).
    pub oov: GroupCounts,
    /// Vocabulary types per bucket.
    pub vocab_types: Vec<usize>,
}

impl F1Report {
    /// Counts pooled over every bucket including OOV.
    pub fn micro(&self) -> GroupCounts {
        let mut total = GroupCounts::default();
        for b in &self.buckets {
            total.add(b);
        }
        total.add(&self.oov);
        total
    }
}

/// Generic position-wise matching; groups are whatever `group_of` returns.
fn grouped_counts<G: Ord + Copy>(
    hyps: &[Vec<usize>],
    refs: &[Vec<usize>],
    mut group_of: impl FnMut(usize) -> G,
) -> Result<BTreeMap<G, GroupCounts>> {
    if hyps.len() != refs.len() {
        return Err(Error::invalid(format!(
            "hypothesis count {} != reference count {}",
            hyps.len(),
            refs.len()
        )));
    }
    let mut map: BTreeMap<G, GroupCounts> = BTreeMap::new();
    for (hyp, rf) in hyps.iter().zip(refs) {
        for i in 0..hyp.len().max(rf.len()) {
            match (hyp.get(i), rf.get(i)) {
                (Some(&h), Some(&r)) if h == r => map.entry(group_of(h)).or_default().tp += 1,
                (Some(&h), Some(&r)) => {
                    map.entry(group_of(h)).or_default().fp += 1;
                    map.entry(group_of(r)).or_default().fn_ += 1;
                }
                (Some(&h), None) => map.entry(group_of(h)).or_default().fp += 1,
                (None, Some(&r)) => map.entry(group_of(r)).or_default().fn_ += 1,
                (None, None) => unreachable!(),
            }
        }
    }
    Ok(map)
}

/// Position-wise token F1 by training-frequency bucket. Tokens outside the
/// vocabulary land in the report's OOV group.
pub fn token_f1_by_bucket(
    hyps: &[Vec<usize>],
    refs: &[Vec<usize>],
    vocab: &Vocab,
    spec: &BucketSpec,
) -> Result<F1Report> {
    // group: Some(bucket) for in-vocab tokens, None for OOV
    let groups = grouped_counts(hyps, refs, |t| {
        if t < vocab.len() {
            Some(spec.bucket_of(vocab.freq(t)))
        } else {
            None
        }
    })?;
    let mut buckets = vec![GroupCounts::default(); spec.n_buckets()];
    let mut oov = GroupCounts::default();
    for (g, counts) in groups {
        match g {
            Some(b) => buckets[b] = counts,
            None => oov = counts,
        }
    }
    let mut vocab_types = vec![0usize; spec.n_buckets()];
    for i in 0..vocab.len() {
        vocab_types[spec.bucket_of(vocab.freq(i))] += 1;
    }
    Ok(F1Report { spec: spec.clone(), buckets, oov, vocab_types })
}

/// Position-wise token F1 aggregated by an arbitrary total class function.
pub fn class_f1<C: Ord + Copy>(
    hyps: &[Vec<usize>],
    refs: &[Vec<usize>],
    class_of: impl FnMut(usize) -> C,
) -> Result<BTreeMap<C, GroupCounts>> {
    grouped_counts(hyps, refs, class_of)
}

//! Synthetic sequence tasks: copy, reverse, and a Zipf-distributed lexicon
//! task whose long frequency tail supplies the rare tokens that the
//! frequency-bucketed evaluation needs.
//!
//! Conventions: token 0 is the end-of-sequence token `</s>`; real tokens are
//! `1..vocab_size`. Sequences are stored without the end-of-sequence token.
//! For the lexicon task, target ids are relabeled so that id order equals
//! descending empirical frequency (the clumped generator anchors tail
//! indices, so index order must mean frequency order).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::Vocab;
use crate::error::{Error, Result};

pub const EOS: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Copy,
    Reverse,
    Lexicon,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy" => Ok(TaskKind::Copy),
            "reverse" => Ok(TaskKind::Reverse),
            "lexicon" => Ok(TaskKind::Lexicon),
            other => Err(Error::invalid(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyTaskSpec {
    pub kind: TaskKind,
    /// Total vocabulary size including the end-of-sequence token.
    pub vocab_size: usize,
    /// Zipf exponent for the lexicon task's source distribution.
    pub zipf_s: f64,
    /// Inclusive sequence length range.
    pub len_range: (usize, usize),
    pub pairs: usize,
    pub seed: u64,
}

impl Default for ToyTaskSpec {
    fn default() -> Self {
        ToyTaskSpec {
            kind: TaskKind::Copy,
            vocab_size: 200,
            zipf_s: 1.2,
            len_range: (1, 5),
            pairs: 2000,
            seed: 0,
        }
    }
}

/// A generated parallel corpus with its target-side vocabulary.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub vocab: Vocab,
    pub eos: usize,
    /// Fixed source -> target bijection for the lexicon task (identity for
    /// copy/reverse); `mapping[src_id] = tgt_id` over real tokens.
    pub mapping: Vec<usize>,
}

impl Dataset {
    /// Deterministic train/held-out split: the last `ceil(frac * n)` pairs.
    pub fn split(&self, holdout_fraction: f64) -> (&[(Vec<usize>, Vec<usize>)], &[(Vec<usize>, Vec<usize>)]) {
        let n = self.pairs.len();
        let holdout = ((holdout_fraction * n as f64).ceil() as usize).min(n);
        self.pairs.split_at(n - holdout)
    }
}

/// Zipf(s) sampler over ids `1..n+1` (id k drawn with weight 1/k^s).
struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    fn new(n: usize, s: f64) -> Self {
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).powf(-s);
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        ZipfSampler { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u) + 1
    }

    fn prob(&self, id: usize) -> f64 {
        let i = id - 1;
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }
}

/// Sanity check that the drawn source tokens follow the configured Zipf law:
/// chi-square over tokens with expected count >= 5 against a generous
/// (~10 sigma) bound. Fails only on a broken sampler.
fn zipf_chi_square_check(counts: &[u64], sampler: &ZipfSampler, total: u64) -> Result<()> {
    let mut chi2 = 0.0;
    let mut df = 0usize;
    for (i, &obs) in counts.iter().enumerate() {
        let exp = sampler.prob(i + 1) * total as f64;
        if exp >= 5.0 {
            chi2 += (obs as f64 - exp).powi(2) / exp;
            df += 1;
        }
    }
    if df == 0 {
        return Ok(());
    }
    let bound = df as f64 + 10.0 * (2.0 * df as f64).sqrt();
    if chi2 > bound {
        return Err(Error::GenerationFailed(format!(
            "lexicon source counts fail the Zipf chi-square check: chi2 {chi2:.1} > {bound:.1} (df {df})"
        )));
    }
    Ok(())
}

/// Generate a dataset per the spec; deterministic given the seed.
pub fn gen_task(spec: &ToyTaskSpec) -> Result<Dataset> {
    if spec.vocab_size < 2 {
        return Err(Error::invalid("vocab_size must be >= 2 (end-of-sequence plus one token)"));
    }
    let (lo, hi) = spec.len_range;
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("bad length range {lo}..={hi}")));
    }
    if spec.pairs == 0 {
        return Err(Error::invalid("pair count must be positive"));
    }
    if matches!(spec.kind, TaskKind::Lexicon) && spec.zipf_s <= 0.0 {
        return Err(Error::invalid(format!("zipf exponent {} must be > 0", spec.zipf_s)));
    }
    let n_real = spec.vocab_size - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut pairs: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(spec.pairs);
    let mut mapping: Vec<usize> = (0..spec.vocab_size).collect();

    match spec.kind {
        TaskKind::Copy | TaskKind::Reverse => {
            for _ in 0..spec.pairs {
                let len = rng.random_range(lo..=hi);
                let src: Vec<usize> = (0..len).map(|_| rng.random_range(1..spec.vocab_size)).collect();
                let tgt = match spec.kind {
                    TaskKind::Copy => src.clone(),
                    TaskKind::Reverse => src.iter().rev().copied().collect(),
                    TaskKind::Lexicon => unreachable!(),
                };
                pairs.push((src, tgt));
            }
        }
        TaskKind::Lexicon => {
            let sampler = ZipfSampler::new(n_real, spec.zipf_s);
            // random bijection over real tokens
            let mut perm: Vec<usize> = (1..spec.vocab_size).collect();
            for i in (1..perm.len()).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let mut src_counts = vec![0u64; n_real];
            for _ in 0..spec.pairs {
                let len = rng.random_range(lo..=hi);
                let src: Vec<usize> = (0..len)
                    .map(|_| {
                        let s = sampler.sample(&mut rng);
                        src_counts[s - 1] += 1;
                        s
                    })
                    .collect();
                let tgt: Vec<usize> = src.iter().map(|&s| perm[s - 1]).collect();
                pairs.push((src, tgt));
            }
            let total: u64 = src_counts.iter().sum();
            zipf_chi_square_check(&src_counts, &sampler, total)?;
            // relabel target ids to descending empirical frequency
            let mut tgt_counts = vec![0u64; spec.vocab_size];
            for (_, tgt) in &pairs {
                for &t in tgt {
                    tgt_counts[t] += 1;
                }
            }
            let mut by_freq: Vec<usize> = (1..spec.vocab_size).collect();
            by_freq.sort_by(|&a, &b| tgt_counts[b].cmp(&tgt_counts[a]).then(a.cmp(&b)));
            let mut relabel = vec![0usize; spec.vocab_size];
            for (new_minus_one, &old) in by_freq.iter().enumerate() {
                relabel[old] = new_minus_one + 1;
            }
            for (_, tgt) in pairs.iter_mut() {
                for t in tgt.iter_mut() {
                    *t = relabel[*t];
                }
            }
            for s in 1..spec.vocab_size {
                mapping[s] = relabel[perm[s - 1]];
            }
        }
    }

    // empirical target-side frequencies; the end-of-sequence token is
    // predicted once per pair
    let mut freq = vec![0u64; spec.vocab_size];
    freq[EOS] = spec.pairs as u64;
    for (_, tgt) in &pairs {
        for &t in tgt {
            freq[t] += 1;
        }
    }
    let tokens: Vec<String> = (0..spec.vocab_size)
        .map(|i| if i == EOS { "</s>".to_string() } else { format!("t{i}") })
        .collect();
    let vocab = Vocab::new(tokens, freq)?;
    Ok(Dataset { pairs, vocab, eos: EOS, mapping })
}

//! Mechanism experiments: the trainable-target collapse and the
//! frequency-bucketed comparison of target-table geometries.

use rayon::prelude::*;

use super::{
    decode_corpus, train, Dataset, LossKind, ModelConfig, ToySeq2Seq, ToyTaskSpec, TrainConfig,
    TrainReport,
};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{corpus_bleu, token_f1_by_bucket, BucketSpec, F1Report, Smoothing};
use crate::vecmath::{dot_f64, norm_f64};

/// Mean cosine over all unordered row pairs (directions, norms ignored).
pub fn mean_pairwise_cosine(rows: &[f64], d: usize) -> f64 {
    let n = rows.len() / d;
    if n < 2 {
        return 1.0;
    }
    let norms: Vec<f64> = (0..n).map(|i| norm_f64(&rows[i * d..(i + 1) * d])).collect();
    let mut total = 0.0;
    for i in 0..n {
        let ri = &rows[i * d..(i + 1) * d];
        for j in i + 1..n {
            total += dot_f64(ri, &rows[j * d..(j + 1) * d]) / (norms[i] * norms[j]);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

#[derive(Debug, Clone)]
pub struct CollapseReport {
    /// Mean pairwise cosine among target rows, one entry per epoch plus the
    /// initial value at index 0.
    pub mean_pairwise_cos: Vec<f64>,
    /// Whether the effective target rows stayed bit-identical to the table.
    pub targets_unchanged: bool,
    pub report: TrainReport,
}

/// Train with the given config (cosine loss required) and record the mean
/// pairwise target cosine per epoch. With `targets_trainable` the trajectory
/// drifts toward 1; with frozen targets it is constant and the table stays
/// bit-identical.
pub fn collapse_experiment(
    dataset: &Dataset,
    table: &EmbeddingTable,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<CollapseReport> {
    if cfg.loss != LossKind::Cosine {
        return Err(Error::invalid("collapse_experiment requires the cosine loss"));
    }
    let mut model = ToySeq2Seq::new(model_cfg, table, dataset.eos, cfg.seed)?;
    let initial_rows: Vec<f64> = model.target_rows().to_vec();
    let d = table.dim();
    let mut trajectory = vec![mean_pairwise_cosine(model.target_rows(), d)];
    let mut all_epochs = Vec::new();
    // drive training one epoch at a time to sample the trajectory
    for epoch in 0..cfg.epochs {
        let one = TrainConfig { epochs: 1, eval_every: 0, seed: cfg.seed + epoch as u64, ..cfg.clone() };
        let rep = train(&mut model, dataset, &one)?;
        all_epochs.extend(rep.epochs.into_iter().map(|mut m| {
            m.epoch = epoch;
            m
        }));
        trajectory.push(mean_pairwise_cosine(model.target_rows(), d));
    }
    let targets_unchanged = model.target_rows() == &initial_rows[..];
    Ok(CollapseReport {
        mean_pairwise_cos: trajectory,
        targets_unchanged,
        report: TrainReport { epochs: all_epochs, final_accuracy: 0.0 },
    })
}

#[derive(Debug, Clone)]
pub struct FreqOutcome {
    pub label: String,
    pub bleu: f64,
    /// Per-bucket F1, bucket 0 = rarest.
    pub bucket_f1: Vec<f64>,
    pub report: F1Report,
    pub final_accuracy: f64,
}

impl FreqOutcome {
    pub fn rare_f1(&self) -> f64 {
        self.bucket_f1[0]
    }

    pub fn frequent_f1(&self) -> f64 {
        *self.bucket_f1.last().unwrap()
    }
}

/// Train one model per target table with identical seeds and config, then
/// score held-out greedy decodes with frequency-bucketed token F1.
/// Independent runs execute in parallel; each run is single-threaded and
/// seeded, so results do not depend on scheduling.
pub fn frequency_experiment(
    dataset: &Dataset,
    tables: &[(String, EmbeddingTable)],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    spec: &BucketSpec,
) -> Result<Vec<FreqOutcome>> {
    if tables.is_empty() {
        return Err(Error::invalid("no tables given"));
    }
    let v = dataset.vocab.len();
    let d = tables[0].1.dim();
    for (label, t) in tables {
        if t.len() != v || t.dim() != d {
            return Err(Error::invalid(format!(
                "table `{label}` is {}x{}, expected {v}x{d}",
                t.len(),
                t.dim()
            )));
        }
    }
    let (_, heldout) = dataset.split(cfg.holdout_fraction);
    let srcs: Vec<Vec<usize>> = heldout.iter().map(|(s, _)| s.clone()).collect();
    let refs: Vec<Vec<usize>> = heldout.iter().map(|(_, t)| t.clone()).collect();
    tables
        .par_iter()
        .map(|(label, table)| {
            let mut model = ToySeq2Seq::new(model_cfg, table, dataset.eos, cfg.seed)?;
            let run_cfg = TrainConfig { parallel: false, ..cfg.clone() };
            let report = train(&mut model, dataset, &run_cfg)?;
            let hyps = decode_corpus(&model, &srcs, cfg.eval_max_extra)?;
            let f1 = token_f1_by_bucket(&hyps, &refs, &dataset.vocab, spec)?;
            let bleu = corpus_bleu(&hyps, &refs, 4, Smoothing::Exp)?;
            Ok(FreqOutcome {
                label: label.clone(),
                bleu,
                bucket_f1: f1.buckets.iter().map(|b| b.f1()).collect(),
                report: f1,
                final_accuracy: report.final_accuracy,
            })
        })
        .collect()
}

/// Frequency boundaries taken at the given rank fractions (0 = most
/// frequent); e.g. `[0.5, 0.1]` puts the rare boundary at the median-rank
/// token's frequency and the frequent boundary at the rank-0.1 token's.
/// Boundaries that collide (tied frequencies) are deduplicated.
pub fn bucket_spec_by_rank(vocab: &crate::embed::Vocab, rank_fracs: &[f64]) -> Result<BucketSpec> {
    let n = vocab.len();
    let mut bounds: Vec<u64> = rank_fracs
        .iter()
        .map(|&f| {
            let r = ((f * n as f64) as usize).min(n - 1);
            vocab.freq(vocab.token_at_rank(r))
        })
        .collect();
    bounds.sort_unstable();
    bounds.dedup();
    bounds.retain(|&b| b > 0);
    BucketSpec::new(bounds)
}

/// Sanity task spec used by experiment tests: a small lexicon problem.
pub fn small_lexicon_spec(vocab_size: usize, pairs: usize, seed: u64) -> ToyTaskSpec {
    ToyTaskSpec {
        kind: super::TaskKind::Lexicon,
        vocab_size,
        zipf_s: 1.2,
        len_range: (2, 5),
        pairs,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::super::gen_task;
    use super::*;
    use crate::embed::{gen_clumped, gen_uniform};

    #[test]
    fn mean_pairwise_cosine_anchor_cases() {
        // two identical directions -> 1; orthogonal pair -> 0
        let same = vec![1.0, 0.0, 2.0, 0.0];
        assert!((mean_pairwise_cosine(&same, 2) - 1.0).abs() < 1e-12);
        let orth = vec![1.0, 0.0, 0.0, 3.0];
        assert!(mean_pairwise_cosine(&orth, 2).abs() < 1e-12);
    }

    #[test]
    fn frozen_targets_constant_trajectory() {
        let ds = gen_task(&small_lexicon_spec(20, 60, 1)).unwrap();
        let table = gen_uniform(20, 8, 2).unwrap();
        let cfg = TrainConfig { epochs: 3, eval_every: 0, ..Default::default() };
        let rep = collapse_experiment(
            &ds,
            &table,
            &ModelConfig { hidden: 8, max_src_len: 8 },
            &cfg,
        )
        .unwrap();
        assert!(rep.targets_unchanged);
        let first = rep.mean_pairwise_cos[0];
        assert!(rep.mean_pairwise_cos.iter().all(|&c| c == first));
    }

    #[test]
    fn two_token_vocab_cosine_nondecreasing_when_trainable() {
        // minimal collapse instance: |V| = 3 (eos + 2 tokens); smoothed over
        // 5-epoch windows the pairwise cosine must not decrease
        let ds = gen_task(&ToyTaskSpec {
            kind: super::super::TaskKind::Lexicon,
            vocab_size: 3,
            zipf_s: 1.0,
            len_range: (1, 3),
            pairs: 40,
            seed: 5,
        })
        .unwrap();
        let table = gen_uniform(3, 8, 6).unwrap();
        let cfg = TrainConfig {
            epochs: 40,
            lr: 0.3,
            targets_trainable: true,
            eval_every: 0,
            holdout_fraction: 0.0,
            ..Default::default()
        };
        let rep = collapse_experiment(
            &ds,
            &table,
            &ModelConfig { hidden: 8, max_src_len: 4 },
            &cfg,
        )
        .unwrap();
        assert!(!rep.targets_unchanged);
        let smooth: Vec<f64> = rep
            .mean_pairwise_cos
            .windows(5)
            .map(|w| w.iter().sum::<f64>() / 5.0)
            .collect();
        for w in smooth.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-3,
                "smoothed pairwise cosine decreased: {:?}",
                smooth
            );
        }
        assert!(
            smooth.last().unwrap() > smooth.first().unwrap(),
            "no upward drift: {smooth:?}"
        );
    }

    #[test]
    fn frequency_experiment_validates_table_shapes() {
        let ds = gen_task(&small_lexicon_spec(20, 50, 2)).unwrap();
        let bad = gen_uniform(10, 8, 1).unwrap();
        let spec = BucketSpec::single();
        let cfg = TrainConfig::default();
        let err = frequency_experiment(
            &ds,
            &[("bad".to_string(), bad)],
            &ModelConfig { hidden: 8, max_src_len: 8 },
            &cfg,
            &spec,
        );
        assert!(err.is_err());
    }

    #[test]
    fn bucket_spec_by_rank_on_zipf_vocab() {
        let ds = gen_task(&small_lexicon_spec(200, 2000, 3)).unwrap();
        let spec = bucket_spec_by_rank(&ds.vocab, &[0.5, 0.1]).unwrap();
        assert!(spec.n_buckets() >= 2);
        // the clumped rare half (ids >= 100 by relabeling) must mostly land
        // in bucket 0
        let rare_in_bucket0 = (100..200)
            .filter(|&i| spec.bucket_of(ds.vocab.freq(i)) == 0)
            .count();
        assert!(rare_in_bucket0 > 50, "only {rare_in_bucket0} of the rare half in bucket 0");
    }

    #[test]
    fn clumped_table_aligns_with_relabeled_vocab() {
        // after lexicon relabeling, token id order == frequency order, so
        // gen_clumped's tail indices are exactly the rare tokens
        let ds = gen_task(&small_lexicon_spec(100, 1500, 4)).unwrap();
        let t = gen_clumped(100, 16, 9, 0.5, 0.995).unwrap();
        assert_eq!(t.len(), ds.vocab.len());
        for id in 51..100 {
            assert!(ds.vocab.rank_of(id) >= 40, "id {id} rank {}", ds.vocab.rank_of(id));
        }
    }
}

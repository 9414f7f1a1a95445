//! A desk-scale continuous-output encoder-decoder trained by manually
//! derived gradients of the cosine objective (or the discrete log-softmax
//! baseline) against a frozen unit-norm target table.
//!
//! Architecture: the encoder mean-pools source embeddings with learned
//! per-position gains; the decoder is a single recurrent cell
//! `state_i = tanh(W [state_{i-1}; tgt_emb_{i-1}; enc])` followed by a linear
//! map to R^d producing the hidden state compared against the target table.

mod experiments;
mod task;

pub use experiments::{
    bucket_spec_by_rank, collapse_experiment, frequency_experiment, mean_pairwise_cosine,
    small_lexicon_spec, CollapseReport, FreqOutcome,
};
pub use task::{gen_task, Dataset, TaskKind, ToyTaskSpec, EOS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::{Read, Write};

use crate::decoder::{build_index, greedy_decode, StepModel};
use crate::embed::{EmbeddingTable, TableKind};
use crate::error::{Error, Result};
use crate::vecmath::{axpy, dot_f64, norm_f64};

/// Pairs per accumulation chunk in the parallel path; fixed so the reduction
/// order (and thus the result) is independent of thread count.
const PARALLEL_CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Cosine,
    Discrete,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(LossKind::Cosine),
            "discrete" => Ok(LossKind::Discrete),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub hidden: usize,
    pub max_src_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: 128, max_src_len: 32 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    /// When set, the target table becomes a trainable parameter (cosine loss
    /// only); otherwise it stays bit-identical through training.
    pub targets_trainable: bool,
    pub seed: u64,
    /// Global-norm gradient clip.
    pub grad_clip: Option<f64>,
    pub holdout_fraction: f64,
    /// Evaluate held-out accuracy every this many epochs (0 = final only).
    pub eval_every: usize,
    /// Length slack for held-out greedy decoding.
    pub eval_max_extra: usize,
    /// Chunked parallel gradient accumulation with a fixed reduction order.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.5,
            epochs: 50,
            batch_size: 32,
            loss: LossKind::Cosine,
            targets_trainable: false,
            seed: 0,
            grad_clip: Some(1.0),
            holdout_fraction: 0.1,
            eval_every: 1,
            eval_max_extra: 8,
            parallel: false,
        }
    }
}

pub struct ToySeq2Seq {
    d: usize,
    hidden: usize,
    max_src_len: usize,
    vocab_size: usize,
    eos: usize,
    /// The table the model was built from; never mutated.
    table: EmbeddingTable,
    // parameters
    src_emb: Vec<f64>,  // vocab_size x d
    pos_gain: Vec<f64>, // max_src_len
    w_cell: Vec<f64>,   // hidden x (hidden + 2d)
    out_map: Vec<f64>,  // d x hidden
    tgt_emb: Vec<f64>,  // vocab_size x d, frozen unless targets_trainable
}

/// Per-pair forward cache for backpropagation.
struct ForwardCache {
    /// input concat, post-tanh state and output per step
    us: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
}

/// Gradients mirroring the parameter set.
pub struct Grads {
    src_emb: Vec<f64>,
    pos_gain: Vec<f64>,
    w_cell: Vec<f64>,
    out_map: Vec<f64>,
    tgt_emb: Option<Vec<f64>>,
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for r in 0..rows {
        out[r] = dot_f64(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out += W^T dy`
fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, dy: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        axpy(out, dy[r], &w[r * cols..(r + 1) * cols]);
    }
}

/// `gw += dy (x)outer(x)`
fn outer_acc(gw: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    for r in 0..rows {
        axpy(&mut gw[r * cols..(r + 1) * cols], dy[r], x);
    }
}

impl ToySeq2Seq {
    pub fn new(cfg: &ModelConfig, table: &EmbeddingTable, eos: usize, seed: u64) -> Result<Self> {
        if cfg.hidden == 0 || cfg.max_src_len == 0 {
            return Err(Error::invalid("hidden and max_src_len must be positive"));
        }
        if eos >= table.len() {
            return Err(Error::invalid(format!(
                "eos {eos} out of range for |V| = {}",
                table.len()
            )));
        }
        let d = table.dim();
        let v = table.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = |n: usize, scale: f64| -> Vec<f64> {
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect()
        };
        // unit-norm source embedding rows
        let mut src_emb = gauss(v * d, 1.0);
        for row in src_emb.chunks_exact_mut(d) {
            let n = norm_f64(row);
            row.iter_mut().for_each(|x| *x /= n);
        }
        let w_cell = gauss(cfg.hidden * (cfg.hidden + 2 * d), 1.0 / ((cfg.hidden + 2 * d) as f64).sqrt());
        let out_map = gauss(d * cfg.hidden, 1.0 / (cfg.hidden as f64).sqrt());
        let tgt_emb: Vec<f64> = table.rows_flat().iter().map(|&x| x as f64).collect();
        // gentle descending profile so early positions start dominant in the
        // pooled encoding; training reshapes it freely
        let pos_gain = (0..cfg.max_src_len).map(|j| 0.85f64.powi(j as i32)).collect();
        Ok(ToySeq2Seq {
            d,
            hidden: cfg.hidden,
            max_src_len: cfg.max_src_len,
            vocab_size: v,
            eos,
            table: table.clone(),
            src_emb,
            pos_gain,
            w_cell,
            out_map,
            tgt_emb,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn max_src_len(&self) -> usize {
        self.max_src_len
    }

    /// The table this model was initialized from (never mutated).
    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    /// Effective target rows (drifts only when targets are trainable).
    pub fn target_rows(&self) -> &[f64] {
        &self.tgt_emb
    }

    /// Number of scalar parameters, target table excluded.
    pub fn param_count(&self) -> usize {
        self.src_emb.len() + self.pos_gain.len() + self.w_cell.len() + self.out_map.len()
    }

    fn tgt_row(&self, t: usize) -> &[f64] {
        &self.tgt_emb[t * self.d..(t + 1) * self.d]
    }

    fn check_tokens(&self, seq: &[usize]) -> Result<()> {
        if let Some(&bad) = seq.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::invalid(format!(
                "token {bad} out of range for |V| = {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    fn encode(&self, src: &[usize]) -> Result<Vec<f64>> {
        if src.len() > self.max_src_len {
            return Err(Error::invalid(format!(
                "source length {} exceeds max_src_len {}",
                src.len(),
                self.max_src_len
            )));
        }
        self.check_tokens(src)?;
        let mut enc = vec![0.0; self.d];
        if src.is_empty() {
            return Ok(enc);
        }
        let inv_m = 1.0 / src.len() as f64;
        for (j, &x) in src.iter().enumerate() {
            axpy(&mut enc, self.pos_gain[j] * inv_m, &self.src_emb[x * self.d..(x + 1) * self.d]);
        }
        Ok(enc)
    }

    /// Teacher-forced forward: hidden states `h_1..h_{n+1}` where `h_i`
    /// predicts position `i` given `prefix[..i-1]` (so the last state
    /// predicts the token after the full prefix).
    pub fn forward(&self, src: &[usize], tgt_prefix: &[usize]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_cache(src, tgt_prefix)?.hs)
    }

    fn forward_cache(&self, src: &[usize], tgt_prefix: &[usize]) -> Result<ForwardCache> {
        self.check_tokens(tgt_prefix)?;
        let enc = self.encode(src)?;
        let steps = tgt_prefix.len() + 1;
        let (hd, d) = (self.hidden, self.d);
        let ucols = hd + 2 * d;
        let mut state = vec![0.0; hd];
        let mut us = Vec::with_capacity(steps);
        let mut states = Vec::with_capacity(steps);
        let mut hs = Vec::with_capacity(steps);
        for i in 0..steps {
            let mut u = vec![0.0; ucols];
            u[..hd].copy_from_slice(&state);
            if i > 0 {
                u[hd..hd + d].copy_from_slice(self.tgt_row(tgt_prefix[i - 1]));
            }
            u[hd + d..].copy_from_slice(&enc);
            let mut z = vec![0.0; hd];
            matvec(&self.w_cell, hd, ucols, &u, &mut z);
            state = z.iter().map(|&x| x.tanh()).collect();
            let mut h = vec![0.0; d];
            matvec(&self.out_map, d, hd, &state, &mut h);
            us.push(u);
            states.push(state.clone());
            hs.push(h);
        }
        Ok(ForwardCache { us, states, hs })
    }

    /// Per-step targets for a pair: the target sequence plus end-of-sequence.
    fn step_targets<'t>(&self, tgt: &'t [usize]) -> impl Iterator<Item = usize> + 't {
        tgt.iter().copied().chain(std::iter::once(self.eos))
    }

    /// Mean per-step loss of one pair (forward only).
    pub fn pair_loss(&self, src: &[usize], tgt: &[usize], loss: LossKind) -> Result<f64> {
        let cache = self.forward_cache(src, tgt)?;
        let steps = tgt.len() + 1;
        let mut total = 0.0;
        for (i, g) in self.step_targets(tgt).enumerate() {
            total += self.step_loss(&cache.hs[i], g, loss)?;
        }
        Ok(total / steps as f64)
    }

    fn step_loss(&self, h: &[f64], gold: usize, loss: LossKind) -> Result<f64> {
        match loss {
            LossKind::Cosine => {
                let e = self.tgt_row(gold);
                let hn = norm_f64(h);
                if hn <= 1e-12 {
                    return Err(Error::DegenerateHiddenState { norm: hn });
                }
                let cos = (dot_f64(e, h) / (norm_f64(e) * hn)).clamp(-1.0, 1.0);
                Ok(1.0 - cos)
            }
            LossKind::Discrete => {
                let logits: Vec<f64> = (0..self.vocab_size)
                    .map(|t| dot_f64(self.tgt_row(t), h))
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
                Ok(lse - logits[gold])
            }
        }
    }

    /// d(step loss)/dh, plus the target-row gradient contribution when
    /// targets are trainable.
    fn step_loss_backward(
        &self,
        h: &[f64],
        gold: usize,
        loss: LossKind,
        scale: f64,
        dtgt: Option<&mut Vec<f64>>,
    ) -> Result<Vec<f64>> {
        match loss {
            LossKind::Cosine => {
                let e = self.tgt_row(gold);
                let hn = norm_f64(h);
                if hn <= 1e-12 {
                    return Err(Error::DegenerateHiddenState { norm: hn });
                }
                let en = norm_f64(e);
                let cos = dot_f64(e, h) / (en * hn);
                let dh: Vec<f64> = e
                    .iter()
                    .zip(h)
                    .map(|(&ei, &hi)| -scale * (ei / en - cos * hi / hn) / hn)
                    .collect();
                if let Some(dtgt) = dtgt {
                    let row = &mut dtgt[gold * self.d..(gold + 1) * self.d];
                    for ((gi, &hi), &ei) in row.iter_mut().zip(h).zip(e) {
                        *gi += -scale * (hi / hn - cos * ei / en) / en;
                    }
                }
                Ok(dh)
            }
            LossKind::Discrete => {
                let logits: Vec<f64> = (0..self.vocab_size)
                    .map(|t| dot_f64(self.tgt_row(t), h))
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
                let z: f64 = exps.iter().sum();
                let mut dh = vec![0.0; self.d];
                for t in 0..self.vocab_size {
                    axpy(&mut dh, scale * exps[t] / z, self.tgt_row(t));
                }
                axpy(&mut dh, -scale, self.tgt_row(gold));
                Ok(dh)
            }
        }
    }

    /// Accumulate one pair's gradients (of the mean per-step loss) into
    /// `grads`; returns the pair loss.
    fn pair_backward(
        &self,
        src: &[usize],
        tgt: &[usize],
        loss: LossKind,
        grads: &mut Grads,
    ) -> Result<f64> {
        let cache = self.forward_cache(src, tgt)?;
        let steps = tgt.len() + 1;
        let scale = 1.0 / steps as f64;
        let (hd, d) = (self.hidden, self.d);
        let ucols = hd + 2 * d;

        let mut total = 0.0;
        let mut dstates: Vec<Vec<f64>> = vec![vec![0.0; hd]; steps];
        for (i, g) in self.step_targets(tgt).enumerate() {
            total += self.step_loss(&cache.hs[i], g, loss)?;
            let dh = self.step_loss_backward(&cache.hs[i], g, loss, scale, grads.tgt_emb.as_mut())?;
            outer_acc(&mut grads.out_map, d, hd, &dh, &cache.states[i]);
            matvec_t_acc(&self.out_map, d, hd, &dh, &mut dstates[i]);
        }

        let mut denc = vec![0.0; d];
        for i in (0..steps).rev() {
            let dz: Vec<f64> = dstates[i]
                .iter()
                .zip(&cache.states[i])
                .map(|(&ds, &s)| ds * (1.0 - s * s))
                .collect();
            outer_acc(&mut grads.w_cell, hd, ucols, &dz, &cache.us[i]);
            let mut du = vec![0.0; ucols];
            matvec_t_acc(&self.w_cell, hd, ucols, &dz, &mut du);
            if i > 0 {
                axpy(&mut dstates[i - 1], 1.0, &du[..hd]);
                if let Some(dtgt) = grads.tgt_emb.as_mut() {
                    let prev = tgt[i - 1];
                    axpy(&mut dtgt[prev * d..(prev + 1) * d], 1.0, &du[hd..hd + d]);
                }
            }
            axpy(&mut denc, 1.0, &du[hd + d..]);
        }

        if !src.is_empty() {
            let inv_m = 1.0 / src.len() as f64;
            for (j, &x) in src.iter().enumerate() {
                let row = &self.src_emb[x * d..(x + 1) * d];
                grads.pos_gain[j] += inv_m * dot_f64(&denc, row);
                axpy(
                    &mut grads.src_emb[x * d..(x + 1) * d],
                    self.pos_gain[j] * inv_m,
                    &denc,
                );
            }
        }
        Ok(total * scale)
    }

    fn zero_grads(&self, trainable_targets: bool) -> Grads {
        Grads {
            src_emb: vec![0.0; self.src_emb.len()],
            pos_gain: vec![0.0; self.pos_gain.len()],
            w_cell: vec![0.0; self.w_cell.len()],
            out_map: vec![0.0; self.out_map.len()],
            tgt_emb: trainable_targets.then(|| vec![0.0; self.tgt_emb.len()]),
        }
    }

    fn param_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        vec![&mut self.src_emb, &mut self.pos_gain, &mut self.w_cell, &mut self.out_map]
    }
}

impl Grads {
    fn tensors(&self) -> Vec<&Vec<f64>> {
        let mut v = vec![&self.src_emb, &self.pos_gain, &self.w_cell, &self.out_map];
        if let Some(t) = &self.tgt_emb {
            v.push(t);
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v = vec![
            &mut self.src_emb,
            &mut self.pos_gain,
            &mut self.w_cell,
            &mut self.out_map,
        ];
        if let Some(t) = &mut self.tgt_emb {
            v.push(t);
        }
        v
    }

    fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(a, 1.0, b);
        }
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| dot_f64(t, t))
            .sum::<f64>()
            .sqrt()
    }
}

fn validate_config(cfg: &TrainConfig) -> Result<()> {
    if cfg.targets_trainable && cfg.loss != LossKind::Cosine {
        return Err(Error::invalid(
            "targets_trainable requires the cosine loss",
        ));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::invalid("holdout_fraction must be in [0, 1)"));
    }
    Ok(())
}

/// Mean gradients over a batch (mean of per-pair mean-step losses).
pub fn batch_grads(
    model: &ToySeq2Seq,
    batch: &[(Vec<usize>, Vec<usize>)],
    cfg: &TrainConfig,
) -> Result<(Grads, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads;
    let mut loss_sum = 0.0;
    if cfg.parallel {
        let chunks: Vec<(Grads, f64)> = batch
            .par_chunks(PARALLEL_CHUNK)
            .map(|chunk| {
                let mut g = model.zero_grads(cfg.targets_trainable);
                let mut l = 0.0;
                for (src, tgt) in chunk {
                    l += model.pair_backward(src, tgt, cfg.loss, &mut g)?;
                }
                Ok((g, l))
            })
            .collect::<Result<Vec<_>>>()?;
        grads = model.zero_grads(cfg.targets_trainable);
        for (g, l) in chunks {
            grads.add_assign(&g);
            loss_sum += l;
        }
    } else {
        grads = model.zero_grads(cfg.targets_trainable);
        for (src, tgt) in batch {
            loss_sum += model.pair_backward(src, tgt, cfg.loss, &mut grads)?;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((grads, loss_sum * inv))
}

/// One SGD step on a batch: clip the global gradient norm, update parameters,
/// return the mean loss. Frozen targets are never touched.
pub fn train_step(
    model: &mut ToySeq2Seq,
    batch: &[(Vec<usize>, Vec<usize>)],
    cfg: &TrainConfig,
) -> Result<f64> {
    validate_config(cfg)?;
    let (mut grads, loss) = batch_grads(model, batch, cfg)?;
    if loss.is_nan() {
        return Err(Error::NanLoss { epoch: 0, batch: 0 });
    }
    if let Some(clip) = cfg.grad_clip {
        let norm = grads.global_norm();
        if norm > clip {
            grads.scale(clip / norm);
        }
    }
    let lr = cfg.lr;
    for (param, grad) in model.param_tensors_mut().into_iter().zip(grads.tensors()[..4].iter()) {
        for (p, g) in param.iter_mut().zip(grad.iter()) {
            *p -= lr * g;
        }
    }
    if let Some(dtgt) = &grads.tgt_emb {
        for (p, g) in model.tgt_emb.iter_mut().zip(dtgt) {
            *p -= lr * g;
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heldout_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub final_accuracy: f64,
}

/// Position-wise token accuracy of greedy decodes against references.
pub fn token_accuracy(hyps: &[Vec<usize>], refs: &[Vec<usize>]) -> f64 {
    let mut correct = 0usize;
    let mut denom = 0usize;
    for (h, r) in hyps.iter().zip(refs) {
        denom += h.len().max(r.len());
        correct += h.iter().zip(r).filter(|(a, b)| a == b).count();
    }
    if denom == 0 {
        0.0
    } else {
        correct as f64 / denom as f64
    }
}

/// Greedy-decode a set of sources against the model's own table.
pub fn decode_corpus(
    model: &ToySeq2Seq,
    srcs: &[Vec<usize>],
    max_extra: usize,
) -> Result<Vec<Vec<usize>>> {
    let index = build_index(model.table());
    srcs.iter()
        .map(|src| greedy_decode(model, &index, src, max_extra))
        .collect()
}

/// Full training loop over a dataset with a deterministic train/held-out
/// split, per-epoch shuffling, divergence detection, and held-out metrics.
pub fn train(model: &mut ToySeq2Seq, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    validate_config(cfg)?;
    let (train_pairs, heldout) = dataset.split(cfg.holdout_fraction);
    if train_pairs.is_empty() {
        return Err(Error::invalid("no training pairs after split"));
    }
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut initial_loss = f64::NAN;
    let mut high_loss_streak = 0usize;
    let mut final_accuracy = 0.0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_pairs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(Vec<usize>, Vec<usize>)> =
                chunk.iter().map(|&i| train_pairs[i].clone()).collect();
            let loss = train_step(model, &batch, cfg).map_err(|e| match e {
                Error::NanLoss { .. } => Error::NanLoss { epoch, batch: batch_idx },
                other => other,
            })?;
            loss_sum += loss;
            batches += 1;
        }
        let train_loss = loss_sum / batches as f64;
        if epoch == 0 {
            initial_loss = train_loss;
        }
        if train_loss > 10.0 * initial_loss {
            high_loss_streak += 1;
            if high_loss_streak >= 3 {
                return Err(Error::TrainingDiverged {
                    epoch,
                    loss: train_loss,
                    initial: initial_loss,
                });
            }
        } else {
            high_loss_streak = 0;
        }
        let evaluate = !heldout.is_empty()
            && (epoch + 1 == cfg.epochs || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0));
        let (heldout_loss, heldout_accuracy) = if evaluate {
            let mut hl = 0.0;
            for (src, tgt) in heldout {
                hl += model.pair_loss(src, tgt, cfg.loss)?;
            }
            let srcs: Vec<Vec<usize>> = heldout.iter().map(|(s, _)| s.clone()).collect();
            let refs: Vec<Vec<usize>> = heldout.iter().map(|(_, t)| t.clone()).collect();
            let hyps = decode_corpus(model, &srcs, cfg.eval_max_extra)?;
            let acc = token_accuracy(&hyps, &refs);
            final_accuracy = acc;
            (Some(hl / heldout.len() as f64), Some(acc))
        } else {
            (None, None)
        };
        metrics.push(EpochMetrics { epoch, train_loss, heldout_loss, heldout_accuracy });
    }
    Ok(TrainReport { epochs: metrics, final_accuracy })
}

impl StepModel for ToySeq2Seq {
    fn step(&self, src: &[usize], prefix: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward_cache(src, prefix)?.hs.pop().unwrap())
    }

    fn eos(&self) -> usize {
        self.eos
    }
}

const CKPT_MAGIC: &[u8; 4] = b"CTOY";
const CKPT_VERSION: u32 = 1;

/// Serialize the model: magic `CTOY`, u32 version, u32 dims
/// (d, hidden, max_src_len, vocab_size, eos), f32 LE table rows, then the
/// f64 LE parameter tensors in declaration order.
pub fn save_model(model: &ToySeq2Seq, path: impl AsRef<std::path::Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    for dim in [model.d, model.hidden, model.max_src_len, model.vocab_size, model.eos] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    for x in model.table.rows_flat() {
        w.write_all(&x.to_le_bytes())?;
    }
    for tensor in [&model.src_emb, &model.pos_gain, &model.w_cell, &model.out_map, &model.tgt_emb] {
        for x in tensor.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<ToySeq2Seq> {
    let path = path.as_ref();
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let loc = |what: &str| format!("{}:{}", path.display(), what);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::parse(loc("magic"), "truncated".to_string()))?;
    if &magic != CKPT_MAGIC {
        return Err(Error::parse(loc("magic"), format!("bad magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut dyn Read, what: &str| -> Result<u32> {
        r.read_exact(&mut u32buf)
            .map_err(|_| Error::parse(format!("{}:{}", path.display(), what), "truncated".to_string()))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut r, "version")?;
    if version != CKPT_VERSION {
        return Err(Error::parse(loc("version"), format!("unsupported version {version}")));
    }
    let d = read_u32(&mut r, "d")? as usize;
    let hidden = read_u32(&mut r, "hidden")? as usize;
    let max_src_len = read_u32(&mut r, "max_src_len")? as usize;
    let vocab_size = read_u32(&mut r, "vocab_size")? as usize;
    let eos = read_u32(&mut r, "eos")? as usize;
    let mut f32buf = [0u8; 4];
    let mut table_rows = Vec::with_capacity(vocab_size * d);
    for _ in 0..vocab_size * d {
        r.read_exact(&mut f32buf)
            .map_err(|_| Error::parse(loc("table"), "truncated".to_string()))?;
        table_rows.push(f32::from_le_bytes(f32buf));
    }
    let table = EmbeddingTable::from_rows(d, table_rows, TableKind::Imported, None)?;
    let mut f64buf = [0u8; 8];
    let mut read_tensor = |r: &mut dyn Read, n: usize, what: &str| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut f64buf)
                .map_err(|_| Error::parse(format!("{}:{}", path.display(), what), "truncated".to_string()))?;
            v.push(f64::from_le_bytes(f64buf));
        }
        Ok(v)
    };
    let src_emb = read_tensor(&mut r, vocab_size * d, "src_emb")?;
    let pos_gain = read_tensor(&mut r, max_src_len, "pos_gain")?;
    let w_cell = read_tensor(&mut r, hidden * (hidden + 2 * d), "w_cell")?;
    let out_map = read_tensor(&mut r, d * hidden, "out_map")?;
    let tgt_emb = read_tensor(&mut r, vocab_size * d, "tgt_emb")?;
    Ok(ToySeq2Seq {
        d,
        hidden,
        max_src_len,
        vocab_size,
        eos,
        table,
        src_emb,
        pos_gain,
        w_cell,
        out_map,
        tgt_emb,
    })
}

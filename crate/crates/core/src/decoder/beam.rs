//! Greedy and beam decoding over an [`NNIndex`].
//!
//! Beam hypotheses accumulate the directional log-likelihood
//! `kappa * cos + log C_d(kappa)` per step; greedy emits the cosine argmax
//! (equivalently the cosine-loss argmin) at every step. Both stop on the
//! designated end-of-sequence token or at `src.len() + max_extra`.

use super::NNIndex;
use crate::error::{Error, Result};
use crate::scoring::{log_c_d, Kappa, ScoreSign};

/// A decoding model: yields the hidden state for the next position given the
/// source and the decoded prefix.
pub trait StepModel {
    fn step(&self, src: &[usize], prefix: &[usize]) -> Result<Vec<f64>>;

    /// The designated end-of-sequence token index.
    fn eos(&self) -> usize;
}

/// Length handling when finished hypotheses compete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LengthNorm {
    #[default]
    None,
    PerToken,
}

impl std::str::FromStr for LengthNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LengthNorm::None),
            "per-token" => Ok(LengthNorm::PerToken),
            other => Err(Error::invalid(format!(
                "length norm `{other}` (want none|per-token)"
            ))),
        }
    }
}

/// A partial or finished output sequence with its accumulated log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens, end-of-sequence excluded.
    pub tokens: Vec<usize>,
    /// Sum of per-step vMF log-probabilities over all scored steps.
    pub score: f64,
    /// Number of scored steps (includes the end-of-sequence step when the
    /// hypothesis finished by emitting it).
    pub steps: usize,
    pub finished: bool,
}

impl Hypothesis {
    fn root() -> Self {
        Hypothesis { tokens: Vec::new(), score: 0.0, steps: 0, finished: false }
    }

    /// Score under the selected normalization.
    pub fn normalized_score(&self, norm: LengthNorm) -> f64 {
        match norm {
            LengthNorm::None => self.score,
            LengthNorm::PerToken => self.score / self.steps.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamParams {
    pub width: usize,
    pub max_extra: usize,
    pub length_norm: LengthNorm,
    pub kappa: Kappa,
    pub sign: ScoreSign,
}

impl Default for BeamParams {
    fn default() -> Self {
        BeamParams {
            width: 5,
            max_extra: 200,
            length_norm: LengthNorm::None,
            kappa: Kappa::default(),
            sign: ScoreSign::default(),
        }
    }
}

/// Ranked decode output: `best` first, remaining finished hypotheses in
/// descending normalized-score order.
#[derive(Debug, Clone)]
pub struct BeamResult {
    pub best: Hypothesis,
    pub ranked: Vec<Hypothesis>,
}

/// Emit the cosine argmax token at every step; stop on end-of-sequence or at
/// `src.len() + max_extra` tokens.
pub fn greedy_decode<M: StepModel>(
    model: &M,
    index: &NNIndex<'_>,
    src: &[usize],
    max_extra: usize,
) -> Result<Vec<usize>> {
    let max_len = src.len() + max_extra;
    let mut out = Vec::new();
    while out.len() < max_len {
        let h = model.step(src, &out)?;
        let h32: Vec<f32> = h.iter().map(|&x| x as f32).collect();
        let (tok, _) = index.nearest(&h32, 1)?[0];
        if tok == model.eos() {
            break;
        }
        out.push(tok);
    }
    Ok(out)
}

/// Widening beam search under the per-step directional log-likelihood.
///
/// Runs one pruned pass per width in `1..=width` and pools every finished
/// hypothesis (beam pruning alone is not monotone in the width: a wider pass
/// can drop exactly the prefix a narrower pass rode to the optimum, and lane
/// pooling is what guarantees that the returned likelihood never decreases
/// as the width grows). Within a pass, each live hypothesis expands its
/// top-`w` tokens by cosine; an end-of-sequence candidate anywhere in that
/// expansion closes the hypothesis without taking a live slot, and the
/// non-closing candidates are pruned back to `w` by cumulative score (ties:
/// parent order, then token index). Finished hypotheses compete at the end
/// under `length_norm`.
pub fn beam_decode<M: StepModel>(
    model: &M,
    index: &NNIndex<'_>,
    src: &[usize],
    params: &BeamParams,
) -> Result<BeamResult> {
    if params.width == 0 {
        return Err(Error::invalid("beam width must be >= 1"));
    }
    let width = params.width.min(index.table().len());
    let mut finished: Vec<Hypothesis> = Vec::new();
    for w in 1..=width {
        beam_pass(model, index, src, params, w, &mut finished)?;
    }
    // the same sequence may close in several passes with an identical score
    finished.sort_by(|a, b| a.tokens.cmp(&b.tokens));
    finished.dedup_by(|a, b| a.tokens == b.tokens);
    finished.sort_by(|a, b| {
        let na = a.normalized_score(params.length_norm);
        let nb = b.normalized_score(params.length_norm);
        nb.partial_cmp(&na)
            .unwrap()
            .then(a.tokens.len().cmp(&b.tokens.len()))
            .then(a.tokens.cmp(&b.tokens))
    });
    let best = finished
        .first()
        .cloned()
        .expect("beam always produces at least one finished hypothesis");
    Ok(BeamResult { best, ranked: finished })
}

/// One standard pruned pass at a fixed width.
fn beam_pass<M: StepModel>(
    model: &M,
    index: &NNIndex<'_>,
    src: &[usize],
    params: &BeamParams,
    width: usize,
    finished: &mut Vec<Hypothesis>,
) -> Result<()> {
    let log_norm = log_c_d(index.table().dim(), params.kappa)?;
    let kappa = params.kappa.get();
    let max_len = src.len() + params.max_extra;
    let eos = model.eos();

    let mut live = vec![Hypothesis::root()];

    while !live.is_empty() {
        // candidate pool of non-eos continuations: (score, parent slot, token).
        // An end-of-sequence candidate anywhere in a hypothesis's top-`width`
        // expansion closes that hypothesis without taking a live slot.
        let mut pool: Vec<(f64, usize, usize)> = Vec::with_capacity(live.len() * width);
        for (parent, hyp) in live.iter().enumerate() {
            let h = model.step(src, &hyp.tokens)?;
            let h32: Vec<f32> = h.iter().map(|&x| x as f32).collect();
            for (tok, cos) in index.nearest(&h32, width)? {
                let step_lp = kappa * params.sign.apply(cos as f64) + log_norm;
                if tok == eos {
                    finished.push(Hypothesis {
                        tokens: hyp.tokens.clone(),
                        score: hyp.score + step_lp,
                        steps: hyp.steps + 1,
                        finished: true,
                    });
                } else {
                    pool.push((hyp.score + step_lp, parent, tok));
                }
            }
        }
        pool.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut next_live = Vec::with_capacity(width);
        for &(score, parent, tok) in pool.iter().take(width) {
            let base = &live[parent];
            let mut tokens = Vec::with_capacity(base.tokens.len() + 1);
            tokens.extend_from_slice(&base.tokens);
            tokens.push(tok);
            let hyp = Hypothesis { tokens, score, steps: base.steps + 1, finished: false };
            if hyp.tokens.len() >= max_len {
                // length cap: freeze without an end-of-sequence step
                finished.push(Hypothesis { finished: true, ..hyp });
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }
    Ok(())
}

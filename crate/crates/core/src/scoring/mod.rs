//! Per-step scoring: the cosine objective and its gradient, the discrete
//! log-softmax baseline, and the directional (vMF) log-likelihood used by
//! beam search.
//!
//! Sign convention: `vmf_log_prob` returns `kappa * cos + log C_d(kappa)` so
//! that likelihood maximization coincides with cosine-loss minimization; the
//! opposite sign is available behind [`ScoreSign::Minus`] for comparison.

mod bessel;

pub use bessel::log_bessel_i;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::vecmath::{dot_f64, norm_f64};

/// Hidden states with norm at or below this have no usable direction.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Concentration parameter of the directional likelihood. Fixed at 1 by
/// default; must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0) {
            return Err(Error::invalid(format!("kappa {value} must be > 0")));
        }
        Ok(Kappa(value))
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

impl Default for Kappa {
    fn default() -> Self {
        Kappa(1.0)
    }
}

/// Which way the per-step cosine enters the decoding score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreSign {
    #[default]
    Plus,
    Minus,
}

impl ScoreSign {
    pub fn apply(&self, cos: f64) -> f64 {
        match self {
            ScoreSign::Plus => cos,
            ScoreSign::Minus => -cos,
        }
    }
}

impl std::str::FromStr for ScoreSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(ScoreSign::Plus),
            "minus" => Ok(ScoreSign::Minus),
            other => Err(Error::invalid(format!("score sign `{other}` (want plus|minus)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    CosineLoss,
    DiscreteLogProb,
    VmfLogProb,
}

/// A tagged score value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub kind: ScoreKind,
}

fn check_hidden(h: &[f64]) -> Result<f64> {
    let n = norm_f64(h);
    if n <= DEGENERATE_NORM {
        return Err(Error::DegenerateHiddenState { norm: n });
    }
    Ok(n)
}

/// `1 - cos(e, h)`, in [0, 2]. Invariant to positive scaling of `h`.
pub fn cosine_loss(e: &[f64], h: &[f64]) -> Result<f64> {
    let hn = check_hidden(h)?;
    let en = norm_f64(e);
    let cos = (dot_f64(e, h) / (en * hn)).clamp(-1.0, 1.0);
    Ok(1.0 - cos)
}

/// Gradient of `1 - cos(e, h)` with respect to `h`:
/// `-(ê - (ê·ĥ) ĥ) / ||h||`, which lies orthogonal to `h`.
///
/// `e` is normalized internally, so by the symmetry of the cosine the same
/// function evaluated as `cosine_loss_grad(h, e)` yields the gradient with
/// respect to `e`.
pub fn cosine_loss_grad(e: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    let hn = check_hidden(h)?;
    let en = norm_f64(e);
    if en <= DEGENERATE_NORM {
        return Err(Error::invalid("cosine_loss_grad: zero target vector"));
    }
    let cos = dot_f64(e, h) / (en * hn);
    Ok(e.iter()
        .zip(h)
        .map(|(&ei, &hi)| -(ei / en - cos * hi / hn) / hn)
        .collect())
}

/// Log-softmax of token `t` against the whole table: `<E(t), h> - logsumexp`,
/// computed with max-subtraction.
pub fn discrete_log_prob(table: &EmbeddingTable, h: &[f64], t: usize) -> Result<f64> {
    if t >= table.len() {
        return Err(Error::invalid(format!(
            "token {t} out of range for |V| = {}",
            table.len()
        )));
    }
    if h.len() != table.dim() {
        return Err(Error::invalid(format!(
            "hidden dim {} != table dim {}",
            h.len(),
            table.dim()
        )));
    }
    let logit = |i: usize| -> f64 {
        table.row(i).iter().zip(h).map(|(&e, &x)| e as f64 * x).sum()
    };
    let mut max = f64::NEG_INFINITY;
    for i in 0..table.len() {
        max = max.max(logit(i));
    }
    let mut sum = 0.0;
    for i in 0..table.len() {
        sum += (logit(i) - max).exp();
    }
    Ok(logit(t) - max - sum.ln())
}

/// `log C_d(kappa)`: the normalizer of the directional density
/// `p(x) = C_d(kappa) * exp(kappa * mu.x)` on the unit sphere in R^d,
/// `C_d(k) = k^(d/2-1) / ((2 pi)^(d/2) I_{d/2-1}(k))`.
pub fn log_c_d(d: usize, kappa: Kappa) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid(format!("dimension d={d} must be >= 2")));
    }
    let k = kappa.get();
    let half_d = d as f64 / 2.0;
    Ok((half_d - 1.0) * k.ln()
        - half_d * (2.0 * std::f64::consts::PI).ln()
        - log_bessel_i((d - 2) as u64, k))
}

/// Directional log-likelihood of target `e` at hidden direction `h/||h||`:
/// `sign(kappa * cos(e, h)) + log C_d(kappa)`.
///
/// With the default `ScoreSign::Plus`, the argmax over the vocabulary equals
/// the argmin of `cosine_loss`.
pub fn vmf_log_prob(e: &[f64], h: &[f64], kappa: Kappa, sign: ScoreSign) -> Result<f64> {
    let hn = check_hidden(h)?;
    let en = norm_f64(e);
    let cos = (dot_f64(e, h) / (en * hn)).clamp(-1.0, 1.0);
    Ok(kappa.get() * sign.apply(cos) + log_c_d(e.len(), kappa)?)
}

pub fn score_cosine_loss(e: &[f64], h: &[f64]) -> Result<Score> {
    Ok(Score { value: cosine_loss(e, h)?, kind: ScoreKind::CosineLoss })
}

pub fn score_vmf(e: &[f64], h: &[f64], kappa: Kappa, sign: ScoreSign) -> Result<Score> {
    Ok(Score { value: vmf_log_prob(e, h, kappa, sign)?, kind: ScoreKind::VmfLogProb })
}

//! Stable weight normalization and the degeneracy statistics built on it.

use crate::error::{Error, Result};

/// Unnormalized log-weights `log p(Y | X_i)`; `-inf` marks a zero likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightVector(pub Vec<f64>);

impl From<Vec<f64>> for LogWeightVector {
    fn from(v: Vec<f64>) -> Self {
        LogWeightVector(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeights {
    pub w: Vec<f64>,
    pub max_weight: f64,
    /// Lowest index attaining the maximum.
    pub argmax: usize,
    /// `log Σ_j exp(logw_j)`
    pub log_norm: f64,
    /// `Σ_{i ≠ argmax} exp(logw_i − logw_max)`, so `max_weight = 1/(1 + tail_sum)`.
    pub tail_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseDiagnostics {
    pub max_weight: f64,
    pub t_observed: f64,
    pub ess: f64,
    pub entropy: f64,
}

/// `w_i = exp(logw_i − logsumexp(logw))`.
///
/// The largest entry is factored out before exponentiating; the remaining
/// terms are summed into `tail_sum`, from which the maximum weight is formed
/// directly. This keeps `t_observed` accurate even when it is far below
/// machine epsilon relative to 1.
pub fn normalize(logw: &LogWeightVector) -> Result<NormalizedWeights> {
    let v = &logw.0;
    if v.is_empty() {
        return Err(Error::arg("normalize needs at least one log-weight"));
    }
    let mut argmax = 0;
    let mut top = f64::NEG_INFINITY;
    for (i, &l) in v.iter().enumerate() {
        if l.is_nan() {
            return Err(Error::NonFinite("log-weight (NaN)"));
        }
        if l == f64::INFINITY {
            return Err(Error::NonFinite("log-weight (+inf)"));
        }
        if l > top {
            top = l;
            argmax = i;
        }
    }
    if top == f64::NEG_INFINITY {
        return Err(Error::DegenerateLikelihood);
    }
    let mut tail_sum = 0.0;
    let mut w: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if i == argmax {
                1.0
            } else {
                let e = (l - top).exp();
                tail_sum += e;
                e
            }
        })
        .collect();
    let total = 1.0 + tail_sum;
    for x in &mut w {
        *x /= total;
    }
    let max_weight = 1.0 / total;
    w[argmax] = max_weight;
    Ok(NormalizedWeights {
        w,
        max_weight,
        argmax,
        log_norm: top + tail_sum.ln_1p(),
        tail_sum,
    })
}

pub fn diagnostics(w: &NormalizedWeights) -> CollapseDiagnostics {
    let sum_sq: f64 = w.w.iter().map(|x| x * x).sum();
    let entropy =
        -w.w.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x.ln())
            .sum::<f64>();
    CollapseDiagnostics {
        max_weight: w.max_weight,
        t_observed: w.tail_sum,
        ess: 1.0 / sum_sq,
        // rounding can push a uniform vector a hair past log n or below 0
        entropy: entropy.clamp(0.0, (w.w.len() as f64).ln()),
    }
}

/// `T_{n,d} = Σ_{ℓ=2}^n exp(−σ√d (S_(ℓ) − S_(1)))` over the ascending scores.
pub fn t_nd_from_scores(scores: &[f64], sigma: f64, d: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::arg("t_nd_from_scores needs at least one score"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let c = sigma * (d as f64).sqrt();
    let s1 = sorted[0];
    Ok(sorted[1..].iter().map(|s| (-c * (s - s1)).exp()).sum())
}

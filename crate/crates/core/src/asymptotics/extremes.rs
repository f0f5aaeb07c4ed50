//! Extreme-value approximations for the minimum score and the conditional
//! mean of `T_{n,d}` when the scores are exactly standard normal.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::derive_stream;
use crate::special::{ln_normal_sf, EULER_GAMMA, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GumbelMinApprox {
    pub location: f64,
    pub scale: f64,
    pub mean: f64,
}

/// Gumbel limit for the minimum of `n` iid standard normals.
///
/// `n` may be any real greater than one so the formula can be evaluated at
/// non-integer sample sizes.
pub fn gumbel_min_approx(n: f64) -> Result<GumbelMinApprox> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::arg(format!(
            "gumbel_min_approx needs n > 1, got {n}"
        )));
    }
    let a = (2.0 * n.ln()).sqrt();
    let location = -a + (n.ln().ln() + (4.0 * std::f64::consts::PI).ln()) / (2.0 * a);
    let scale = 1.0 / a;
    Ok(GumbelMinApprox {
        location,
        scale,
        mean: location - EULER_GAMMA * scale,
    })
}

fn check_nd(n: f64, d: f64) -> Result<()> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::arg(format!("n must be at least 1, got {n}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::arg(format!("d must be positive, got {d}")));
    }
    Ok(())
}

/// `E(T_{n,d} | S_(1) = s1)` for `G_d = Φ`:
/// `(n−1) exp(c s1 + c²/2) Φ̄(s1 + c) / Φ̄(s1)` with `c = σ√d`, formed in log space.
pub fn expected_t_normal_closed_form(s1: f64, sigma: f64, d: f64, n: f64) -> Result<f64> {
    check_nd(n, d)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    if !s1.is_finite() {
        return Err(Error::NonFinite("s1"));
    }
    if n == 1.0 {
        return Ok(0.0);
    }
    let ln_tail = ln_normal_sf(s1);
    if ln_tail == f64::NEG_INFINITY {
        return Err(Error::arg(format!("normal tail at s1 = {s1} is zero")));
    }
    let c = sigma * d.sqrt();
    let ln_val = (n - 1.0).ln() + c * s1 + 0.5 * c * c + ln_normal_sf(s1 + c) - ln_tail;
    Ok(ln_val.exp())
}

/// `(n−1) e^{−s1²/2} / (√(2π)(s1 + σ√d))`, the large-`σ√d` form of the closed form.
pub fn expected_t_large_separation(s1: f64, sigma: f64, d: f64, n: f64) -> Result<f64> {
    check_nd(n, d)?;
    let denom = s1 + sigma * d.sqrt();
    if !(denom > 0.0) {
        return Err(Error::arg("s1 + sigma*sqrt(d) must be positive"));
    }
    Ok(((n - 1.0).ln() - 0.5 * s1 * s1 - LN_SQRT_2PI - denom.ln()).exp())
}

/// `√(2 log n / (σ² d))`
pub fn gaussian_collapse_rate(n: f64, d: f64, sigma_sq: f64) -> Result<f64> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::arg(format!("collapse rate needs n > 1, got {n}")));
    }
    if !(d > 0.0) || !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::arg("collapse rate needs positive d and sigma_sq"));
    }
    Ok((2.0 * n.ln() / (sigma_sq * d)).sqrt())
}

/// Draws `reps` independent sets of `n` standard normal scores and returns
/// `(S_(1), T_{n,d})` for each. Replicate `r` uses the stream keyed by `r`.
pub fn simulate_t_given_min(
    n: usize,
    sigma: f64,
    d: usize,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if n < 2 || d == 0 || reps == 0 {
        return Err(Error::arg(
            "simulate_t_given_min needs n >= 2, d >= 1, reps >= 1",
        ));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg("sigma must be positive"));
    }
    let c = sigma * (d as f64).sqrt();
    Ok((0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, r| {
                let mut rng = derive_stream(master_seed, &[0x7e11, n as u64, d as u64, r as u64]);
                let mut s1 = f64::INFINITY;
                for s in buf.iter_mut() {
                    *s = rng.sample(StandardNormal);
                    s1 = s1.min(*s);
                }
                // the minimum contributes exp(0) = 1, which is not part of T
                let t: f64 = buf.iter().map(|s| (-c * (s - s1)).exp()).sum::<f64>() - 1.0;
                (s1, t.max(0.0))
            },
        )
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketEstimate {
    pub center: f64,
    pub count: usize,
    pub mean_t: f64,
    pub stderr: f64,
    pub mean_s1: f64,
}

/// Groups `(s1, t)` pairs into buckets `[k·width, (k+1)·width)` and keeps those
/// with at least `min_count` members, ordered by center.
pub fn bucket_conditional_t(
    samples: &[(f64, f64)],
    width: f64,
    min_count: usize,
) -> Result<Vec<BucketEstimate>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::arg("bucket width must be positive"));
    }
    let mut groups: std::collections::BTreeMap<i64, Vec<(f64, f64)>> = Default::default();
    for &(s1, t) in samples {
        if !s1.is_finite() || !t.is_finite() {
            return Err(Error::NonFinite("bucket sample"));
        }
        groups
            .entry((s1 / width).floor() as i64)
            .or_default()
            .push((s1, t));
    }
    Ok(groups
        .into_iter()
        .filter(|(_, g)| g.len() >= min_count.max(2))
        .map(|(k, g)| {
            let ts: Vec<f64> = g.iter().map(|p| p.1).collect();
            let m = crate::stats::mean(&ts);
            BucketEstimate {
                center: (k as f64 + 0.5) * width,
                count: g.len(),
                mean_t: m,
                stderr: (crate::stats::variance(&ts) / g.len() as f64).sqrt(),
                mean_s1: g.iter().map(|p| p.0).sum::<f64>() / g.len() as f64,
            }
        })
        .collect())
}

//! Multivariate-Cauchy collapse heuristics and the limiting posterior.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::Stream;
use crate::special::{ln_normal_pdf, ln_normal_sf, normal_cdf};

/// `σ²(z0) = (6 + 4/z0²) / (2 + 1/z0²)²`
pub fn cauchy_sigma_sq(z0: f64) -> Result<f64> {
    if z0 == 0.0 || !z0.is_finite() {
        return Err(Error::arg(format!(
            "z0 must be finite and nonzero, got {z0}"
        )));
    }
    let inv = 1.0 / (z0 * z0);
    Ok((6.0 + 4.0 * inv) / ((2.0 + inv) * (2.0 + inv)))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CauchyCollapsePredictor {
    pub sigma_sq: f64,
    pub a: f64,
    pub b: f64,
    pub r_n: f64,
    pub predicted_t: f64,
}

/// `r_n / (√(2π)((1 − A) r_n + B))` with `A = σ²(z0)/2`, `B = σ(z0)/2` and
/// `r_n = √(2 log n / d)`.
pub fn cauchy_predicted_t(n: f64, d: f64, z0: f64) -> Result<CauchyCollapsePredictor> {
    if !(n > 1.0 && n.is_finite()) || !(d > 0.0 && d.is_finite()) {
        return Err(Error::arg("cauchy_predicted_t needs n > 1 and d > 0"));
    }
    let sigma_sq = cauchy_sigma_sq(z0)?;
    let a = sigma_sq / 2.0;
    let b = sigma_sq.sqrt() / 2.0;
    let r_n = (2.0 * n.ln() / d).sqrt();
    let predicted_t = r_n / ((2.0 * std::f64::consts::PI).sqrt() * ((1.0 - a) * r_n + b));
    Ok(CauchyCollapsePredictor {
        sigma_sq,
        a,
        b,
        r_n,
        predicted_t,
    })
}

/// `(n−1) q_d(w1)⁻¹ ∫_{w1}^∞ q_d(w) φ(w) dw / Φ̄(w1)` with
/// `q_d(w) = exp(−(√d/2) σ(z0) w + (σ²(z0)/4) w²)`, evaluated by quadrature.
pub fn cauchy_conditional_t_quadrature(n: f64, d: f64, z0: f64, w1: f64) -> Result<f64> {
    if !(n > 1.0) || !(d > 0.0) || !w1.is_finite() {
        return Err(Error::arg(
            "cauchy_conditional_t_quadrature needs n > 1, d > 0, finite w1",
        ));
    }
    let s2 = cauchy_sigma_sq(z0)?;
    let s = s2.sqrt();
    let ln_q = |w: f64| -0.5 * d.sqrt() * s * w + 0.25 * s2 * w * w;
    // the integrand exp(ln_q(w) − ln_q(w1) + ln φ(w)) is unimodal with
    // curvature (1 − s2/2) > 0; integrate on a window around its peak
    let curv = 1.0 - 0.5 * s2;
    let peak = (-0.5 * d.sqrt() * s / curv).max(w1);
    let width = 40.0 / curv.sqrt();
    let base = ln_q(w1);
    let f = |w: f64| (ln_q(w) - base + ln_normal_pdf(w)).exp();
    let hi = peak + width;
    let est = integrate(
        f,
        w1,
        hi,
        Tolerance {
            abs: 0.0,
            rel: 1e-10,
            max_intervals: 4000,
        },
    )?;
    Ok(((n - 1.0).ln() + est.value.ln() - ln_normal_sf(w1)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AverageRate {
    pub r_n: f64,
    /// `∫_0^ε r/(r + z) dz = r log(1 + ε/r)`
    pub value: f64,
    /// `r |log r|`
    pub proxy: f64,
}

pub fn average_rate_from_r(r_n: f64, eps: f64) -> Result<AverageRate> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    if !(r_n > 0.0 && r_n.is_finite()) {
        return Err(Error::arg(format!("r_n must be positive, got {r_n}")));
    }
    Ok(AverageRate {
        r_n,
        value: r_n * (eps / r_n).ln_1p(),
        proxy: r_n * r_n.ln().abs(),
    })
}

pub fn cauchy_average_rate(n: f64, d: f64, eps: f64) -> Result<AverageRate> {
    if !(n > 1.0) || !(d > 0.0) {
        return Err(Error::arg("cauchy_average_rate needs n > 1 and d > 0"));
    }
    average_rate_from_r((2.0 * n.ln() / d).sqrt(), eps)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LimitingPosterior {
    pub mean: Vec<f64>,
    pub var: f64,
    pub clamped: bool,
}

/// `N(y d/‖y‖², (1 − d/‖y‖²) I)`; a negative variance is clamped to zero.
pub fn limiting_posterior_params(y: &[f64]) -> Result<LimitingPosterior> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("y"));
    }
    let norm_sq: f64 = y.iter().map(|v| v * v).sum();
    if !(norm_sq > 0.0) {
        return Err(Error::arg("limiting posterior needs y != 0"));
    }
    let d = y.len() as f64;
    let raw = 1.0 - d / norm_sq;
    Ok(LimitingPosterior {
        mean: y.iter().map(|v| v * d / norm_sq).collect(),
        var: raw.max(0.0),
        clamped: raw < 0.0,
    })
}

/// Exact posterior of `X` given `Y` for `X ~ N(0, I)` and multivariate-Cauchy
/// noise, as a mixture over `z0 = |Z0|` on a discretized grid.
#[derive(Debug, Clone)]
pub struct ExactCauchyPosterior {
    y: Vec<f64>,
    /// `τ = z0²` at each node
    tau: Vec<f64>,
    /// normalized mixture weights
    weight: Vec<f64>,
    cumulative: Vec<f64>,
}

const COARSE_LO: f64 = -25.0;
const COARSE_HI: f64 = 8.0;
const COARSE_POINTS: usize = 6601;
const FINE_POINTS: usize = 4001;
const LOG_DENSITY_DROP: f64 = 50.0;
const KS_COARSE: usize = 2001;
const KS_REFINE: usize = 200;

impl ExactCauchyPosterior {
    pub fn new(y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::arg("exact posterior needs a nonempty y"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("y"));
        }
        let d = y.len() as f64;
        let norm_sq: f64 = y.iter().map(|v| v * v).sum();
        // log density of u = ln z0 (Jacobian z0 included)
        let ln_p = |u: f64| {
            let z0 = u.exp();
            let s = 1.0 + (-2.0 * u).exp();
            ln_normal_pdf(z0) + u - 0.5 * d * s.ln() - 0.5 * norm_sq / s
        };
        let step = (COARSE_HI - COARSE_LO) / (COARSE_POINTS - 1) as f64;
        let coarse: Vec<(f64, f64)> = (0..COARSE_POINTS)
            .map(|i| {
                let u = COARSE_LO + i as f64 * step;
                (u, ln_p(u))
            })
            .collect();
        let top = coarse.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::arg("posterior of z0 is degenerate"));
        }
        let keep: Vec<usize> = (0..COARSE_POINTS)
            .filter(|&i| coarse[i].1 > top - LOG_DENSITY_DROP)
            .collect();
        let lo = coarse[keep[0].saturating_sub(1)].0;
        let hi = coarse[(keep[keep.len() - 1] + 1).min(COARSE_POINTS - 1)].0;

        let h = (hi - lo) / (FINE_POINTS - 1) as f64;
        let us: Vec<f64> = (0..FINE_POINTS).map(|i| lo + i as f64 * h).collect();
        let lps: Vec<f64> = us.iter().map(|&u| ln_p(u)).collect();
        let m = lps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weight: Vec<f64> = lps
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let trap = if i == 0 || i == FINE_POINTS - 1 {
                    0.5
                } else {
                    1.0
                };
                trap * (l - m).exp()
            })
            .collect();
        let total: f64 = weight.iter().sum();
        for w in &mut weight {
            *w /= total;
        }
        let mut acc = 0.0;
        let cumulative = weight
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(ExactCauchyPosterior {
            y: y.to_vec(),
            tau: us.iter().map(|u| (2.0 * u).exp()).collect(),
            weight,
            cumulative,
        })
    }

    /// Posterior mean of `z0²/(1 + z0²)`, the shrinkage factor on `y`.
    pub fn mean_shrinkage(&self) -> f64 {
        self.tau
            .iter()
            .zip(&self.weight)
            .map(|(t, w)| w * t / (1.0 + t))
            .sum()
    }

    /// CDF of coordinate `k` of `X | Y` at `x`.
    pub fn marginal_cdf(&self, k: usize, x: f64) -> f64 {
        let yk = self.y[k];
        self.tau
            .iter()
            .zip(&self.weight)
            .map(|(t, w)| {
                let mean = t / (1.0 + t) * yk;
                let sd = (1.0 / (1.0 + t)).sqrt();
                w * normal_cdf((x - mean) / sd)
            })
            .sum::<f64>()
            .min(1.0)
    }

    /// Kolmogorov distance between coordinate `k` of the exact posterior and
    /// the limiting normal, evaluated on a fine grid.
    pub fn ks_to_limit(&self, k: usize) -> Result<f64> {
        if k >= self.y.len() {
            return Err(Error::arg(format!("coordinate {k} out of range")));
        }
        let lim = limiting_posterior_params(&self.y)?;
        let mu = lim.mean[k];
        let sd = lim.var.sqrt();
        let center = self.mean_shrinkage() * self.y[k];
        let spread = 10.0f64.max(10.0 * sd);
        let (lo, hi) = (center.min(mu) - spread, center.max(mu) + spread);
        let gap = |x: f64| {
            let g = if sd > 0.0 {
                normal_cdf((x - mu) / sd)
            } else if x >= mu {
                1.0
            } else {
                0.0
            };
            (self.marginal_cdf(k, x) - g).abs()
        };
        // coarse scan, then a dense pass around every local maximum
        let step = (hi - lo) / (KS_COARSE - 1) as f64;
        let coarse: Vec<f64> = (0..KS_COARSE).map(|i| gap(lo + step * i as f64)).collect();
        let mut sup = coarse.iter().cloned().fold(0.0, f64::max);
        for i in 0..KS_COARSE {
            let left = if i > 0 { coarse[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < KS_COARSE { coarse[i + 1] } else { f64::NEG_INFINITY };
            if coarse[i] < left || coarse[i] < right || coarse[i] < 0.5 * sup {
                continue;
            }
            let a = lo + step * (i as f64 - 1.0);
            for j in 0..=KS_REFINE {
                sup = sup.max(gap(a + 2.0 * step * j as f64 / KS_REFINE as f64));
            }
        }
        if sd == 0.0 {
            let f = self.marginal_cdf(k, mu);
            sup = sup.max(f).max(1.0 - f);
        }
        Ok(sup)
    }

    /// Draws coordinate `k` of `X | Y`: `z0` from the grid, then the normal component.
    pub fn sample_coordinate(&self, k: usize, rng: &mut Stream) -> f64 {
        let u: f64 = rng.random::<f64>();
        let i = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.tau.len() - 1);
        let t = self.tau[i];
        let z: f64 = rng.sample(StandardNormal);
        t / (1.0 + t) * self.y[k] + z / (1.0 + t).sqrt()
    }
}

//! Weighted-estimate consistency in low dimension and multinomial resampling.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{sample_observation, Ensemble, ModelSpec, NoiseKind};
use crate::rng::{derive_seed, stream_from_seed, Stream};
use crate::special::{normal_cdf, normal_pdf, normal_sf};
use crate::stats::{ks_distance, median};
use crate::weights::{normalize, LogWeightVector, NormalizedWeights};

/// Samples drawn from the exact posterior when `h` has no closed form.
pub const MC_ORACLE_SAMPLES: usize = 10_000_000;
const POSTERIOR_SD: f64 = std::f64::consts::FRAC_1_SQRT_2;

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A bounded test function `h`.
#[derive(Clone)]
pub enum TestFunction {
    Constant(f64),
    /// `1{x_k ≤ t}`
    Indicator {
        coord: usize,
        threshold: f64,
    },
    /// `min(max(x_k, lo), hi)`
    Clip {
        coord: usize,
        lo: f64,
        hi: f64,
    },
    /// `Π 1{x_k ≤ t_k}`
    IndicatorProduct(Vec<(usize, f64)>),
    Custom {
        name: String,
        bound: f64,
        f: CustomFn,
    },
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl TestFunction {
    /// Registers a general `h` with a declared bound `sup|h| ≤ bound`.
    pub fn custom(
        name: &str,
        bound: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::arg(format!(
                "test function '{name}' must be bounded; got bound {bound}"
            )));
        }
        Ok(TestFunction::Custom {
            name: name.to_string(),
            bound,
            f: Arc::new(f),
        })
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Constant(c) => format!("const({c})"),
            TestFunction::Indicator { coord, threshold } => {
                format!("ind(x{}<={threshold})", coord + 1)
            }
            TestFunction::Clip { coord, lo, hi } => format!("clip(x{},{lo},{hi})", coord + 1),
            TestFunction::IndicatorProduct(v) => v
                .iter()
                .map(|(k, t)| format!("ind(x{}<={t})", k + 1))
                .collect::<Vec<_>>()
                .join("*"),
            TestFunction::Custom { name, .. } => name.clone(),
        }
    }

    /// `sup |h|`
    pub fn bound(&self) -> f64 {
        match self {
            TestFunction::Constant(c) => c.abs(),
            TestFunction::Indicator { .. } | TestFunction::IndicatorProduct(_) => 1.0,
            TestFunction::Clip { lo, hi, .. } => lo.abs().max(hi.abs()),
            TestFunction::Custom { bound, .. } => *bound,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let check = |k: usize| {
            if k >= d {
                Err(Error::arg(format!(
                    "{}: coordinate {} exceeds d = {d}",
                    self.name(),
                    k + 1
                )))
            } else {
                Ok(())
            }
        };
        match self {
            TestFunction::Constant(c) if !c.is_finite() => Err(Error::NonFinite("constant h")),
            TestFunction::Indicator { coord, threshold } => {
                check(*coord)?;
                if threshold.is_nan() {
                    return Err(Error::NonFinite("indicator threshold"));
                }
                Ok(())
            }
            TestFunction::Clip { coord, lo, hi } => {
                check(*coord)?;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::arg("clip needs finite lo <= hi"));
                }
                Ok(())
            }
            TestFunction::IndicatorProduct(v) => v.iter().try_for_each(|(k, _)| check(*k)),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::Indicator { coord, threshold } => {
                f64::from(u8::from(x[*coord] <= *threshold))
            }
            TestFunction::Clip { coord, lo, hi } => x[*coord].clamp(*lo, *hi),
            TestFunction::IndicatorProduct(v) => {
                f64::from(u8::from(v.iter().all(|(k, t)| x[*k] <= *t)))
            }
            TestFunction::Custom { f, .. } => f(x),
        }
    }

    /// `E h(X)` under `X ~ N(y₀/2, ½ I)`. Returns the value and whether it is
    /// a closed form (`true`) or a Monte Carlo estimate.
    pub fn posterior_expectation(&self, y0: &[f64], rng: &mut Stream) -> (f64, bool) {
        let m = |k: usize| y0[k] / 2.0;
        match self {
            TestFunction::Constant(c) => (*c, true),
            TestFunction::Indicator { coord, threshold } => {
                (normal_cdf((threshold - m(*coord)) / POSTERIOR_SD), true)
            }
            TestFunction::Clip { coord, lo, hi } => {
                let (mu, s) = (m(*coord), POSTERIOR_SD);
                let (a, b) = ((lo - mu) / s, (hi - mu) / s);
                let v = lo * normal_cdf(a)
                    + hi * normal_sf(b)
                    + mu * (normal_cdf(b) - normal_cdf(a))
                    + s * (normal_pdf(a) - normal_pdf(b));
                (v, true)
            }
            TestFunction::IndicatorProduct(v) => {
                let mut tightest: std::collections::BTreeMap<usize, f64> = Default::default();
                for &(k, t) in v {
                    let e = tightest.entry(k).or_insert(t);
                    *e = e.min(t);
                }
                let p = tightest
                    .iter()
                    .map(|(&k, &t)| normal_cdf((t - m(k)) / POSTERIOR_SD))
                    .product();
                (p, true)
            }
            TestFunction::Custom { f, .. } => {
                let mut x = vec![0.0; y0.len()];
                let mut total = 0.0;
                for _ in 0..MC_ORACLE_SAMPLES {
                    for (k, v) in x.iter_mut().enumerate() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = m(k) + POSTERIOR_SD * z;
                    }
                    total += f(&x);
                }
                (total / MC_ORACLE_SAMPLES as f64, false)
            }
        }
    }
}

/// `m` iid multinomial draws from the weighted ensemble.
pub fn resample(
    w: &NormalizedWeights,
    ensemble: &Ensemble,
    m: usize,
    rng: &mut Stream,
) -> Result<Ensemble> {
    if m == 0 {
        return Err(Error::arg("resample needs m >= 1"));
    }
    if w.w.len() != ensemble.n() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: ensemble.n(),
            got: w.w.len(),
        });
    }
    let mut acc = 0.0;
    let cumulative: Vec<f64> =
        w.w.iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
    let total = acc;
    let q = ensemble.q();
    let last = ensemble.n() - 1;
    let mut data = Vec::with_capacity(m * q);
    for _ in 0..m {
        let u: f64 = rng.random::<f64>() * total;
        // first index whose cumulative weight exceeds u; zero-weight rows are never hit
        let i = cumulative.partition_point(|&c| c <= u).min(last);
        data.extend_from_slice(ensemble.particle(i));
    }
    Ensemble::from_rows(q, data)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestEstimate {
    pub name: String,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub exact_is_closed_form: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRep {
    pub rep: usize,
    pub seed: u64,
    pub y0_first: f64,
    pub max_weight: f64,
    pub estimates: Vec<TestEstimate>,
    /// KS distance of the first resampled coordinate against `N(y₀₁/2, ½)`.
    pub resample_ks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub name: String,
    pub sup_abs: f64,
    pub median_abs_error: f64,
    /// `(1/n) M² (4√3)^d`
    pub variance_bound: f64,
    pub ln_variance_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub d: usize,
    pub n: usize,
    pub reps: Vec<ConsistencyRep>,
    pub tests: Vec<TestSummary>,
    pub median_resample_ks: f64,
}

/// `ln((1/n) M² (4√3)^d)`
pub fn ln_variance_bound(n: usize, sup_abs: f64, d: usize) -> f64 {
    -(n as f64).ln() + 2.0 * sup_abs.ln() + d as f64 * (4.0 * 3f64.sqrt()).ln()
}

#[derive(Debug, Clone)]
pub struct ConsistencyConfig {
    pub d: usize,
    pub n_list: Vec<usize>,
    pub tests: Vec<TestFunction>,
    pub reps: usize,
    pub master_seed: u64,
}

const CONSISTENCY_KEY: u64 = 0xC0_5157;

fn run_rep(cfg: &ConsistencyConfig, n: usize, rep: usize) -> Result<ConsistencyRep> {
    let d = cfg.d;
    // the observation depends on (d, rep) only, so every n sees the same y₀
    let y_seed = derive_seed(cfg.master_seed, &[CONSISTENCY_KEY, d as u64, rep as u64]);
    let model = ModelSpec::standard(d, NoiseKind::GaussianIid)?;
    let obs = sample_observation(&model, &mut stream_from_seed(y_seed))?;
    let seed = derive_seed(
        cfg.master_seed,
        &[CONSISTENCY_KEY, d as u64, n as u64, rep as u64],
    );
    let mut rng = stream_from_seed(seed);

    let mut data = vec![0.0; n * d];
    for v in data.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    let ens = Ensemble::from_rows(d, data)?;
    let logw: Vec<f64> = ens
        .particles()
        .map(|x| {
            -0.5 * obs
                .y
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .collect();
    let w = normalize(&LogWeightVector(logw))?;

    let mut oracle_rng = stream_from_seed(derive_seed(seed, &[1]));
    let estimates = cfg
        .tests
        .iter()
        .map(|h| {
            let estimate: f64 = ens
                .particles()
                .zip(&w.w)
                .map(|(x, wi)| wi * h.eval(x))
                .sum();
            let (exact, closed) = h.posterior_expectation(&obs.y, &mut oracle_rng);
            TestEstimate {
                name: h.name(),
                estimate,
                exact,
                abs_error: (estimate - exact).abs(),
                exact_is_closed_form: closed,
            }
        })
        .collect();

    let resampled = resample(&w, &ens, n, &mut rng)?;
    let first: Vec<f64> = resampled.particles().map(|x| x[0]).collect();
    let m0 = obs.y[0] / 2.0;
    let resample_ks = ks_distance(&first, |x| normal_cdf((x - m0) / POSTERIOR_SD));

    Ok(ConsistencyRep {
        rep,
        seed,
        y0_first: obs.y[0],
        max_weight: w.max_weight,
        estimates,
        resample_ks,
    })
}

pub fn run_consistency(cfg: &ConsistencyConfig) -> Result<Vec<ConsistencyResult>> {
    if cfg.d == 0 || cfg.reps == 0 || cfg.n_list.is_empty() || cfg.n_list.contains(&0) {
        return Err(Error::arg(
            "consistency run needs d, reps >= 1 and a nonempty list of n >= 1",
        ));
    }
    for h in &cfg.tests {
        h.validate(cfg.d)?;
    }
    let mut out = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        let reps = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| run_rep(cfg, n, rep))
            .collect::<Result<Vec<_>>>()?;
        let tests = cfg
            .tests
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let errs: Vec<f64> = reps.iter().map(|r| r.estimates[i].abs_error).collect();
                let ln_b = ln_variance_bound(n, h.bound(), cfg.d);
                TestSummary {
                    name: h.name(),
                    sup_abs: h.bound(),
                    median_abs_error: median(&errs),
                    variance_bound: ln_b.exp(),
                    ln_variance_bound: ln_b,
                }
            })
            .collect();
        let ks: Vec<f64> = reps.iter().map(|r| r.resample_ks).collect();
        out.push(ConsistencyResult {
            d: cfg.d,
            n,
            median_resample_ks: median(&ks),
            reps,
            tests,
        });
    }
    Ok(out)
}

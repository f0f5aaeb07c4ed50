//! Fast self-check of the numerical invariants the experiments rely on.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::asymptotics::{moment_bound_check, standardize_gaussian, sub_bound_checks};
use crate::error::Result;
use crate::experiments::{run_collapse_cell, run_collapse_rep, rep_seed};
use crate::io::rep_csv;
use crate::model::{
    log_kernel_gaussian, sample_observation, sample_prior, spectral_decompose, ModelSpec, NoiseKind,
};
use crate::quadrature::{integrate, integrate_real_line, Tolerance};
use crate::rng::{derive_stream, stream_from_seed};
use crate::special::normal_pdf;
use crate::weights::{normalize, t_nd_from_scores, LogWeightVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn outcome(name: &'static str, err: f64, tol: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        pass: err <= tol,
        detail: format!("max error {err:.3e} (tolerance {tol:.0e})"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn normalization(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = derive_stream(seed, &[1]);
    let mut sum_err: f64 = 0.0;
    let mut shift_err: f64 = 0.0;
    let mut perm_err: f64 = 0.0;
    for trial in 0..20 {
        let spread = 10f64.powi(trial % 5);
        let logw: Vec<f64> = (0..1000).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let w = normalize(&LogWeightVector(logw.clone()))?;
        sum_err = sum_err.max((w.w.iter().sum::<f64>() - 1.0).abs());

        let shifted: Vec<f64> = logw.iter().map(|l| l + 1e4).collect();
        let ws = normalize(&LogWeightVector(shifted))?;
        for (a, b) in w.w.iter().zip(&ws.w) {
            shift_err = shift_err.max((a - b).abs());
        }

        let reversed: Vec<f64> = logw.iter().rev().cloned().collect();
        let wr = normalize(&LogWeightVector(reversed))?;
        for (a, b) in w.w.iter().zip(wr.w.iter().rev()) {
            perm_err = perm_err.max((a - b).abs());
        }
    }
    Ok(vec![
        outcome("weights sum to one", sum_err, 1e-12),
        outcome("weights invariant to a common shift", shift_err, 1e-12),
        outcome("weights follow a permutation", perm_err, 1e-15),
    ])
}

fn bridge(seed: u64) -> Result<CheckOutcome> {
    let mut rng = derive_stream(seed, &[2]);
    let mut err: f64 = 0.0;
    for (d, sigma) in [(10usize, 1.0), (100, 2f64.sqrt()), (1000, 0.3)] {
        let scores: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let c = sigma * (d as f64).sqrt();
        let logw: Vec<f64> = scores.iter().map(|s| -c * s + 17.0).collect();
        let w = normalize(&LogWeightVector(logw))?;
        let t = t_nd_from_scores(&scores, sigma, d)?;
        err = err.max(rel(w.max_weight, 1.0 / (1.0 + t)));
    }
    Ok(outcome("max weight equals 1/(1 + T)", err, 1e-10))
}

fn affine(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = derive_stream(seed, &[3]);
    let h = DMatrix::from_fn(7, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
    let model = ModelSpec::builder(7).operator(h).build()?;
    let spec = spectral_decompose(&model)?;
    let obs = sample_observation(&model, &mut rng)?;
    let ens = sample_prior(&model, 100, &mut rng)?;
    let st = standardize_gaussian(&model, &spec, &ens, &obs)?;
    let (_, complement) = spec.rotate(&obs.y);
    let mut err: f64 = 0.0;
    for (x, s) in ens.particles().zip(&st.scores) {
        let direct = -2.0 * log_kernel_gaussian(&obs.y, x, model.operator())? - complement;
        err = err.max(rel(direct, st.scale * s + st.location));
    }

    let model = ModelSpec::standard(20, NoiseKind::GaussianIid)?;
    let spec = spectral_decompose(&model)?;
    let mut ranking_ok = true;
    for _ in 0..10 {
        let obs = sample_observation(&model, &mut rng)?;
        let ens = sample_prior(&model, 200, &mut rng)?;
        let st = standardize_gaussian(&model, &spec, &ens, &obs)?;
        let logw = ens
            .particles()
            .map(|x| log_kernel_gaussian(&obs.y, x, model.operator()))
            .collect::<Result<Vec<_>>>()?;
        let w = normalize(&LogWeightVector(logw))?;
        let argmin = (0..st.scores.len())
            .min_by(|&a, &b| st.scores[a].total_cmp(&st.scores[b]))
            .unwrap_or(0);
        ranking_ok &= argmin == w.argmax;
    }
    Ok(vec![
        outcome("residual norm is affine in the score", err, 1e-8),
        CheckOutcome {
            name: "largest weight has the smallest score",
            pass: ranking_ok,
            detail: "10 ensembles at d = 20, n = 200".into(),
        },
    ])
}

/// Recomputes small replicates straight from the likelihood definitions.
fn brute_force(seed: u64) -> Result<CheckOutcome> {
    let (d, n) = (2, 3);
    let mut err: f64 = 0.0;
    for kind in NoiseKind::ALL {
        for rep in 0..10 {
            let Some(r) = run_collapse_rep(kind, d, n, rep, seed)? else {
                continue;
            };
            let mut rng = stream_from_seed(rep_seed(seed, kind, d, n, rep));
            let model = ModelSpec::standard(d, kind)?;
            let obs = sample_observation(&model, &mut rng)?;
            let mut lik = Vec::with_capacity(n);
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let r2: f64 = obs.y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                lik.push(match kind {
                    NoiseKind::GaussianIid => (-0.5 * r2).exp(),
                    NoiseKind::CauchyIid => obs
                        .y
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| 1.0 / (1.0 + (a - b) * (a - b)))
                        .product(),
                    NoiseKind::CauchyMultivariate => (1.0 + r2).powf(-(d as f64 + 1.0) / 2.0),
                });
            }
            let total: f64 = lik.iter().sum();
            let wmax = lik.iter().cloned().fold(0.0, f64::max) / total;
            err = err.max((r.w_max - wmax).abs());
        }
    }
    Ok(outcome("replicates match direct likelihoods at d = 2, n = 3", err, 1e-12))
}

fn determinism(seed: u64) -> Result<CheckOutcome> {
    let cells = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::error::Error::arg(e.to_string()))?;
        pool.install(|| {
            let out = NoiseKind::ALL
                .into_iter()
                .map(|k| run_collapse_cell("check", k, 8, 64, 12, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(rep_csv(&out))
        })
    };
    let a = cells(1)?;
    let b = cells(3)?;
    let c = cells(1)?;
    Ok(CheckOutcome {
        name: "output bytes independent of threads and reruns",
        pass: a == b && a == c,
        detail: format!("{} bytes compared", a.len()),
    })
}

fn moments(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = derive_stream(seed, &[4]);
    let mut worst = 0.0f64;
    let mut all = true;
    for k in [3u32, 4] {
        for (lambda, mu) in [(0.5, 0.0), (1.0, 1.0), (2.0, 1.4), (1.0, 0.0)] {
            let d = 50;
            let lambdas = vec![lambda; d];
            let mus = vec![mu; d];
            let r = moment_bound_check(&lambdas, &mus, k, 20_000, &mut rng)?;
            all &= r.pass;
            worst = worst.max(r.lhs / r.rhs);
        }
    }
    let subs = sub_bound_checks(4, 100_000, &mut rng)?;
    Ok(vec![
        CheckOutcome {
            name: "standardized moment bound for k = 3, 4",
            pass: all,
            detail: format!("largest lhs/rhs {worst:.3e}"),
        },
        CheckOutcome {
            name: "normal and chi-square moment sub-bounds for k <= 4",
            pass: subs.iter().all(|s| s.pass),
            detail: format!("{} bounds", subs.len()),
        },
    ])
}

fn quadrature() -> Result<CheckOutcome> {
    let tol = Tolerance::default();
    let mut err: f64 = 0.0;
    err = err.max((integrate(|x| x * x, 0.0, 1.0, tol)?.value - 1.0 / 3.0).abs());
    err = err.max((integrate_real_line(normal_pdf, 0.0, 1.0, tol)?.value - 1.0).abs());
    let var = integrate_real_line(|x| x * x * normal_pdf(x), 0.0, 1.0, tol)?.value;
    err = err.max((var - 1.0).abs());
    let cauchy = |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x));
    err = err.max((integrate_real_line(cauchy, 0.0, 1.0, tol)?.value - 1.0).abs());
    Ok(outcome("quadrature reproduces known integrals", err, 1e-8))
}

/// Runs every check; each is seeded from `seed` and the whole suite takes seconds.
pub fn run_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = normalization(seed)?;
    out.push(bridge(seed)?);
    out.extend(affine(seed)?);
    out.push(brute_force(seed)?);
    out.push(determinism(seed)?);
    out.extend(moments(seed)?);
    out.push(quadrature()?);
    Ok(out)
}

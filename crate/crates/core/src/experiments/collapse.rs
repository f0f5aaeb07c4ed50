//! Replicated single-step weight computations for one `(d, n)` cell.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{
    cauchy_predicted_t, coordinate_moments, gaussian_collapse_rate, NormalComponent,
};
use crate::error::{Error, Result};
use crate::model::{cauchy_iid_unchecked, sample_observation, CauchyPsi, ModelSpec, NoiseKind};
use crate::rng::{derive_seed, stream_from_seed};
use crate::stats::{mean, quantile_sorted, sorted_copy};
use crate::weights::{diagnostics, normalize, LogWeightVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub w_max: f64,
    pub ess: f64,
    pub entropy: f64,
    pub t_observed: f64,
    /// Smallest standardized score, oriented so that small values mean a
    /// dominant particle. Absent for the multivariate Cauchy kernel.
    pub s_min: Option<f64>,
    pub z0: Option<f64>,
    /// Per-dimension variance of the log-likelihood given `y`.
    pub sigma_sq_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub successful: usize,
    pub failed: usize,
    pub mean_wmax: f64,
    pub median_wmax: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub mean_t_observed: f64,
    pub mean_sigma_sq_hat: Option<f64>,
    pub predicted_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub experiment: String,
    pub kind: NoiseKind,
    pub d: usize,
    pub n: usize,
    pub records: Vec<RepRecord>,
    pub failed_reps: Vec<usize>,
    pub summary: CellSummary,
}

impl CellResult {
    pub fn w_max(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.w_max).collect()
    }
}

/// Seed of replicate `rep` in cell `(kind, d, n)`.
pub fn rep_seed(master_seed: u64, kind: NoiseKind, d: usize, n: usize, rep: usize) -> u64 {
    derive_seed(master_seed, &[kind.key(), d as u64, n as u64, rep as u64])
}

/// Runs one replicate: `Y` from the standard model, then `n` prior particles
/// row by row. Returns `None` when every log-weight is `−∞`.
pub fn run_collapse_rep(
    kind: NoiseKind,
    d: usize,
    n: usize,
    rep: usize,
    master_seed: u64,
) -> Result<Option<RepRecord>> {
    if d == 0 || n == 0 {
        return Err(Error::arg("collapse cell needs d >= 1 and n >= 1"));
    }
    let seed = rep_seed(master_seed, kind, d, n, rep);
    let mut rng = stream_from_seed(seed);
    let model = ModelSpec::standard(d, kind)?;
    let obs = sample_observation(&model, &mut rng)?;
    let y = &obs.y;

    let mut x = vec![0.0; d];
    let mut logw = Vec::with_capacity(n);
    for _ in 0..n {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        logw.push(match kind {
            NoiseKind::GaussianIid => {
                let mut s = 0.0;
                for (a, b) in y.iter().zip(&x) {
                    let r = a - b;
                    s += r * r;
                }
                -0.5 * s
            }
            NoiseKind::CauchyIid => cauchy_iid_unchecked(y, &x),
            NoiseKind::CauchyMultivariate => {
                let mut s = 0.0;
                for (a, b) in y.iter().zip(&x) {
                    let r = a - b;
                    s += r * r;
                }
                -0.5 * (d as f64 + 1.0) * s.ln_1p()
            }
        });
    }

    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w = match normalize(&LogWeightVector(logw)) {
        Ok(w) => w,
        Err(Error::DegenerateLikelihood) => return Ok(None),
        Err(e) => return Err(e),
    };
    let diag = diagnostics(&w);

    let (s_min, sigma_sq_hat) = match kind {
        NoiseKind::GaussianIid => {
            // λ ≡ 1 and ξ = y: S = (‖y − x‖² − Σ(1 + y²)) / (2Σ(1 + 2y²))^{1/2}
            let loc: f64 = y.iter().map(|v| 1.0 + v * v).sum();
            let quad: f64 = y.iter().map(|v| 1.0 + 2.0 * v * v).sum();
            let scale = (2.0 * quad).sqrt();
            (
                Some((-2.0 * top - loc) / scale),
                Some(2.0 * quad / d as f64 / 4.0),
            )
        }
        NoiseKind::CauchyIid => {
            let (mu, var) = coordinate_moments(&CauchyPsi, y, &NormalComponent::standard())?;
            let total_var: f64 = var.iter().sum();
            let total_mu: f64 = mu.iter().sum();
            (
                Some(-(top - total_mu) / total_var.sqrt()),
                Some(total_var / d as f64),
            )
        }
        NoiseKind::CauchyMultivariate => (None, None),
    };

    Ok(Some(RepRecord {
        rep,
        seed,
        w_max: diag.max_weight,
        ess: diag.ess,
        entropy: diag.entropy,
        t_observed: diag.t_observed,
        s_min,
        z0: obs.z0,
        sigma_sq_hat,
    }))
}

/// Runs `reps` replicates of cell `(kind, d, n)` in parallel; output order and
/// values do not depend on the worker count.
pub fn run_collapse_cell(
    experiment: &str,
    kind: NoiseKind,
    d: usize,
    n: usize,
    reps: usize,
    master_seed: u64,
) -> Result<CellResult> {
    if reps == 0 {
        return Err(Error::arg("reps must be at least 1"));
    }
    let outcomes: Vec<Result<Option<RepRecord>>> = (0..reps)
        .into_par_iter()
        .map(|rep| run_collapse_rep(kind, d, n, rep, master_seed))
        .collect();
    let mut records = Vec::with_capacity(reps);
    let mut failed_reps = Vec::new();
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o? {
            Some(r) => records.push(r),
            None => {
                log::warn!(
                    "{experiment} {} d={d} n={n} rep {rep}: all likelihoods zero",
                    kind.tag()
                );
                failed_reps.push(rep);
            }
        }
    }
    let summary = summarize(kind, d, n, &records, failed_reps.len())?;
    Ok(CellResult {
        experiment: experiment.to_string(),
        kind,
        d,
        n,
        records,
        failed_reps,
        summary,
    })
}

fn summarize(
    kind: NoiseKind,
    d: usize,
    n: usize,
    records: &[RepRecord],
    failed: usize,
) -> Result<CellSummary> {
    let wm: Vec<f64> = records.iter().map(|r| r.w_max).collect();
    let sorted = sorted_copy(&wm);
    let q = |p: f64| {
        if sorted.is_empty() {
            f64::NAN
        } else {
            quantile_sorted(&sorted, p)
        }
    };
    let ts: Vec<f64> = records.iter().map(|r| r.t_observed).collect();
    let sig: Vec<f64> = records.iter().filter_map(|r| r.sigma_sq_hat).collect();
    let mean_sigma_sq_hat = (!sig.is_empty()).then(|| mean(&sig));
    let predicted_rate = if n < 2 || records.is_empty() {
        None
    } else {
        match kind {
            NoiseKind::CauchyMultivariate => {
                let preds = records
                    .iter()
                    .filter_map(|r| r.z0)
                    .map(|z0| cauchy_predicted_t(n as f64, d as f64, z0).map(|p| p.predicted_t))
                    .collect::<Result<Vec<f64>>>()?;
                (!preds.is_empty()).then(|| mean(&preds))
            }
            _ => match mean_sigma_sq_hat {
                Some(s) if s > 0.0 => Some(gaussian_collapse_rate(n as f64, d as f64, s)?),
                _ => None,
            },
        }
    };
    Ok(CellSummary {
        successful: records.len(),
        failed,
        mean_wmax: if wm.is_empty() { f64::NAN } else { mean(&wm) },
        median_wmax: q(0.5),
        q05: q(0.05),
        q25: q(0.25),
        q75: q(0.75),
        q95: q(0.95),
        mean_t_observed: if ts.is_empty() { f64::NAN } else { mean(&ts) },
        mean_sigma_sq_hat,
        predicted_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{standardize_gaussian, standardize_iid};
    use crate::model::spectral_decompose;
    use crate::model::{log_kernel_cauchy_iid, Ensemble};
    use approx::assert_relative_eq;

    #[test]
    fn single_particle_always_collapses() {
        for kind in NoiseKind::ALL {
            let c = run_collapse_cell("t", kind, 1, 1, 5, 3).unwrap();
            assert!(c
                .records
                .iter()
                .all(|r| r.w_max == 1.0 && r.t_observed == 0.0));
        }
    }

    /// Replays the draws of one replicate by hand and recomputes the weights
    /// directly from their definition.
    fn brute_force(
        kind: NoiseKind,
        d: usize,
        n: usize,
        rep: usize,
        seed: u64,
    ) -> (f64, Vec<f64>, Vec<f64>) {
        let mut rng = stream_from_seed(rep_seed(seed, kind, d, n, rep));
        let model = ModelSpec::standard(d, kind).unwrap();
        let obs = sample_observation(&model, &mut rng).unwrap();
        let mut xs = Vec::new();
        let mut lik = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let r2: f64 = obs.y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            let p = match kind {
                NoiseKind::GaussianIid => (-0.5 * r2).exp(),
                NoiseKind::CauchyIid => obs
                    .y
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| 1.0 / (std::f64::consts::PI * (1.0 + (a - b) * (a - b))))
                    .product(),
                NoiseKind::CauchyMultivariate => (1.0 + r2).powf(-(d as f64 + 1.0) / 2.0),
            };
            lik.push(p);
            xs.extend(x);
        }
        let total: f64 = lik.iter().sum();
        let w: Vec<f64> = lik.iter().map(|p| p / total).collect();
        let wmax = w.iter().cloned().fold(0.0, f64::max);
        (wmax, w, xs)
    }

    #[test]
    fn brute_force_oracle_small_cell() {
        for kind in NoiseKind::ALL {
            for rep in 0..5 {
                let r = run_collapse_rep(kind, 2, 3, rep, 77).unwrap().unwrap();
                let (wmax, w, _) = brute_force(kind, 2, 3, rep, 77);
                assert!((r.w_max - wmax).abs() < 1e-12, "{kind:?} rep {rep}");
                let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
                assert_relative_eq!(r.ess, ess, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_s_min_matches_standardization() {
        let (d, n, rep, seed) = (6, 40, 2, 5);
        let r = run_collapse_rep(NoiseKind::GaussianIid, d, n, rep, seed)
            .unwrap()
            .unwrap();
        let (_, _, xs) = brute_force(NoiseKind::GaussianIid, d, n, rep, seed);
        let model = ModelSpec::standard(d, NoiseKind::GaussianIid).unwrap();
        let mut rng = stream_from_seed(rep_seed(seed, NoiseKind::GaussianIid, d, n, rep));
        let obs = sample_observation(&model, &mut rng).unwrap();
        let spec = spectral_decompose(&model).unwrap();
        let ens = Ensemble::from_rows(d, xs).unwrap();
        let scores = standardize_gaussian(&model, &spec, &ens, &obs)
            .unwrap()
            .scores;
        let s_min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(r.s_min.unwrap(), s_min, max_relative = 1e-10);
    }

    #[test]
    fn cauchy_iid_s_min_is_oriented_max_score() {
        let (d, n, rep, seed) = (4, 30, 1, 9);
        let kind = NoiseKind::CauchyIid;
        let r = run_collapse_rep(kind, d, n, rep, seed).unwrap().unwrap();
        let mut rng = stream_from_seed(rep_seed(seed, kind, d, n, rep));
        let obs = sample_observation(&ModelSpec::standard(d, kind).unwrap(), &mut rng).unwrap();
        let xs: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let ens = Ensemble::from_rows(d, xs.clone()).unwrap();
        let st = standardize_iid(&ens, &obs, &CauchyPsi, &NormalComponent::standard()).unwrap();
        let s_max = st.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(r.s_min.unwrap(), -s_max, max_relative = 1e-9);
        let direct = log_kernel_cauchy_iid(&obs.y, &xs[..d]).unwrap();
        assert!(direct.is_finite());
    }

    #[test]
    fn records_are_reproducible_in_isolation() {
        let cell = run_collapse_cell("t", NoiseKind::CauchyMultivariate, 5, 50, 8, 21).unwrap();
        for r in &cell.records {
            let again = run_collapse_rep(NoiseKind::CauchyMultivariate, 5, 50, r.rep, 21)
                .unwrap()
                .unwrap();
            assert_eq!(*r, again);
            assert!(r.z0.is_some() && r.s_min.is_none());
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_collapse_cell("t", NoiseKind::CauchyIid, 8, 200, 12, 4).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn summary_invariants() {
        let c = run_collapse_cell("t", NoiseKind::GaussianIid, 10, 316, 60, 1).unwrap();
        let s = &c.summary;
        assert_eq!(s.successful, 60);
        let lo = c.w_max().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(s.mean_wmax >= lo && s.mean_wmax <= 1.0);
        assert!(
            s.q05 <= s.q25 && s.q25 <= s.median_wmax && s.median_wmax <= s.q75 && s.q75 <= s.q95
        );
        assert!(c.records.iter().all(|r| r.w_max > 0.0 && r.w_max <= 1.0));
        assert!(s.predicted_rate.unwrap() > 0.0);
    }
}

//! Empirical check of uniform normal approximation for score distributions
//! on a moderate-deviation window `[−d^η, d^η]`.

use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_sf};
use crate::stats::{ecdf_sorted, sorted_copy};

pub const DEFAULT_ETA: f64 = 0.15;
pub const MIN_SAMPLE: usize = 10_000;
const GRID_POINTS: usize = 81;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPoint {
    pub s: f64,
    pub resolvable: bool,
    /// `Ĝ(s)/Φ(s) − 1`
    pub lower_dev: f64,
    /// `(1 − Ĝ(s))/Φ̄(s) − 1`
    pub upper_dev: f64,
    /// Three-sigma binomial half-widths of the two relative deviations.
    pub lower_band: f64,
    pub upper_band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    pub d: usize,
    pub eta: f64,
    pub half_width: f64,
    pub sample_size: usize,
    pub grid: Vec<WindowPoint>,
    /// Largest absolute deviation over resolvable points.
    pub sup_deviation: f64,
    /// True when every resolvable deviation lies inside its band.
    pub within_bands: bool,
}

pub fn normal_window_check(scores: &[f64], d: usize, eta: f64) -> Result<WindowReport> {
    if !(eta > 0.0 && eta < 1.0 / 6.0) {
        return Err(Error::arg(format!("eta must lie in (0, 1/6), got {eta}")));
    }
    if d == 0 {
        return Err(Error::arg("d must be at least 1"));
    }
    if scores.len() < MIN_SAMPLE {
        return Err(Error::arg(format!(
            "window check needs at least {MIN_SAMPLE} scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let sorted = sorted_copy(scores);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::arg("scores are constant"));
    }
    let n = sorted.len() as f64;
    let half_width = (d as f64).powf(eta);
    let floor = 10.0 / n;

    let grid: Vec<WindowPoint> = (0..GRID_POINTS)
        .map(|i| {
            let s = -half_width + 2.0 * half_width * i as f64 / (GRID_POINTS - 1) as f64;
            let (p, q) = (normal_cdf(s), normal_sf(s));
            let g = ecdf_sorted(&sorted, s);
            WindowPoint {
                s,
                resolvable: p.min(q) >= floor,
                lower_dev: g / p - 1.0,
                upper_dev: (1.0 - g) / q - 1.0,
                lower_band: 3.0 * (p * q / n).sqrt() / p,
                upper_band: 3.0 * (p * q / n).sqrt() / q,
            }
        })
        .collect();

    let resolved: Vec<&WindowPoint> = grid.iter().filter(|p| p.resolvable).collect();
    if resolved.is_empty() {
        return Err(Error::arg(
            "no grid point is resolvable at this sample size",
        ));
    }
    let sup_deviation = resolved
        .iter()
        .map(|p| p.lower_dev.abs().max(p.upper_dev.abs()))
        .fold(0.0, f64::max);
    let within_bands = resolved
        .iter()
        .all(|p| p.lower_dev.abs() <= p.lower_band && p.upper_dev.abs() <= p.upper_band);
    Ok(WindowReport {
        d,
        eta,
        half_width,
        sample_size: scores.len(),
        grid,
        sup_deviation,
        within_bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::standardize_gaussian;
    use crate::model::{
        sample_observation, sample_prior, spectral_decompose, ModelSpec, NoiseKind,
    };
    use crate::rng::stream_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_normal_scores_pass() {
        let mut r = stream_from_seed(21);
        let s: Vec<f64> = (0..1_000_000).map(|_| r.sample(StandardNormal)).collect();
        let rep = normal_window_check(&s, 100, DEFAULT_ETA).unwrap();
        assert!(rep.sup_deviation < 0.1, "{}", rep.sup_deviation);
        assert_eq!(rep.grid.len(), GRID_POINTS);
        assert!((rep.half_width - 100f64.powf(0.15)).abs() < 1e-12);
    }

    fn gaussian_scores(d: usize, total: usize, seed: u64) -> Vec<f64> {
        let model = ModelSpec::standard(d, NoiseKind::GaussianIid).unwrap();
        let spec = spectral_decompose(&model).unwrap();
        let mut r = stream_from_seed(seed);
        let obs = sample_observation(&model, &mut r).unwrap();
        let ens = sample_prior(&model, total, &mut r).unwrap();
        standardize_gaussian(&model, &spec, &ens, &obs)
            .unwrap()
            .scores
    }

    #[test]
    fn deviation_shrinks_with_dimension() {
        let small =
            normal_window_check(&gaussian_scores(20, 200_000, 22), 20, DEFAULT_ETA).unwrap();
        let large =
            normal_window_check(&gaussian_scores(200, 200_000, 23), 200, DEFAULT_ETA).unwrap();
        assert!(
            large.sup_deviation < small.sup_deviation,
            "d'=200 {} vs d'=20 {}",
            large.sup_deviation,
            small.sup_deviation
        );
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(normal_window_check(&vec![1.0; 20_000], 10, 0.1).is_err());
        assert!(normal_window_check(&[0.0, 1.0], 10, 0.1).is_err());
        let s: Vec<f64> = (0..20_000).map(|i| i as f64).collect();
        assert!(normal_window_check(&s, 10, 0.2).is_err());
        assert!(normal_window_check(&s, 10, 0.0).is_err());
    }
}

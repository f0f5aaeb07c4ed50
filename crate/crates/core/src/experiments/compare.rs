//! Observed collapse statistics against the asymptotic predictors.

use serde::Serialize;

use super::collapse::CellResult;
use crate::asymptotics::gaussian_collapse_rate;
use crate::error::{Error, Result};
use crate::model::NoiseKind;
use crate::stats::loglog_slope;

pub const MIN_REPS_FOR_COMPARISON: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub experiment: String,
    pub kind: NoiseKind,
    pub d: usize,
    pub n: usize,
    pub mean_t_observed: f64,
    pub predicted: f64,
    /// `mean_t_observed / predicted`
    pub ratio: f64,
    /// `σ²` behind `predicted` (absent for the multivariate Cauchy predictor).
    pub sigma_sq_used: Option<f64>,
    pub fully_collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryComparison {
    pub rows: Vec<ComparisonRow>,
    /// Least-squares slope of `log mean_t_observed` against `log d`.
    pub slope_vs_d: Option<f64>,
}

/// Compares each cell's mean `T` with its predictor. Gaussian and iid cells use
/// `√(2 log n/(σ² d))` with the supplied `σ²` or the per-cell plug-in average;
/// multivariate-Cauchy cells use the mean of the `z0`-conditional predictor.
pub fn compare_theory(cells: &[CellResult], sigma_sq: Option<f64>) -> Result<TheoryComparison> {
    if let Some(s) = sigma_sq {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::arg(format!("sigma_sq must be positive, got {s}")));
        }
    }
    let mut rows = Vec::with_capacity(cells.len());
    for c in cells {
        if c.summary.successful < MIN_REPS_FOR_COMPARISON {
            return Err(Error::arg(format!(
                "cell d={} n={} has {} successful reps; at least {MIN_REPS_FOR_COMPARISON} needed",
                c.d, c.n, c.summary.successful
            )));
        }
        let (predicted, sigma_sq_used) = match c.kind {
            NoiseKind::CauchyMultivariate => (
                c.summary
                    .predicted_rate
                    .ok_or_else(|| Error::arg("multivariate Cauchy cell has no predictor"))?,
                None,
            ),
            _ => {
                let s = sigma_sq
                    .or(c.summary.mean_sigma_sq_hat)
                    .ok_or_else(|| Error::arg("no sigma_sq available for the rate"))?;
                (gaussian_collapse_rate(c.n as f64, c.d as f64, s)?, Some(s))
            }
        };
        let mean_t = c.summary.mean_t_observed;
        let fully_collapsed = mean_t == 0.0;
        rows.push(ComparisonRow {
            experiment: c.experiment.clone(),
            kind: c.kind,
            d: c.d,
            n: c.n,
            mean_t_observed: mean_t,
            predicted,
            ratio: if fully_collapsed {
                0.0
            } else {
                mean_t / predicted
            },
            sigma_sq_used,
            fully_collapsed,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_t_observed > 0.0)
        .map(|r| (r.d as f64, r.mean_t_observed))
        .collect();
    Ok(TheoryComparison {
        slope_vs_d: loglog_slope(&pts),
        rows,
    })
}

//! Evaluates every asymptotic predictor for one `(n, d)` setting.

use serde::Serialize;

use super::config::TheoryRequest;
use crate::asymptotics::{
    cauchy_average_rate, cauchy_predicted_t, expected_t_large_separation, expected_t_normal_closed_form,
    gaussian_collapse_rate, gumbel_min_approx, AverageRate, CauchyCollapsePredictor, GumbelMinApprox,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub request: TheoryRequest,
    pub gaussian_rate: f64,
    pub gumbel: GumbelMinApprox,
    /// Minimum score the conditional expectations below are evaluated at.
    pub s1: f64,
    pub expected_t_given_s1: f64,
    pub expected_t_large_separation: Option<f64>,
    pub cauchy_average_rate: AverageRate,
    pub cauchy_given_z0: Option<CauchyCollapsePredictor>,
}

pub fn theory_report(req: &TheoryRequest) -> Result<TheoryReport> {
    let gumbel = gumbel_min_approx(req.n)?;
    let s1 = req.s1.unwrap_or(gumbel.mean);
    let sigma = req.sigma_sq.sqrt();
    Ok(TheoryReport {
        request: req.clone(),
        gaussian_rate: gaussian_collapse_rate(req.n, req.d, req.sigma_sq)?,
        gumbel,
        s1,
        expected_t_given_s1: expected_t_normal_closed_form(s1, sigma, req.d, req.n)?,
        expected_t_large_separation: expected_t_large_separation(s1, sigma, req.d, req.n).ok(),
        cauchy_average_rate: cauchy_average_rate(req.n, req.d, req.eps)?,
        cauchy_given_z0: req.z0.map(|z| cauchy_predicted_t(req.n, req.d, z)).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_defaults_to_gumbel_mean() {
        let req = TheoryRequest {
            n: 1e4,
            d: 100.0,
            sigma_sq: 2.0,
            s1: None,
            z0: Some(1.0),
            eps: 0.1,
        };
        let r = theory_report(&req).unwrap();
        assert_eq!(r.s1, r.gumbel.mean);
        assert!((r.gaussian_rate - (2.0 * 1e4f64.ln() / 200.0).sqrt()).abs() < 1e-12);
        assert!(r.cauchy_given_z0.is_some());
        assert!(serde_json::to_string(&r).unwrap().contains("gaussian_rate"));
    }
}

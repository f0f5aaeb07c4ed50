//! Lyapunov-type moment bounds for the standardized Gaussian score terms.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::Stream;
use crate::special::normal_pdf;

fn ceil_half_factorial(k: u32) -> f64 {
    (1..=k.div_ceil(2)).map(f64::from).product()
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `E|Z|^k = 2^{k/2} Γ((k+1)/2) / √π`
pub fn normal_abs_moment(k: u32) -> f64 {
    let kf = f64::from(k);
    2f64.powf(kf / 2.0) * libm::tgamma((kf + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// `2^{k/2} ⌈k/2⌉!`
pub fn abs_normal_moment_bound(k: u32) -> f64 {
    2f64.powf(f64::from(k) / 2.0) * ceil_half_factorial(k)
}

/// `4^k (⌈k/2⌉!)²`
pub fn centered_chi_sq_moment_bound(k: u32) -> f64 {
    let c = ceil_half_factorial(k);
    4f64.powi(k as i32) * c * c
}

/// `E|(Z + μ)² − (1 + μ²)|^k` by quadrature, split at the kinks of the integrand.
pub fn centered_chi_sq_abs_moment(mu: f64, k: u32) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::NonFinite("mu"));
    }
    let c = 1.0 + mu * mu;
    let f = |z: f64| ((z + mu).powi(2) - c).abs().powi(k as i32) * normal_pdf(z);
    let r = c.sqrt();
    let (r1, r2) = (-mu - r, -mu + r);
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-12,
        max_intervals: 4000,
    };
    let lo = r1.min(-40.0);
    let hi = r2.max(40.0);
    let mut total = 0.0;
    for (a, b) in [(lo, r1), (r1, r2), (r2, hi)] {
        if b > a {
            total += integrate(f, a, b, tol)?.value;
        }
    }
    Ok(total)
}

/// `(Σ|μ_j|^k, (M/4)^{k/2} d)` for `d` equal entries with `μ_j² = M/4`, the
/// equality case of the power-mean bound.
pub fn power_mean_equal_case(m_upper: f64, d: usize, k: u32) -> (f64, f64) {
    let mu = (m_upper / 4.0).sqrt();
    let lhs = d as f64 * mu.powi(k as i32);
    let rhs = (m_upper / 4.0).powf(f64::from(k) / 2.0) * d as f64;
    (lhs, rhs)
}

/// `C = 8 max(1, √(M/8)) / (δ² √m)`, assembled from the triangle, Gaussian
/// moment and power-mean inequalities with `λ_j ∈ [δ, 1/δ]`, `σ_d² ≥ m` and
/// `max_j μ_j² ≤ M/4`.
pub fn moment_bound_constant(delta: f64, m_lower: f64, m_upper: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) || !(m_lower > 0.0) || !(m_upper >= m_lower) {
        return Err(Error::arg(
            "moment bound constant needs 0 < delta <= 1 and 0 < m <= M",
        ));
    }
    Ok(8.0 * (m_upper / 8.0).sqrt().max(1.0) / (delta * delta * m_lower.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundReport {
    pub k: u32,
    /// Monte Carlo estimate of `(dσ_d²)^{−k/2} Σ λ_j^{2k} E|(Z_j+μ_j)² − (1+μ_j²)|^k`.
    pub lhs: f64,
    pub mc_stderr: f64,
    /// The same quantity with each expectation computed by quadrature.
    pub lhs_quadrature: f64,
    /// `C^k k! d^{−(k−2)/2}`
    pub rhs: f64,
    pub c_used: f64,
    pub delta: f64,
    pub m_lower: f64,
    pub m_upper: f64,
    pub pass: bool,
    /// Set when the standard error exceeds 5% of the estimate.
    pub low_precision: bool,
}

pub fn moment_bound_check(
    lambdas: &[f64],
    mus: &[f64],
    k: u32,
    mc_n: usize,
    rng: &mut Stream,
) -> Result<MomentBoundReport> {
    if k < 3 {
        return Err(Error::arg(format!(
            "moment order must be at least 3, got {k}"
        )));
    }
    if lambdas.is_empty() || lambdas.len() != mus.len() {
        return Err(Error::arg(
            "lambdas and mus must be nonempty and of equal length",
        ));
    }
    if mc_n < 2 {
        return Err(Error::arg("mc_n must be at least 2"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) || mus.iter().any(|m| !m.is_finite()) {
        return Err(Error::arg("lambdas must be positive and mus finite"));
    }
    let d = lambdas.len();
    let sigma_sq = super::sigma_dprime_sq(lambdas, mus)?;
    let lmin = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let lmax = lambdas.iter().cloned().fold(0.0, f64::max);
    let delta = lmin.min(1.0 / lmax).min(1.0);
    let max_mu_sq = mus.iter().map(|m| m * m).fold(0.0, f64::max);
    let m_lower = sigma_sq;
    let m_upper = sigma_sq.max(4.0 * max_mu_sq);
    let c = moment_bound_constant(delta, m_lower, m_upper)?;

    let ki = k as i32;
    let norm = (d as f64 * sigma_sq).powf(-f64::from(k) / 2.0);
    let coef: Vec<f64> = lambdas.iter().map(|l| l.powi(2 * ki)).collect();

    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..mc_n {
        let mut v = 0.0;
        for (mu, w) in mus.iter().zip(&coef) {
            let z: f64 = rng.sample(StandardNormal);
            v += w * ((z + mu).powi(2) - (1.0 + mu * mu)).abs().powi(ki);
        }
        s1 += v;
        s2 += v * v;
    }
    let nf = mc_n as f64;
    let mean_v = s1 / nf;
    let var_v = ((s2 - nf * mean_v * mean_v) / (nf - 1.0)).max(0.0);
    let lhs = norm * mean_v;
    let mc_stderr = norm * (var_v / nf).sqrt();

    let mut exact = 0.0;
    for (mu, w) in mus.iter().zip(&coef) {
        exact += w * centered_chi_sq_abs_moment(*mu, k)?;
    }
    let rhs = c.powi(ki) * factorial(k) * (d as f64).powf(-(f64::from(k) - 2.0) / 2.0);
    Ok(MomentBoundReport {
        k,
        lhs,
        mc_stderr,
        lhs_quadrature: norm * exact,
        rhs,
        c_used: c,
        delta,
        m_lower,
        m_upper,
        pass: lhs <= rhs + 3.0 * mc_stderr,
        low_precision: mc_stderr > 0.05 * lhs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubBoundCheck {
    pub k: u32,
    pub label: &'static str,
    /// Exact normal moment or quadrature value.
    pub value: f64,
    pub mc_value: f64,
    pub mc_stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `E|Z|^k ≤ 2^{k/2}⌈k/2⌉!` and `E|Z² − 1|^k ≤ 4^k(⌈k/2⌉!)²` for `k = 1..=max_k`.
pub fn sub_bound_checks(max_k: u32, mc_n: usize, rng: &mut Stream) -> Result<Vec<SubBoundCheck>> {
    if max_k == 0 || mc_n < 2 {
        return Err(Error::arg(
            "sub_bound_checks needs max_k >= 1 and mc_n >= 2",
        ));
    }
    let zs: Vec<f64> = (0..mc_n).map(|_| rng.sample(StandardNormal)).collect();
    let mc = |f: &dyn Fn(f64) -> f64| {
        let vals: Vec<f64> = zs.iter().map(|&z| f(z)).collect();
        let m = crate::stats::mean(&vals);
        (m, (crate::stats::variance(&vals) / mc_n as f64).sqrt())
    };
    let mut out = Vec::new();
    for k in 1..=max_k {
        let ki = k as i32;
        let value = normal_abs_moment(k);
        let (mc_value, mc_stderr) = mc(&|z: f64| z.abs().powi(ki));
        let bound = abs_normal_moment_bound(k);
        out.push(SubBoundCheck {
            k,
            label: "abs-normal",
            value,
            mc_value,
            mc_stderr,
            bound,
            pass: value <= bound && mc_value <= bound + 3.0 * mc_stderr,
        });
        let value = centered_chi_sq_abs_moment(0.0, k)?;
        let (mc_value, mc_stderr) = mc(&|z: f64| (z * z - 1.0).abs().powi(ki));
        let bound = centered_chi_sq_moment_bound(k);
        out.push(SubBoundCheck {
            k,
            label: "centered-chi-square",
            value,
            mc_value,
            mc_stderr,
            bound,
            pass: value <= bound && mc_value <= bound + 3.0 * mc_stderr,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;
    use approx::assert_relative_eq;

    #[test]
    fn known_normal_moments() {
        for (k, v) in [
            (1, (2.0 / std::f64::consts::PI).sqrt()),
            (2, 1.0),
            (4, 3.0),
            (6, 15.0),
            (8, 105.0),
        ] {
            assert_relative_eq!(normal_abs_moment(k), v, max_relative = 1e-13);
        }
        assert_relative_eq!(
            normal_abs_moment(3),
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-13
        );
        assert_eq!(abs_normal_moment_bound(4), 8.0);
        assert_eq!(centered_chi_sq_moment_bound(3), 256.0);
    }

    #[test]
    fn centered_moment_matches_polynomial_for_even_k() {
        // (Z+μ)² − (1+μ²) = Z² − 1 + 2μZ; even powers have closed forms
        let mu: f64 = 0.7;
        // E(Z² − 1 + 2μZ)² = 2 + 4μ²
        assert_relative_eq!(
            centered_chi_sq_abs_moment(mu, 2).unwrap(),
            2.0 + 4.0 * mu * mu,
            max_relative = 1e-10
        );
        // E(Z² − 1)⁴ = 60
        assert_relative_eq!(
            centered_chi_sq_abs_moment(0.0, 4).unwrap(),
            60.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn centered_moment_matches_monte_carlo() {
        let mut r = stream_from_seed(3);
        let n = 1_000_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = r.sample(StandardNormal);
                (z * z - 1.0).abs().powi(3)
            })
            .collect();
        let m = crate::stats::mean(&vals);
        let se = (crate::stats::variance(&vals) / n as f64).sqrt();
        let q = centered_chi_sq_abs_moment(0.0, 3).unwrap();
        assert!((m - q).abs() < 4.0 * se, "mc {m} quad {q}");
        assert!(q < centered_chi_sq_moment_bound(3));
    }

    #[test]
    fn eq29_equality_case() {
        for k in 3..=6 {
            let (l, r) = power_mean_equal_case(2.4, 17, k);
            assert_relative_eq!(l, r, max_relative = 1e-13);
        }
    }

    #[test]
    fn bound_holds_for_unit_case() {
        let mut r = stream_from_seed(4);
        let rep = moment_bound_check(&[1.0; 10], &[0.0; 10], 3, 200_000, &mut r).unwrap();
        assert!(rep.pass && !rep.low_precision);
        assert!((rep.lhs - rep.lhs_quadrature).abs() < 4.0 * rep.mc_stderr);
        assert_eq!(rep.delta, 1.0);
        assert_relative_eq!(rep.m_lower, 2.0);
    }

    #[test]
    fn argument_errors() {
        let mut r = stream_from_seed(5);
        assert!(moment_bound_check(&[1.0], &[0.0], 2, 10, &mut r).is_err());
        assert!(moment_bound_check(&[1.0, 1.0], &[0.0], 3, 10, &mut r).is_err());
        assert!(moment_bound_check(&[0.0], &[0.0], 3, 10, &mut r).is_err());
        assert!(moment_bound_constant(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn sub_bounds_hold_through_order_eight() {
        let mut r = stream_from_seed(6);
        let checks = sub_bound_checks(8, 200_000, &mut r).unwrap();
        assert_eq!(checks.len(), 16);
        assert!(checks.iter().all(|c| c.pass));
    }
}

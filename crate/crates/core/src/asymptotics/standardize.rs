//! Standardized scores for the Gaussian (rotated) and iid-kernel settings.

use crate::error::{Error, Result};
use crate::model::{Ensemble, ModelSpec, Observation, ScalarLogDensity, SpectralForm};
use crate::quadrature::{integrate_real_line, Tolerance};
use crate::special::normal_pdf;

#[derive(Debug, Clone)]
pub struct GaussianStandardization {
    /// `ξ = D⁻¹Qᵀ(Y − Hμ_X)`, the conditional means `μ_j` of `W_i`.
    pub xi: Vec<f64>,
    pub sigma_dprime_sq: f64,
    /// `(2 Σ λ_j⁴ (1 + 2μ_j²))^{1/2}`
    pub scale: f64,
    /// `Σ λ_j² (1 + μ_j²)`
    pub location: f64,
    pub scores: Vec<f64>,
}

impl GaussianStandardization {
    /// Maps a signal-subspace residual energy `Σ_j λ_j² W_ij²` to its score.
    pub fn score_of(&self, signal_energy: f64) -> f64 {
        (signal_energy - self.location) / self.scale
    }
}

/// `(2/d′) Σ λ_j⁴ (1 + 2μ_j²)`
pub fn sigma_dprime_sq(lambdas: &[f64], xi: &[f64]) -> Result<f64> {
    if lambdas.is_empty() {
        return Err(Error::arg("sigma_dprime_sq needs at least one eigenvalue"));
    }
    if lambdas.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            what: "xi",
            expected: lambdas.len(),
            got: xi.len(),
        });
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::arg("all lambdas must be positive"));
    }
    let sum: f64 = lambdas
        .iter()
        .zip(xi)
        .map(|(l, m)| l.powi(4) * (1.0 + 2.0 * m * m))
        .sum();
    Ok(2.0 * sum / lambdas.len() as f64)
}

/// Scores `S_i = Σ_j λ_j²(W_ij² − (1 + μ_j²)) / (2Σ_j λ_j⁴(1 + 2μ_j²))^{1/2}`.
///
/// `W_i = ξ − V_i = D⁻¹Qᵀ(Y − HX_i)` on the signal subspace; the residual
/// component orthogonal to it is common to every particle and is dropped.
/// Small scores carry large weights.
pub fn standardize_gaussian(
    model: &ModelSpec,
    spec: &SpectralForm,
    ensemble: &Ensemble,
    obs: &Observation,
) -> Result<GaussianStandardization> {
    let d = model.d();
    if obs.y.len() != d {
        return Err(Error::DimensionMismatch {
            what: "y",
            expected: d,
            got: obs.y.len(),
        });
    }
    if ensemble.q() != model.q() {
        return Err(Error::DimensionMismatch {
            what: "ensemble width",
            expected: model.q(),
            got: ensemble.q(),
        });
    }
    let h_mean = model.operator().apply(model.prior_mean().as_slice());
    let centered: Vec<f64> = obs.y.iter().zip(&h_mean).map(|(a, b)| a - b).collect();
    let (rot_y, _) = spec.rotate(&centered);
    let xi: Vec<f64> = rot_y
        .iter()
        .zip(&spec.lambdas)
        .map(|(r, l)| r / l)
        .collect();

    let location: f64 = spec
        .lambdas
        .iter()
        .zip(&xi)
        .map(|(l, m)| l * l * (1.0 + m * m))
        .sum();
    let sd_sq = sigma_dprime_sq(&spec.lambdas, &xi)?;
    let scale = (sd_sq * spec.d_prime as f64).sqrt();
    if !(scale > 0.0) {
        return Err(Error::arg("standardization scale is zero"));
    }

    let mut hx = vec![0.0; d];
    let mut resid = vec![0.0; d];
    let scores = ensemble
        .particles()
        .map(|x| {
            model.operator().apply_into(x, &mut hx);
            for ((r, a), b) in resid.iter_mut().zip(&obs.y).zip(&hx) {
                *r = a - b;
            }
            let (rot, _) = spec.rotate(&resid);
            let energy: f64 = rot.iter().map(|v| v * v).sum();
            (energy - location) / scale
        })
        .collect();

    Ok(GaussianStandardization {
        xi,
        sigma_dprime_sq: sd_sq,
        scale,
        location,
        scores,
    })
}

/// Density `g` of the iid prior components.
pub trait ComponentPrior: Sync {
    fn pdf(&self, x: f64) -> f64;
    /// Rough location and spread, used to place quadrature nodes.
    fn center(&self) -> f64 {
        0.0
    }
    fn spread(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormalComponent {
    pub mean: f64,
    pub sd: f64,
}

impl NormalComponent {
    pub fn standard() -> Self {
        NormalComponent { mean: 0.0, sd: 1.0 }
    }
}

impl ComponentPrior for NormalComponent {
    fn pdf(&self, x: f64) -> f64 {
        normal_pdf((x - self.mean) / self.sd) / self.sd
    }
    fn center(&self) -> f64 {
        self.mean
    }
    fn spread(&self) -> f64 {
        self.sd
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    pub mu: f64,
    pub sigma_sq: f64,
}

const MOMENT_TOL: Tolerance = Tolerance {
    abs: 1e-10,
    rel: 1e-12,
    max_intervals: 4000,
};

/// `μ(y) = E ψ(y − X)` and `σ²(y) = E ψ²(y − X) − μ²(y)` with `X ~ g`.
pub fn kernel_moments<P, G>(psi: &P, y: f64, g: &G) -> Result<KernelMoments>
where
    P: ScalarLogDensity + ?Sized,
    G: ComponentPrior + ?Sized,
{
    let weighted = |power: i32| {
        move |x: f64| {
            let p = g.pdf(x);
            if p == 0.0 {
                0.0
            } else {
                psi.ln_f(y - x).powi(power) * p
            }
        }
    };
    let first = integrate_real_line(weighted(1), g.center(), g.spread(), MOMENT_TOL)
        .map_err(|e| Error::Quadrature(format!("first moment at y = {y}: {e}")))?;
    let second = integrate_real_line(weighted(2), g.center(), g.spread(), MOMENT_TOL)
        .map_err(|e| Error::Quadrature(format!("second moment at y = {y}: {e}")))?;
    let mu = first.value;
    Ok(KernelMoments {
        mu,
        sigma_sq: (second.value - mu * mu).max(0.0),
    })
}

#[derive(Debug, Clone)]
pub struct IidStandardization {
    pub mu_y: Vec<f64>,
    pub sigmasq_y: Vec<f64>,
    /// `S_i = Σ_j (V_ij − μ(y_j)) / (Σ_j σ²(y_j))^{1/2}`; large scores carry
    /// large weights.
    pub scores: Vec<f64>,
    /// `(Σ_j σ²(y_j) / d)^{1/2}`
    pub sigma_hat: f64,
}

impl IidStandardization {
    pub fn total_mu(&self) -> f64 {
        self.mu_y.iter().sum()
    }

    pub fn total_sd(&self) -> f64 {
        self.sigmasq_y.iter().sum::<f64>().sqrt()
    }
}

/// Per-coordinate moments for a data vector, shared by [`standardize_iid`] and
/// the experiment runner.
pub fn coordinate_moments<P, G>(psi: &P, y: &[f64], g: &G) -> Result<(Vec<f64>, Vec<f64>)>
where
    P: ScalarLogDensity + ?Sized,
    G: ComponentPrior + ?Sized,
{
    let mut mu = Vec::with_capacity(y.len());
    let mut var = Vec::with_capacity(y.len());
    for &yj in y {
        let m = kernel_moments(psi, yj, g)?;
        mu.push(m.mu);
        var.push(m.sigma_sq);
    }
    Ok((mu, var))
}

/// Standardized iid-kernel scores for the `H = I` setting.
pub fn standardize_iid<P, G>(
    ensemble: &Ensemble,
    obs: &Observation,
    psi: &P,
    g: &G,
) -> Result<IidStandardization>
where
    P: ScalarLogDensity + ?Sized,
    G: ComponentPrior + ?Sized,
{
    if ensemble.q() != obs.y.len() {
        return Err(Error::DimensionMismatch {
            what: "ensemble width",
            expected: obs.y.len(),
            got: ensemble.q(),
        });
    }
    let (mu_y, sigmasq_y) = coordinate_moments(psi, &obs.y, g)?;
    let total_var: f64 = sigmasq_y.iter().sum();
    if !(total_var > 0.0) {
        return Err(Error::arg("iid standardization has zero total variance"));
    }
    let sd = total_var.sqrt();
    let scores = ensemble
        .particles()
        .map(|x| {
            obs.y
                .iter()
                .zip(x)
                .zip(&mu_y)
                .map(|((yj, xj), m)| psi.ln_f(yj - xj) - m)
                .sum::<f64>()
                / sd
        })
        .collect();
    Ok(IidStandardization {
        sigma_hat: (total_var / obs.y.len() as f64).sqrt(),
        mu_y,
        sigmasq_y,
        scores,
    })
}

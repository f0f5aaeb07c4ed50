//! Observation models `Y = HX + ε`, prior and noise sampling, and the
//! log-likelihood kernels for the Gaussian, iid and multivariate-Cauchy settings.
//!
//! Every kernel returns an *unnormalized* log density: additive constants cancel
//! when the weights are normalized, so only the parts that depend on the
//! particle are kept (the iid built-ins are the exception and carry their full
//! normalizing constant, see [`CauchyPsi`]).

use crate::error::{Error, Result};
use crate::rng::Stream;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Relative eigenvalue cutoff used to decide the numerical rank of cov(HX).
pub const RANK_TOLERANCE: f64 = 1e-10;

const PSD_TOLERANCE: f64 = 1e-12;
const Z0_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum NoiseKind {
    GaussianIid,
    CauchyIid,
    CauchyMultivariate,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [
        NoiseKind::GaussianIid,
        NoiseKind::CauchyIid,
        NoiseKind::CauchyMultivariate,
    ];

    /// Short name used in configs and output files.
    pub fn tag(self) -> &'static str {
        match self {
            NoiseKind::GaussianIid => "gaussian",
            NoiseKind::CauchyIid => "cauchy-iid",
            NoiseKind::CauchyMultivariate => "cauchy-mv",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        NoiseKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub(crate) fn key(self) -> u64 {
        match self {
            NoiseKind::GaussianIid => 1,
            NoiseKind::CauchyIid => 2,
            NoiseKind::CauchyMultivariate => 3,
        }
    }
}

/// The observation operator `H` (d×q).
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Operator {
    pub fn rows(&self) -> usize {
        match self {
            Operator::Identity(d) => *d,
            Operator::Dense(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Operator::Identity(d) => *d,
            Operator::Dense(m) => m.ncols(),
        }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Operator::Identity(d) => DMatrix::identity(*d, *d),
            Operator::Dense(m) => m.clone(),
        }
    }

    /// Writes `Hx` into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Operator::Identity(_) => out.copy_from_slice(x),
            Operator::Dense(m) => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..m.ncols()).map(|c| m[(r, c)] * x[c]).sum();
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        out
    }
}

/// Prior covariance with an identity fast path.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorCovariance {
    Identity,
    /// Dense PSD matrix together with a factor `L` with `L Lᵀ = cov`.
    Dense {
        cov: DMatrix<f64>,
        factor: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    d: usize,
    q: usize,
    h: Operator,
    prior_mean: DVector<f64>,
    prior_cov: PriorCovariance,
    noise_kind: NoiseKind,
    noise_scale: f64,
}

impl ModelSpec {
    /// The setting used throughout the simulations: `H = I_d`, `X ~ N(0, I_d)`,
    /// unit noise scale.
    pub fn standard(d: usize, noise_kind: NoiseKind) -> Result<Self> {
        ModelBuilder::new(d).noise(noise_kind).build()
    }

    pub fn builder(d: usize) -> ModelBuilder {
        ModelBuilder::new(d)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn operator(&self) -> &Operator {
        &self.h
    }
    pub fn prior_mean(&self) -> &DVector<f64> {
        &self.prior_mean
    }
    pub fn prior_cov(&self) -> &PriorCovariance {
        &self.prior_cov
    }
    pub fn noise_kind(&self) -> NoiseKind {
        self.noise_kind
    }
    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn prior_cov_matrix(&self) -> DMatrix<f64> {
        match &self.prior_cov {
            PriorCovariance::Identity => DMatrix::identity(self.q, self.q),
            PriorCovariance::Dense { cov, .. } => cov.clone(),
        }
    }

    /// True when `H = I` and the prior is `N(0, I)`.
    pub fn is_standard(&self) -> bool {
        matches!(self.h, Operator::Identity(_))
            && matches!(self.prior_cov, PriorCovariance::Identity)
            && self.prior_mean.iter().all(|&m| m == 0.0)
    }

    /// cov(HX) = H Σ_X Hᵀ
    pub fn signal_covariance(&self) -> DMatrix<f64> {
        let h = self.h.matrix();
        let c = &h * self.prior_cov_matrix() * h.transpose();
        // symmetrize away rounding
        (&c + c.transpose()) * 0.5
    }

    /// Draws one prior particle into `out` (length q).
    pub fn sample_particle_into(&self, rng: &mut Stream, out: &mut [f64]) {
        match &self.prior_cov {
            PriorCovariance::Identity => {
                for (o, m) in out.iter_mut().zip(self.prior_mean.iter()) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + z;
                }
            }
            PriorCovariance::Dense { factor, .. } => {
                let z: Vec<f64> = (0..self.q).map(|_| rng.sample(StandardNormal)).collect();
                for (r, o) in out.iter_mut().enumerate() {
                    *o = self.prior_mean[r]
                        + (0..self.q).map(|c| factor[(r, c)] * z[c]).sum::<f64>();
                }
            }
        }
    }

    /// Log-likelihood `log p(y | x)` up to an additive constant, including the
    /// noise scale.
    pub fn log_likelihood(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_len("y", self.d, y.len())?;
        check_len("x", self.q, x.len())?;
        let hx = self.h.apply(x);
        let s = self.noise_scale;
        let resid: Vec<f64> = y.iter().zip(&hx).map(|(a, b)| (a - b) / s).collect();
        let zero = vec![0.0; self.d];
        match self.noise_kind {
            NoiseKind::GaussianIid => {
                log_kernel_gaussian(&resid, &zero, &Operator::Identity(self.d))
            }
            NoiseKind::CauchyIid => log_kernel_cauchy_iid(&resid, &zero),
            NoiseKind::CauchyMultivariate => log_kernel_mv_cauchy(&resid, &zero),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelBuilder {
    d: usize,
    q: Option<usize>,
    h: Option<DMatrix<f64>>,
    prior_mean: Option<DVector<f64>>,
    prior_cov: Option<DMatrix<f64>>,
    noise_kind: NoiseKind,
    noise_scale: f64,
}

impl ModelBuilder {
    pub fn new(d: usize) -> Self {
        ModelBuilder {
            d,
            q: None,
            h: None,
            prior_mean: None,
            prior_cov: None,
            noise_kind: NoiseKind::GaussianIid,
            noise_scale: 1.0,
        }
    }

    pub fn state_dim(mut self, q: usize) -> Self {
        self.q = Some(q);
        self
    }
    pub fn operator(mut self, h: DMatrix<f64>) -> Self {
        self.h = Some(h);
        self
    }
    pub fn prior_mean(mut self, m: DVector<f64>) -> Self {
        self.prior_mean = Some(m);
        self
    }
    pub fn prior_cov(mut self, c: DMatrix<f64>) -> Self {
        self.prior_cov = Some(c);
        self
    }
    pub fn noise(mut self, kind: NoiseKind) -> Self {
        self.noise_kind = kind;
        self
    }
    pub fn noise_scale(mut self, s: f64) -> Self {
        self.noise_scale = s;
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        let d = self.d;
        let q = self
            .q
            .or_else(|| self.h.as_ref().map(|h| h.ncols()))
            .unwrap_or(d);
        if d == 0 || q == 0 {
            return Err(Error::InvalidModel("d and q must be at least 1".into()));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "noise_scale must be positive and finite, got {}",
                self.noise_scale
            )));
        }
        let h = match self.h {
            None if d == q => Operator::Identity(d),
            None => {
                return Err(Error::InvalidModel(format!(
                    "an explicit operator is required when d ({d}) != q ({q})"
                )))
            }
            Some(m) => {
                if m.nrows() != d || m.ncols() != q {
                    return Err(Error::InvalidModel(format!(
                        "operator must be {d}x{q}, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("operator"));
                }
                Operator::Dense(m)
            }
        };
        let prior_mean = self.prior_mean.unwrap_or_else(|| DVector::zeros(q));
        check_len("prior_mean", q, prior_mean.len())?;
        if prior_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prior_mean"));
        }
        let prior_cov = match self.prior_cov {
            None => PriorCovariance::Identity,
            Some(c) => {
                let factor = psd_factor(&c, q)?;
                PriorCovariance::Dense { cov: c, factor }
            }
        };
        Ok(ModelSpec {
            d,
            q,
            h,
            prior_mean,
            prior_cov,
            noise_kind: self.noise_kind,
            noise_scale: self.noise_scale,
        })
    }
}

/// Validates symmetry and positive semi-definiteness, returning `L` with
/// `L Lᵀ = cov`.
fn psd_factor(cov: &DMatrix<f64>, q: usize) -> Result<DMatrix<f64>> {
    if cov.nrows() != q || cov.ncols() != q {
        return Err(Error::InvalidModel(format!(
            "prior_cov must be {q}x{q}, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prior_cov"));
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let asym = (cov - cov.transpose())
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if asym > PSD_TOLERANCE * scale {
        return Err(Error::InvalidModel("prior_cov is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::InvalidModel(format!(
            "prior_cov is not positive semi-definite (eigenvalue {min:.3e})"
        )));
    }
    let mut factor = eig.eigenvectors.clone();
    for (c, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        factor.column_mut(c).scale_mut(s);
    }
    Ok(factor)
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

/// n sampled particles, stored row-major (row i is `X_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    q: usize,
    data: Vec<f64>,
}

impl Ensemble {
    pub fn from_rows(q: usize, data: Vec<f64>) -> Result<Self> {
        if q == 0 || data.is_empty() || !data.len().is_multiple_of(q) {
            return Err(Error::arg(format!(
                "ensemble needs at least one row of width {q}, got {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ensemble"));
        }
        Ok(Ensemble { q, data })
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn particles(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.q)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// One realized data vector, with the latent draws that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub truth: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    /// The normal whose absolute value divides the multivariate-Cauchy noise.
    pub z0: Option<f64>,
}

impl Observation {
    pub fn from_data(y: Vec<f64>) -> Self {
        Observation {
            y,
            truth: None,
            noise: None,
            z0: None,
        }
    }
}

/// Draws `n` iid particles from the prior.
pub fn sample_prior(model: &ModelSpec, n: usize, rng: &mut Stream) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::arg("sample_prior needs n >= 1"));
    }
    let q = model.q();
    let mut data = vec![0.0; n * q];
    for row in data.chunks_exact_mut(q) {
        model.sample_particle_into(rng, row);
    }
    Ensemble::from_rows(q, data)
}

/// A multivariate-Cauchy vector `[Z₁…Z_d]/|Z₀|` together with `Z₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvCauchyDraw {
    pub values: Vec<f64>,
    pub z0: f64,
}

/// Maps the normals `(Z₀, Z₁…Z_d)` to the multivariate-Cauchy vector.
pub fn mv_cauchy_from_normals(z0: f64, z: &[f64]) -> Vec<f64> {
    let a = z0.abs();
    z.iter().map(|v| v / a).collect()
}

/// Draws `Z₀` first, then `Z₁…Z_d`.
pub fn sample_mv_cauchy(d: usize, rng: &mut Stream) -> Result<MvCauchyDraw> {
    if d == 0 {
        return Err(Error::arg("sample_mv_cauchy needs d >= 1"));
    }
    let mut z0: f64 = rng.sample(StandardNormal);
    while z0.abs() < Z0_UNDERFLOW {
        log::warn!("redrawing |Z0| = {:e} below underflow guard", z0.abs());
        z0 = rng.sample(StandardNormal);
    }
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(MvCauchyDraw {
        values: mv_cauchy_from_normals(z0, &z),
        z0,
    })
}

/// Standard Cauchy by inversion, `tan(π(U − ½))`.
pub fn sample_cauchy(rng: &mut Stream) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return (PI * (u - 0.5)).tan();
        }
    }
}

/// Draws the noise vector and, for the multivariate Cauchy, `Z₀`.
pub fn sample_noise(model: &ModelSpec, rng: &mut Stream) -> Result<(Vec<f64>, Option<f64>)> {
    let d = model.d();
    let s = model.noise_scale();
    Ok(match model.noise_kind() {
        NoiseKind::GaussianIid => (
            (0..d)
                .map(|_| s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            None,
        ),
        NoiseKind::CauchyIid => ((0..d).map(|_| s * sample_cauchy(rng)).collect(), None),
        NoiseKind::CauchyMultivariate => {
            let draw = sample_mv_cauchy(d, rng)?;
            (
                draw.values.into_iter().map(|v| s * v).collect(),
                Some(draw.z0),
            )
        }
    })
}

/// Draws `X₀` from the prior, then `ε`, and returns `y = H X₀ + ε`.
pub fn sample_observation(model: &ModelSpec, rng: &mut Stream) -> Result<Observation> {
    let mut truth = vec![0.0; model.q()];
    model.sample_particle_into(rng, &mut truth);
    let (noise, z0) = sample_noise(model, rng)?;
    let mut y = model.operator().apply(&truth);
    for (yj, e) in y.iter_mut().zip(&noise) {
        *yj += e;
    }
    Ok(Observation {
        y,
        truth: Some(truth),
        noise: Some(noise),
        z0,
    })
}

fn ensure_finite(what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `−‖y − Hx‖²/2`
pub fn log_kernel_gaussian(y: &[f64], x: &[f64], h: &Operator) -> Result<f64> {
    check_len("y", h.rows(), y.len())?;
    check_len("x", h.cols(), x.len())?;
    ensure_finite("y", y)?;
    ensure_finite("x", x)?;
    let sq: f64 = match h {
        Operator::Identity(_) => y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(),
        Operator::Dense(_) => {
            let hx = h.apply(x);
            y.iter().zip(&hx).map(|(a, b)| (a - b) * (a - b)).sum()
        }
    };
    Ok(-0.5 * sq)
}

/// A scalar log density ψ = log f used by iid kernels.
pub trait ScalarLogDensity: Sync {
    fn ln_f(&self, u: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> ScalarLogDensity for F {
    fn ln_f(&self, u: f64) -> f64 {
        self(u)
    }
}

/// ψ(u) = −u²/2 (unnormalized standard normal).
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianPsi;

impl ScalarLogDensity for GaussianPsi {
    fn ln_f(&self, u: f64) -> f64 {
        -0.5 * u * u
    }
}

/// ψ(u) = −log(π(1 + u²)) (standard Cauchy, normalized).
#[derive(Debug, Clone, Copy, Default)]
pub struct CauchyPsi;

impl ScalarLogDensity for CauchyPsi {
    fn ln_f(&self, u: f64) -> f64 {
        -(PI * (1.0 + u * u)).ln()
    }
}

/// `Σ_j ψ(y_j − x_j)`. A `+∞` term is an error; `−∞` terms are allowed.
pub fn log_kernel_iid<P: ScalarLogDensity + ?Sized>(y: &[f64], x: &[f64], psi: &P) -> Result<f64> {
    check_len("x", y.len(), x.len())?;
    let mut total = 0.0;
    for (a, b) in y.iter().zip(x) {
        let v = psi.ln_f(a - b);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::arg(format!(
                "psi returned {v} at residual {}",
                a - b
            )));
        }
        total += v;
    }
    Ok(total)
}

/// `Σ_j −log(π(1 + (y_j − x_j)²))`, same value as [`log_kernel_iid`] with
/// [`CauchyPsi`] but taking one logarithm per block of factors.
pub fn log_kernel_cauchy_iid(y: &[f64], x: &[f64]) -> Result<f64> {
    check_len("x", y.len(), x.len())?;
    ensure_finite("y", y)?;
    ensure_finite("x", x)?;
    Ok(cauchy_iid_unchecked(y, x))
}

#[inline]
fn cauchy_log_factor(u: f64) -> f64 {
    let f = 1.0 + u * u;
    if f.is_finite() {
        f.ln()
    } else {
        2.0 * u.abs().ln()
    }
}

#[inline]
pub(crate) fn cauchy_iid_unchecked(y: &[f64], x: &[f64]) -> f64 {
    let mut logs = 0.0;
    let mut yc = y.chunks_exact(8);
    let mut xc = x.chunks_exact(8);
    for (a, b) in (&mut yc).zip(&mut xc) {
        let mut f = [0.0f64; 8];
        for k in 0..8 {
            let u = a[k] - b[k];
            f[k] = 1.0 + u * u;
        }
        let p = ((f[0] * f[1]) * (f[2] * f[3])) * ((f[4] * f[5]) * (f[6] * f[7]));
        if p.is_finite() {
            logs += p.ln();
        } else {
            // overflow: fall back to one logarithm per factor
            logs += a.iter().zip(b).map(|(s, t)| cauchy_log_factor(s - t)).sum::<f64>();
        }
    }
    for (a, b) in yc.remainder().iter().zip(xc.remainder()) {
        logs += cauchy_log_factor(a - b);
    }
    -(logs + y.len() as f64 * PI.ln())
}

/// `−((d+1)/2)·log(1 + ‖y − x‖²)`
pub fn log_kernel_mv_cauchy(y: &[f64], x: &[f64]) -> Result<f64> {
    check_len("x", y.len(), x.len())?;
    ensure_finite("y", y)?;
    ensure_finite("x", x)?;
    let sq: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(-0.5 * (y.len() as f64 + 1.0) * sq.ln_1p())
}

/// Eigenstructure of cov(HX) restricted to its numerical range.
#[derive(Debug, Clone)]
pub struct SpectralForm {
    pub d_prime: usize,
    /// Square roots of the nonzero eigenvalues of cov(HX), descending.
    pub lambdas: Vec<f64>,
    /// Orthogonal d×d matrix; its first `d_prime` columns span the signal.
    pub q: DMatrix<f64>,
}

impl SpectralForm {
    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.lambdas))
    }

    /// `Qᵀv` split into signal coordinates and complement norm².
    pub fn rotate(&self, v: &[f64]) -> (Vec<f64>, f64) {
        let d = self.q.nrows();
        let mut signal = Vec::with_capacity(self.d_prime);
        let mut complement = 0.0;
        for c in 0..d {
            let dot: f64 = (0..d).map(|r| self.q[(r, c)] * v[r]).sum();
            if c < self.d_prime {
                signal.push(dot);
            } else {
                complement += dot * dot;
            }
        }
        (signal, complement)
    }

    /// max |QᵀQ − I|
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.q.nrows();
        let g = self.q.transpose() * &self.q - DMatrix::<f64>::identity(d, d);
        g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Relative Frobenius error of `Q diag(λ², 0…) Qᵀ` against `cov`.
    pub fn reconstruction_error(&self, cov: &DMatrix<f64>) -> f64 {
        let d = self.q.nrows();
        let mut diag = DVector::zeros(d);
        for (j, l) in self.lambdas.iter().enumerate() {
            diag[j] = l * l;
        }
        let rec = &self.q * DMatrix::from_diagonal(&diag) * self.q.transpose();
        (rec - cov).norm() / cov.norm().max(f64::MIN_POSITIVE)
    }
}

/// Spectral decomposition of cov(HX) = H Σ_X Hᵀ.
pub fn spectral_decompose(model: &ModelSpec) -> Result<SpectralForm> {
    let d = model.d();
    if model.is_standard() {
        return Ok(SpectralForm {
            d_prime: d,
            lambdas: vec![1.0; d],
            q: DMatrix::identity(d, d),
        });
    }
    let cov = model.signal_covariance();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    if !(largest > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    let cutoff = RANK_TOLERANCE * largest;
    let lambdas: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i])
        .take_while(|&v| v > cutoff)
        .map(f64::sqrt)
        .collect();
    let mut q = DMatrix::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        q.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(SpectralForm {
        d_prime: lambdas.len(),
        lambdas,
        q,
    })
}

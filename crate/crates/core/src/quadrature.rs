//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Infinite ranges are mapped onto (−1, 1) with `x = c + s·t/(1 − t²)`; the
//! Kronrod nodes are interior so the singular endpoints are never evaluated.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_47,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    if !kron.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::arg("integration bounds must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let first = kronrod(&f, a, b)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::from([first]);
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:.3e} above tolerance after {} intervals (value {total:.6e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = kronrod(&f, worst.a, mid)?;
        let right = kronrod(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // guard against drift in the running sums
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Estimate {
        value,
        error,
        intervals: heap.len(),
    })
}

/// Integrates `f` over the real line, with the change of variables centred at
/// `center` and stretched by `scale`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(
    f: F,
    center: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if !(scale > 0.0 && scale.is_finite() && center.is_finite()) {
        return Err(Error::arg(
            "real-line quadrature needs finite center and positive scale",
        ));
    }
    let mapped = |t: f64| {
        let one_minus = 1.0 - t * t;
        let x = center + scale * t / one_minus;
        let jac = scale * (1.0 + t * t) / (one_minus * one_minus);
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            fx * jac
        }
    };
    integrate(mapped, -1.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_pdf;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(
            |x| x.powi(5) - 2.0 * x * x + 1.0,
            -1.0,
            2.0,
            Tolerance::default(),
        )
        .unwrap();
        // 64/6 - 1/6 - 2*(8+1)/3 + 3
        assert_relative_eq!(est.value, 63.0 / 6.0 - 6.0 + 3.0, max_relative = 1e-13);
    }

    #[test]
    fn normal_moments_on_real_line() {
        let tol = Tolerance::default();
        let m0 = integrate_real_line(normal_pdf, 0.0, 1.0, tol)
            .unwrap()
            .value;
        let m2 = integrate_real_line(|x| x * x * normal_pdf(x), 0.0, 1.0, tol)
            .unwrap()
            .value;
        let m4 = integrate_real_line(|x| x.powi(4) * normal_pdf(x), 0.0, 1.0, tol)
            .unwrap()
            .value;
        assert_relative_eq!(m0, 1.0, max_relative = 1e-10);
        assert_relative_eq!(m2, 1.0, max_relative = 1e-10);
        assert_relative_eq!(m4, 3.0, max_relative = 1e-10);
    }

    #[test]
    fn peaked_integrand_needs_subdivision() {
        let est = integrate(
            |x: f64| 1.0 / (1e-4 + x * x),
            -1.0,
            1.0,
            Tolerance::default(),
        )
        .unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert_relative_eq!(est.value, exact, max_relative = 1e-9);
        assert!(est.intervals > 1);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x: f64| 1.0 / x, -1.0, 1.0, Tolerance::default());
        assert!(err.is_err());
    }
}

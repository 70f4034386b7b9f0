//! Interaction potentials given as short trigonometric sums.

use serde::{Deserialize, Serialize};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::torus::PERIOD;

/// `W(x) = Σ_k a_k cos(kx) + b_k sin(kx)`, index `k = 0..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub cosine_coeffs: Vec<f64>,
    #[serde(default)]
    pub sine_coeffs: Vec<f64>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::cosine()
    }
}

/// `cos^{(n)}(kx)` and `sin^{(n)}(kx)` for `c = cos kx`, `s = sin kx`.
#[inline]
fn trig_derivative(c: f64, s: f64, k: f64, order: u32) -> (f64, f64) {
    let f = k.powi(order as i32);
    match order % 4 {
        0 => (f * c, f * s),
        1 => (-f * s, f * c),
        2 => (-f * c, -f * s),
        _ => (f * s, -f * c),
    }
}

impl PotentialSpec {
    pub fn new(cosine_coeffs: Vec<f64>, sine_coeffs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            cosine_coeffs,
            sine_coeffs,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `W(x) = cos x`.
    pub fn cosine() -> Self {
        Self {
            cosine_coeffs: vec![0.0, 1.0],
            sine_coeffs: vec![],
        }
    }

    /// `W ≡ 0`.
    pub fn zero() -> Self {
        Self {
            cosine_coeffs: vec![],
            sine_coeffs: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .cosine_coeffs
            .iter()
            .chain(&self.sine_coeffs)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("potential coefficients must be finite".into()));
        }
        if self.k_max() > 16 {
            return Err(Error::Config(format!(
                "potential has {} modes; at most 16 are supported",
                self.k_max()
            )));
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.cosine_coeffs.len().max(self.sine_coeffs.len()).saturating_sub(1)
    }

    /// `(a_k, b_k)`, zero beyond the stored range.
    pub fn coeff(&self, k: usize) -> (f64, f64) {
        (
            self.cosine_coeffs.get(k).copied().unwrap_or(0.0),
            self.sine_coeffs.get(k).copied().unwrap_or(0.0),
        )
    }

    /// True when `W′ ≡ 0`.
    pub fn is_flat(&self) -> bool {
        (1..=self.k_max()).all(|k| {
            let (a, b) = self.coeff(k);
            a == 0.0 && b == 0.0
        })
    }

    /// `W^{(order)}(x)`.
    pub fn derivative(&self, x: f64, order: u32) -> f64 {
        let mut acc = if order == 0 { self.coeff(0).0 } else { 0.0 };
        for k in 1..=self.k_max() {
            let (a, b) = self.coeff(k);
            let kx = k as f64 * x;
            let (dc, ds) = trig_derivative(kx.cos(), kx.sin(), k as f64, order);
            acc += a * dc + b * ds;
        }
        acc
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// `Σ_k k^order √(a_k² + b_k²)`, an upper bound for `sup|W^{(order)}|`.
    pub fn derivative_bound(&self, order: u32) -> f64 {
        (1..=self.k_max())
            .map(|k| {
                let (a, b) = self.coeff(k);
                (k as f64).powi(order as i32) * a.hypot(b)
            })
            .sum()
    }

    /// Convolution `W ∗ μ` with a measure of unit mass whose moments are
    /// `c_k = ∫ cos(ky) dμ`, `s_k = ∫ sin(ky) dμ` (index `k ≥ 1`; entry 0
    /// is ignored). The result is again a trigonometric sum.
    pub fn convolved(&self, c: &[f64], s: &[f64]) -> PotentialSpec {
        let km = self.k_max();
        let mut a = vec![0.0; km + 1];
        let mut b = vec![0.0; km + 1];
        a[0] = self.coeff(0).0;
        for k in 1..=km {
            let (ak, bk) = self.coeff(k);
            let (ck, sk) = (c[k], s[k]);
            a[k] = ak * ck - bk * sk;
            b[k] = ak * sk + bk * ck;
        }
        PotentialSpec {
            cosine_coeffs: a,
            sine_coeffs: b,
        }
    }

    /// Multiplier turning discrete Fourier coefficients `ĝ_k` of a field into
    /// those of `W^{(order)} ∗ g`, for signed wavenumber `k`.
    pub fn convolution_multiplier(&self, k: i64, order: u32) -> Complex64 {
        let ka = k.unsigned_abs() as usize;
        if ka > self.k_max() {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = self.coeff(ka);
        let w_hat = if k == 0 {
            Complex64::new(a, 0.0)
        } else if k > 0 {
            Complex64::new(0.5 * a, -0.5 * b)
        } else {
            Complex64::new(0.5 * a, 0.5 * b)
        };
        let d = Complex64::new(0.0, k as f64).powu(order);
        if k == 0 && order > 0 {
            return Complex64::new(0.0, 0.0);
        }
        w_hat * d * PERIOD
    }
}

/// Empirical trigonometric moments `(1/N) Σ_j cos(kq_j)`, `(1/N) Σ_j sin(kq_j)`
/// for `k = 0..=k_max`, built with the angle-addition recurrence.
pub fn trig_moments(q: &[f64], k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut c = vec![0.0; k_max + 1];
    let mut s = vec![0.0; k_max + 1];
    if q.is_empty() {
        return (c, s);
    }
    for &x in q {
        let (s1, c1) = x.sin_cos();
        let (mut ck, mut sk) = (1.0, 0.0);
        c[0] += 1.0;
        for k in 1..=k_max {
            let next_c = ck * c1 - sk * s1;
            let next_s = sk * c1 + ck * s1;
            ck = next_c;
            sk = next_s;
            c[k] += ck;
            s[k] += sk;
        }
    }
    let inv = 1.0 / q.len() as f64;
    c.iter_mut().chain(s.iter_mut()).for_each(|v| *v *= inv);
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_derivatives() {
        let w = PotentialSpec::cosine();
        for &x in &[0.0, 0.3, 2.0] {
            assert!((w.derivative(x, 1) + f64::sin(x)).abs() < 1e-15);
            assert!((w.derivative(x, 2) + f64::cos(x)).abs() < 1e-15);
        }
        assert_eq!(w.derivative_bound(1), 1.0);
        assert!(PotentialSpec::zero().is_flat());
        assert!(!w.is_flat());
    }

    #[test]
    fn convolved_matches_direct_average() {
        let w = PotentialSpec::new(vec![0.1, 0.7, -0.2], vec![0.0, 0.3, 0.4]).unwrap();
        let q = [0.2, 1.7, 4.0, 5.9];
        let (c, s) = trig_moments(&q, w.k_max());
        let conv = w.convolved(&c, &s);
        for &x in &[0.0, 1.1, 3.3] {
            for order in 0..3 {
                let direct: f64 =
                    q.iter().map(|&qj| w.derivative(x - qj, order)).sum::<f64>() / q.len() as f64;
                assert!((conv.derivative(x, order) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(PotentialSpec::new(vec![f64::NAN], vec![]).is_err());
        assert!(PotentialSpec::new(vec![0.0; 20], vec![]).is_err());
    }
}

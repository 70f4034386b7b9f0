//! Periodic geometry and discrete Fourier helpers on the `2π` circle.
//!
//! A unit-length torus maps onto this one by `x ↦ 2πx`; densities pick up a
//! factor `1/(2π)` and momenta a factor `2π`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{finite, Error, Result};

/// Length of the circle.
pub const PERIOD: f64 = 2.0 * PI;

/// Reduce `x` into `[0, 2π)`.
pub fn wrap(x: f64) -> Result<f64> {
    finite(x, "position")?;
    Ok(wrap_unchecked(x))
}

#[inline]
pub(crate) fn wrap_unchecked(x: f64) -> f64 {
    let r = x.rem_euclid(PERIOD);
    // rem_euclid rounds tiny negatives up to PERIOD itself
    if r >= PERIOD {
        0.0
    } else {
        r
    }
}

/// Reduce `x` into `(-π, π]`.
#[inline]
pub fn wrap_symmetric(x: f64) -> f64 {
    let r = wrap_unchecked(x);
    if r > PI {
        r - PERIOD
    } else {
        r
    }
}

/// Smallest power of two `≥ max(min_n, ⌈16/ε⌉)`.
pub fn admissible_grid(epsilon: f64, min_n: usize) -> usize {
    let need = (16.0 / epsilon).ceil() as usize;
    need.max(min_n).max(4).next_power_of_two()
}

/// Uniform grid on the circle together with cached FFT plans.
#[derive(Clone)]
pub struct TorusGeometry {
    n_grid: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry")
            .field("n_grid", &self.n_grid)
            .finish()
    }
}

impl PartialEq for TorusGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.n_grid == other.n_grid
    }
}

impl TorusGeometry {
    pub fn new(n_grid: usize) -> Result<Self> {
        if n_grid < 4 || !n_grid.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_grid must be a power of two >= 4, got {n_grid}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_grid,
            forward: planner.plan_fft_forward(n_grid),
            inverse: planner.plan_fft_inverse(n_grid),
        })
    }

    /// Grid resolving a kernel of width `epsilon` (`n_grid ≥ 16/ε`).
    pub fn for_epsilon(epsilon: f64, min_n: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Self::new(admissible_grid(epsilon, min_n))
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn period(&self) -> f64 {
        PERIOD
    }

    pub fn spacing(&self) -> f64 {
        PERIOD / self.n_grid as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_grid).map(|j| self.x(j)).collect()
    }

    /// Signed wavenumber stored at FFT index `m`.
    pub fn wavenumber(&self, m: usize) -> i64 {
        if m <= self.n_grid / 2 {
            m as i64
        } else {
            m as i64 - self.n_grid as i64
        }
    }

    /// Fail unless this grid resolves width `epsilon`.
    pub fn check_resolution(&self, epsilon: f64) -> Result<()> {
        let required = (16.0 / epsilon).ceil() as usize;
        if self.n_grid < required {
            Err(Error::Resolution {
                n_grid: self.n_grid,
                epsilon,
                required,
            })
        } else {
            Ok(())
        }
    }

    /// Normalised forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n_grid);
        self.forward.process(buf);
        let s = 1.0 / self.n_grid as f64;
        for c in buf.iter_mut() {
            *c *= s;
        }
    }

    /// Synthesis `g_j = Σ_k ĝ_k e^{ikx_j}` from a full spectrum, real part.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut buf = coeffs.to_vec();
        self.inverse_in_place(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n_grid);
        self.inverse.process(buf);
    }

    /// Modes `0..=k_max` of real samples.
    pub fn analyze_half(&self, values: &[f64], k_max: usize) -> Vec<Complex64> {
        let mut full = self.forward(values);
        full.truncate(k_max + 1);
        full[0].im = 0.0;
        full
    }

    /// Real samples from modes `0..=k_max` (`k_max < n/2`), conjugate-extended.
    pub fn synthesize_half(&self, half: &[Complex64]) -> Vec<f64> {
        let n = self.n_grid;
        assert!(!half.is_empty() && half.len() <= n / 2, "half spectrum too long");
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[0] = Complex64::new(half[0].re, 0.0);
        for (k, &c) in half.iter().enumerate().skip(1) {
            full[k] = c;
            full[n - k] = c.conj();
        }
        self.inverse(&full)
    }

    /// Trapezoid rule, spectrally accurate for smooth periodic integrands.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.spacing()
    }

    /// Spectral derivative of real samples. The Nyquist mode is dropped for
    /// odd orders.
    pub fn spectral_derivative(&self, values: &[f64], order: u32) -> Vec<f64> {
        let mut c = self.forward(values);
        self.differentiate_modes(&mut c, order);
        self.inverse(&c)
    }

    pub(crate) fn differentiate_modes(&self, c: &mut [Complex64], order: u32) {
        let n = self.n_grid;
        for (m, cm) in c.iter_mut().enumerate() {
            let k = self.wavenumber(m) as f64;
            if m == n / 2 && order % 2 == 1 {
                *cm = Complex64::new(0.0, 0.0);
                continue;
            }
            *cm *= Complex64::new(0.0, k).powu(order);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        assert!((wrap(PERIOD + 0.5).unwrap() - 0.5).abs() < 1e-14);
        assert!((wrap(-0.25).unwrap() - (PERIOD - 0.25)).abs() < 1e-14);
        assert_eq!(wrap(0.0).unwrap(), 0.0);
        assert_eq!(wrap(-1e-300).unwrap(), 0.0);
        assert!(wrap(f64::NAN).is_err());
        assert!(wrap(f64::INFINITY).is_err());
    }

    #[test]
    fn geometry_rejects_non_power_of_two() {
        assert!(TorusGeometry::new(100).is_err());
        assert!(TorusGeometry::new(2).is_err());
        assert!(TorusGeometry::new(64).is_ok());
    }

    #[test]
    fn admissible_grid_rule() {
        assert_eq!(admissible_grid(0.1, 64), 256);
        assert_eq!(admissible_grid(0.5, 64), 64);
        let g = TorusGeometry::new(128).unwrap();
        assert!(g.check_resolution(0.1).is_err());
        assert!(g.check_resolution(0.125).is_ok());
    }

    #[test]
    fn transform_round_trip_and_derivative() {
        let g = TorusGeometry::new(64).unwrap();
        let v: Vec<f64> = g.points().iter().map(|&x| (3.0 * x).sin() + 0.5).collect();
        let c = g.forward(&v);
        assert!((c[0].re - 0.5).abs() < 1e-15);
        assert!((c[3].im + 0.5).abs() < 1e-14);
        let back = g.inverse(&c);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let d = g.spectral_derivative(&v, 1);
        for (j, dj) in d.iter().enumerate() {
            assert!((dj - 3.0 * (3.0 * g.x(j)).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn half_spectrum_round_trip() {
        let g = TorusGeometry::new(32).unwrap();
        let v: Vec<f64> = g.points().iter().map(|&x| x.cos() - 0.2 * (5.0 * x).sin()).collect();
        let h = g.analyze_half(&v, 10);
        let back = g.synthesize_half(&h);
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

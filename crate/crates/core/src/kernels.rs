//! Periodic von Mises kernel `w_ε(x) = Z_ε⁻¹ exp(−sin²(x/2)/(ε²/2))` and
//! the Gaussian it approximates.

use std::f64::consts::PI;

use crate::error::{finite, Error, Result};
use crate::torus::{TorusGeometry, PERIOD};

/// Kernel width, concentration, normalisation and Fourier sequence.
#[derive(Debug, Clone)]
pub struct KernelParams {
    pub epsilon: f64,
    pub kappa: f64,
    pub z_eps: f64,
    /// `ŵ_k = ∫ w_ε e^{-ikx} dx` for `k = 0..=n_grid/2`.
    pub fourier_coeffs: Vec<f64>,
    geometry: TorusGeometry,
}

/// Unnormalised profile `exp(−2κ sin²(x/2)) = exp(κ(cos x − 1))`.
#[inline]
fn profile(kappa: f64, x: f64) -> f64 {
    let s = (0.5 * x).sin();
    (-2.0 * kappa * s * s).exp()
}

impl KernelParams {
    /// Build the kernel on `geometry`; the grid must satisfy `n_grid ≥ 16/ε`.
    pub fn new(epsilon: f64, geometry: TorusGeometry) -> Result<Self> {
        finite(epsilon, "epsilon")?;
        if epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        geometry.check_resolution(epsilon)?;
        let kappa = 1.0 / (epsilon * epsilon);
        let samples: Vec<f64> = geometry.points().iter().map(|&x| profile(kappa, x)).collect();
        let z_eps = geometry.integrate(&samples);
        let spectrum = geometry.forward(&samples);
        let scale = PERIOD / z_eps;
        let mut fourier_coeffs = Vec::with_capacity(geometry.n_grid() / 2 + 1);
        fourier_coeffs.push(1.0);
        let mut prev = 1.0_f64;
        for (k, c) in spectrum.iter().enumerate().take(geometry.n_grid() / 2 + 1).skip(1) {
            let raw = c.re * scale;
            if raw < -1e-12 {
                return Err(Error::NegativeEigenvalue { k, value: raw });
            }
            let v = raw.clamp(0.0, 1.0).min(prev);
            fourier_coeffs.push(v);
            prev = v;
        }
        Ok(Self {
            epsilon,
            kappa,
            z_eps,
            fourier_coeffs,
            geometry,
        })
    }

    /// Kernel on the smallest admissible grid with at least `min_n` points.
    pub fn admissible(epsilon: f64, min_n: usize) -> Result<Self> {
        Self::new(epsilon, TorusGeometry::for_epsilon(epsilon, min_n)?)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    /// `d^order/dx^order w_ε(x)` for `order ≤ 2`; panics on larger orders.
    #[inline]
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        let w = profile(self.kappa, x) / self.z_eps;
        match order {
            0 => w,
            1 => -self.kappa * x.sin() * w,
            2 => {
                let s = x.sin();
                (self.kappa * self.kappa * s * s - self.kappa * x.cos()) * w
            }
            _ => panic!("kernel derivative order {order} not supported"),
        }
    }

    /// Half-width outside which `w_ε` is below `e^{-50}` of its peak.
    pub fn support_radius(&self) -> f64 {
        let s = (25.0 / self.kappa).sqrt();
        if s >= 1.0 {
            PI
        } else {
            2.0 * s.asin()
        }
    }
}

/// `d^order/dx^order w_ε(x)`.
pub fn von_mises_eval(params: &KernelParams, x: f64, order: u8) -> Result<f64> {
    finite(x, "x")?;
    if order > 2 {
        return Err(Error::Config(format!("kernel derivative order must be 0, 1 or 2, got {order}")));
    }
    Ok(params.eval(x, order))
}

/// `Z_ε = ∫ exp(−sin²(x/2)/(ε²/2)) dx` by the trapezoid rule on an
/// admissible grid of at least 64 points.
pub fn normalization_constant(epsilon: f64) -> Result<f64> {
    let g = TorusGeometry::for_epsilon(epsilon, 64)?;
    normalization_constant_on(epsilon, &g)
}

/// `Z_ε` on a caller-supplied grid; errors if the grid is too coarse.
pub fn normalization_constant_on(epsilon: f64, geometry: &TorusGeometry) -> Result<f64> {
    finite(epsilon, "epsilon")?;
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    geometry.check_resolution(epsilon)?;
    let kappa = 1.0 / (epsilon * epsilon);
    let s: f64 = geometry.points().iter().map(|&x| profile(kappa, x)).sum();
    Ok(s * geometry.spacing())
}

/// `ŵ_0, …, ŵ_{k_max}`.
pub fn kernel_fourier(params: &KernelParams, k_max: usize) -> Result<Vec<f64>> {
    let avail = params.fourier_coeffs.len() - 1;
    if k_max > avail {
        return Err(Error::Config(format!("k_max = {k_max} exceeds n_grid/2 = {avail}")));
    }
    Ok(params.fourier_coeffs[..=k_max].to_vec())
}

/// Centred Gaussian density with standard deviation `epsilon` on the line.
#[inline]
pub fn gaussian_density(x: f64, epsilon: f64) -> f64 {
    (-0.5 * (x / epsilon).powi(2)).exp() / (epsilon * (2.0 * PI).sqrt())
}

/// `sup_{[−π,π]} |w_ε − γ_ε|`: grid scan followed by golden-section
/// refinement around the best grid point.
pub fn kernel_residual_sup(epsilon: f64) -> Result<f64> {
    finite(epsilon, "epsilon")?;
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::Config(format!("epsilon must lie in (0, 0.5], got {epsilon}")));
    }
    let kappa = 1.0 / (epsilon * epsilon);
    let z = normalization_constant(epsilon)?;
    let f = |x: f64| (profile(kappa, x) / z - gaussian_density(x, epsilon)).abs();
    let m = ((2048.0 / epsilon) as usize).max(1 << 14).next_power_of_two();
    let h = PERIOD / m as f64;
    let (mut best_j, mut best) = (0usize, f(-PI));
    for j in 1..=m {
        let v = f(-PI + j as f64 * h);
        if v > best {
            best = v;
            best_j = j;
        }
    }
    let centre = -PI + best_j as f64 * h;
    let (mut a, mut b) = ((centre - h).max(-PI), (centre + h).min(PI));
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    Ok(best.max(fc).max(fd))
}

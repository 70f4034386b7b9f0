//! Kernel-regularised empirical fields, convolutions and norm diagnostics.

use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelParams;
use crate::particles::{pairwise_force, ParticleEnsemble};
use crate::potential::{trig_moments, PotentialSpec};
use crate::torus::{wrap_symmetric, TorusGeometry, PERIOD};

/// Grid samples of a periodic field with a lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct DensityField {
    geometry: TorusGeometry,
    values: Vec<f64>,
    fourier: OnceLock<Vec<Complex64>>,
}

impl DensityField {
    pub fn new(geometry: TorusGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.n_grid() {
            return Err(Error::Config(format!(
                "field has {} samples for a grid of {}",
                values.len(),
                geometry.n_grid()
            )));
        }
        Ok(Self {
            geometry,
            values,
            fourier: OnceLock::new(),
        })
    }

    pub fn from_fn(geometry: TorusGeometry, f: impl Fn(f64) -> f64) -> Self {
        let values = geometry.points().iter().map(|&x| f(x)).collect();
        Self {
            geometry,
            values,
            fourier: OnceLock::new(),
        }
    }

    /// Field with the given full spectrum.
    pub fn from_fourier(geometry: TorusGeometry, coeffs: Vec<Complex64>) -> Self {
        let values = geometry.inverse(&coeffs);
        let cell = OnceLock::new();
        let _ = cell.set(coeffs);
        Self {
            geometry,
            values,
            fourier: cell,
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `ĝ_k` at FFT ordering, normalised by `1/n`.
    pub fn fourier(&self) -> &[Complex64] {
        self.fourier.get_or_init(|| self.geometry.forward(&self.values))
    }

    pub fn integral(&self) -> f64 {
        self.geometry.integrate(&self.values)
    }

    /// Spectral derivative.
    pub fn derivative(&self, order: u32) -> DensityField {
        let mut c = self.fourier().to_vec();
        self.geometry.differentiate_modes(&mut c, order);
        Self::from_fourier(self.geometry.clone(), c)
    }

    pub fn map2(&self, other: &DensityField, f: impl Fn(f64, f64) -> f64) -> DensityField {
        assert_eq!(self.geometry, other.geometry);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self {
            geometry: self.geometry.clone(),
            values,
            fourier: OnceLock::new(),
        }
    }

    pub fn scaled(&self, s: f64) -> DensityField {
        Self {
            geometry: self.geometry.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            fourier: OnceLock::new(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(2π)⁻¹ ∫ |g|`.
    pub fn mean_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Momentum power and kernel derivative order of an empirical field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldWeight {
    pub p_power: u32,
    pub order: u8,
}

impl FieldWeight {
    pub const RHO: Self = Self { p_power: 0, order: 0 };
    pub const J: Self = Self { p_power: 1, order: 0 };
    pub const J2: Self = Self { p_power: 2, order: 1 };
    pub const J3: Self = Self { p_power: 3, order: 2 };
}

/// `(1/N) Σ_i c_i w_ε^{(order)}(x − q_i)` on the kernel's grid, by direct
/// summation over the kernel's effective support.
pub fn weighted_field(q: &[f64], weights: &[f64], params: &KernelParams, order: u8) -> Result<DensityField> {
    if order > 2 {
        return Err(Error::Config(format!("kernel derivative order must be <= 2, got {order}")));
    }
    let g = params.geometry().clone();
    g.check_resolution(params.epsilon)?;
    let n = g.n_grid();
    let h = g.spacing();
    let mut acc = vec![0.0; n];
    let radius = params.support_radius();
    let span = ((radius / h).ceil() as usize).min(n / 2);
    let inv_n = 1.0 / q.len().max(1) as f64;
    for (&qi, &ci) in q.iter().zip(weights) {
        if ci == 0.0 {
            continue;
        }
        let centre = (qi / h).round() as i64;
        if 2 * span + 1 >= n {
            for (j, a) in acc.iter_mut().enumerate() {
                *a += ci * params.eval(g.x(j) - qi, order);
            }
        } else {
            for off in -(span as i64)..=(span as i64) {
                let j = (centre + off).rem_euclid(n as i64) as usize;
                let d = wrap_symmetric(g.x(j) - qi);
                acc[j] += ci * params.eval(d, order);
            }
        }
    }
    acc.iter_mut().for_each(|v| *v *= inv_n);
    DensityField::new(g, acc)
}

/// `(1/N) Σ_i p_i^{n₁} w_ε^{(n)}(x − q_i)`.
pub fn empirical_field(
    ensemble: &ParticleEnsemble,
    params: &KernelParams,
    weight: FieldWeight,
) -> Result<DensityField> {
    let w: Vec<f64> = ensemble.p.iter().map(|p| p.powi(weight.p_power as i32)).collect();
    weighted_field(&ensemble.q, &w, params, weight.order)
}

/// Fast approximation of [`empirical_field`]: linear binning onto the grid
/// followed by spectral convolution with `ŵ_k`. Carries an `O(h²)` bias.
pub fn empirical_field_binned(
    ensemble: &ParticleEnsemble,
    params: &KernelParams,
    weight: FieldWeight,
) -> Result<DensityField> {
    let g = params.geometry().clone();
    let n = g.n_grid();
    let h = g.spacing();
    let mut mass = vec![0.0; n];
    for (&q, &p) in ensemble.q.iter().zip(&ensemble.p) {
        let c = p.powi(weight.p_power as i32);
        let s = q / h;
        let j = s.floor();
        let frac = s - j;
        let j = (j as i64).rem_euclid(n as i64) as usize;
        mass[j] += c * (1.0 - frac);
        mass[(j + 1) % n] += c * frac;
    }
    let scale = 1.0 / (ensemble.len().max(1) as f64 * h);
    mass.iter_mut().for_each(|v| *v *= scale);
    let mut c = g.forward(&mass);
    for (m, cm) in c.iter_mut().enumerate() {
        let k = g.wavenumber(m);
        *cm *= params.fourier_coeffs[k.unsigned_abs() as usize];
    }
    g.differentiate_modes(&mut c, weight.order as u32);
    Ok(DensityField::from_fourier(g, c))
}

/// `W^{(derivative)} ∗ field` by Fourier multiplication.
pub fn convolve_potential(field: &DensityField, w: &PotentialSpec, derivative: u32) -> DensityField {
    let g = field.geometry().clone();
    let c: Vec<Complex64> = field
        .fourier()
        .iter()
        .enumerate()
        .map(|(m, &v)| v * w.convolution_multiplier(g.wavenumber(m), derivative))
        .collect();
    DensityField::from_fourier(g, c)
}

/// Terms of the interaction identity
/// `lhs = (W′∗ρ_ε)ρ_ε + r1·ρ_ε + r2`.
#[derive(Debug, Clone)]
pub struct InteractionTerms {
    pub lhs: DensityField,
    pub r1: DensityField,
    pub r2: DensityField,
    pub rho: DensityField,
    pub conv: DensityField,
}

impl InteractionTerms {
    /// `sup |lhs − (W′∗ρ)ρ − r1ρ − r2|`.
    pub fn identity_residue(&self) -> f64 {
        let v = self.lhs.values();
        let (c, r, r1, r2) = (self.conv.values(), self.rho.values(), self.r1.values(), self.r2.values());
        (0..v.len())
            .map(|j| (v[j] - c[j] * r[j] - r1[j] * r[j] - r2[j]).abs())
            .fold(0.0, f64::max)
    }
}

/// `lhs(x) = (1/N)Σ_i [(1/N)Σ_j W′(q_i − q_j)] w_ε(x − q_i)`,
/// `r1(x) = (1/N)Σ_j W′(x − q_j) − (W′∗ρ_ε)(x)` and the algebraic remainder
/// `r2 = lhs − (W′∗ρ_ε)ρ_ε − r1 ρ_ε`.
pub fn interaction_decomposition(
    ensemble: &ParticleEnsemble,
    params: &KernelParams,
    w: &PotentialSpec,
) -> Result<InteractionTerms> {
    let g = params.geometry().clone();
    // pairwise_force returns −(1/N)Σ_j W′(q_i − q_j)
    let mean_grad: Vec<f64> = pairwise_force(ensemble, w)?.iter().map(|f| -f).collect();
    let lhs = weighted_field(&ensemble.q, &mean_grad, params, 0)?;
    let rho = empirical_field(ensemble, params, FieldWeight::RHO)?;
    let conv = convolve_potential(&rho, w, 1);
    let (c, s) = trig_moments(&ensemble.q, w.k_max());
    let emp = w.convolved(&c, &s);
    let empirical = DensityField::from_fn(g, |x| emp.derivative(x, 1));
    let r1 = empirical.map2(&conv, |a, b| a - b);
    let v = lhs.values();
    let (cv, rv, r1v) = (conv.values(), rho.values(), r1.values());
    let r2_vals: Vec<f64> = (0..v.len()).map(|j| v[j] - cv[j] * rv[j] - r1v[j] * rv[j]).collect();
    let r2 = DensityField::new(params.geometry().clone(), r2_vals)?;
    Ok(InteractionTerms { lhs, r1, r2, rho, conv })
}

/// Norm selector for [`sobolev_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    /// `H^k`, `k ∈ {−1, 0, 1, 2}`, with weights `(1 + m²)^k`.
    H(i32),
    /// `L^c`, `c ≥ 1`, by quadrature.
    L(f64),
    LInf,
}

/// Sobolev or Lebesgue norm of a field.
pub fn sobolev_norm(field: &DensityField, norm: Norm) -> Result<f64> {
    match norm {
        Norm::H(k) => {
            if !(-1..=2).contains(&k) {
                return Err(Error::Config(format!("Sobolev index must lie in -1..=2, got {k}")));
            }
            let g = field.geometry();
            let s: f64 = field
                .fourier()
                .iter()
                .enumerate()
                .map(|(m, c)| {
                    let kk = g.wavenumber(m) as f64;
                    (1.0 + kk * kk).powi(k) * c.norm_sqr()
                })
                .sum();
            Ok((PERIOD * s).sqrt())
        }
        Norm::L(c) => {
            if !(c >= 1.0) {
                return Err(Error::Config(format!("L^c needs c >= 1, got {c}")));
            }
            let s: f64 = field.values().iter().map(|v| v.abs().powf(c)).sum();
            Ok((s * field.geometry().spacing()).powf(1.0 / c))
        }
        Norm::LInf => Ok(field.sup_abs()),
    }
}

/// `max_{s<t} ‖f(t) − f(s)‖_{H^{-1}} / |t − s|^β` over snapshot pairs.
pub fn holder_quotient(snapshots: &[(f64, DensityField)], beta: f64) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::TooFew {
            what: "snapshots",
            needed: 2,
            got: snapshots.len(),
        });
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Config(format!("beta must lie in (0, 1/2), got {beta}")));
    }
    let mut best: f64 = 0.0;
    for (a, (ta, fa)) in snapshots.iter().enumerate() {
        for (tb, fb) in &snapshots[a + 1..] {
            let dt = (tb - ta).abs();
            if dt == 0.0 {
                continue;
            }
            let d = sobolev_norm(&fb.map2(fa, |x, y| x - y), Norm::H(-1))?;
            best = best.max(d / dt.powf(beta));
        }
    }
    Ok(best)
}

/// `max_t ‖f(t)‖_{H¹}`, the discrete `L^∞(0,T;H¹)` norm.
pub fn sup_in_time(snapshots: &[(f64, DensityField)], norm: Norm) -> Result<f64> {
    snapshots
        .iter()
        .map(|(_, f)| sobolev_norm(f, norm))
        .try_fold(0.0_f64, |m, v| v.map(|v| m.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(eps: f64) -> KernelParams {
        KernelParams::admissible(eps, 64).unwrap()
    }

    #[test]
    fn single_particle_is_the_kernel() {
        let k = kernel(0.2);
        let e = ParticleEnsemble::new(vec![1.0], vec![0.0]).unwrap();
        let f = empirical_field(&e, &k, FieldWeight::RHO).unwrap();
        for (j, v) in f.values().iter().enumerate() {
            let x = k.geometry().x(j);
            assert!((v - k.eval(x - 1.0, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn binned_path_is_close() {
        let k = KernelParams::admissible(0.3, 256).unwrap();
        let q: Vec<f64> = (0..50).map(|i| (i as f64 * 0.377) % PERIOD).collect();
        let e = ParticleEnsemble::new(q, vec![1.0; 50]).unwrap();
        let a = empirical_field(&e, &k, FieldWeight::RHO).unwrap();
        let b = empirical_field_binned(&e, &k, FieldWeight::RHO).unwrap();
        let err = a.map2(&b, |x, y| x - y).sup_abs();
        assert!(err < 0.02 * a.sup_abs(), "{err}");
        assert!((b.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_norms() {
        let g = TorusGeometry::new(64).unwrap();
        for k in 1..5 {
            let f = DensityField::from_fn(g.clone(), |x| (k as f64 * x).cos());
            let l2 = sobolev_norm(&f, Norm::H(0)).unwrap();
            let hm1 = sobolev_norm(&f, Norm::H(-1)).unwrap();
            assert!((l2 * l2 - std::f64::consts::PI).abs() < 1e-12);
            let kk = (k * k) as f64;
            assert!((hm1 * hm1 - std::f64::consts::PI / (1.0 + kk)).abs() < 1e-12);
            let lq = sobolev_norm(&f, Norm::L(2.0)).unwrap();
            assert!((lq - l2).abs() < 1e-12);
        }
        let f = DensityField::from_fn(g, |x| x.cos());
        assert!(sobolev_norm(&f, Norm::H(3)).is_err());
    }

    #[test]
    fn holder_examples() {
        let g = TorusGeometry::new(32).unwrap();
        let constant: Vec<(f64, DensityField)> = (0..5)
            .map(|i| (i as f64 * 0.25, DensityField::from_fn(g.clone(), |x| x.sin())))
            .collect();
        assert_eq!(holder_quotient(&constant, 0.4).unwrap(), 0.0);
        let linear: Vec<(f64, DensityField)> = (0..5)
            .map(|i| {
                let t = i as f64 * 0.25;
                (t, DensityField::from_fn(g.clone(), move |x| t * x.cos()))
            })
            .collect();
        let expect = (std::f64::consts::PI / 2.0).sqrt();
        assert!((holder_quotient(&linear, 0.4).unwrap() - expect).abs() < 1e-12);
        assert!(holder_quotient(&linear[..1], 0.4).is_err());
    }

    #[test]
    fn single_particle_decomposition() {
        let k = kernel(0.2);
        let e = ParticleEnsemble::new(vec![0.7], vec![0.0]).unwrap();
        let t = interaction_decomposition(&e, &k, &PotentialSpec::cosine()).unwrap();
        assert!(t.lhs.values().iter().all(|&v| v == 0.0));
        let r2: Vec<f64> = (0..t.rho.values().len())
            .map(|j| -(t.conv.values()[j] + t.r1.values()[j]) * t.rho.values()[j])
            .collect();
        for (a, b) in r2.iter().zip(t.r2.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

//! Grid solver for the Vlasov–Fokker–Planck equation
//! `∂f/∂t + p ∂f/∂q − (W′∗ρ[f]) ∂f/∂p = (σ²/2) ∂²f/∂p² + ∂(γ p f)/∂p`.
//!
//! Strang splitting: an exact spectral shift in `q` for each momentum row,
//! then a backward-Euler finite-volume step in `p` with exponentially fitted
//! (Scharfetter–Gummel) fluxes. The `p` step conserves mass to rounding and
//! keeps the discrete Maxwellian exactly stationary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use crate::rng::normal;
use crate::torus::{wrap_unchecked, TorusGeometry, PERIOD};

/// Law of the initial particle states: `q` has density
/// `(1 + a cos q)/(2π)`, `p` is centred normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialLaw {
    /// Modulation `a ∈ [0, 1]` of the position density.
    pub q_modulation: f64,
    /// Momentum variance; `None` means the equilibrium value `σ²/(2γ)`.
    pub p_variance: Option<f64>,
}

impl Default for InitialLaw {
    fn default() -> Self {
        Self {
            q_modulation: 0.0,
            p_variance: None,
        }
    }
}

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q_modulation) {
            return Err(Error::Config(format!(
                "q_modulation must lie in [0, 1], got {}",
                self.q_modulation
            )));
        }
        if let Some(v) = self.p_variance {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("p_variance must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn momentum_variance(&self, gamma: f64, sigma: f64) -> f64 {
        self.p_variance.unwrap_or_else(|| {
            if gamma > 0.0 {
                sigma * sigma / (2.0 * gamma)
            } else {
                0.0
            }
        })
    }

    pub fn position_density(&self, q: f64) -> f64 {
        (1.0 + self.q_modulation * q.cos()) / PERIOD
    }

    /// One `(q, p)` draw; positions by rejection from the uniform law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, p_std: f64) -> (f64, f64) {
        let a = self.q_modulation;
        let q = loop {
            let q = rng.random::<f64>() * PERIOD;
            if a == 0.0 || rng.random::<f64>() * (1.0 + a) <= 1.0 + a * q.cos() {
                break q;
            }
        };
        (wrap_unchecked(q), p_std * normal(rng))
    }
}

/// Momentum grid and resolution of the phase-space solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VfpConfig {
    pub n_q: usize,
    pub n_p: usize,
    /// Half-width of the momentum window; `None` means six standard
    /// deviations of the wider of the initial and equilibrium laws.
    pub p_max: Option<f64>,
    /// Cumulative clipped negative mass tolerated before failing.
    pub clip_budget: f64,
}

impl Default for VfpConfig {
    fn default() -> Self {
        Self {
            n_q: 64,
            n_p: 128,
            p_max: None,
            clip_budget: 1e-6,
        }
    }
}

/// Density `f(q, p)` on cell centres, stored row-major with one row per
/// momentum cell.
#[derive(Debug, Clone)]
pub struct PhaseSpaceDensity {
    pub geometry: TorusGeometry,
    pub n_p: usize,
    pub p_max: f64,
    pub values: Vec<f64>,
    pub t: f64,
    pub clipped_mass: f64,
}

impl PhaseSpaceDensity {
    pub fn h_p(&self) -> f64 {
        2.0 * self.p_max / self.n_p as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        -self.p_max + (j as f64 + 0.5) * self.h_p()
    }

    /// Product density `ρ₀(q)·M(p)`, with `M` normalised on the grid.
    pub fn from_law(
        geometry: TorusGeometry,
        n_p: usize,
        p_max: f64,
        law: &InitialLaw,
        p_variance: f64,
    ) -> Result<Self> {
        if n_p < 4 || n_p % 2 != 0 {
            return Err(Error::Config(format!("n_p must be even and >= 4, got {n_p}")));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::Config(format!("p_max must be positive, got {p_max}")));
        }
        let mut f = Self {
            geometry,
            n_p,
            p_max,
            values: Vec::new(),
            t: 0.0,
            clipped_mass: 0.0,
        };
        let h = f.h_p();
        let mut m: Vec<f64> = if p_variance > 0.0 {
            (0..n_p).map(|j| (-0.5 * f.p(j).powi(2) / p_variance).exp()).collect()
        } else {
            (0..n_p)
                .map(|j| if j == n_p / 2 - 1 || j == n_p / 2 { 1.0 } else { 0.0 })
                .collect()
        };
        let norm: f64 = m.iter().sum::<f64>() * h;
        m.iter_mut().for_each(|v| *v /= norm);
        let rho: Vec<f64> = f.geometry.points().iter().map(|&q| law.position_density(q)).collect();
        let rho_mass = f.geometry.integrate(&rho);
        f.values = m
            .iter()
            .flat_map(|&mj| rho.iter().map(move |&r| r / rho_mass * mj))
            .collect();
        Ok(f)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geometry.spacing() * self.h_p()
    }

    /// Mass in the outermost momentum rows.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.geometry.n_grid();
        let last = (self.n_p - 1) * n;
        let s: f64 = self.values[..n].iter().chain(&self.values[last..]).sum();
        s * self.geometry.spacing() * self.h_p()
    }

    /// Position marginal `ρ[f](q_i)`.
    pub fn marginal(&self) -> Vec<f64> {
        let n = self.geometry.n_grid();
        let mut rho = vec![0.0; n];
        for row in self.values.chunks_exact(n) {
            for (r, v) in rho.iter_mut().zip(row) {
                *r += v;
            }
        }
        let h = self.h_p();
        rho.iter_mut().for_each(|v| *v *= h);
        rho
    }

    /// `∫ p^m f dq dp`.
    pub fn momentum_moment(&self, m: i32) -> f64 {
        let n = self.geometry.n_grid();
        let s: f64 = self
            .values
            .chunks_exact(n)
            .enumerate()
            .map(|(j, row)| self.p(j).powi(m) * row.iter().sum::<f64>())
            .sum();
        s * self.geometry.spacing() * self.h_p()
    }

    /// Trigonometric moments `∫ ρ cos(kq) dq`, `∫ ρ sin(kq) dq` for `k ≤ k_max`.
    pub fn marginal_moments(&self, k_max: usize) -> (Vec<f64>, Vec<f64>) {
        let rho = self.marginal();
        let h = self.geometry.spacing();
        let mut c = vec![0.0; k_max + 1];
        let mut s = vec![0.0; k_max + 1];
        for (i, &r) in rho.iter().enumerate() {
            let x = self.geometry.x(i);
            for k in 0..=k_max {
                let (sk, ck) = (k as f64 * x).sin_cos();
                c[k] += r * ck * h;
                s[k] += r * sk * h;
            }
        }
        (c, s)
    }

    /// `‖f − g‖₁` on the grid.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.geometry.spacing()
            * self.h_p()
    }
}

/// Stepper for a fixed grid, model and time step.
#[derive(Debug, Clone)]
pub struct VfpSolver {
    pub gamma: f64,
    pub sigma: f64,
    pub dt: f64,
    pub potential: PotentialSpec,
    pub clip_budget: f64,
    shift: Vec<Complex64>,
}

const MASS_TOL: f64 = 1e-8;

impl VfpSolver {
    pub fn new(
        f: &PhaseSpaceDensity,
        gamma: f64,
        sigma: f64,
        dt: f64,
        potential: PotentialSpec,
        clip_budget: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) || gamma < 0.0 || sigma < 0.0 {
            return Err(Error::Config("VFP solver needs dt > 0 and gamma, sigma >= 0".into()));
        }
        let n = f.geometry.n_grid();
        let mut shift = Vec::with_capacity(n * f.n_p);
        for j in 0..f.n_p {
            let p = f.p(j);
            for m in 0..n {
                let k = f.geometry.wavenumber(m) as f64;
                let phase = -k * p * 0.5 * dt;
                shift.push(if m == n / 2 {
                    Complex64::new(phase.cos(), 0.0)
                } else {
                    Complex64::from_polar(1.0, phase)
                });
            }
        }
        Ok(Self {
            gamma,
            sigma,
            dt,
            potential,
            clip_budget,
            shift,
        })
    }

    fn transport_half(&self, f: &mut PhaseSpaceDensity) {
        let n = f.geometry.n_grid();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (j, row) in f.values.chunks_exact_mut(n).enumerate() {
            for (b, &v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex64::new(v, 0.0);
            }
            f.geometry.forward_in_place(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.shift[j * n..(j + 1) * n]) {
                *b *= s;
            }
            f.geometry.inverse_in_place(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re;
            }
        }
    }

    /// Force `−(W′∗ρ[f])(q_i)` on the position grid.
    pub fn force_on_grid(&self, f: &PhaseSpaceDensity) -> Vec<f64> {
        let km = self.potential.k_max();
        if self.potential.is_flat() {
            return vec![0.0; f.geometry.n_grid()];
        }
        let (c, s) = f.marginal_moments(km);
        let conv = self.potential.convolved(&c, &s);
        f.geometry.points().iter().map(|&q| -conv.derivative(q, 1)).collect()
    }

    fn momentum_step(&self, f: &mut PhaseSpaceDensity) {
        let n = f.geometry.n_grid();
        let np = f.n_p;
        let h = f.h_p();
        let d = 0.5 * self.sigma * self.sigma;
        let force = self.force_on_grid(f);
        let r = self.dt / h;
        let mut alpha = vec![0.0; np - 1];
        let mut beta = vec![0.0; np - 1];
        let mut col = vec![0.0; np];
        let mut sub = vec![0.0; np];
        let mut diag = vec![0.0; np];
        let mut sup = vec![0.0; np];
        for i in 0..n {
            let fi = force[i];
            for jf in 0..np - 1 {
                let (pl, pr) = (f.p(jf), f.p(jf + 1));
                if d > 1e-12 {
                    let du = 0.5 * self.gamma * (pr * pr - pl * pl) - fi * h;
                    let e = (0.5 * du / d).exp();
                    alpha[jf] = d / h / e;
                    beta[jf] = d / h * e;
                } else {
                    let v = -self.gamma * 0.5 * (pl + pr) + fi;
                    alpha[jf] = v.max(0.0);
                    beta[jf] = (-v).max(0.0);
                }
            }
            for j in 0..np {
                col[j] = f.values[j * n + i];
                let out_left = if j > 0 { beta[j - 1] } else { 0.0 };
                let out_right = if j + 1 < np { alpha[j] } else { 0.0 };
                diag[j] = 1.0 + r * (out_left + out_right);
                sub[j] = if j > 0 { -r * alpha[j - 1] } else { 0.0 };
                sup[j] = if j + 1 < np { -r * beta[j] } else { 0.0 };
            }
            thomas(&sub, &mut diag, &sup, &mut col);
            for j in 0..np {
                f.values[j * n + i] = col[j];
            }
        }
    }

    /// Advance `f` by one step.
    pub fn step(&self, f: &mut PhaseSpaceDensity) -> Result<()> {
        let before = f.mass();
        self.transport_half(f);
        self.momentum_step(f);
        self.transport_half(f);
        let cell = f.geometry.spacing() * f.h_p();
        let mut clipped = 0.0;
        for v in f.values.iter_mut() {
            if *v < 0.0 {
                clipped -= *v * cell;
                *v = 0.0;
            }
        }
        f.clipped_mass += clipped;
        if f.clipped_mass > self.clip_budget {
            return Err(Error::NegativeMass {
                clipped: f.clipped_mass,
                budget: self.clip_budget,
            });
        }
        let drift = (f.mass() - before - clipped).abs();
        if drift > MASS_TOL {
            return Err(Error::MassLoss { drift, tol: MASS_TOL });
        }
        f.t += self.dt;
        Ok(())
    }
}

/// Solve a tridiagonal system in place; `diag` is overwritten.
fn thomas(sub: &[f64], diag: &mut [f64], sup: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    for j in 1..n {
        let m = sub[j] / diag[j - 1];
        diag[j] -= m * sup[j - 1];
        rhs[j] -= m * rhs[j - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for j in (0..n - 1).rev() {
        rhs[j] = (rhs[j] - sup[j] * rhs[j + 1]) / diag[j];
    }
}

/// Default momentum half-width: six standard deviations of the wider of the
/// initial and equilibrium momentum laws.
pub fn default_p_max(gamma: f64, sigma: f64, initial_variance: f64) -> Result<f64> {
    let eq = if gamma > 0.0 { sigma * sigma / (2.0 * gamma) } else { 0.0 };
    let s = eq.max(initial_variance).sqrt();
    if s > 0.0 {
        Ok(6.0 * s)
    } else {
        Err(Error::Config(
            "momentum grid needs a positive initial or equilibrium variance".into(),
        ))
    }
}

/// Initial density and solver for `law` under the given model.
pub fn setup(
    cfg: &VfpConfig,
    law: &InitialLaw,
    gamma: f64,
    sigma: f64,
    dt: f64,
    potential: &PotentialSpec,
) -> Result<(PhaseSpaceDensity, VfpSolver)> {
    law.validate()?;
    let var = law.momentum_variance(gamma, sigma);
    let p_max = match cfg.p_max {
        Some(v) => v,
        None => default_p_max(gamma, sigma, var)?,
    };
    let geometry = TorusGeometry::new(cfg.n_q)?;
    let f0 = PhaseSpaceDensity::from_law(geometry, cfg.n_p, p_max, law, var)?;
    let bm = f0.boundary_mass();
    if bm >= 1e-8 {
        return Err(Error::BoundaryMass(bm));
    }
    let solver = VfpSolver::new(&f0, gamma, sigma, dt, potential.clone(), cfg.clip_budget)?;
    Ok((f0, solver))
}

/// Trajectory `f_0, f_dt, …` up to `t_horizon`.
pub fn solve_vfp(
    f0: &PhaseSpaceDensity,
    solver: &VfpSolver,
    t_horizon: f64,
) -> Result<Vec<PhaseSpaceDensity>> {
    let steps = (t_horizon / solver.dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut f = f0.clone();
    out.push(f.clone());
    for _ in 0..steps {
        solver.step(&mut f)?;
        out.push(f.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n_q: usize, n_p: usize) -> VfpConfig {
        VfpConfig {
            n_q,
            n_p,
            ..Default::default()
        }
    }

    #[test]
    fn maxwellian_is_stationary() {
        let (f0, solver) =
            setup(&grid(32, 96), &InitialLaw::default(), 1.0, 1.0, 0.01, &PotentialSpec::zero())
                .unwrap();
        let traj = solve_vfp(&f0, &solver, 1.0).unwrap();
        let last = traj.last().unwrap();
        assert!(last.l1_distance(&f0) <= 1e-4, "{}", last.l1_distance(&f0));
        for f in &traj {
            assert!((f.mass() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn free_transport_follows_characteristics() {
        let law = InitialLaw {
            q_modulation: 0.8,
            p_variance: Some(0.25),
        };
        let cfg = VfpConfig {
            n_q: 64,
            n_p: 64,
            p_max: Some(3.0),
            clip_budget: 1e-6,
        };
        let (f0, solver) = setup(&cfg, &law, 0.0, 0.0, 0.01, &PotentialSpec::zero()).unwrap();
        let t = 0.5;
        let traj = solve_vfp(&f0, &solver, t).unwrap();
        let last = traj.last().unwrap();
        let n = f0.geometry.n_grid();
        let mut err: f64 = 0.0;
        for j in 0..f0.n_p {
            let p = f0.p(j);
            let m = f0.values[j * n] / law.position_density(0.0);
            for i in 0..n {
                let q = f0.geometry.x(i);
                let exact = law.position_density(q - p * t) * m;
                err = err.max((last.values[j * n + i] - exact).abs());
            }
        }
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn self_consistent_force_conserves_mass() {
        let law = InitialLaw {
            q_modulation: 0.5,
            p_variance: None,
        };
        let (f0, solver) =
            setup(&grid(32, 64), &law, 1.0, 1.0, 0.01, &PotentialSpec::cosine()).unwrap();
        let traj = solve_vfp(&f0, &solver, 0.5).unwrap();
        for f in &traj {
            assert!((f.mass() - 1.0).abs() <= 1e-8);
            assert!(f.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn narrow_momentum_window_is_rejected() {
        let cfg = VfpConfig {
            p_max: Some(1.0),
            ..Default::default()
        };
        let r = setup(&cfg, &InitialLaw::default(), 1.0, 1.0, 0.01, &PotentialSpec::cosine());
        assert!(matches!(r, Err(Error::BoundaryMass(_))));
    }

    #[test]
    fn thomas_solves_small_system() {
        let sub = [0.0, -1.0, -1.0];
        let mut diag = [2.0, 2.0, 2.0];
        let sup = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        thomas(&sub, &mut diag, &sup, &mut rhs);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}

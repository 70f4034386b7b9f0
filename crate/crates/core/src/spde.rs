//! Pseudo-spectral mild-solution solver for the regularised Dean–Kawasaki
//! system
//!
//! ```text
//! ∂ρ/∂t = −∂j/∂x
//! ∂j/∂t = −γ j − (σ²/2γ) ∂ρ/∂x − (W′∗ρ)ρ + (σ/√N) h_δ(|ρ|) ∂ξ̃/∂t
//! ```
//!
//! The linear part is integrated exactly mode by mode. The state holds the
//! modes `0..=K` of both fields; negative modes are implied by conjugate
//! symmetry.

use rand::Rng;
use serde::{Deserialize, Serialize};

use rustfft::num_complex::Complex64;

use crate::error::{require, Error, Result};
use crate::fields::DensityField;
use crate::kernels::KernelParams;
use crate::potential::PotentialSpec;
use crate::rng::normal;
use crate::torus::{TorusGeometry, PERIOD};

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

#[inline]
fn apply(m: &Mat2, x: (Complex64, Complex64)) -> (Complex64, Complex64) {
    (m[0][0] * x.0 + m[0][1] * x.1, m[1][0] * x.0 + m[1][1] * x.1)
}

/// Generator `A_k = [[0, −ik], [−ik σ²/(2γ), −γ]]`.
pub fn generator(k: i64, gamma: f64, sigma: f64) -> Mat2 {
    let c = sigma * sigma / (2.0 * gamma);
    let ik = Complex64::new(0.0, k as f64);
    [[ZERO, -ik], [-ik * c, Complex64::new(-gamma, 0.0)]]
}

/// `exp(M)` by Taylor series with scaling and squaring.
fn expm_taylor(m: &Mat2) -> Mat2 {
    let norm = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let s = 0.5_f64.powi(squarings as i32);
    let a: Mat2 = [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]];
    let mut term = [[ONE, ZERO], [ZERO, ONE]];
    let mut sum = term;
    for n in 1..=20 {
        term = mat_mul(&term, &a);
        let inv = 1.0 / n as f64;
        for row in term.iter_mut() {
            for z in row.iter_mut() {
                *z *= inv;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// `exp(dt·A_k)` in closed form,
/// `e^{−γt/2}[cosh(μt) I + sinh(μt)/μ (A + γ/2 I)]` with `μ² = γ²/4 − k²σ²/(2γ)`,
/// falling back to a scaled Taylor series when the eigenvalue gap `2|μ|`
/// drops below `1e-8`.
pub fn linear_propagator(k: i64, dt: f64, gamma: f64, sigma: f64) -> Result<Mat2> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    if !(dt >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("dt must be >= 0, got {dt}")));
    }
    let a = generator(k, gamma, sigma);
    let c = sigma * sigma / (2.0 * gamma);
    let mu2 = 0.25 * gamma * gamma - (k * k) as f64 * c;
    if 2.0 * mu2.abs().sqrt() < 1e-8 {
        let m: Mat2 = [[a[0][0] * dt, a[0][1] * dt], [a[1][0] * dt, a[1][1] * dt]];
        return Ok(expm_taylor(&m));
    }
    let (ch, sh) = if mu2 >= 0.0 {
        let mu = mu2.sqrt();
        ((mu * dt).cosh(), (mu * dt).sinh() / mu)
    } else {
        let nu = (-mu2).sqrt();
        ((nu * dt).cos(), (nu * dt).sin() / nu)
    };
    let damp = (-0.5 * gamma * dt).exp();
    let half = Complex64::new(0.5 * gamma, 0.0);
    let b = [[a[0][0] + half, a[0][1]], [a[1][0], a[1][1] + half]];
    let mut p = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { ch } else { 0.0 };
            p[i][j] = (b[i][j] * sh + id) * damp;
        }
    }
    Ok(p)
}

/// `C²` regularisation of `√|r|` below `δ`:
/// `√δ·P(|r|/δ)` with `P(s) = 35/48 + (7/12)s³ − (5/16)s⁴`.
#[inline]
pub fn h_delta(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a >= delta {
        a.sqrt()
    } else {
        let s = a / delta;
        delta.sqrt() * (35.0 / 48.0 + s * s * s * (7.0 / 12.0 - 5.0 / 16.0 * s))
    }
}

/// Brownian increments `b_k`, `k = 0..=n/2`, of the cylindrical process
/// in the Fourier basis: `E|b_k|² = dt`, real at `k = 0` and `k = n/2`.
pub fn draw_brownian_modes<R: Rng + ?Sized>(rng: &mut R, n_grid: usize, dt: f64) -> Vec<Complex64> {
    let half = n_grid / 2;
    let sd = dt.sqrt();
    let sc = (0.5 * dt).sqrt();
    (0..=half)
        .map(|k| {
            if k == 0 || k == half {
                Complex64::new(sd * normal(rng), 0.0)
            } else {
                let re = normal(rng);
                Complex64::new(sc * re, sc * normal(rng))
            }
        })
        .collect()
}

/// Grid values of `Q^{1/2} ΔW` for mode increments `b`:
/// `ξ(x) = Σ_k √(λ_k/(2π)) b_k e^{ikx}` over the full conjugate-symmetric range.
pub fn qwiener_from_modes(geometry: &TorusGeometry, lambda: &[f64], b: &[Complex64]) -> Vec<f64> {
    let n = geometry.n_grid();
    let mut full = vec![ZERO; n];
    for k in 0..=n / 2 {
        let c = b[k] * (lambda[k] / PERIOD).sqrt();
        full[k] = c;
        if k != 0 && k != n / 2 {
            full[n - k] = c.conj();
        }
    }
    geometry.inverse(&full)
}

/// One increment of the `Q_{√2ε}`-Wiener process over `dt`; `params` is the
/// kernel at width `√2ε`, whose Fourier sequence supplies the eigenvalues.
pub fn q_wiener_increment<R: Rng + ?Sized>(
    params: &KernelParams,
    dt: f64,
    rng: &mut R,
) -> Result<DensityField> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let g = params.geometry().clone();
    let b = draw_brownian_modes(rng, g.n_grid(), dt);
    let values = qwiener_from_modes(&g, &params.fourier_coeffs, &b);
    DensityField::new(g, values)
}

/// Initial datum `ρ₀ = (1 + a cos(m x))/(2π)`, `j₀ = b sin(m_j x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialDatum {
    pub rho_modulation: f64,
    pub rho_mode: usize,
    pub j_amplitude: f64,
    pub j_mode: usize,
}

impl Default for InitialDatum {
    fn default() -> Self {
        Self {
            rho_modulation: 0.3,
            rho_mode: 1,
            j_amplitude: 0.0,
            j_mode: 1,
        }
    }
}

impl InitialDatum {
    pub fn rho(&self, x: f64) -> f64 {
        (1.0 + self.rho_modulation * (self.rho_mode as f64 * x).cos()) / PERIOD
    }

    pub fn j(&self, x: f64) -> f64 {
        self.j_amplitude * (self.j_mode as f64 * x).sin()
    }

    pub fn min_rho(&self) -> f64 {
        (1.0 - self.rho_modulation.abs()) / PERIOD
    }
}

/// Integrator used for noise-free trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFreeScheme {
    /// Integrating-factor fourth-order Runge–Kutta with the exact propagator.
    #[default]
    LawsonRk4,
    /// The mild Euler step with the noise switched off.
    ExponentialEuler,
}

/// Parameters of an SPDE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdeConfig {
    pub gamma: f64,
    pub sigma: f64,
    /// Particle number `N` in the `σ/√N` noise amplitude.
    pub n_noise: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub c1: f64,
    /// `None`: twice `‖X₀‖`.
    pub c2: Option<f64>,
    /// `None`: ten times `‖X₀‖`.
    pub k_norm: Option<f64>,
    pub n_grid: usize,
    /// Highest retained mode; `None`: `n_grid/3`.
    pub k_cut: Option<usize>,
    pub dt: f64,
    pub t_horizon: f64,
    pub seed: u64,
    pub initial: InitialDatum,
    pub potential: PotentialSpec,
    pub noise: bool,
    pub noise_free_scheme: NoiseFreeScheme,
    /// Stop integrating when the density floor is reached (`μ_δ`); when
    /// false the crossing is recorded and integration continues to `τ_k`.
    pub halt_at_floor: bool,
}

impl Default for SpdeConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            sigma: 1.0,
            n_noise: 1e4,
            epsilon: 0.1,
            delta: 0.02,
            c1: 0.05,
            c2: None,
            k_norm: None,
            n_grid: 256,
            k_cut: None,
            dt: 1e-3,
            t_horizon: 1.0,
            seed: 0,
            initial: InitialDatum::default(),
            potential: PotentialSpec::cosine(),
            noise: true,
            noise_free_scheme: NoiseFreeScheme::LawsonRk4,
            halt_at_floor: true,
        }
    }
}

impl SpdeConfig {
    pub fn k_cut(&self) -> usize {
        self.k_cut.unwrap_or(self.n_grid / 3)
    }

    /// `‖(ρ₀, j₀)‖_{H¹×H¹}`.
    pub fn initial_norm(&self) -> Result<f64> {
        let g = TorusGeometry::new(self.n_grid)?;
        let s = SpectralState::from_datum(&g, &self.initial, self.k_cut());
        Ok(s.norm_h1())
    }

    pub fn c2_value(&self) -> Result<f64> {
        Ok(match self.c2 {
            Some(v) => v,
            None => 2.0 * self.initial_norm()?,
        })
    }

    pub fn k_norm_value(&self) -> Result<f64> {
        Ok(match self.k_norm {
            Some(v) => v,
            None => 10.0 * self.initial_norm()?,
        })
    }

    /// Structural checks plus the ordering `0 < δ < c₁ ≤ min ρ₀`,
    /// `‖X₀‖ ≤ c₂ < k`.
    pub fn validate(&self) -> Result<()> {
        require(self.gamma > 0.0, || format!("gamma must be positive, got {}", self.gamma))?;
        require(self.sigma >= 0.0, || format!("sigma must be >= 0, got {}", self.sigma))?;
        require(self.n_noise > 0.0, || "n_noise must be positive".into())?;
        require(self.dt > 0.0 && self.t_horizon >= 0.0, || "need dt > 0 and t_horizon >= 0".into())?;
        require(self.epsilon > 0.0, || "epsilon must be positive".into())?;
        let g = TorusGeometry::new(self.n_grid)?;
        g.check_resolution(self.epsilon)?;
        let k = self.k_cut();
        require(k >= 1 && 3 * k <= self.n_grid, || {
            format!("k_cut = {k} violates 1 <= k_cut <= n_grid/3 (dealiasing)")
        })?;
        require(self.initial.rho_mode <= k && self.initial.j_mode <= k, || {
            "initial datum modes exceed k_cut".into()
        })?;
        self.potential.validate()?;
        let min_rho = self.initial.min_rho();
        let x0 = self.initial_norm()?;
        let c2 = self.c2_value()?;
        let kn = self.k_norm_value()?;
        require(
            0.0 < self.delta && self.delta < self.c1 && self.c1 <= min_rho,
            || {
                format!(
                    "stopping thresholds must satisfy 0 < delta < c1 <= min rho0 (delta = {}, c1 = {}, min rho0 = {min_rho})",
                    self.delta, self.c1
                )
            },
        )?;
        require(x0 <= c2 && c2 < kn, || {
            format!("stopping thresholds must satisfy ||X0|| <= c2 < k (||X0|| = {x0}, c2 = {c2}, k = {kn})")
        })?;
        Ok(())
    }
}

/// Localisation status of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "time")]
pub enum Status {
    Running,
    StoppedNorm(f64),
    StoppedFloor(f64),
}

/// Modes `0..=K` of `(ρ̃, j̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub rho_hat: Vec<Complex64>,
    pub j_hat: Vec<Complex64>,
    pub t: f64,
    pub status: Status,
}

impl SpectralState {
    pub fn from_fields(geometry: &TorusGeometry, rho: &[f64], j: &[f64], k_cut: usize) -> Self {
        Self {
            rho_hat: geometry.analyze_half(rho, k_cut),
            j_hat: geometry.analyze_half(j, k_cut),
            t: 0.0,
            status: Status::Running,
        }
    }

    pub fn from_datum(geometry: &TorusGeometry, datum: &InitialDatum, k_cut: usize) -> Self {
        let xs = geometry.points();
        let rho: Vec<f64> = xs.iter().map(|&x| datum.rho(x)).collect();
        let j: Vec<f64> = xs.iter().map(|&x| datum.j(x)).collect();
        let mut s = Self::from_fields(geometry, &rho, &j, k_cut);
        // the datum is a single mode: drop rounding noise elsewhere
        for k in 1..s.rho_hat.len() {
            if k != datum.rho_mode {
                s.rho_hat[k] = ZERO;
            }
            if k != datum.j_mode {
                s.j_hat[k] = ZERO;
            }
        }
        s.j_hat[0] = ZERO;
        s
    }

    pub fn k_cut(&self) -> usize {
        self.rho_hat.len() - 1
    }

    /// `‖(ρ, j)‖_{H¹×H¹}`.
    pub fn norm_h1(&self) -> f64 {
        let s: f64 = (0..self.rho_hat.len())
            .map(|k| {
                let w = (1.0 + (k * k) as f64) * if k == 0 { 1.0 } else { 2.0 };
                w * (self.rho_hat[k].norm_sqr() + self.j_hat[k].norm_sqr())
            })
            .sum();
        (PERIOD * s).sqrt()
    }

    /// `‖(ρ, j) − (ρ', j')‖_{H¹×H¹}`.
    pub fn distance_h1(&self, other: &SpectralState) -> f64 {
        let s: f64 = (0..self.rho_hat.len())
            .map(|k| {
                let w = (1.0 + (k * k) as f64) * if k == 0 { 1.0 } else { 2.0 };
                w * ((self.rho_hat[k] - other.rho_hat[k]).norm_sqr()
                    + (self.j_hat[k] - other.j_hat[k]).norm_sqr())
            })
            .sum();
        (PERIOD * s).sqrt()
    }

    /// Per-mode energies `(σ²/2γ)|ρ̂_k|² + |ĵ_k|²`.
    pub fn mode_energies(&self, gamma: f64, sigma: f64) -> Vec<f64> {
        let c = sigma * sigma / (2.0 * gamma);
        self.rho_hat
            .iter()
            .zip(&self.j_hat)
            .map(|(r, j)| c * r.norm_sqr() + j.norm_sqr())
            .collect()
    }

    pub fn rho_grid(&self, geometry: &TorusGeometry) -> Vec<f64> {
        geometry.synthesize_half(&self.rho_hat)
    }

    pub fn j_grid(&self, geometry: &TorusGeometry) -> Vec<f64> {
        geometry.synthesize_half(&self.j_hat)
    }

    fn max_abs(&self) -> (f64, f64) {
        let m = |v: &[Complex64]| v.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        (m(&self.rho_hat), m(&self.j_hat))
    }
}

/// `2π·ρ̂₀`.
pub fn total_mass(state: &SpectralState) -> f64 {
    debug_assert!(state.rho_hat[0].im.abs() <= 1e-14);
    PERIOD * state.rho_hat[0].re
}

/// First crossing times and monitored series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoppingStatus {
    /// First time `‖X‖ ≥ k`; `None` if not reached.
    pub tau_k_time: Option<f64>,
    /// First time `‖X‖ ≥ k` or `min ρ̃ ≤ δ`; `None` if neither is reached.
    pub mu_delta_time: Option<f64>,
    pub min_rho_series: Vec<(f64, f64)>,
    pub norm_series: Vec<(f64, f64)>,
}

impl StoppingStatus {
    /// True when neither threshold was reached.
    pub fn survived(&self) -> bool {
        self.mu_delta_time.is_none()
    }
}

/// Thresholds of the stopping monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub k_norm: f64,
    pub delta: f64,
    pub halt_at_floor: bool,
}

impl Thresholds {
    /// Thresholds that never trigger.
    pub fn disabled() -> Self {
        Self {
            k_norm: f64::INFINITY,
            delta: f64::NEG_INFINITY,
            halt_at_floor: true,
        }
    }
}

/// Evaluate `‖X‖` and `min ρ̃`, record first crossings and flip the status.
pub fn stopping_monitor(
    state: &mut SpectralState,
    geometry: &TorusGeometry,
    thresholds: &Thresholds,
    status: &mut StoppingStatus,
) {
    let norm = state.norm_h1();
    let min_rho = state.rho_grid(geometry).into_iter().fold(f64::INFINITY, f64::min);
    let t = state.t;
    status.norm_series.push((t, norm));
    status.min_rho_series.push((t, min_rho));
    if state.status != Status::Running {
        return;
    }
    if norm >= thresholds.k_norm {
        status.tau_k_time.get_or_insert(t);
        status.mu_delta_time.get_or_insert(t);
        state.status = Status::StoppedNorm(t);
    } else if min_rho <= thresholds.delta && status.mu_delta_time.is_none() {
        status.mu_delta_time = Some(t);
        if thresholds.halt_at_floor {
            state.status = Status::StoppedFloor(t);
        }
    }
}

/// Precomputed operators for one configuration.
#[derive(Debug, Clone)]
pub struct SpdeSolver {
    pub cfg: SpdeConfig,
    pub geometry: TorusGeometry,
    pub thresholds: Thresholds,
    k_cut: usize,
    prop: Vec<Mat2>,
    prop_half: Vec<Mat2>,
    conv: Vec<Complex64>,
    lambda: Vec<f64>,
}

impl SpdeSolver {
    pub fn new(cfg: &SpdeConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new_unchecked(cfg, Thresholds {
            k_norm: cfg.k_norm_value()?,
            delta: cfg.delta,
            halt_at_floor: cfg.halt_at_floor,
        })
    }

    /// Solver with explicit thresholds, skipping the ordering checks.
    pub fn new_unchecked(cfg: &SpdeConfig, thresholds: Thresholds) -> Result<Self> {
        let geometry = TorusGeometry::new(cfg.n_grid)?;
        let k_cut = cfg.k_cut();
        if k_cut < 1 || 3 * k_cut > cfg.n_grid {
            return Err(Error::Config(format!("k_cut = {k_cut} must lie in 1..=n_grid/3")));
        }
        let mut prop = Vec::with_capacity(k_cut + 1);
        let mut prop_half = Vec::with_capacity(k_cut + 1);
        for k in 0..=k_cut as i64 {
            prop.push(linear_propagator(k, cfg.dt, cfg.gamma, cfg.sigma)?);
            prop_half.push(linear_propagator(k, 0.5 * cfg.dt, cfg.gamma, cfg.sigma)?);
        }
        let conv = (0..=k_cut as i64)
            .map(|k| cfg.potential.convolution_multiplier(k, 1))
            .collect();
        let noise_kernel = KernelParams::new(std::f64::consts::SQRT_2 * cfg.epsilon, geometry.clone())?;
        let lambda = noise_kernel.fourier_coeffs.clone();
        Ok(Self {
            cfg: cfg.clone(),
            geometry,
            thresholds,
            k_cut,
            prop,
            prop_half,
            conv,
            lambda,
        })
    }

    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    /// Eigenvalues `λ_k` of the noise covariance.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn initial_state(&self) -> SpectralState {
        SpectralState::from_datum(&self.geometry, &self.cfg.initial, self.k_cut)
    }

    /// Initial state with its monitor record.
    pub fn start(&self) -> (SpectralState, StoppingStatus) {
        let mut s = self.initial_state();
        let mut st = StoppingStatus::default();
        stopping_monitor(&mut s, &self.geometry, &self.thresholds, &mut st);
        (s, st)
    }

    /// Modes of the nonlinear drift `−(W′∗ρ̃)ρ̃`, dealiased to `|k| ≤ K`.
    pub fn drift_modes(&self, rho_hat: &[Complex64]) -> Vec<Complex64> {
        if self.cfg.potential.is_flat() {
            return vec![ZERO; rho_hat.len()];
        }
        let conv_hat: Vec<Complex64> = rho_hat.iter().zip(&self.conv).map(|(r, m)| r * m).collect();
        let conv = self.geometry.synthesize_half(&conv_hat);
        let rho = self.geometry.synthesize_half(rho_hat);
        let prod: Vec<f64> = conv.iter().zip(&rho).map(|(a, b)| -a * b).collect();
        self.geometry.analyze_half(&prod, self.k_cut)
    }

    /// Modes of `B_{N,δ}(X)ΔW = (σ/√N) h_δ(|ρ̃|) ξ` for Brownian mode
    /// increments `b`.
    pub fn noise_modes(&self, rho_hat: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let xi = qwiener_from_modes(&self.geometry, &self.lambda, b);
        let rho = self.geometry.synthesize_half(rho_hat);
        let amp = self.cfg.sigma / self.cfg.n_noise.sqrt();
        let prod: Vec<f64> = rho
            .iter()
            .zip(&xi)
            .map(|(r, x)| amp * h_delta(r.abs(), self.cfg.delta) * x)
            .collect();
        self.geometry.analyze_half(&prod, self.k_cut)
    }

    pub fn draw_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        draw_brownian_modes(rng, self.geometry.n_grid(), self.cfg.dt)
    }

    /// Exponential Euler–Maruyama step with given Brownian mode increments
    /// (`None` switches the noise off), followed by the stopping monitor.
    pub fn step_with(
        &self,
        state: &mut SpectralState,
        status: &mut StoppingStatus,
        increments: Option<&[Complex64]>,
    ) -> Result<()> {
        if let Status::StoppedNorm(t) | Status::StoppedFloor(t) = state.status {
            return Err(Error::Stopped(t));
        }
        let dt = self.cfg.dt;
        let drift = self.drift_modes(&state.rho_hat);
        let noise = match increments {
            Some(b) if self.cfg.sigma > 0.0 => Some(self.noise_modes(&state.rho_hat, b)),
            _ => None,
        };
        for k in 0..=self.k_cut {
            let mut j = state.j_hat[k] + drift[k] * dt;
            if let Some(n) = &noise {
                j += n[k];
            }
            let p = &self.prop[k];
            if k == 0 {
                state.j_hat[0] = Complex64::new((p[1][1] * j).re, 0.0);
            } else {
                let (r, jn) = apply(p, (state.rho_hat[k], j));
                state.rho_hat[k] = r;
                state.j_hat[k] = jn;
            }
        }
        state.t += dt;
        let (rm, jm) = state.max_abs();
        if !(rm.is_finite() && jm.is_finite()) {
            return Err(Error::Diverged {
                t: state.t,
                rho_max: rm,
                j_max: jm,
            });
        }
        stopping_monitor(state, &self.geometry, &self.thresholds, status);
        Ok(())
    }

    /// [`SpdeSolver::step_with`] drawing the increments from `rng` when the
    /// configuration has noise switched on.
    pub fn step_mild<R: Rng + ?Sized>(
        &self,
        state: &mut SpectralState,
        status: &mut StoppingStatus,
        rng: &mut R,
    ) -> Result<()> {
        if self.cfg.noise {
            let b = self.draw_increments(rng);
            self.step_with(state, status, Some(&b))
        } else {
            self.step_with(state, status, None)
        }
    }

    fn lawson_rk4(&self, state: &mut SpectralState) {
        let h = self.cfg.dt;
        let kc = self.k_cut;
        let n = |rho: &[Complex64]| self.drift_modes(rho);
        let u = (state.rho_hat.clone(), state.j_hat.clone());
        let prop_apply = |m: &[Mat2], r: &[Complex64], j: &[Complex64]| -> (Vec<Complex64>, Vec<Complex64>) {
            let mut ro = vec![ZERO; kc + 1];
            let mut jo = vec![ZERO; kc + 1];
            for k in 0..=kc {
                let (a, b) = apply(&m[k], (r[k], j[k]));
                ro[k] = if k == 0 { r[0] } else { a };
                jo[k] = b;
            }
            (ro, jo)
        };
        let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + y * s).collect()
        };
        let k1 = n(&u.0);
        let (ra, _) = prop_apply(&self.prop_half, &u.0, &axpy(&u.1, 0.5 * h, &k1));
        let k2 = n(&ra);
        // the drift only feeds the j-component, so stages need ρ alone
        let (rb, _) = prop_apply(&self.prop_half, &u.0, &u.1);
        let k3 = n(&rb);
        let zero = vec![ZERO; kc + 1];
        let (pk3r, _) = prop_apply(&self.prop_half, &zero, &k3);
        let (rc0, _) = prop_apply(&self.prop, &u.0, &u.1);
        let rc: Vec<Complex64> = rc0.iter().zip(&pk3r).map(|(a, b)| a + b * h).collect();
        let k4 = n(&rc);
        let (r1, j1) = prop_apply(&self.prop, &u.0, &axpy(&u.1, h / 6.0, &k1));
        let k23: Vec<Complex64> = k2.iter().zip(&k3).map(|(a, b)| a + b).collect();
        let (r2, j2) = prop_apply(&self.prop_half, &zero, &k23);
        for k in 0..=kc {
            if k > 0 {
                state.rho_hat[k] = r1[k] + r2[k] * (h / 3.0);
            }
            state.j_hat[k] = j1[k] + j2[k] * (h / 3.0) + k4[k] * (h / 6.0);
        }
        state.j_hat[0].im = 0.0;
    }

    /// One deterministic step with the configured noise-free scheme.
    pub fn step_noise_free(&self, state: &mut SpectralState, status: &mut StoppingStatus) -> Result<()> {
        match self.cfg.noise_free_scheme {
            NoiseFreeScheme::ExponentialEuler => self.step_with(state, status, None),
            NoiseFreeScheme::LawsonRk4 => {
                if let Status::StoppedNorm(t) | Status::StoppedFloor(t) = state.status {
                    return Err(Error::Stopped(t));
                }
                self.lawson_rk4(state);
                state.t += self.cfg.dt;
                stopping_monitor(state, &self.geometry, &self.thresholds, status);
                Ok(())
            }
        }
    }

    pub fn steps(&self) -> usize {
        (self.cfg.t_horizon / self.cfg.dt).round() as usize
    }
}

/// Deterministic reference trajectory and its persistence window.
#[derive(Debug, Clone)]
pub struct NoiseFreeRun {
    pub states: Vec<SpectralState>,
    /// First time `min ρ_Z ≤ c₁` or `‖Z‖ ≥ c₂`, if any.
    pub exit_time: Option<f64>,
    pub status: StoppingStatus,
}

/// Noise-free solution `Z` over `[0, T]`, every state kept.
pub fn solve_noise_free(cfg: &SpdeConfig) -> Result<NoiseFreeRun> {
    let solver = SpdeSolver::new(cfg)?;
    solve_noise_free_with(&solver)
}

pub fn solve_noise_free_with(solver: &SpdeSolver) -> Result<NoiseFreeRun> {
    let cfg = &solver.cfg;
    let c2 = cfg.c2_value()?;
    let (mut s, mut status) = solver.start();
    let mut states = vec![s.clone()];
    let mut exit_time = None;
    let check = |s: &SpectralState, status: &StoppingStatus| {
        let min_rho = status.min_rho_series.last().map(|v| v.1).unwrap_or(f64::INFINITY);
        min_rho <= cfg.c1 || s.norm_h1() >= c2
    };
    if check(&s, &status) {
        exit_time = Some(0.0);
    }
    for _ in 0..solver.steps() {
        if s.status != Status::Running {
            break;
        }
        solver.step_noise_free(&mut s, &mut status)?;
        if exit_time.is_none() && check(&s, &status) {
            exit_time = Some(s.t);
        }
        states.push(s.clone());
    }
    Ok(NoiseFreeRun {
        states,
        exit_time,
        status,
    })
}

/// Observed suprema of `W′∗ρ̃`, `W″∗ρ̃` against `sup|W′|·mass`, `sup|W″|·mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionReport {
    pub sup_first: f64,
    pub sup_second: f64,
    pub bound_first: f64,
    pub bound_second: f64,
    pub states_checked: usize,
    pub within: bool,
}

/// Check `|W′∗ρ̃| ≤ C` along states up to `μ_δ` with `ρ̃ ≥ 0`. States past
/// a floor stop are rejected.
pub fn convolution_bounds_check(
    states: &[SpectralState],
    w: &PotentialSpec,
    geometry: &TorusGeometry,
) -> Result<ConvolutionReport> {
    let first = states.first().ok_or(Error::TooFew {
        what: "states",
        needed: 1,
        got: 0,
    })?;
    let mass = total_mass(first);
    let mut report = ConvolutionReport {
        sup_first: 0.0,
        sup_second: 0.0,
        bound_first: w.derivative_bound(1) * mass,
        bound_second: w.derivative_bound(2) * mass,
        states_checked: 0,
        within: true,
    };
    for s in states {
        if let Status::StoppedFloor(t) = s.status {
            return Err(Error::Stopped(t));
        }
        let rho = s.rho_grid(geometry);
        if rho.iter().any(|&r| r < 0.0) {
            continue;
        }
        for (order, slot) in [(1u32, 0usize), (2, 1)] {
            let c: Vec<Complex64> = s
                .rho_hat
                .iter()
                .enumerate()
                .map(|(k, r)| r * w.convolution_multiplier(k as i64, order))
                .collect();
            let sup = geometry.synthesize_half(&c).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if slot == 0 {
                report.sup_first = report.sup_first.max(sup);
            } else {
                report.sup_second = report.sup_second.max(sup);
            }
        }
        report.states_checked += 1;
    }
    report.within = report.sup_first <= report.bound_first + 1e-10
        && report.sup_second <= report.bound_second + 1e-10;
    Ok(report)
}

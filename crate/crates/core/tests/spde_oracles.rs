mod common;

use common::{max_entry_diff, propagator_ode};
use dklab_core::kernels::KernelParams;
use dklab_core::rng::stream_rng;
use dklab_core::spde::{
    convolution_bounds_check, draw_brownian_modes, h_delta, linear_propagator, q_wiener_increment,
    qwiener_from_modes, solve_noise_free, total_mass, SpdeConfig, SpdeSolver, SpectralState, Thresholds,
};
use dklab_core::{Complex64, PotentialSpec, TorusGeometry};
use proptest::prelude::*;

fn mul(a: &common::M2, b: &common::M2) -> common::M2 {
    let z = Complex64::new(0.0, 0.0);
    let mut c = [[z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

#[test]
fn propagator_matches_ode_oracle() {
    for &k in &[0i64, 1, 2, 5, 8] {
        for &(gamma, sigma) in &[(0.5, 0.5), (1.0, 1.0), (2.0, 1.5), (1.0, 3.0)] {
            for &dt in &[1e-3, 0.1, 1.0] {
                let p = linear_propagator(k, dt, gamma, sigma).unwrap();
                let c = sigma * sigma / (2.0 * gamma);
                let norm = gamma.max(k as f64).max(k as f64 * c);
                let steps = ((dt * norm / 5e-4).ceil() as usize).max(20);
                let o = propagator_ode(k, dt, gamma, sigma, steps);
                let d = max_entry_diff(&p, &o);
                assert!(d <= 1e-10, "k {k} gamma {gamma} sigma {sigma} dt {dt}: {d:e}");
            }
        }
    }
}

#[test]
fn defective_point_matches_ode_oracle() {
    // μ = 0 at k = 1 when σ² = γ³/2
    let gamma = 2f64.sqrt();
    let sigma = (gamma.powi(3) / 2.0).sqrt();
    for &dt in &[0.01, 0.5, 2.0] {
        let p = linear_propagator(1, dt, gamma, sigma).unwrap();
        let o = propagator_ode(1, dt, gamma, sigma, (dt / 2e-4).ceil() as usize);
        assert!(max_entry_diff(&p, &o) <= 1e-10);
    }
}

proptest! {
    #[test]
    fn semigroup(k in 0i64..40, s in 0.0f64..2.0, t in 0.0f64..2.0, gamma in 0.2f64..3.0, sigma in 0.1f64..3.0) {
        let a = linear_propagator(k, s, gamma, sigma).unwrap();
        let b = linear_propagator(k, t, gamma, sigma).unwrap();
        let ab = linear_propagator(k, s + t, gamma, sigma).unwrap();
        prop_assert!(max_entry_diff(&mul(&a, &b), &ab) <= 1e-12);
    }

    #[test]
    fn linear_flow_dissipates_mode_energy(seed in 0u64..1000, gamma in 0.3f64..3.0, sigma in 0.2f64..2.0) {
        let cfg = SpdeConfig {
            gamma,
            sigma,
            noise: false,
            potential: PotentialSpec::zero(),
            n_grid: 64,
            epsilon: 0.3,
            dt: 1e-2,
            ..SpdeConfig::default()
        };
        let solver = SpdeSolver::new_unchecked(&cfg, Thresholds::disabled()).unwrap();
        let g = TorusGeometry::new(64).unwrap();
        let mut rng = stream_rng(seed, 0);
        let noise_r: Vec<f64> = draw_brownian_modes(&mut rng, 64, 1.0).iter().map(|c| c.re).collect();
        let noise_j: Vec<f64> = draw_brownian_modes(&mut rng, 64, 1.0).iter().map(|c| c.im).collect();
        let rho: Vec<f64> = (0..64).map(|i| 1.0 + 0.1 * noise_r[i % noise_r.len()]).collect();
        let j: Vec<f64> = (0..64).map(|i| 0.1 * noise_j[i % noise_j.len()]).collect();
        let mut s = SpectralState::from_fields(&g, &rho, &j, solver.k_cut());
        let mut st = Default::default();
        let mut prev = s.mode_energies(gamma, sigma);
        for _ in 0..200 {
            solver.step_with(&mut s, &mut st, None).unwrap();
            let e = s.mode_energies(gamma, sigma);
            for (a, b) in e.iter().zip(&prev) {
                prop_assert!(*a <= *b + 1e-12);
            }
            prev = e;
        }
    }

    #[test]
    fn h_delta_shape(r in 0.0f64..2.0, delta in 1e-3f64..0.5) {
        let v = h_delta(r, delta);
        prop_assert!(v >= 0.0);
        if r >= delta {
            prop_assert_eq!(v, r.sqrt());
        }
        prop_assert_eq!(h_delta(-r, delta), v);
    }
}

#[test]
fn h_delta_is_c2_at_threshold() {
    let delta = 0.02;
    let mut prev_gap = [f64::INFINITY; 3];
    for &h in &[1e-4, 1e-5, 1e-6] {
        let f = |x: f64| h_delta(x, delta);
        let (l0, l1, l2) = (f(delta - 2.0 * h), f(delta - h), f(delta));
        let (r1, r2) = (f(delta + h), f(delta + 2.0 * h));
        // one-sided value, slope and curvature on each side
        let left = [l2, (3.0 * l2 - 4.0 * l1 + l0) / (2.0 * h), (l2 - 2.0 * l1 + l0) / (h * h)];
        let right = [l2, (-3.0 * l2 + 4.0 * r1 - r2) / (2.0 * h), (r2 - 2.0 * r1 + l2) / (h * h)];
        let gap = [
            (left[0] - right[0]).abs(),
            (left[1] - right[1]).abs(),
            (left[2] - right[2]).abs(),
        ];
        assert!(gap[1] <= prev_gap[1] + 1e-9 && gap[2] <= prev_gap[2] + 1e-3);
        prev_gap = gap;
    }
    let exact_d1 = 0.5 / delta.sqrt();
    let exact_d2 = -0.25 * delta.powf(-1.5);
    assert!(prev_gap[0] == 0.0);
    assert!(prev_gap[1] < 1e-4 * exact_d1.abs());
    assert!(prev_gap[2] < 2e-2 * exact_d2.abs());
    // interior minimum value √δ·35/48 at r = 0
    assert!((h_delta(0.0, delta) - delta.sqrt() * 35.0 / 48.0).abs() < 1e-15);
}

#[test]
fn mass_mode_bit_identical_over_long_run() {
    let cfg = SpdeConfig {
        n_grid: 128,
        epsilon: 0.125,
        n_noise: 1e3,
        dt: 1e-3,
        t_horizon: 10.0,
        ..SpdeConfig::default()
    };
    let solver = SpdeSolver::new_unchecked(&cfg, Thresholds::disabled()).unwrap();
    let (mut s, mut st) = solver.start();
    let m0 = s.rho_hat[0];
    let mut rng = stream_rng(5, 0);
    for _ in 0..10_000 {
        solver.step_mild(&mut s, &mut st, &mut rng).unwrap();
        assert_eq!(s.rho_hat[0].re.to_bits(), m0.re.to_bits());
        assert_eq!(s.rho_hat[0].im.to_bits(), m0.im.to_bits());
    }
    assert!((total_mass(&s) - 1.0).abs() < 1e-14);
}

#[test]
fn noise_field_is_real_and_mode_zero_real() {
    let g = TorusGeometry::new(128).unwrap();
    let k = KernelParams::new(0.2 * 2f64.sqrt(), g.clone()).unwrap();
    let mut rng = stream_rng(11, 0);
    for _ in 0..20 {
        let b = draw_brownian_modes(&mut rng, 128, 0.01);
        assert_eq!(b[0].im, 0.0);
        assert_eq!(b[64].im, 0.0);
        let mut full = vec![Complex64::new(0.0, 0.0); 128];
        for m in 0..=64 {
            let c = b[m] * (k.fourier_coeffs[m] / (2.0 * std::f64::consts::PI)).sqrt();
            full[m] = c;
            if m != 0 && m != 64 {
                full[128 - m] = c.conj();
            }
        }
        g.inverse_in_place(&mut full);
        let scale = full.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let asym = full.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(asym <= 1e-13 * scale.max(1.0));
        let xi = qwiener_from_modes(&g, &k.fourier_coeffs, &b);
        for (a, z) in xi.iter().zip(&full) {
            assert!((a - z.re).abs() <= 1e-13 * scale.max(1.0));
        }
    }
}

/// Translation-averaged covariance of `n_draws` increments at grid offsets.
fn qwiener_covariance(eps: f64, dt: f64, offsets: &[usize], n_draws: usize, seed: u64) -> (Vec<f64>, f64) {
    let g = TorusGeometry::for_epsilon(eps, 64).unwrap();
    let k = KernelParams::new(eps * 2f64.sqrt(), g.clone()).unwrap();
    let n = g.n_grid();
    let mut rng = stream_rng(seed, 0);
    let mut acc = vec![0.0; offsets.len()];
    let mut prev: Option<Vec<f64>> = None;
    let mut lag = 0.0;
    for _ in 0..n_draws {
        let xi = q_wiener_increment(&k, dt, &mut rng).unwrap();
        let v = xi.values();
        for (a, &d) in acc.iter_mut().zip(offsets) {
            *a += (0..n).map(|i| v[i] * v[(i + d) % n]).sum::<f64>() / n as f64;
        }
        if let Some(p) = &prev {
            lag += (0..n).map(|i| v[i] * p[i]).sum::<f64>() / n as f64;
        }
        prev = Some(v.to_vec());
    }
    acc.iter_mut().for_each(|a| *a /= n_draws as f64);
    (acc, lag / (n_draws - 1) as f64)
}

#[test]
fn qwiener_covariance_matches_kernel() {
    let (eps, dt) = (0.2, 1e-2);
    let g = TorusGeometry::for_epsilon(eps, 64).unwrap();
    let h = g.spacing();
    let offsets = [0usize, 2, 4, 6, 8];
    let (cov, lag) = qwiener_covariance(eps, dt, &offsets, 10_000, 3);
    let wk = KernelParams::new(eps * 2f64.sqrt(), g).unwrap();
    for (c, &d) in cov.iter().zip(&offsets) {
        let expect = wk.eval(d as f64 * h, 0) * dt;
        assert!((c / expect - 1.0).abs() < 0.05, "offset {d}: {c} vs {expect}");
    }
    // disjoint increments are uncorrelated: lag-1 correlation within 4 se
    let var = cov[0];
    assert!((lag / var).abs() < 4.0 / (10_000f64).sqrt());
}

/// Noise-free Galerkin system for `W = cos`, written directly in Fourier
/// variables: `(W′∗ρ)_{±1} = ±iπ ρ̂_{±1}`.
fn galerkin_rhs(rho: &[Complex64], j: &[Complex64], gamma: f64, sigma: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let kc = rho.len() - 1;
    let i = Complex64::new(0.0, 1.0);
    let c = sigma * sigma / (2.0 * gamma);
    let pi = std::f64::consts::PI;
    let r = |m: i64| -> Complex64 {
        if m.unsigned_abs() as usize > kc {
            Complex64::new(0.0, 0.0)
        } else if m >= 0 {
            rho[m as usize]
        } else {
            rho[(-m) as usize].conj()
        }
    };
    let c1 = i * pi * r(1);
    let cm1 = -i * pi * r(-1);
    let mut dr = vec![Complex64::new(0.0, 0.0); kc + 1];
    let mut dj = vec![Complex64::new(0.0, 0.0); kc + 1];
    for k in 0..=kc {
        let kf = k as f64;
        let nl = -(c1 * r(k as i64 - 1) + cm1 * r(k as i64 + 1));
        dr[k] = -i * kf * j[k];
        dj[k] = -gamma * j[k] - i * kf * c * rho[k] + nl;
    }
    dr[0] = Complex64::new(0.0, 0.0);
    (dr, dj)
}

#[test]
fn noise_free_solver_matches_galerkin_oracle() {
    let cfg = SpdeConfig {
        noise: false,
        n_grid: 128,
        epsilon: 0.125,
        dt: 1e-3,
        t_horizon: 0.5,
        ..SpdeConfig::default()
    };
    let run = solve_noise_free(&cfg).unwrap();
    let last = run.states.last().unwrap();
    let solver = SpdeSolver::new(&cfg).unwrap();
    let s0 = solver.initial_state();
    let (mut r, mut j) = (s0.rho_hat.clone(), s0.j_hat.clone());
    let h = 1e-4;
    let axpy = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    for _ in 0..5000 {
        let (a1, b1) = galerkin_rhs(&r, &j, cfg.gamma, cfg.sigma);
        let (a2, b2) = galerkin_rhs(&axpy(&r, &a1, h / 2.0), &axpy(&j, &b1, h / 2.0), cfg.gamma, cfg.sigma);
        let (a3, b3) = galerkin_rhs(&axpy(&r, &a2, h / 2.0), &axpy(&j, &b2, h / 2.0), cfg.gamma, cfg.sigma);
        let (a4, b4) = galerkin_rhs(&axpy(&r, &a3, h), &axpy(&j, &b3, h), cfg.gamma, cfg.sigma);
        for k in 0..r.len() {
            r[k] += (a1[k] + a2[k] * 2.0 + a3[k] * 2.0 + a4[k]) * (h / 6.0);
            j[k] += (b1[k] + b2[k] * 2.0 + b3[k] * 2.0 + b4[k]) * (h / 6.0);
        }
    }
    let err = (0..r.len())
        .map(|k| (r[k] - last.rho_hat[k]).norm().max((j[k] - last.j_hat[k]).norm()))
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "max modal error {err:e}");
    assert!((last.t - 0.5).abs() < 1e-12);
}

#[test]
fn convolution_bound_and_quadrature() {
    let cfg = SpdeConfig {
        n_grid: 128,
        epsilon: 0.125,
        n_noise: 1e3,
        ..SpdeConfig::default()
    };
    let solver = SpdeSolver::new(&cfg).unwrap();
    let g = solver.geometry.clone();
    let (mut s, mut st) = solver.start();
    let mut rng = stream_rng(9, 0);
    let mut states = vec![s.clone()];
    for _ in 0..solver.steps() {
        solver.step_mild(&mut s, &mut st, &mut rng).unwrap();
        states.push(s.clone());
        if s.status != dklab_core::spde::Status::Running {
            break;
        }
    }
    let report = convolution_bounds_check(&states, &cfg.potential, &g).unwrap();
    assert!(report.within);
    assert!(report.sup_first <= 1.0 + 1e-10);
    assert!(report.states_checked > 0);
    // direct quadrature of ∫ W′(x − y) ρ(y) dy on the grid
    let h = g.spacing();
    let mut sup = 0.0_f64;
    for st in &states {
        let rho = st.rho_grid(&g);
        if rho.iter().any(|&v| v < 0.0) {
            continue;
        }
        for i in 0..g.n_grid() {
            let x = g.x(i);
            let v: f64 = (0..g.n_grid()).map(|m| -(x - g.x(m)).sin() * rho[m] * h).sum();
            sup = sup.max(v.abs());
        }
    }
    assert!((sup - report.sup_first).abs() <= 1e-10, "{sup} vs {}", report.sup_first);
}

#[test]
fn flat_potential_convolution_vanishes() {
    let cfg = SpdeConfig {
        n_grid: 128,
        epsilon: 0.125,
        potential: PotentialSpec::zero(),
        ..SpdeConfig::default()
    };
    let solver = SpdeSolver::new(&cfg).unwrap();
    let s = solver.initial_state();
    let r = convolution_bounds_check(&[s], &cfg.potential, &solver.geometry).unwrap();
    assert_eq!(r.sup_first, 0.0);
    assert_eq!(r.sup_second, 0.0);
}

mod common;

use std::f64::consts::PI;

use common::{bessel_i_scaled, z_oracle};
use dklab_core::kernels::{
    gaussian_density, kernel_fourier, kernel_residual_sup, normalization_constant, von_mises_eval, KernelParams,
};
use proptest::prelude::*;

#[test]
fn bessel_series_sanity() {
    // I₀(1) = 1.2660658777520082, I₁(1) = 0.5651591039924851
    assert!((bessel_i_scaled(0, 1.0) * 1f64.exp() - 1.2660658777520082).abs() < 1e-15);
    assert!((bessel_i_scaled(1, 1.0) * 1f64.exp() - 0.5651591039924851).abs() < 1e-15);
    // large argument: e^{-x} I₀(x) ≈ (2πx)^{-1/2}(1 + 1/(8x) + 9/(128x²))
    let x = 400.0;
    let asym = (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x)) / (2.0 * PI * x).sqrt();
    assert!((bessel_i_scaled(0, x) / asym - 1.0).abs() < 1e-7);
}

#[test]
fn normalisation_matches_bessel() {
    for &eps in &[0.4, 0.2, 0.1, 0.05] {
        let z = normalization_constant(eps).unwrap();
        let rel = (z / z_oracle(eps) - 1.0).abs();
        assert!(rel <= 1e-10, "eps {eps}: rel err {rel:e}");
    }
}

#[test]
fn fourier_sequence_matches_bessel_ratio() {
    for &eps in &[0.4, 0.2, 0.1, 0.05] {
        let k = KernelParams::admissible(eps, 64).unwrap();
        let kappa = 1.0 / (eps * eps);
        let i0 = bessel_i_scaled(0, kappa);
        let kmax = k.geometry().n_grid() / 2;
        let w = kernel_fourier(&k, kmax).unwrap();
        for (m, &v) in w.iter().enumerate() {
            let expect = bessel_i_scaled(m as u32, kappa) / i0;
            assert!((v - expect).abs() <= 1e-8, "eps {eps} k {m}: {v} vs {expect}");
        }
    }
}

#[test]
fn residual_matches_brute_force_scan() {
    for &eps in &[0.4, 0.2, 0.1] {
        let m = 1 << 20;
        let h = 2.0 * PI / m as f64;
        let brute = (0..=m)
            .map(|j| {
                let x = -PI + j as f64 * h;
                (common::von_mises_reference(x, eps) - gaussian_density(x, eps)).abs()
            })
            .fold(0.0, f64::max);
        let fast = kernel_residual_sup(eps).unwrap();
        assert!(fast >= brute * (1.0 - 1e-9), "eps {eps}: {fast} < {brute}");
        assert!((fast / brute - 1.0).abs() < 1e-6, "eps {eps}: {fast} vs {brute}");
    }
}

#[test]
fn residual_frozen_values() {
    // computed by the golden-section search, cross-checked above
    let frozen = [
        (0.4, 2.1678567544814009e-2),
        (0.2, 1.0155963529895118e-2),
        (0.1, 5.0088292678296398e-3),
        (0.05, 2.4961236088998362e-3),
    ];
    for (eps, v) in frozen {
        let r = kernel_residual_sup(eps).unwrap();
        assert!((r / v - 1.0).abs() < 1e-9, "eps {eps}: {r:e}");
    }
}

#[test]
fn gaussian_limit_of_fourier_sequence() {
    // ŵ_k → e^{-k²ε²/2} as ε → 0
    let eps = 0.05;
    let k = KernelParams::admissible(eps, 64).unwrap();
    for m in 1..20usize {
        let g = (-(m as f64 * eps).powi(2) / 2.0).exp();
        assert!((k.fourier_coeffs[m] - g).abs() < 5e-3);
    }
}

proptest! {
    #[test]
    fn kernel_even_positive_unit_mass(eps in 0.05f64..1.5, x in -PI..PI) {
        let k = KernelParams::admissible(eps, 64).unwrap();
        let a = von_mises_eval(&k, x, 0).unwrap();
        let b = von_mises_eval(&k, -x, 0).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-15 * a.max(1.0));
        let d1 = von_mises_eval(&k, x, 1).unwrap() + von_mises_eval(&k, -x, 1).unwrap();
        prop_assert!(d1.abs() <= 1e-12 * (1.0 + a / (eps * eps)));
        let mass = k.geometry().integrate(&k.geometry().points().iter().map(|&y| k.eval(y, 0)).collect::<Vec<_>>());
        prop_assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourier_sequence_in_unit_interval(eps in 0.05f64..1.5) {
        let k = KernelParams::admissible(eps, 64).unwrap();
        prop_assert!(k.fourier_coeffs.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(k.fourier_coeffs.windows(2).all(|w| w[1] <= w[0]));
    }
}

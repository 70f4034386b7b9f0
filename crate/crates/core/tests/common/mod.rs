//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use dklab_core::Complex64;

/// `e^{−κ} I_k(κ)` from the power series, summed with a term recurrence.
pub fn bessel_i_scaled(k: u32, kappa: f64) -> f64 {
    let half = 0.5 * kappa;
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    let mut term = (-kappa + k as f64 * half.ln() - ln_fact).exp();
    let mut sum = term;
    let mut m = 0.0_f64;
    loop {
        m += 1.0;
        term *= half * half / (m * (m + k as f64));
        sum += term;
        if m > half && term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// `Z_ε = 2π e^{−κ} I₀(κ)`.
pub fn z_oracle(epsilon: f64) -> f64 {
    2.0 * std::f64::consts::PI * bessel_i_scaled(0, 1.0 / (epsilon * epsilon))
}

pub type M2 = [[Complex64; 2]; 2];

/// `exp(dt·A)` for the linear mode system by classical RK4 with `steps`
/// substeps applied to the identity.
pub fn propagator_ode(k: i64, dt: f64, gamma: f64, sigma: f64, steps: usize) -> M2 {
    let i = Complex64::new(0.0, 1.0);
    let kk = k as f64;
    let c = sigma * sigma / (2.0 * gamma);
    let a = [
        [Complex64::new(0.0, 0.0), -i * kk],
        [-i * kk * c, Complex64::new(-gamma, 0.0)],
    ];
    let f = |v: [Complex64; 2]| [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
    let h = dt / steps as f64;
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for col in 0..2 {
        let mut v = [Complex64::new(0.0, 0.0); 2];
        v[col] = Complex64::new(1.0, 0.0);
        for _ in 0..steps {
            let k1 = f(v);
            let k2 = f([v[0] + k1[0] * (h / 2.0), v[1] + k1[1] * (h / 2.0)]);
            let k3 = f([v[0] + k2[0] * (h / 2.0), v[1] + k2[1] * (h / 2.0)]);
            let k4 = f([v[0] + k3[0] * h, v[1] + k3[1] * h]);
            for r in 0..2 {
                v[r] += (k1[r] + k2[r] * 2.0 + k3[r] * 2.0 + k4[r]) * (h / 6.0);
            }
        }
        out[0][col] = v[0];
        out[1][col] = v[1];
    }
    out
}

pub fn max_entry_diff(a: &M2, b: &M2) -> f64 {
    let mut m = 0.0_f64;
    for r in 0..2 {
        for c in 0..2 {
            m = m.max((a[r][c] - b[r][c]).norm());
        }
    }
    m
}

/// Periodic von Mises density written out from its definition, normalised
/// with the series value of `Z_ε`.
pub fn von_mises_reference(x: f64, epsilon: f64) -> f64 {
    let kappa = 1.0 / (epsilon * epsilon);
    (kappa * (x.cos() - 1.0)).exp() / z_oracle(epsilon)
}

/// Composite Simpson rule for a periodic integrand on `[0, 2π)` with `m`
/// (even) panels.
pub fn simpson_periodic(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    assert!(m % 2 == 0);
    let h = 2.0 * std::f64::consts::PI / m as f64;
    let mut s = f(0.0) + f(2.0 * std::f64::consts::PI);
    for j in 1..m {
        s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
    }
    s * h / 3.0
}

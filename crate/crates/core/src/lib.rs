//! Numerical laboratory for weakly interacting Langevin particles on the
//! circle and the regularised Dean–Kawasaki equation they induce.
//!
//! The circle has period `2π` throughout. Fields are sampled on a uniform
//! power-of-two grid and carry a Fourier representation with the convention
//! `ĝ_k = n⁻¹ Σ_j g_j e^{-ikx_j}`, so that `g(x) = Σ_k ĝ_k e^{ikx}`.

pub mod error;
pub mod fields;
pub mod kernels;
pub mod particles;
pub mod potential;
pub mod rng;
pub mod spde;
pub mod stats;
pub mod studies;
pub mod torus;
pub mod vfp;

pub use error::{Error, Result};
pub use fields::DensityField;
pub use kernels::KernelParams;
pub use particles::{ModelParams, ParticleEnsemble};
pub use potential::PotentialSpec;
pub use torus::TorusGeometry;

pub use rustfft::num_complex::Complex64;

/// Crate version embedded in emitted artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Size the global worker pool. Results never depend on the count.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) -> Result<()> {
    Ok(())
}

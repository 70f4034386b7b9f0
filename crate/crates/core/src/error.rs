use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("resolution too coarse: n_grid = {n_grid} but epsilon = {epsilon} needs n_grid >= {required}")]
    Resolution {
        n_grid: usize,
        epsilon: f64,
        required: usize,
    },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("time step rejected at t = {t}: |p| = {p} exceeds guard {guard}")]
    StepRejected { t: f64, p: f64, guard: f64 },
    #[error("density not normalised: mass = {0}")]
    Unnormalised(f64),
    #[error("mass drift {drift:e} exceeds tolerance {tol:e}")]
    MassLoss { drift: f64, tol: f64 },
    #[error("clipped negative mass {clipped:e} exceeds budget {budget:e}")]
    NegativeMass { clipped: f64, budget: f64 },
    #[error("momentum grid too narrow: boundary mass {0:e}")]
    BoundaryMass(f64),
    #[error("negative covariance eigenvalue {value:e} at mode {k}")]
    NegativeEigenvalue { k: usize, value: f64 },
    #[error("state already stopped at t = {0}")]
    Stopped(f64),
    #[error("non-finite SPDE state at t = {t} (max |rho_hat| = {rho_max}, max |j_hat| = {j_max})")]
    Diverged { t: f64, rho_max: f64, j_max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(format!("{what} = {x}")))
    }
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

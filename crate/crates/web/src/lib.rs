//! Browser bindings: kernel profiles, a live particle cloud and a live
//! regularised SPDE trajectory.

use dklab_core::fields::{empirical_field, FieldWeight};
use dklab_core::kernels::{gaussian_density, kernel_residual_sup};
use dklab_core::particles::{step_interacting, ModelParams, NoiseStreams};
use dklab_core::rng::stream_rng;
use dklab_core::spde::{total_mass, SpdeConfig, SpdeSolver, SpectralState, Status, StoppingStatus};
use dklab_core::torus::admissible_grid;
use dklab_core::vfp::InitialLaw;
use dklab_core::{KernelParams, ParticleEnsemble, PotentialSpec, TorusGeometry};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn js(e: dklab_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Von Mises kernel and its Gaussian counterpart on `[−π, π)`.
#[wasm_bindgen]
pub struct KernelProfile {
    x: Vec<f64>,
    kernel: Vec<f64>,
    gaussian: Vec<f64>,
    residual: f64,
}

#[wasm_bindgen]
impl KernelProfile {
    #[wasm_bindgen(constructor)]
    pub fn new(epsilon: f64, points: usize) -> Result<KernelProfile, JsError> {
        let k = KernelParams::admissible(epsilon, 64).map_err(js)?;
        let points = points.max(8);
        let x: Vec<f64> = (0..points)
            .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / points as f64)
            .collect();
        Ok(KernelProfile {
            kernel: x.iter().map(|&v| k.eval(v, 0)).collect(),
            gaussian: x.iter().map(|&v| gaussian_density(v, epsilon)).collect(),
            residual: kernel_residual_sup(epsilon).map_err(js)?,
            x,
        })
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn kernel(&self) -> Vec<f64> {
        self.kernel.clone()
    }

    pub fn gaussian(&self) -> Vec<f64> {
        self.gaussian.clone()
    }

    /// `sup |w_ε − γ_ε|` on `[−π, π]`.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Interacting Langevin particles with `W = cos`.
#[wasm_bindgen]
pub struct ParticleDemo {
    params: ModelParams,
    potential: PotentialSpec,
    ensemble: ParticleEnsemble,
    noise: NoiseStreams,
    kernel: KernelParams,
    db: Vec<f64>,
}

#[wasm_bindgen]
impl ParticleDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, epsilon: f64, coupling: f64, sigma: f64, seed: u64) -> Result<ParticleDemo, JsError> {
        let params = ModelParams {
            n_particles: n,
            sigma,
            epsilon,
            seed,
            ..ModelParams::default()
        };
        params.validate().map_err(js)?;
        let potential = PotentialSpec::new(vec![0.0, coupling], vec![]).map_err(js)?;
        let law = InitialLaw {
            q_modulation: 0.5,
            p_variance: None,
        };
        let p_std = law.momentum_variance(params.gamma, sigma).sqrt();
        Ok(ParticleDemo {
            ensemble: ParticleEnsemble::sample(n, &law, p_std, seed),
            noise: NoiseStreams::new(seed ^ 0x5EED, n),
            kernel: KernelParams::admissible(epsilon, 128).map_err(js)?,
            params,
            potential,
            db: Vec::new(),
        })
    }

    pub fn step(&mut self, steps: usize) -> Result<(), JsError> {
        for _ in 0..steps {
            self.noise.draw(self.params.dt, &mut self.db);
            step_interacting(&mut self.ensemble, &self.params, &self.potential, &self.db).map_err(js)?;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.ensemble.t
    }

    pub fn positions(&self) -> Vec<f64> {
        self.ensemble.q.clone()
    }

    pub fn momenta(&self) -> Vec<f64> {
        self.ensemble.p.clone()
    }

    pub fn grid(&self) -> Vec<f64> {
        self.kernel.geometry().points()
    }

    /// Regularised density `ρ_ε` on the kernel grid.
    pub fn density(&self) -> Result<Vec<f64>, JsError> {
        Ok(empirical_field(&self.ensemble, &self.kernel, FieldWeight::RHO)
            .map_err(js)?
            .into_values())
    }

    /// Regularised momentum density `j_ε` on the kernel grid.
    pub fn current(&self) -> Result<Vec<f64>, JsError> {
        Ok(empirical_field(&self.ensemble, &self.kernel, FieldWeight::J)
            .map_err(js)?
            .into_values())
    }
}

/// One trajectory of the regularised SPDE with stopping.
#[wasm_bindgen]
pub struct SpdeDemo {
    solver: SpdeSolver,
    geometry: TorusGeometry,
    state: SpectralState,
    status: StoppingStatus,
    rng: ChaCha8Rng,
}

#[wasm_bindgen]
impl SpdeDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(epsilon: f64, n_noise: f64, rho_modulation: f64, seed: u64) -> Result<SpdeDemo, JsError> {
        let mut cfg = SpdeConfig {
            epsilon,
            n_noise,
            n_grid: admissible_grid(epsilon, 128),
            t_horizon: 5.0,
            seed,
            ..SpdeConfig::default()
        };
        cfg.initial.rho_modulation = rho_modulation;
        let solver = SpdeSolver::new(&cfg).map_err(js)?;
        let (state, status) = solver.start();
        Ok(SpdeDemo {
            geometry: solver.geometry.clone(),
            solver,
            state,
            status,
            rng: stream_rng(seed, 0),
        })
    }

    /// Advance up to `steps` steps; false once the trajectory has stopped or
    /// reached the horizon.
    pub fn step(&mut self, steps: usize) -> Result<bool, JsError> {
        for _ in 0..steps {
            if !self.running() {
                return Ok(false);
            }
            self.solver
                .step_mild(&mut self.state, &mut self.status, &mut self.rng)
                .map_err(js)?;
        }
        // monitor series are not shown; keep memory flat
        self.status.min_rho_series.clear();
        self.status.norm_series.clear();
        Ok(self.running())
    }

    fn running(&self) -> bool {
        self.state.status == Status::Running && self.state.t < self.solver.cfg.t_horizon - 0.5 * self.solver.cfg.dt
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn grid(&self) -> Vec<f64> {
        self.geometry.points()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.state.rho_grid(&self.geometry)
    }

    pub fn current(&self) -> Vec<f64> {
        self.state.j_grid(&self.geometry)
    }

    pub fn mass(&self) -> f64 {
        total_mass(&self.state)
    }

    pub fn norm(&self) -> f64 {
        self.state.norm_h1()
    }

    /// `running`, `stopped_norm` or `stopped_floor`.
    pub fn status(&self) -> String {
        match self.state.status {
            Status::Running => "running",
            Status::StoppedNorm(_) => "stopped_norm",
            Status::StoppedFloor(_) => "stopped_floor",
        }
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shapes() {
        let p = KernelProfile::new(0.2, 100).unwrap();
        assert_eq!(p.x().len(), 100);
        assert!(p.residual() > 0.0);
    }

    #[test]
    fn particle_demo_keeps_unit_mass() {
        let mut d = ParticleDemo::new(64, 0.3, 1.0, 1.0, 3).unwrap();
        d.step(20).unwrap();
        let rho = d.density().unwrap();
        let h = 2.0 * std::f64::consts::PI / rho.len() as f64;
        assert!((rho.iter().sum::<f64>() * h - 1.0).abs() < 1e-12);
        assert!((d.time() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn spde_demo_runs_to_horizon_or_stops() {
        let mut d = SpdeDemo::new(0.1, 1e4, 0.3, 1).unwrap();
        while d.step(500).unwrap() {}
        assert!(d.status() != "running" || (d.time() - 5.0).abs() < 1e-9);
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }
}

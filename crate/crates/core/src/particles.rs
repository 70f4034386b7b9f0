//! Interacting Langevin particles and their mean-field companions driven by
//! the same Brownian increments.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::potential::{trig_moments, PotentialSpec};
use crate::rng::{derive_seed, normal, stream_rng};
use crate::torus::wrap_unchecked;
use crate::vfp::{self, InitialLaw, PhaseSpaceDensity, VfpConfig, VfpSolver};

/// Time integrator for the particle branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `q += p dt; p += (−γp + F(q)) dt + σ ΔB` from the old state.
    #[default]
    EulerMaruyama,
    /// Half drift in `q`, full kick at the midpoint, half drift again.
    HalfStep,
}

/// Physical and numerical parameters of a particle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub n_particles: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub momentum_guard: f64,
    pub scheme: Scheme,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_particles: 256,
            gamma: 1.0,
            sigma: 1.0,
            t_horizon: 1.0,
            dt: 0.01,
            theta: 8.0,
            epsilon: 0.5,
            burn_in: 1.0,
            seed: 0,
            momentum_guard: 1e3,
            scheme: Scheme::EulerMaruyama,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        require(self.n_particles >= 1, || "n_particles must be >= 1".into())?;
        require(self.gamma >= 0.0 && self.gamma.is_finite(), || {
            format!("gamma must be >= 0, got {}", self.gamma)
        })?;
        require(self.sigma >= 0.0 && self.sigma.is_finite(), || {
            format!("sigma must be >= 0, got {}", self.sigma)
        })?;
        require(self.dt > 0.0, || format!("dt must be positive, got {}", self.dt))?;
        let dt_max = 1e-2 / self.gamma.max(1.0);
        require(self.dt <= dt_max * (1.0 + 1e-12), || {
            format!("dt = {} exceeds 1e-2/max(gamma, 1) = {dt_max}", self.dt)
        })?;
        require(self.t_horizon >= 0.0, || "t_horizon must be >= 0".into())?;
        require(self.epsilon > 0.0, || "epsilon must be positive".into())?;
        require(self.momentum_guard > 0.0, || "momentum_guard must be positive".into())?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_horizon / self.dt).round() as usize
    }

    /// Pair `(N, ε)` with `N = round(ε₀^{−θ})` and `ε = N^{−1/θ}`, so that
    /// `N ε^θ = 1` up to rounding.
    pub fn scaled_pair(epsilon_nominal: f64, theta: f64) -> (usize, f64) {
        let n = epsilon_nominal.powf(-theta).round().max(1.0) as usize;
        (n, (n as f64).powf(-1.0 / theta))
    }
}

/// Positions (wrapped and lifted to the line) and momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub q: Vec<f64>,
    /// Unwrapped positions accumulated during integration.
    pub lift: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl ParticleEnsemble {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Config("q and p lengths differ".into()));
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("particle state".into()));
        }
        let q: Vec<f64> = q.into_iter().map(wrap_unchecked).collect();
        Ok(Self {
            lift: q.clone(),
            q,
            p,
            t: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `N` i.i.d. draws from `law`, each particle on its own stream.
    pub fn sample(n: usize, law: &InitialLaw, p_std: f64, seed: u64) -> Self {
        let (q, p) = (0..n)
            .map(|i| law.sample(&mut stream_rng(seed, i as u64), p_std))
            .unzip();
        Self::new(q, p).expect("sampled states are finite")
    }

    /// Reset the clock and the lift to the wrapped positions.
    pub fn restart(&mut self) {
        self.t = 0.0;
        self.lift.clone_from(&self.q);
    }
}

/// Interacting force `−(1/N) Σ_j W′(q_i − q_j)` for every particle, including
/// the self term, in `O(N·k_max)`.
pub fn pairwise_force(ensemble: &ParticleEnsemble, w: &PotentialSpec) -> Result<Vec<f64>> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(force_from_positions(&ensemble.q, w))
}

fn force_from_positions(q: &[f64], w: &PotentialSpec) -> Vec<f64> {
    if w.is_flat() {
        return vec![0.0; q.len()];
    }
    let (c, s) = trig_moments(q, w.k_max());
    let conv = w.convolved(&c, &s);
    q.iter().map(|&x| -conv.derivative(x, 1)).collect()
}

/// Mean-field force `−(W′∗ρ[f])(q)`.
pub fn meanfield_force(q: f64, density: &PhaseSpaceDensity, w: &PotentialSpec) -> Result<f64> {
    let mass = density.mass();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Unnormalised(mass));
    }
    let (c, s) = density.marginal_moments(w.k_max());
    Ok(MeanFieldForce::new(w, &c, &s).at(q))
}

/// `−(W′∗ρ)` as a trigonometric sum, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct MeanFieldForce {
    conv: Option<PotentialSpec>,
}

impl MeanFieldForce {
    pub fn new(w: &PotentialSpec, c: &[f64], s: &[f64]) -> Self {
        Self {
            conv: (!w.is_flat()).then(|| w.convolved(c, s)),
        }
    }

    #[inline]
    pub fn at(&self, q: f64) -> f64 {
        match &self.conv {
            Some(conv) => -conv.derivative(q, 1),
            None => 0.0,
        }
    }
}

/// Trigonometric moments of `ρ[f_t]` at every step of a VFP solve.
#[derive(Debug, Clone)]
pub struct MeanFieldPath {
    pub dt: f64,
    pub forces: Vec<MeanFieldForce>,
}

impl MeanFieldPath {
    /// Advance `f` for `steps` steps, recording the force at each start time.
    pub fn record(
        f: &mut PhaseSpaceDensity,
        solver: &VfpSolver,
        w: &PotentialSpec,
        steps: usize,
    ) -> Result<Self> {
        let mut forces = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (c, s) = f.marginal_moments(w.k_max());
            forces.push(MeanFieldForce::new(w, &c, &s));
            solver.step(f)?;
        }
        Ok(Self {
            dt: solver.dt,
            forces,
        })
    }

    /// Zero force for every step.
    pub fn flat(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            forces: vec![MeanFieldForce { conv: None }; steps],
        }
    }
}

/// One Brownian stream per particle.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    rngs: Vec<ChaCha8Rng>,
}

impl NoiseStreams {
    pub fn new(seed: u64, n: usize) -> Self {
        Self::with_ids(seed, &(0..n as u64).collect::<Vec<_>>())
    }

    /// Streams with explicit ids, so labels and noise can be permuted together.
    pub fn with_ids(seed: u64, ids: &[u64]) -> Self {
        Self {
            rngs: ids.iter().map(|&i| stream_rng(seed, i)).collect(),
        }
    }

    /// Increments `ΔB_i ~ N(0, dt)`.
    pub fn draw(&mut self, dt: f64, out: &mut Vec<f64>) {
        let s = dt.sqrt();
        out.clear();
        out.extend(self.rngs.iter_mut().map(|r| s * normal(r)));
    }
}

fn kick(
    ens: &mut ParticleEnsemble,
    params: &ModelParams,
    force: &dyn Fn(&[f64]) -> Vec<f64>,
    db: &[f64],
) -> Result<()> {
    let dt = params.dt;
    let (g, s) = (params.gamma, params.sigma);
    match params.scheme {
        Scheme::EulerMaruyama => {
            let f = force(&ens.q);
            for i in 0..ens.q.len() {
                let p = ens.p[i];
                let dq = p * dt;
                ens.lift[i] += dq;
                ens.q[i] = wrap_unchecked(ens.q[i] + dq);
                ens.p[i] = p + (-g * p + f[i]) * dt + s * db[i];
            }
        }
        Scheme::HalfStep => {
            for i in 0..ens.q.len() {
                let dq = 0.5 * ens.p[i] * dt;
                ens.lift[i] += dq;
                ens.q[i] = wrap_unchecked(ens.q[i] + dq);
            }
            let f = force(&ens.q);
            for i in 0..ens.q.len() {
                let p = ens.p[i];
                ens.p[i] = p + (-g * p + f[i]) * dt + s * db[i];
                let dq = 0.5 * ens.p[i] * dt;
                ens.lift[i] += dq;
                ens.q[i] = wrap_unchecked(ens.q[i] + dq);
            }
        }
    }
    ens.t += dt;
    if let Some(&p) = ens
        .p
        .iter()
        .find(|p| !(p.abs() <= params.momentum_guard))
    {
        return Err(Error::StepRejected {
            t: ens.t,
            p: p.abs(),
            guard: params.momentum_guard,
        });
    }
    Ok(())
}

/// One step of the interacting system with given increments.
pub fn step_interacting(
    ens: &mut ParticleEnsemble,
    params: &ModelParams,
    w: &PotentialSpec,
    db: &[f64],
) -> Result<()> {
    kick(ens, params, &|q| force_from_positions(q, w), db)
}

/// One step of independent mean-field particles with given increments.
pub fn step_meanfield(
    ens: &mut ParticleEnsemble,
    params: &ModelParams,
    force: &MeanFieldForce,
    db: &[f64],
) -> Result<()> {
    kick(ens, params, &|q| q.iter().map(|&x| force.at(x)).collect(), db)
}

/// Both branches plus the noise they share.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub interacting: ParticleEnsemble,
    pub meanfield: ParticleEnsemble,
    pub noise: NoiseStreams,
    increments: Vec<f64>,
}

impl CoupledState {
    pub fn new(start: ParticleEnsemble, noise: NoiseStreams) -> Self {
        Self {
            meanfield: start.clone(),
            interacting: start,
            noise,
            increments: Vec::new(),
        }
    }

    /// Increments used by the most recent step.
    pub fn last_increments(&self) -> &[f64] {
        &self.increments
    }
}

/// One Euler–Maruyama step of both branches with a single draw of `ΔB`.
pub fn step_coupled(
    state: &mut CoupledState,
    params: &ModelParams,
    w: &PotentialSpec,
    meanfield: &MeanFieldForce,
) -> Result<()> {
    if state.interacting.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    state.noise.draw(params.dt, &mut state.increments);
    step_interacting(&mut state.interacting, params, w, &state.increments)?;
    step_meanfield(&mut state.meanfield, params, meanfield, &state.increments)
}

/// Snapshots of both branches.
#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub interacting: Vec<ParticleEnsemble>,
    pub meanfield: Vec<ParticleEnsemble>,
    pub shared_noise_seed: u64,
}

impl CoupledTrajectory {
    /// Per-snapshot mean over particles of `|q − q̄|^α + |p − p̄|^α`, with
    /// `q` read on the lift.
    pub fn error_moments(&self, alpha: u32) -> Vec<f64> {
        self.interacting
            .iter()
            .zip(&self.meanfield)
            .map(|(a, b)| {
                let s: f64 = (0..a.len())
                    .map(|i| {
                        (a.lift[i] - b.lift[i]).abs().powi(alpha as i32)
                            + (a.p[i] - b.p[i]).abs().powi(alpha as i32)
                    })
                    .sum();
                s / a.len() as f64
            })
            .collect()
    }

    /// Rows `(t, i, q, p, q̄, p̄)` of every snapshot.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 6]> + '_ {
        self.interacting
            .iter()
            .zip(&self.meanfield)
            .flat_map(|(a, b)| {
                (0..a.len()).map(move |i| [a.t, i as f64, a.q[i], a.p[i], b.q[i], b.p[i]])
            })
    }
}

/// Integrate both branches from `start` over the path, keeping every
/// `snapshot_every`-th state (and the first and last).
pub fn run_coupled(
    params: &ModelParams,
    w: &PotentialSpec,
    start: &ParticleEnsemble,
    path: &MeanFieldPath,
    noise_seed: u64,
    snapshot_every: usize,
) -> Result<CoupledTrajectory> {
    let steps = params.steps();
    if path.forces.len() < steps {
        return Err(Error::Config(format!(
            "mean-field path has {} steps, need {steps}",
            path.forces.len()
        )));
    }
    let every = snapshot_every.max(1);
    let mut state = CoupledState::new(start.clone(), NoiseStreams::new(noise_seed, start.len()));
    let mut traj = CoupledTrajectory {
        interacting: vec![state.interacting.clone()],
        meanfield: vec![state.meanfield.clone()],
        shared_noise_seed: noise_seed,
    };
    for n in 0..steps {
        step_coupled(&mut state, params, w, &path.forces[n])?;
        if (n + 1) % every == 0 || n + 1 == steps {
            traj.interacting.push(state.interacting.clone());
            traj.meanfield.push(state.meanfield.clone());
        }
    }
    Ok(traj)
}

/// `sup_t (E[|q₁−q̄₁|^α + |p₁−p̄₁|^α])^{1/α}` over replicas, averaging over
/// particles (exchangeable) as well.
pub fn chaos_distance(replicas: &[CoupledTrajectory], alpha: u32) -> Result<f64> {
    if replicas.len() < 2 {
        return Err(Error::TooFew {
            what: "replicas",
            needed: 2,
            got: replicas.len(),
        });
    }
    let moments: Vec<Vec<f64>> = replicas.iter().map(|r| r.error_moments(alpha)).collect();
    chaos_from_moments(&moments, alpha)
}

/// Same as [`chaos_distance`] from precomputed per-replica error moments.
pub fn chaos_from_moments(moments: &[Vec<f64>], alpha: u32) -> Result<f64> {
    if alpha < 2 || alpha % 2 != 0 {
        return Err(Error::Config(format!("alpha must be even and >= 2, got {alpha}")));
    }
    if moments.len() < 2 {
        return Err(Error::TooFew {
            what: "replicas",
            needed: 2,
            got: moments.len(),
        });
    }
    let snaps = moments[0].len();
    let r = moments.len() as f64;
    Ok((0..snaps)
        .map(|k| (moments.iter().map(|m| m[k]).sum::<f64>() / r).powf(1.0 / alpha as f64))
        .fold(0.0, f64::max))
}

/// Mean-field law along burn-in and main horizon, computed once and shared
/// by all replicas.
#[derive(Debug, Clone)]
pub struct MeanFieldLaw {
    pub burn_in: MeanFieldPath,
    pub main: MeanFieldPath,
    /// Density at the end of burn-in, clock reset to zero.
    pub f_start: PhaseSpaceDensity,
    pub f_end: PhaseSpaceDensity,
    pub solver: VfpSolver,
}

impl MeanFieldLaw {
    pub fn compute(
        params: &ModelParams,
        law: &InitialLaw,
        w: &PotentialSpec,
        vfp_cfg: &VfpConfig,
    ) -> Result<Self> {
        params.validate()?;
        if !(params.burn_in > 0.0) {
            return Err(Error::Config(format!(
                "burn_in must be positive (restart at t0 > 0), got {}",
                params.burn_in
            )));
        }
        let (mut f, solver) = vfp::setup(vfp_cfg, law, params.gamma, params.sigma, params.dt, w)?;
        let burn_steps = (params.burn_in / params.dt).round() as usize;
        let burn_in = MeanFieldPath::record(&mut f, &solver, w, burn_steps)?;
        f.t = 0.0;
        let f_start = f.clone();
        let main = MeanFieldPath::record(&mut f, &solver, w, params.steps())?;
        Ok(Self {
            burn_in,
            main,
            f_start,
            f_end: f,
            solver,
        })
    }
}

/// Draw `N` states from `law` and evolve them as independent mean-field
/// particles along `burn_in`; clocks and lifts are reset afterwards.
pub fn burn_in_particles(
    params: &ModelParams,
    law: &InitialLaw,
    burn_in: &MeanFieldPath,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let var = law.momentum_variance(params.gamma, params.sigma);
    let mut ens = ParticleEnsemble::sample(params.n_particles, law, var.sqrt(), derive_seed(seed, &[0xB0B]));
    let mut noise = NoiseStreams::new(derive_seed(seed, &[0xB0B, 1]), params.n_particles);
    let mut db = Vec::new();
    for force in &burn_in.forces {
        noise.draw(params.dt, &mut db);
        step_meanfield(&mut ens, params, force, &db)?;
    }
    ens.restart();
    Ok(ens)
}

/// Sample `N` states from `law`, then evolve them as independent mean-field
/// particles alongside the VFP density for the burn-in time `t₀ > 0`.
/// Returns the particles and the density at `t₀`, with clocks reset.
pub fn warm_start(
    params: &ModelParams,
    law: &InitialLaw,
    w: &PotentialSpec,
    vfp_cfg: &VfpConfig,
) -> Result<(ParticleEnsemble, PhaseSpaceDensity, VfpSolver)> {
    params.validate()?;
    if !(params.burn_in > 0.0) {
        return Err(Error::Config(format!(
            "burn_in must be positive (restart at t0 > 0), got {}",
            params.burn_in
        )));
    }
    let (mut f, solver) = vfp::setup(vfp_cfg, law, params.gamma, params.sigma, params.dt, w)?;
    let steps = (params.burn_in / params.dt).round() as usize;
    let path = MeanFieldPath::record(&mut f, &solver, w, steps)?;
    let ens = burn_in_particles(params, law, &path, params.seed)?;
    f.t = 0.0;
    Ok((ens, f, solver))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_particle_examples() {
        let w = PotentialSpec::cosine();
        let e = ParticleEnsemble::new(vec![0.0, PI], vec![0.0, 0.0]).unwrap();
        let f = pairwise_force(&e, &w).unwrap();
        assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15);
        let e = ParticleEnsemble::new(vec![0.0, PI / 2.0], vec![0.0, 0.0]).unwrap();
        let f = pairwise_force(&e, &w).unwrap();
        assert!((f[0] + 0.5).abs() < 1e-15);
        let empty = ParticleEnsemble::new(vec![], vec![]).unwrap();
        assert_eq!(pairwise_force(&empty, &w), Err(Error::EmptyEnsemble));
    }

    #[test]
    fn free_transport_is_ballistic() {
        let params = ModelParams {
            gamma: 0.0,
            sigma: 0.0,
            dt: 0.01,
            ..Default::default()
        };
        let q0 = vec![0.1, 2.0, 6.0];
        let p0 = vec![1.5, -0.7, 3.0];
        let mut e = ParticleEnsemble::new(q0.clone(), p0.clone()).unwrap();
        let db = vec![0.0; 3];
        for _ in 0..100 {
            step_interacting(&mut e, &params, &PotentialSpec::zero(), &db).unwrap();
        }
        for i in 0..3 {
            assert!((e.lift[i] - (q0[i] + p0[i] * 1.0)).abs() < 1e-13);
            assert_eq!(e.p[i], p0[i]);
        }
    }

    #[test]
    fn guard_rejects_runaway_momentum() {
        let params = ModelParams {
            momentum_guard: 1.0,
            ..Default::default()
        };
        let mut e = ParticleEnsemble::new(vec![0.0], vec![0.99]).unwrap();
        let r = step_interacting(&mut e, &params, &PotentialSpec::zero(), &[0.5]);
        assert!(matches!(r, Err(Error::StepRejected { .. })));
    }

    #[test]
    fn warm_start_needs_positive_burn_in() {
        let params = ModelParams {
            burn_in: 0.0,
            ..Default::default()
        };
        let r = warm_start(&params, &InitialLaw::default(), &PotentialSpec::cosine(), &VfpConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn dt_rule_is_enforced() {
        let params = ModelParams {
            gamma: 4.0,
            dt: 0.01,
            ..Default::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn scaled_pair_satisfies_scaling() {
        for &(e, th) in &[(0.5, 8.0), (0.3, 8.0), (0.1, 2.0)] {
            let (n, eps) = ModelParams::scaled_pair(e, th);
            assert!((n as f64 * eps.powf(th) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chaos_needs_two_replicas() {
        assert!(chaos_from_moments(&[vec![0.0]], 2).is_err());
        assert!(chaos_from_moments(&[vec![0.0], vec![0.0]], 3).is_err());
    }
}

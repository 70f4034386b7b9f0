use dklab_core::fields::{empirical_field, FieldWeight};
use dklab_core::studies::{closure_error, run_study, StudyReport, Verdict};
use dklab_core::{KernelParams, ParticleEnsemble};
use serde_json::json;

fn run(name: &str, cfg: serde_json::Value, seed: u64) -> StudyReport {
    run_study(name, cfg, seed).unwrap().0
}

fn small_chaos() -> serde_json::Value {
    json!({
        "n_ladder": [16, 32, 64, 128],
        "replicas": 4,
        "alphas": [2],
        "dynamics": {"t_horizon": 0.2, "burn_in": 0.1},
        "vfp": {"n_q": 32, "n_p": 64}
    })
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    for (name, cfg) in [
        ("chaos", small_chaos()),
        ("interaction", json!({"eps_ladder": [0.4, 0.3, 0.2], "replicas": 3})),
        ("small_noise", json!({"n_ladder": [100.0, 1000.0], "replicas": 3, "spde": {"t_horizon": 0.05}})),
    ] {
        let one = in_pool(1, || run(name, cfg.clone(), 9));
        let four = in_pool(4, || run(name, cfg.clone(), 9));
        assert_eq!(one.raw_table, four.raw_table, "{name}");
        assert_eq!(one.checks, four.checks, "{name}");
    }
}

#[test]
fn seed_changes_the_sample() {
    let a = run("chaos", small_chaos(), 1);
    let b = run("chaos", small_chaos(), 2);
    assert_ne!(a.raw_table, b.raw_table);
    assert_eq!(a.raw_table.columns, b.raw_table.columns);
}

#[test]
fn resolved_config_fills_defaults() {
    let (_, resolved) = run_study("kernel", json!({}), 0).unwrap();
    assert_eq!(resolved["eps_ladder"], json!([0.4, 0.2, 0.1, 0.05]));
    assert!(run_study("chaos", json!({"replicas": 4, "extra": true}), 0).is_err());
}

#[test]
fn flat_potential_chaos_has_zero_error() {
    let mut cfg = small_chaos();
    cfg["potential"] = json!({"cosine_coeffs": []});
    let r = run("chaos", cfg, 3);
    assert!(r.check("errors_vanish").unwrap().passed == Some(true));
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn flat_potential_interaction_remainders_vanish() {
    let r = run(
        "interaction",
        json!({"eps_ladder": [0.4, 0.3, 0.2], "replicas": 2, "potential": {"cosine_coeffs": []}}),
        3,
    );
    assert!(r.check("remainders_vanish").is_some());
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn noise_off_small_noise_is_exact() {
    let r = run(
        "small_noise",
        json!({"n_ladder": [100.0, 1000.0], "replicas": 2, "spde": {"noise": false, "t_horizon": 0.05}}),
        0,
    );
    let c = r.check("noise_free_exact").unwrap();
    assert_eq!(c.value, 0.0);
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn particles_at_rest_close_the_identities_exactly() {
    let r = run(
        "evolution",
        json!({"at_rest": true, "sigma": 0.0, "potential": {"cosine_coeffs": []}, "replicas": 2}),
        0,
    );
    assert!(r.check("residuals_vanish").is_some(), "{:?}", r.checks);
}

#[test]
fn covariance_without_noise_vanishes() {
    let r = run(
        "covariance",
        json!({"sigma": 0.0, "replicas": 1000, "t_horizon": 0.05, "separation_steps": [0, 4]}),
        0,
    );
    for c in r.checks.iter().filter(|c| c.name.starts_with("isometry")) {
        assert_eq!(c.passed, Some(true), "{c:?}");
    }
    assert!(r.raw_table.column("cov_z").unwrap().iter().all(|&v| v == 0.0));
    assert!(run_study("covariance", json!({"replicas": 999}), 0).is_err());
}

#[test]
fn two_point_momenta_close_j2_exactly() {
    // p = ±√c at shared positions: Σ p² w′ = c Σ w′
    let c: f64 = 0.37;
    let q: Vec<f64> = (0..50).flat_map(|i| [i as f64 * 0.41, i as f64 * 0.41]).collect();
    let p: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { c.sqrt() } else { -c.sqrt() }).collect();
    let ens = ParticleEnsemble::new(q, p).unwrap();
    let k = KernelParams::admissible(0.2, 64).unwrap();
    assert!(closure_error(&ens, &k, c).unwrap() < 1e-12);
    // and the current vanishes
    assert!(empirical_field(&ens, &k, FieldWeight::J).unwrap().sup_abs() < 1e-12);
}

#[test]
fn mollifier_and_kernel_reports_are_deterministic() {
    let a = run("mollifier", json!({"eps_ladder": [0.2, 0.1, 0.05], "min_grid": 1024}), 0);
    let b = run("mollifier", json!({"eps_ladder": [0.2, 0.1, 0.05], "min_grid": 1024}), 77);
    assert_eq!(a.raw_table, b.raw_table);
    let k = run("kernel", json!({}), 0);
    assert_eq!(k.raw_table.rows.len(), 4);
    assert!(k.fitted_slope.unwrap() > 0.0);
}

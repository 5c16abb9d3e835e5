use omega_limit::equilibria::lorenz_pair_analytic;
use omega_limit::integrate::{integrate, integrate_steps};
use omega_limit::invariance::{
    lyap_derivative, lyap_value, min_enclosing_c, sphere_samples, verify_trapping, zero_set_ellipsoid,
};
use omega_limit::omega::{cloud_distance, estimate_omega_set};
use omega_limit::section::{find_crossings, zmax_map, DirectionFilter};
use omega_limit::{IntegratorConfig, LorenzParams, StateVec, SystemSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lorenz(r: f64) -> SystemSpec {
    SystemSpec::lorenz(LorenzParams::with_r(r).unwrap()).unwrap()
}

#[test]
fn mirrored_initial_conditions_give_mirrored_trajectories() {
    let sys = lorenz(28.0);
    let cfg = IntegratorConfig::adaptive(1e-12, 1e-12);
    let a = integrate(&sys, StateVec::xyz(1.0, 3.0, 20.0), 0.0, 5.0, &cfg).unwrap();
    let b = integrate(&sys, StateVec::xyz(-1.0, -3.0, 20.0), 0.0, 5.0, &cfg).unwrap();
    let grid: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
    for (p, q) in a.resample(&grid).unwrap().iter().zip(b.resample(&grid).unwrap()) {
        assert!(p.distance(&StateVec::xyz(-q[0], -q[1], q[2])) <= 1e-9);
    }
}

#[test]
fn derivative_routes_agree_across_r() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for r in [1.0, 10.0, 28.0] {
        let p = LorenzParams::with_r(r).unwrap();
        for _ in 0..10_000 {
            let s = StateVec::xyz(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            lyap_derivative(&s, &p).unwrap();
        }
    }
}

#[test]
fn derivative_positive_exactly_inside_ellipsoid() {
    let p = LorenzParams::default();
    let e = zero_set_ellipsoid(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let s = StateVec::xyz(rng.random_range(-12.0..12.0), rng.random_range(-35.0..35.0), rng.random_range(-2.0..40.0));
        let d = lyap_derivative(&s, &p).unwrap();
        if d.abs() > 1e-9 {
            assert_eq!(d > 0.0, e.contains_strictly(&s), "{s:?}");
        }
    }
}

#[test]
fn trapping_margin_grows_with_radius() {
    let p = LorenzParams::default();
    let c_min = min_enclosing_c(&p, 256).unwrap();
    let reports: Vec<f64> = [c_min + 1.0, 45.0, 60.0]
        .iter()
        .map(|&c| verify_trapping(c, &p, 20_000, 1).unwrap().max_derivative)
        .collect();
    assert!(reports[0] < 0.0);
    assert!(reports.windows(2).all(|w| w[1] < w[0]), "{reports:?}");
}

#[test]
fn trajectories_stay_inside_the_trapping_sphere() {
    let p = LorenzParams::default();
    let sys = lorenz(28.0);
    let bound = 45.0f64.powi(2) + 1e-6;
    let cfg = IntegratorConfig::default();
    for start in sphere_samples(45.0, &p, 100, 3) {
        integrate_steps(&sys, start, 0.0, 5.0, &cfg, |step| {
            let seg = step.hermite();
            for k in 0..=4 {
                let t = step.t0 + (step.t1 - step.t0) * k as f64 / 4.0;
                assert!(lyap_value(&seg.eval(t), &p) <= bound);
            }
        })
        .unwrap();
    }
}

#[test]
fn halving_the_sampling_interval_barely_moves_the_cloud() {
    let sys = lorenz(28.0);
    let cfg = IntegratorConfig::default();
    let ic = StateVec::xyz(5.0, 5.0, 5.0);
    let coarse = estimate_omega_set(&sys, ic, 50.0, 200.0, 0.02, &cfg).unwrap();
    let fine = estimate_omega_set(&sys, ic, 50.0, 200.0, 0.01, &cfg).unwrap();
    let other = estimate_omega_set(&sys, StateVec::xyz(-3.0, 7.0, 20.0), 50.0, 200.0, 0.01, &cfg).unwrap();
    let d_coarse = cloud_distance(&coarse, &other).unwrap().sym_avg;
    let d_fine = cloud_distance(&fine, &other).unwrap().sym_avg;
    assert!((d_coarse - d_fine).abs() < 0.1, "{d_coarse} vs {d_fine}");
}

#[test]
fn stable_regime_collapses_to_b() {
    for r in [5.0, 15.0, 20.0] {
        let p = LorenzParams::with_r(r).unwrap();
        let (_, b) = lorenz_pair_analytic(&p).unwrap();
        let cloud = estimate_omega_set(&lorenz(r), b + StateVec::xyz(0.5, 0.5, 0.5), 200.0, 20.0, 0.5, &IntegratorConfig::default()).unwrap();
        assert!(cloud.points.iter().all(|q| q.distance(&b) <= 1e-6), "r={r}");
    }
}

#[test]
fn crossings_alternate_and_maxima_stay_in_range() {
    let sys = lorenz(28.0);
    let traj = integrate(&sys, StateVec::xyz(5.0, 5.0, 5.0), 0.0, 250.0, &IntegratorConfig::default()).unwrap();
    let events = find_crossings(&traj, 0, 0.0, DirectionFilter::Both).unwrap();
    assert!(events.len() > 50);
    assert!(events.windows(2).all(|w| w[0].direction == -w[1].direction));
    let late = traj.resample(&[50.0]).unwrap()[0];
    let tail = integrate(&sys, late, 50.0, 250.0, &IntegratorConfig::default()).unwrap();
    let map = zmax_map(&tail).unwrap();
    assert!(map.pairs.iter().all(|&(a, b)| a > 25.0 && a < 50.0 && b > 25.0 && b < 50.0));
}

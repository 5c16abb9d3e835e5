use num_complex::Complex64;
use omega_limit::eigen::{det_shifted, eigen3};
use omega_limit::equilibria::{hopf_threshold, lorenz_equilibria, lorenz_pair_analytic};
use omega_limit::omega::{euler_advisor_up_to, Surface};
use omega_limit::systems::finite_difference_jacobian;
use omega_limit::{LorenzParams, Matrix, StateVec, SystemSpec, VectorField};
use proptest::prelude::*;

fn systems() -> Vec<SystemSpec> {
    vec![
        SystemSpec::quintic1d(),
        SystemSpec::van_der_pol(1.0).unwrap(),
        SystemSpec::brusselator(1.0, 3.0).unwrap(),
        SystemSpec::lorenz(LorenzParams::default()).unwrap(),
    ]
}

fn max_gap(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.dim();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a.get(i, j) - b.get(i, j)).abs() / a.get(i, j).abs().max(1.0));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn jacobians_match_finite_differences(x in -50.0..50.0f64, y in -50.0..50.0f64, z in -50.0..50.0f64) {
        for sys in systems() {
            let coords = [x, y, z];
            let state = StateVec::new(&coords[..sys.dimension()]).unwrap();
            let gap = max_gap(&sys.jacobian_at(&state), &finite_difference_jacobian(&sys, &state, 1e-5));
            prop_assert!(gap <= 1e-5, "{} at {:?}: {}", sys.name(), state, gap);
        }
    }

    #[test]
    fn lorenz_field_is_equivariant(x in -50.0..50.0f64, y in -50.0..50.0f64, z in -50.0..50.0f64, r in 0.1..60.0f64) {
        let sys = SystemSpec::lorenz(LorenzParams::with_r(r).unwrap()).unwrap();
        let f = sys.eval_field(&StateVec::xyz(x, y, z)).unwrap();
        let g = sys.eval_field(&StateVec::xyz(-x, -y, z)).unwrap();
        prop_assert_eq!(g, StateVec::xyz(-f[0], -f[1], f[2]));
    }

    #[test]
    fn eigenvalues_are_characteristic_roots(entries in prop::array::uniform9(-10.0..10.0f64)) {
        let rows: Vec<&[f64]> = entries.chunks(3).collect();
        let m = Matrix::from_rows(&rows);
        let scale = 1.0 + m.norm().powi(3);
        for lambda in eigen3(&m) {
            let residual = det_shifted(&m, lambda).norm();
            prop_assert!(residual <= 1e-6 * scale, "{lambda} residual {residual}");
        }
        let sum: Complex64 = eigen3(&m).iter().sum();
        prop_assert!((sum.re - m.trace()).abs() <= 1e-8 * scale && sum.im.abs() <= 1e-8 * scale);
    }

    #[test]
    fn lorenz_pair_is_mirrored(r in 1.01..200.0f64) {
        let p = LorenzParams::with_r(r).unwrap();
        let eqs = lorenz_equilibria(&p).unwrap();
        let (a, b) = lorenz_pair_analytic(&p).unwrap();
        prop_assert!(eqs[1].location.distance(&a) <= 1e-9 && eqs[2].location.distance(&b) <= 1e-9);
        prop_assert!(a.distance(&StateVec::xyz(-b[0], -b[1], b[2])) <= 1e-12);
        for e in &eqs {
            prop_assert!(e.residual <= 1e-10);
        }
    }

    #[test]
    fn hopf_threshold_ignores_bracket(lo in 1.5..24.0f64, hi in 25.5..100.0f64) {
        let r = hopf_threshold(lo, hi, 1e-10).unwrap();
        prop_assert!((r - 470.0 / 19.0).abs() <= 1e-8);
    }

    #[test]
    fn advisor_lists_exact_euler_numbers(count in 0usize..10, max_genus in 0u32..8) {
        let adv = euler_advisor_up_to(count, max_genus);
        let all: Vec<Surface> = adv.consistent_surfaces.iter().chain(&adv.excluded_surfaces).copied().collect();
        prop_assert_eq!(all.len(), max_genus as usize + 1);
        for s in &all {
            prop_assert_eq!(s.euler_number, 2 - 2 * s.genus as i64);
        }
        if count == 0 {
            prop_assert!(adv.consistent_surfaces.iter().all(|s| s.euler_number == 0));
        }
    }
}

#[test]
fn quintic_roots_are_exact() {
    let sys = SystemSpec::quintic1d();
    for k in 1..=5 {
        assert!(sys.rhs(&StateVec::scalar(k as f64))[0].abs() <= 1e-10);
    }
}

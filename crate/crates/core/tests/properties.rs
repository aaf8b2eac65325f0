use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zhk_core::bifurcation::{assemble_f, constrained_state, random_periodic, GaugeState, ModelParams};
use zhk_core::energy::{energy_per_cell, energy_representation};
use zhk_core::fields::{fourier_forward, fourier_inverse, SpectralGrid};
use zhk_core::landau::LadderBasis;
use zhk_core::lattice::{make_lattice, reduce_tau};
use zhk_core::operators::{
    apply_magnetic_laplacian, curl_star, div, gradient, inverse_neg_laplacian, laplacian, project_divfree,
    GaugePotential,
};

fn tau_strategy() -> impl Strategy<Value = Complex64> {
    (-0.5f64..0.5, 0.87f64..1.6).prop_filter_map("outside fundamental domain", |(re, im)| {
        let t = Complex64::new(re, im);
        (t.norm() >= 1.0).then_some(t)
    })
}

fn basis(tau: Complex64, n: usize, m: usize) -> LadderBasis {
    let l = make_lattice(tau, 1).unwrap();
    LadderBasis::new(&SpectralGrid::new(&l, n).unwrap(), m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn cell_area_is_two_pi(re in -3.0f64..3.0, im in 0.2f64..4.0) {
        let l = make_lattice(Complex64::new(re, im), 1).unwrap();
        prop_assert!((l.area() - 2.0 * PI).abs() < 1e-12);
        prop_assert!((l.r - (2.0 * PI / im).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reduction_lands_in_domain_and_is_idempotent(re in -5.0f64..5.0, im in 0.05f64..3.0) {
        let t = reduce_tau(Complex64::new(re, im)).unwrap();
        prop_assert!(t.re.abs() <= 0.5 + 1e-12 && t.norm() >= 1.0 - 1e-10);
        let again = reduce_tau(t).unwrap();
        prop_assert!((again - t).norm() < 1e-12);
    }

    #[test]
    fn standard_cocycle_condition(tau in tau_strategy(), a in -6i64..6, b in -6i64..6, c in -6i64..6, d in -6i64..6) {
        let l = make_lattice(tau, 1).unwrap();
        prop_assert!(l.cocycle().defect((a, b), (c, d)).abs() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn fourier_round_trip_and_parseval(tau in tau_strategy(), seed in any::<u64>()) {
        let b = basis(tau, 16, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_periodic(&b.grid, 3, &mut rng);
        let spec = fourier_forward(&f);
        let back = fourier_inverse(&spec);
        let err = f.values.iter().zip(&back.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-13);
        prop_assert!((spec.energy() - f.norm().powi(2)).abs() < 1e-13);
    }

    #[test]
    fn divergence_free_projection(tau in tau_strategy(), seed in any::<u64>()) {
        let b = basis(tau, 16, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = curl_star(&random_periodic(&b.grid, 3, &mut rng)).add(&gradient(&random_periodic(&b.grid, 3, &mut rng)));
        let p = project_divfree(&v);
        prop_assert!(div(&p).norm() < 1e-12);
        prop_assert!(project_divfree(&p).sub(&p).norm() < 1e-13);
    }

    #[test]
    fn inverse_laplacian_on_mean_zero(tau in tau_strategy(), seed in any::<u64>()) {
        let b = basis(tau, 16, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_periodic(&b.grid, 3, &mut rng).mean_zero();
        let u = inverse_neg_laplacian(&f);
        let back = laplacian(&u);
        let err = f.values.iter().zip(&back.values).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn magnetic_laplacian_is_self_adjoint(tau in tau_strategy(), seed in any::<u64>()) {
        let b = basis(tau, 32, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = GaugeState::random(&b, 6, 1.0, &mut rng);
        let v = GaugeState::random(&b, 6, 1.0, &mut rng);
        let a = GaugePotential::with_alpha(u.alpha.clone());
        let l = u.psi.inner(&apply_magnetic_laplacian(&v.psi, &a).unwrap());
        let r = apply_magnetic_laplacian(&u.psi, &a).unwrap().inner(&v.psi);
        prop_assert!((l - r).norm() < 1e-11);
        let q = u.psi.inner(&apply_magnetic_laplacian(&u.psi, &a).unwrap());
        prop_assert!(q.re >= 0.0 && q.im.abs() < 1e-12);
    }

    #[test]
    fn map_is_gauge_covariant(tau in tau_strategy(), seed in any::<u64>(), delta in 0.0f64..(2.0 * PI), b in 0.6f64..1.4) {
        let basis = basis(tau, 32, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = GaugeState::random(&basis, 6, 0.5, &mut rng);
        let m = ModelParams::double_well(1.0, 2.0, b);
        let lhs = assemble_f(&u.rotate(delta), &m).unwrap();
        let rhs = assemble_f(&u, &m).unwrap().rotate(delta);
        prop_assert!(lhs.sub(&rhs).norm() < 1e-11);
        let f = assemble_f(&u, &m).unwrap();
        prop_assert!(u.psi.inner(&f.psi).im.abs() <= 1e-10 * u.norm().powi(2));
    }

    #[test]
    fn energy_identity_on_constrained_states(tau in tau_strategy(), seed in any::<u64>(), g in 0.3f64..3.0, b in 0.6f64..1.4) {
        let basis = basis(tau, 32, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = constrained_state(GaugeState::random(&basis, 6, 0.6, &mut rng).psi, [0.1, -0.2], b);
        let m = ModelParams::double_well(1.0, g, b);
        let d = energy_per_cell(&u, &m).unwrap();
        prop_assert!((d - energy_representation(&u, &m).unwrap()).abs() <= 1e-9 * (1.0 + d.abs()));
        prop_assert!((energy_per_cell(&u.rotate(0.9), &m).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn rescaled_nonlinearity(t in 0.0f64..2.0, lambda in 0.2f64..3.0, c3 in -1.0f64..1.0) {
        let mut m = ModelParams::double_well(0.8, 1.7, 1.0);
        m.higher = vec![c3];
        let h = 1e-5;
        let dv = (m.potential(t + h) - m.potential(t - h)) / (2.0 * h);
        prop_assert!((dv - m.v(t)).abs() < 1e-8);
        prop_assert!((m.v_lambda(t, lambda) - lambda * m.v(t / lambda)).abs() < 1e-14);
    }
}

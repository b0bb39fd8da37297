use proptest::prelude::*;

use rollmoments::closure::{
    close_scalar, poly_expectation, GaussianMoments, MonomialIndex, StateMoments, StatePolynomial,
};
use rollmoments::config::load_config;
use rollmoments::fit::{fit_pdf, pdf_mass, FitConfig, QuadratureConfig, Shape};
use rollmoments::moments::{accel_second_moment, AccelDecomposition, MomentSet};
use rollmoments::sim::{run_ensemble, SimulationConfig};

const FIXTURE: &str = include_str!("../../../fixtures/c11.toml");

fn state(mean: [f64; 3], sd: [f64; 3], r: [f64; 3]) -> StateMoments {
    // Correlations kept inside the positive-definite region.
    let c = [[1.0, r[0], r[1]], [r[0], 1.0, r[2]], [r[1], r[2], 1.0]];
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = c[i][j] * sd[i] * sd[j];
        }
    }
    StateMoments::new(mean, cov).unwrap()
}

fn small_ensemble(seed: u64) -> SimulationConfig {
    SimulationConfig {
        realizations: 6,
        duration: 120.0,
        master_seed: seed,
        histogram_bins: 50,
        ..Default::default()
    }
}

#[test]
fn ensemble_is_reproducible_and_consistent() {
    let cfg = load_config(FIXTURE).unwrap();
    let sim = small_ensemble(11);
    let a = run_ensemble(&sim, &cfg.roll, &cfg.sea, &cfg.waves, &cfg.cargos).unwrap();
    let b = run_ensemble(&sim, &cfg.roll, &cfg.sea, &cfg.waves, &cfg.cargos).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.sample_count, 6 * 6001);

    let phiddot = a.get("phiddot").unwrap();
    let k1 = a.get("k1").unwrap();
    let k2 = a.get("k2").unwrap();
    assert!((phiddot.moments[0] - k1.moments[0] - k2.moments[0]).abs() < 1e-15);
    for q in &a.quantities {
        let h = q.histogram.as_ref().unwrap();
        assert_eq!(h.total, a.sample_count);
        assert!((h.mass() - 1.0).abs() < 1e-12);
        assert!(q.moments[1] >= q.moments[0] * q.moments[0]);
    }
    // Cargo C1 has L' = 10: K_C2 = 10·K₂ sample by sample.
    let kc2 = a.get("C1.k_c2").unwrap();
    assert!((kc2.moments[1] / (100.0 * k2.moments[1]) - 1.0).abs() < 1e-12);
    assert_eq!(a.state.e_phi2, a.get("phi").unwrap().moments[1]);

    let other = run_ensemble(&small_ensemble(12), &cfg.roll, &cfg.sea, &cfg.waves, &cfg.cargos).unwrap();
    assert_ne!(a.state, other.state);
}

#[test]
fn ensemble_state_feeds_the_analytic_path() {
    let cfg = load_config(FIXTURE).unwrap();
    let stats = run_ensemble(&small_ensemble(3), &cfg.roll, &cfg.sea, &cfg.waves, &cfg.cargos).unwrap();
    let sm = StateMoments::from_raw(&stats.state).unwrap();
    let d = AccelDecomposition::new(&cfg.roll);
    let s = accel_second_moment(&sm, &d).unwrap();
    assert!(s.total > 0.0);
    assert!((s.expanded() / s.total - 1.0).abs() < 1e-10);
}

#[test]
fn divergence_is_reported() {
    let mut cfg = load_config(FIXTURE).unwrap();
    cfg.roll.rho[0] = 60.0;
    let sim = SimulationConfig {
        realizations: 4,
        duration: 300.0,
        ..Default::default()
    };
    let err = run_ensemble(&sim, &cfg.roll, &cfg.sea, &cfg.waves, &cfg.cargos).unwrap_err();
    assert!(err.to_string().contains("diverged"), "{err}");
}

#[test]
fn type1_beats_gaussian_on_heavy_tails() {
    for kurt in [3.6, 4.0, 4.5] {
        let m2: f64 = 2.0e-4;
        let target = MomentSet::new(0.0, m2, 0.0, kurt * m2 * m2).unwrap();
        let (model, _) = fit_pdf(Shape::Type1, &target, &FitConfig::for_shape(Shape::Type1), "test").unwrap();
        let err = (model.moments()[3] - target.m4).abs() / target.m4;
        let gauss = (3.0 * m2 * m2 - target.m4).abs() / target.m4;
        assert!(err < gauss, "kurtosis {kurt}: {err} vs {gauss}");
        assert!((pdf_mass(&model, &QuadratureConfig::default()).unwrap() - 1.0).abs() < 1e-6);
        assert!(model.moments()[0].abs() < 1e-10 * m2.sqrt());
    }
}

#[test]
fn type2_cannot_match_a_lower_kurtosis() {
    let target = MomentSet::new(1.62e-6, 2.07e-4, -2.58e-9, 1.69e-7).unwrap();
    let (_, report) = fit_pdf(Shape::Type2, &target, &FitConfig::for_shape(Shape::Type2), "MCS").unwrap();
    assert!(report.residuals[1].abs() < 1e-6);
    assert!(report.residuals[3].abs() > 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expectation_is_linear(mu in prop::array::uniform3(-0.5..0.5f64),
                             sd in prop::array::uniform3(0.05..1.0f64),
                             r in prop::array::uniform3(-0.4..0.4f64),
                             a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let sm = state(mu, sd, r);
        let p = StatePolynomial::monomial(MonomialIndex::new(2, 1, 1), 1.0);
        let q = StatePolynomial::monomial(MonomialIndex::new(0, 3, 2), 1.0);
        let lhs = poly_expectation(&sm, &(&p.scale(a) + &q.scale(b))).unwrap();
        let rhs = a * poly_expectation(&sm, &p).unwrap() + b * poly_expectation(&sm, &q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn even_moments_are_positive(mu in prop::array::uniform3(-0.5..0.5f64),
                                 sd in prop::array::uniform3(0.05..1.0f64),
                                 r in prop::array::uniform3(-0.4..0.4f64),
                                 k in prop::array::uniform3(0u32..4)) {
        let g = GaussianMoments::new(&state(mu, sd, r), 24);
        let v = g.get(MonomialIndex::new(2 * k[0], 2 * k[1], 2 * k[2])).unwrap();
        prop_assert!(v > 0.0);
    }

    #[test]
    fn closure_is_realizable(m1 in -1.0..1.0f64, extra in 1e-6..1.0f64) {
        let m2 = m1 * m1 + extra;
        let (m3, m4) = close_scalar(m1, m2).unwrap();
        let set = MomentSet::new(m1, m2, m3, m4).unwrap();
        // Central kurtosis of a Gaussian is 3.
        let var = m2 - m1 * m1;
        let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        prop_assert!((c4 / (var * var) - 3.0).abs() < 1e-6 * (1.0 + m1.powi(4) / (var * var)));
        prop_assert!(set.m4 >= set.m2 * set.m2);
    }

    #[test]
    fn sine_of_symmetric_state_has_zero_mean(sigma in 0.01..0.4f64) {
        let sm = state([0.0; 3], [sigma, 0.1, 0.5], [0.2, 0.1, -0.3]);
        let sine = rollmoments::moments::sine_series(9).unwrap();
        let v = poly_expectation(&sm, &sine.polynomial()).unwrap();
        prop_assert_eq!(v, 0.0);
    }
}

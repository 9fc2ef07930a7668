use epcag::apkit::TrigPolynomial;
use epcag::ivpsim::IvpOptions;
use epcag::logistic::{
    kernel_bounds, logistic_fixed_point, mean_value, simulate_logistic, KernelFit, LogisticConfig, LogisticProblem, LogisticRate,
};
use epcag::timescale::ThetaSequence;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `c + Σ amp_k sin(ω_k t + φ_k)` with positive mean.
fn growth_rate() -> impl Strategy<Value = TrigPolynomial> {
    (0.5..4.0f64, prop::collection::vec((0.0..1.5f64, 0.3..3.0f64, 0.0..6.3f64), 1..3)).prop_map(|(c, terms)| {
        let terms: Vec<(f64, f64, f64)> = terms.iter().map(|&(amp, w, ph)| (w, amp * ph.sin(), amp * ph.cos())).collect();
        TrigPolynomial::scalar(c, &terms).unwrap()
    })
}

fn example(coeff: f64, h_box: f64) -> LogisticProblem {
    let a = TrigPolynomial::scalar(3.0, &[(1.0, 0.0, 1.0)]).unwrap();
    LogisticProblem::new(a, LogisticRate::Linear { coeffs: vec![coeff] }, vec![0], h_box, ThetaSequence::unit()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn averaged_mean_is_within_its_estimate(a in growth_rate(), half in 20.0..200.0f64) {
        let exact = mean_value(&a, None).unwrap().value;
        let approx = mean_value(&a, Some(half)).unwrap();
        prop_assert!((approx.value - exact).abs() <= approx.error_estimate + 1e-12);
    }

    #[test]
    fn kernel_envelope_holds_on_random_pairs(a in growth_rate(), seed in any::<u64>()) {
        let kb = kernel_bounds(&a, &KernelFit::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let t = rng.random_range(-80.0..80.0);
            let s = t + rng.random_range(0.0..40.0);
            let lhs = (-a.integral_scalar(t, s)).exp();
            prop_assert!(lhs <= kb.k * (-kb.sigma * (s - t)).exp() * (1.0 + 1e-9), "t = {}, s = {}", t, s);
        }
    }

    #[test]
    fn fixed_point_stays_in_the_box(coeff in 0.0..0.2f64, h_box in 0.5..2.0f64) {
        let problem = example(coeff, h_box);
        let config = LogisticConfig { core: [0.0, 10.0], ..Default::default() };
        let (psi, run) = logistic_fixed_point(&problem, &config, h_box, &KernelFit::default()).unwrap();
        prop_assert!(run.converged);
        prop_assert!(run.fixed_point_defect < 2.0 * config.tol);
        prop_assert!(run.non_increasing);
        for (_, _, v) in psi.samples() {
            prop_assert!(v[0] >= -1e-12 && v[0] <= h_box + 1e-12);
        }
    }

    #[test]
    fn populations_stay_positive(n0 in 1e-3..5.0f64, coeff in 0.0..0.3f64) {
        let problem = example(coeff, 1.0);
        let traj = simulate_logistic(&problem, n0, 15.0, &IvpOptions::default()).unwrap();
        prop_assert!(traj.grid.samples().all(|(_, _, v)| v[0] > 0.0));
    }
}

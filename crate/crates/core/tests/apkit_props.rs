use std::f64::consts::TAU;

use epcag::apkit::{bw_equivalent, bw_translation_numbers, step_compose, ComposeMode};
use epcag::timescale::ThetaSequence;
use proptest::prelude::*;

fn perturbed() -> impl Strategy<Value = ThetaSequence> {
    (0.0..0.2f64, 0.1..3.0f64).prop_map(|(amp, omega)| ThetaSequence::perturbed(amp, omega).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bw_equivalence_is_transitive(
        a in perturbed(),
        b in perturbed(),
        c in perturbed(),
        e1 in 0.1..0.6f64,
        e2 in 0.1..0.6f64,
    ) {
        let window = [-10.0, 10.0];
        let f = |t: f64| (0.4 * t).sin();
        let u: Vec<_> = [&a, &b, &c].iter().map(|s| step_compose(f, s, 0, window, ComposeMode::Node).unwrap()).collect();
        let ab = bw_equivalent(&u[0], &u[1], e1).unwrap().equivalent;
        let bc = bw_equivalent(&u[1], &u[2], e2).unwrap().equivalent;
        if ab && bc {
            prop_assert!(bw_equivalent(&u[0], &u[2], e1 + e2).unwrap().equivalent);
        }
    }

    #[test]
    fn staircase_is_right_continuous_and_flat(seq in perturbed(), p in -2i64..3) {
        let window = [-8.0, 8.0];
        let u = step_compose(|t| t.cos() + 0.1 * t, &seq, p, window, ComposeMode::Node).unwrap();
        let mut edges = vec![window[0]];
        edges.extend(&u.breakpoints);
        edges.push(window[1]);
        for w in edges.windows(2) {
            let here = u.eval_right(w[0]);
            for k in 1..8 {
                let t = w[0] + (w[1] - w[0]) * k as f64 / 8.0;
                prop_assert_eq!(u.eval(t), here);
            }
            prop_assert_eq!(u.eval_left(w[1]), here);
        }
        for &b in &u.breakpoints {
            prop_assert_eq!(u.eval(b), u.eval_right(b));
        }
    }

    #[test]
    fn commensurate_periods_are_exact_translations(period in 0.5..3.0f64, k in 1i64..6, p in 0i64..3) {
        let seq = ThetaSequence::uniform(period / k as f64, 0.0).unwrap();
        let f = move |t: f64| (TAU * t / period).sin();
        let u = step_compose(f, &seq, p, [0.0, 12.0 * period], ComposeMode::Node).unwrap();
        let taus: Vec<f64> = (1..=4).map(|j| j as f64 * period).collect();
        let report = bw_translation_numbers(&u, 1e-9, &taus).unwrap();
        prop_assert_eq!(report.periods.len(), taus.len());
    }
}

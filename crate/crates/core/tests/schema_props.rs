use epcag::schema::{
    parse_problem, MatrixTrigSpec, NonlinearitySpec, ProblemFile, Report, SolverSpec, ThetaSpec, VectorTrigSpec,
};
use proptest::prelude::*;

fn theta() -> impl Strategy<Value = ThetaSpec> {
    prop_oneof![
        (0.1..3.0f64, -1.0..1.0f64).prop_map(|(gap, offset)| ThetaSpec::Uniform { gap, offset }),
        (0.0..0.3f64, 0.1..3.0f64).prop_map(|(amplitude, omega)| ThetaSpec::Perturbed { amplitude, omega }),
    ]
}

fn problem() -> impl Strategy<Value = ProblemFile> {
    (-3.0..-0.1f64, 0.0..0.5f64, -2.0..2.0f64, prop::collection::vec(-2i64..3, 1..3), theta(), 1e-12..1e-4f64, any::<u64>())
        .prop_map(|(a, c, g, deviations, theta, tol, seed)| ProblemFile {
            a: Some(MatrixTrigSpec { constant: vec![vec![a]], terms: Vec::new() }),
            f: Some(NonlinearitySpec::Affine {
                coeffs: deviations.iter().map(|_| vec![vec![c]]).collect(),
                forcing: VectorTrigSpec { constant: vec![g], terms: Vec::new() },
            }),
            deviations,
            theta,
            solver: Some(SolverSpec { tol, ..Default::default() }),
            seed,
            ..Default::default()
        })
}

proptest! {
    #[test]
    fn problem_files_round_trip(file in problem()) {
        let text = serde_json::to_string(&file).unwrap();
        prop_assert_eq!(parse_problem(&text).unwrap(), file.clone());
        prop_assert!(file.build_problem().is_ok());
    }

    #[test]
    fn reports_revalidate(file in problem(), value in -1e6..1e6f64) {
        let report = Report::new("check", file, serde_json::json!({ "value": value }));
        let text = serde_json::to_string_pretty(&report).unwrap();
        prop_assert_eq!(Report::parse(&text).unwrap(), report);
    }
}

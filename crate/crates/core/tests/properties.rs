use approx::assert_relative_eq;
use nalgebra::DMatrix;
use osir::dataset::FeatureMatrix;
use osir::ingest::schema::{AttributeKind, SCHEMA};
use osir::ingest::{parse_kdd_line, ConnectionRecord, FeatureValue};
use osir::openset::{decide, train_wsvm, OpenSetClassifier, Prediction, WsvmConfig};
use osir::svm::{rbf_kernel, smo_train_with_solution, ClassWeighting, KernelParams, SolverConfig};
use osir::synth::gaussian_blobs;
use proptest::prelude::*;

/// XOR on the square corners: all four multipliers are equal by symmetry,
/// `a = min(C, 1 / (1 - 2 e^{-4g} + e^{-8g}))`, and the bias is zero.
#[test]
fn xor_matches_closed_form() {
    let x = FeatureMatrix::from_rows(&[[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]]).unwrap();
    let y = [1.0, 1.0, -1.0, -1.0];
    let cfg = SolverConfig { tol: 1e-10, ..SolverConfig::default() };
    for (c, gamma) in [(1000.0, 0.5), (1000.0, 0.1), (0.5, 0.1)] {
        let (model, sol) =
            smo_train_with_solution(&x, &y, KernelParams::new(c, gamma).unwrap(), ClassWeighting::None, &cfg)
                .unwrap();
        let (k1, k2) = ((-4.0 * gamma).exp(), (-8.0 * gamma).exp());
        let expected = (1.0 / (1.0 - 2.0 * k1 + k2)).min(c);
        for &a in &sol.alpha {
            assert_relative_eq!(a, expected, max_relative = 1e-6);
        }
        assert!(model.bias.abs() < 1e-6, "bias {}", model.bias);
        assert!(model.decision_value(&[0.9, 1.1]) > 0.0);
        assert!(model.decision_value(&[0.9, -1.1]) < 0.0);
    }
}

fn record_strategy() -> impl Strategy<Value = ConnectionRecord> {
    let values: Vec<BoxedStrategy<FeatureValue>> = SCHEMA
        .iter()
        .map(|a| match a.kind {
            AttributeKind::Numeric => prop_oneof![
                (0u32..100_000).prop_map(|v| FeatureValue::Numeric(f64::from(v))),
                (0.0f64..1.0).prop_map(FeatureValue::Numeric),
            ]
            .boxed(),
            AttributeKind::Binary => any::<bool>().prop_map(FeatureValue::Binary).boxed(),
            AttributeKind::Categorical => "[a-z][a-z0-9_]{0,8}".prop_map(FeatureValue::Categorical).boxed(),
        })
        .collect();
    (values, "[a-z][a-z_]{0,12}").prop_map(|(v, label)| ConnectionRecord::new(v, label).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kdd_lines_round_trip(record in record_strategy()) {
        let line = record.to_kdd_line();
        prop_assert_eq!(parse_kdd_line(&line, 1).unwrap(), record);
    }

    #[test]
    fn rbf_gram_matrix_is_positive_semidefinite(
        points in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..12),
        gamma in 0.01f64..5.0,
    ) {
        let n = points.len();
        let k = DMatrix::from_fn(n, n, |i, j| rbf_kernel(&points[i], &points[j], gamma).unwrap());
        let min_eig = k.symmetric_eigenvalues().min();
        prop_assert!(min_eig > -1e-9, "min eigenvalue {}", min_eig);
    }

    #[test]
    fn raising_the_threshold_never_accepts_more(
        probs in prop::collection::vec(0.0f64..=1.0, 1..6),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        match decide(&probs, hi) {
            Prediction::Known(k) => prop_assert_eq!(decide(&probs, lo), Prediction::Known(k)),
            Prediction::Unknown => {}
        }
        if decide(&probs, lo) == Prediction::Unknown {
            prop_assert_eq!(decide(&probs, hi), Prediction::Unknown);
        }
        prop_assert_ne!(decide(&probs, 0.0), Prediction::Unknown);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wsvm_probabilities_are_bounded(qx in -50.0f64..50.0, qy in -50.0f64..50.0) {
        let model = wsvm_fixture();
        for p in model.class_probabilities(&[qx, qy]) {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}

fn wsvm_fixture() -> &'static osir::openset::WsvmModel {
    use std::sync::OnceLock;
    static MODEL: OnceLock<osir::openset::WsvmModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let centers = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.9]];
        let (x, y) = gaussian_blobs(&centers, 0.1, 30, 9).unwrap();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        train_wsvm(&x, &y, &names, KernelParams::new(10.0, 1.0).unwrap(), &WsvmConfig::default(), &SolverConfig::default())
            .unwrap()
    })
}

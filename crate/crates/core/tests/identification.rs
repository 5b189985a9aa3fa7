use evolvid_core::aero::{eval_coefficient_model, ols_fit, table_v_defaults};
use evolvid_core::data::{fit_normalization, load_flight_csv, save_flight_csv, split, synthesize, ManeuverConfig, SplitSetting};
use evolvid_core::derivatives::{all_derivatives, delta_derivatives, summarize_derivatives, DEFAULT_DELTA_SCALE};
use evolvid_core::metrics::tic;
use evolvid_core::model::ModelBody;
use evolvid_core::{AeroParams, CoeffKind, CoefficientModel, Input, ModelSnapshot, ModelType, TrainConfig};

fn clean_records(n: usize) -> Vec<evolvid_core::FlightRecord> {
    synthesize(&table_v_defaults(), &ManeuverConfig::default(), n, 0.0, 3).unwrap()
}

#[test]
fn noise_free_synthesis_satisfies_linear_models() {
    let recs = clean_records(600);
    for p in table_v_defaults() {
        for r in &recs {
            let c = r.coefficient(p.kind).unwrap();
            assert!((c - eval_coefficient_model(&p, r)).abs() < 1e-12);
        }
    }
}

#[test]
fn ols_recovers_generator() {
    let recs = clean_records(2128);
    for truth in table_v_defaults() {
        let fit = ols_fit(&recs, truth.kind).unwrap();
        assert!((fit.bias - truth.bias).abs() < 1e-8, "{} bias", truth.kind);
        for (a, b) in fit.slopes.iter().zip(&truth.slopes) {
            assert!((a - b).abs() < 1e-8, "{}: {a} vs {b}", truth.kind);
        }
    }
}

#[test]
fn csv_file_round_trip() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 50, 0.01, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flight.csv");
    save_flight_csv(&recs, &path).unwrap();
    assert_eq!(load_flight_csv(&path).unwrap(), recs);
}

#[test]
fn single_rule_derivatives_match_closed_form() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 400, 0.01, 2).unwrap();
    let (train, test) = split(&recs, SplitSetting::Setting1).unwrap();
    let cfg = TrainConfig { rho: 1.0, ..TrainConfig::default() };
    let (model, _) = CoefficientModel::train(ModelType::Et2qfnn, CoeffKind::CM, train, &cfg).unwrap();
    let net = model.network().unwrap();
    assert_eq!(net.rule_count(), 1);
    // One rule: y = (1 - q) Wu x_e + q Wl x_e with x_e = [1, (x - mu) / s].
    let q = net.q();
    let rule = &net.rules[0];
    let stats = fit_normalization(train);
    for (i, &input) in CoeffKind::CM.regressors().iter().enumerate() {
        let expected = ((1.0 - q) * rule.upper_weights[(0, i + 1)] + q * rule.lower_weights[(0, i + 1)])
            / net.norm_stats.std[i];
        let s = delta_derivatives(&model, test, input, DEFAULT_DELTA_SCALE, &stats).unwrap();
        for v in &s.values {
            assert!((v - expected).abs() <= 1e-8 * expected.abs().max(1.0), "{input}: {v} vs {expected}");
        }
    }
}

#[test]
fn ols_derivatives_equal_slopes_and_ignore_offsets() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 300, 0.01, 4).unwrap();
    let stats = fit_normalization(&recs);
    for p in table_v_defaults() {
        let shifted = AeroParams::new(p.kind, p.bias + 0.7, p.slopes.clone()).unwrap();
        let a = all_derivatives(&p, &recs, DEFAULT_DELTA_SCALE, &stats).unwrap();
        let b = all_derivatives(&shifted, &recs, DEFAULT_DELTA_SCALE, &stats).unwrap();
        for ((sa, sb), slope) in a.iter().zip(&b).zip(&p.slopes) {
            for (va, vb) in sa.values.iter().zip(&sb.values) {
                assert!((va - slope).abs() < 1e-8);
                assert!((va - vb).abs() < 1e-9);
            }
        }
        let table = summarize_derivatives(&a, &[p.kind]).unwrap();
        for (row, slope) in table.rows.iter().zip(&p.slopes) {
            assert!((row.mean - slope).abs() < 1e-8);
        }
    }
}

#[test]
fn fuzzy_model_identifies_lift() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 1000, 0.01, 5).unwrap();
    let (train, test) = split(&recs, SplitSetting::Setting2).unwrap();
    let (model, log) = CoefficientModel::train(ModelType::Et2qfnn, CoeffKind::CL, train, &TrainConfig::default()).unwrap();
    assert_eq!(log.unwrap().entries.len(), train.len());
    let z: Vec<f64> = test.iter().map(|r| r.coefficient(CoeffKind::CL).unwrap()).collect();
    assert!(tic(&z, &model.predict_all(test).unwrap()).unwrap() < 0.05);
    let stats = fit_normalization(train);
    let d = delta_derivatives(&model, test, Input::Alpha, DEFAULT_DELTA_SCALE, &stats).unwrap();
    assert!((d.summary.mean - 5.3137).abs() < 0.25 * 5.3137);
}

#[test]
fn model_snapshot_round_trip() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 200, 0.01, 6).unwrap();
    for mt in ModelType::ALL {
        let (model, _) = CoefficientModel::train(mt, CoeffKind::CY, &recs, &TrainConfig::default()).unwrap();
        let snap = ModelSnapshot::new(model.clone(), Some(serde_json::json!({"seed": 0})));
        let back = ModelSnapshot::from_json(&snap.to_json().unwrap()).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.model.predict_all(&recs).unwrap(), model.predict_all(&recs).unwrap());
        assert_eq!(matches!(back.model.body, ModelBody::Linear(_)), mt == ModelType::Ols);
    }
}

#[test]
fn type1_model_has_degenerate_footprint() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 300, 0.01, 8).unwrap();
    let (model, _) = CoefficientModel::train(ModelType::Et1qfnn, CoeffKind::CR, &recs, &TrainConfig::default()).unwrap();
    let net = model.network().unwrap();
    for r in &recs {
        let (_, trace) = net.forward(&CoeffKind::CR.features(r)).unwrap();
        assert_eq!(trace.upper_firing, trace.lower_firing);
    }
}

#[test]
fn affine_derivatives_ignore_perturbation_scale() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 200, 0.01, 9).unwrap();
    let stats = fit_normalization(&recs);
    for p in table_v_defaults() {
        let base = all_derivatives(&p, &recs, 0.01, &stats).unwrap();
        for scale in [0.005, 0.02] {
            let other = all_derivatives(&p, &recs, scale, &stats).unwrap();
            for (a, b) in base.iter().zip(&other) {
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn coefficient_model_is_linear() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 20, 0.0, 10).unwrap();
    let zero = evolvid_core::FlightRecord { t: 0.0, inputs: [0.0; 8], coefficients: [None; 6] };
    for p in table_v_defaults() {
        for w in recs.windows(2) {
            let mut sum = w[0].clone();
            for i in 0..8 {
                sum.inputs[i] += w[1].inputs[i];
            }
            let lhs = eval_coefficient_model(&p, &w[0]) + eval_coefficient_model(&p, &w[1]) - eval_coefficient_model(&p, &zero);
            assert!((lhs - eval_coefficient_model(&p, &sum)).abs() < 1e-12);
        }
    }
}

#[test]
fn split_partitions_in_order() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 2128, 0.01, 11).unwrap();
    for (setting, n_train) in [(SplitSetting::Setting1, 1702), (SplitSetting::Setting2, 1064)] {
        let (train, test) = split(&recs, setting).unwrap();
        assert_eq!(train.len(), n_train);
        assert_eq!([train, test].concat(), recs);
    }
}

#[test]
fn normalization_ignores_test_rows() {
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 100, 0.01, 12).unwrap();
    let mut other = recs.clone();
    for r in other.iter_mut().skip(80) {
        r.inputs = [9.0; 8];
    }
    let a = fit_normalization(split(&recs, SplitSetting::Setting1).unwrap().0);
    let b = fit_normalization(split(&other, SplitSetting::Setting1).unwrap().0);
    assert_eq!(a, b);
}

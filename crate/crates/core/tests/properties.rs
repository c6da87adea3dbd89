use ndarray::Array2;
use proptest::prelude::*;
use vibaug::baselines::svr::fit_svr_traced;
use vibaug::baselines::{fit_forest, fit_gbr, predict_forest, ForestConfig, GbrConfig, SvrConfig};
use vibaug::chemio::{parse_modes, parse_xyz, serialize_xyz, Atom, Molecule};
use vibaug::dataset::{augment, synth_generate};
use vibaug::featurize::Scaler;
use vibaug::fixtures::{self, oracles::oracle_metrics};
use vibaug::metrics::evaluate;
use vibaug::vibration::VibrationConfig;

const SYMBOLS: [&str; 8] = ["H", "C", "N", "O", "F", "S", "Cl", "Br"];

fn molecule() -> impl Strategy<Value = Molecule> {
    prop::collection::vec((0..SYMBOLS.len(), prop::array::uniform3(-50.0f64..50.0)), 1..=55).prop_map(|atoms| {
        let atoms = atoms.into_iter().map(|(s, p)| Atom::new(SYMBOLS[s], p).unwrap()).collect();
        Molecule::new("random", atoms).unwrap()
    })
}

proptest! {
    #[test]
    fn xyz_round_trip(m in molecule()) {
        let back = parse_xyz(&serialize_xyz(&m)).unwrap();
        prop_assert_eq!(back.atoms.len(), m.atoms.len());
        for (a, b) in back.atoms.iter().zip(&m.atoms) {
            prop_assert_eq!(&a.element, &b.element);
            prop_assert_eq!(a.mass.to_bits(), b.mass.to_bits());
            for k in 0..3 {
                prop_assert!((a.position[k] - b.position[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let text = String::from_utf8_lossy(&bytes);
        let owner = parse_xyz("2\nN2\nN 0 0 0.5\nN 0 0 -0.5").unwrap();
        let _ = parse_xyz(&text);
        let _ = parse_modes(&text, &owner);
    }

    #[test]
    fn scaled_training_rows_lie_in_unit_box(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 5), 1..30)) {
        let s = Scaler::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        for r in &rows {
            for v in s.transform_slice(r).unwrap() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn metrics_agree_with_oracle(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..60)) {
        let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = evaluate(&y, &p).unwrap();
        let o = oracle_metrics(&y, &p).unwrap();
        prop_assert!((a.mse - o.mse).abs() <= 1e-12 * o.mse.max(1.0));
        prop_assert_eq!(a.r2.is_some(), o.r2.is_some());
        prop_assert_eq!(a.pcc.is_some(), o.pcc.is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn augmentation_size_and_labels(n in 10usize..20, factor in 1usize..6, seed in any::<u64>()) {
        let ds = synth_generate(n, seed).unwrap();
        let out = augment(&ds, factor, &VibrationConfig::default(), seed).unwrap();
        prop_assert_eq!(out.len(), factor * n);
        for (k, r) in out.records.iter().enumerate() {
            let parent = &ds.records[k / factor];
            prop_assert_eq!(r.rejection.to_bits(), parent.rejection.to_bits());
            prop_assert_eq!(r.flux.to_bits(), parent.flux.to_bits());
        }
    }

    #[test]
    fn forest_predictions_stay_in_label_range(seed in any::<u64>()) {
        let (x, y) = fixtures::random_regression(40, 3, seed);
        let f = fit_forest(x.view(), &y, &ForestConfig { n_trees: 10, seed, ..ForestConfig::default() }).unwrap();
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let probe = Array2::from_shape_fn((20, 3), |(i, j)| (i as f64 - 10.0) * 0.3 + j as f64);
        for r in probe.rows() {
            let v = predict_forest(&f, &r.to_vec());
            prop_assert!(v >= lo && v <= hi);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn boosting_training_loss_never_rises(seed in any::<u64>()) {
        let (x, y) = fixtures::random_regression(60, 4, seed);
        let cfg = GbrConfig { n_stages: 40, subsample: 1.0, seed, ..GbrConfig::default() };
        let m = fit_gbr(x.view(), &y, &cfg).unwrap();
        prop_assert!(m.train_mse.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn svr_dual_ascends_and_pairs_are_complementary(seed in any::<u64>()) {
        let (x, y) = fixtures::random_regression(40, 3, seed);
        let cfg = SvrConfig { c: 1.0, ..SvrConfig::default() };
        let (_, tr) = fit_svr_traced(x.view(), &y, &cfg).unwrap();
        for w in tr.dual_objective.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
        }
        for (a, b) in tr.alpha.iter().zip(&tr.alpha_star) {
            prop_assert!(a * b <= 1e-8);
        }
    }
}

use nalgebra::DMatrix;
use proptest::prelude::*;

use wsindy_mpc::data::{denormalize, normalize, NormalizationScales, TimeSeries};
use wsindy_mpc::weakform::{assemble_weak_form, assemble_weak_form_direct, correlate_valid_direct, make_test_function};

fn series(n: usize, vals: &[f64]) -> TimeSeries {
    let states = DMatrix::from_fn(n, 2, |k, i| vals[(2 * k + i) % vals.len()]);
    let inputs = DMatrix::from_fn(n, 1, |k, _| vals[(3 * k + 1) % vals.len()] * 0.5);
    TimeSeries::uniform(0.0, 0.01, states, inputs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_assembly_matches_direct(vals in prop::collection::vec(-5.0..5.0f64, 20..60), n in 60usize..400, m in 3usize..25) {
        prop_assume!(n > 2 * m + 1);
        let ts = series(n, &vals);
        let theta = DMatrix::from_fn(n, 3, |k, j| ts.states()[(k, j % 2)].powi(j as i32 + 1));
        let tf = make_test_function(m, 16, ts.dt()).unwrap();
        let a = assemble_weak_form(&theta, ts.states(), &tf, &[0, 1]).unwrap();
        let b = assemble_weak_form_direct(&theta, ts.states(), &tf, &[0, 1]).unwrap();
        let scale = theta.amax().max(1.0);
        prop_assert!((&a.g - &b.g).amax() <= 1e-12 * scale);
        prop_assert!((&a.b - &b.b).amax() <= 1e-12 * scale);
    }

    #[test]
    fn direct_correlation_is_a_sliding_dot_product(x in prop::collection::vec(-1.0..1.0f64, 5..50), k in prop::collection::vec(-1.0..1.0f64, 1..5)) {
        let out = correlate_valid_direct(&x, &k);
        prop_assert_eq!(out.len(), x.len() + 1 - k.len());
        for (r, v) in out.iter().enumerate() {
            let dot: f64 = k.iter().enumerate().map(|(i, kv)| kv * x[r + i]).sum();
            prop_assert!((v - dot).abs() <= 1e-14);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(vals in prop::collection::vec(-1e6..1e6f64, 4..40), n in 2usize..50) {
        let ts = series(n, &vals);
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        prop_assert_eq!(TimeSeries::read_csv(buf.as_slice()).unwrap(), ts);
    }

    #[test]
    fn normalization_inverts(vals in prop::collection::vec(-1e3..1e3f64, 4..40), s1 in 1e-3..1e3f64, s2 in 1e-3..1e3f64, su in 1e-3..1e3f64) {
        let ts = series(20, &vals);
        let scales = NormalizationScales::new(vec![s1, s2], vec![su]).unwrap();
        let back = denormalize(&normalize(&ts, &scales).unwrap(), &scales).unwrap();
        let err = (back.states() - ts.states()).amax().max((back.inputs() - ts.inputs()).amax());
        prop_assert!(err <= 1e-12 * ts.states().amax().max(ts.inputs().amax()).max(1.0));
    }
}

use proptest::prelude::*;
use qrisk_core::riskpipe::{cvar, decode_probs, var, RegisterLayout};

fn dist() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 16).prop_filter_map("nonzero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.into_iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cdf_and_risk_measures_are_consistent(p in dist(), l1 in 1.0f64..500.0, l2 in 1.0f64..500.0) {
        let layout = RegisterLayout::blocks(vec![l1, l2], 2).unwrap();
        let d = decode_probs(&p, &layout).unwrap();
        prop_assert!((d.pdf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.cdf.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((d.cdf.last().unwrap() - 1.0).abs() < 1e-9);
        prop_assert!(d.losses.windows(2).all(|w| w[0] < w[1]));
        let el: f64 = d.losses.iter().zip(&d.pdf).map(|(l, q)| l * q).sum();
        prop_assert!((el - d.expected_loss).abs() < 1e-9);
        let mut prev = f64::NEG_INFINITY;
        for k in 1..100 {
            let level = k as f64 / 100.0;
            let v = var(&d, level).unwrap();
            prop_assert!(v >= prev);
            prop_assert!(cvar(&d, level).unwrap() >= v - 1e-9);
            prev = v;
        }
    }
}

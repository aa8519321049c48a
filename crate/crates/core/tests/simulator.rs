use proptest::prelude::*;
use qrisk_core::exec::stream_rng;
use qrisk_core::simkit::{
    born_probabilities, circuit_unitary, random_circuit, reorder, BitOrder, Circuit, Gate, Matrix,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitaries_are_unitary(seed in any::<u64>(), n in 1usize..4, len in 0usize..25) {
        let c = random_circuit(&mut stream_rng(seed, 0), n, len);
        let u = circuit_unitary(&c).unwrap();
        prop_assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one(seed in any::<u64>(), n in 1usize..6, len in 0usize..40) {
        let c = random_circuit(&mut stream_rng(seed, 1), n, len);
        let p = born_probabilities(&c.run());
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn bit_order_reversal_round_trips(seed in any::<u64>(), n in 1usize..5) {
        let c = random_circuit(&mut stream_rng(seed, 2), n, 10);
        let msb = c.probabilities();
        let lsb = c.clone().with_bit_order(BitOrder::Q0Lsb).probabilities();
        prop_assert_eq!(reorder(&lsb, BitOrder::Q0Lsb, BitOrder::Q0Msb), msb);
    }

    #[test]
    fn state_run_matches_unitary_column(seed in any::<u64>()) {
        let c = random_circuit(&mut stream_rng(seed, 3), 3, 15);
        let u = circuit_unitary(&c).unwrap();
        let s = c.run();
        for (i, a) in s.amplitudes().iter().enumerate() {
            prop_assert!((a - u.get(i, 0)).norm() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let c = random_circuit(&mut stream_rng(seed, 4), 3, 12);
        let back: Circuit = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        let (a, b) = (circuit_unitary(&c).unwrap(), circuit_unitary(&back).unwrap());
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }
}

#[test]
fn qubit_zero_is_most_significant() {
    let c = Circuit::from_gates(3, [Gate::X(0)]).unwrap();
    assert_eq!(c.probabilities()[0b100], 1.0);
    let c = c.with_bit_order(BitOrder::Q0Lsb);
    assert_eq!(c.probabilities()[0b001], 1.0);
}

#[test]
fn cz_is_symmetric() {
    let a = circuit_unitary(&Circuit::from_gates(2, [Gate::Cz(0, 1)]).unwrap()).unwrap();
    let b = circuit_unitary(&Circuit::from_gates(2, [Gate::Cz(1, 0)]).unwrap()).unwrap();
    assert_eq!(a, b);
    let diag = Matrix::from_real(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 1.0, 0.0],
        &[0.0, 0.0, 0.0, -1.0],
    ]);
    assert_eq!(a.max_abs_diff(&diag), 0.0);
}

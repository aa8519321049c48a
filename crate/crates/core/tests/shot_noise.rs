use qrisk_core::exec::{stream_rng, Execution};
use qrisk_core::noise::{sample_frequencies, spam_statistics, SpamNoise};
use qrisk_core::simkit::{Circuit, Gate};

/// Mean L1 frequency error over `reps` draws at each shot count.
fn l1_errors(probs: &[f64], shots: &[u64], reps: u64) -> Vec<f64> {
    shots
        .iter()
        .map(|&n| {
            (0..reps)
                .map(|r| {
                    let f = sample_frequencies(probs, n, &mut stream_rng(n, r));
                    f.iter().zip(probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
                })
                .sum::<f64>()
                / reps as f64
        })
        .collect()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn frequency_error_scales_as_inverse_sqrt_shots() {
    let probs = [0.1, 0.2, 0.3, 0.4];
    let shots: Vec<u64> = (8..=16).map(|k| 1u64 << k).collect();
    let err = l1_errors(&probs, &shots, 200);
    let xs: Vec<f64> = shots.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let s = slope(&xs, &ys);
    assert!((s + 0.5).abs() < 0.1, "slope {s}");
}

#[test]
fn spam_is_identical_across_execution_modes() {
    let c = Circuit::from_gates(2, [Gate::ry(0, 1.57), Gate::ry(1, 3.3), Gate::cnot(0, 1)]).unwrap();
    let a = spam_statistics(&c, &SpamNoise::default(), 50, Some(1000), 3, Execution::Sequential).unwrap();
    let b = spam_statistics(&c, &SpamNoise::default(), 50, Some(1000), 3, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

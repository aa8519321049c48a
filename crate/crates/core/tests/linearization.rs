use qrisk_core::exec::stream_rng;
use qrisk_core::finmodel::{linearize, normal_cdf, normal_quantile, GciModel};
use rand::Rng;

/// Independent PD_exact with the quantile found by bisection on the CDF.
fn pd_exact_oracle(p0: f64, rho: f64, z: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    normal_cdf((q - rho.sqrt() * z) / (1.0 - rho).sqrt())
}

#[test]
fn beta_identity_and_slope() {
    let mut rng = stream_rng(2024, 0);
    for _ in 0..50 {
        let p0 = rng.gen_range(0.01..0.6);
        let rho = rng.gen_range(0.001..0.5);
        let lin = linearize(p0, rho).unwrap();
        assert!((lin.beta.sin().powi(2) - normal_cdf(lin.psi)).abs() < 1e-12);
        let h = 1e-5;
        let f = |z: f64| pd_exact_oracle(p0, rho, z).sqrt().asin();
        let slope = (f(h) - f(-h)) / (2.0 * h);
        assert!((slope - lin.alpha).abs() < 1e-6, "p0={p0} rho={rho}: {slope} vs {}", lin.alpha);
    }
}

#[test]
fn reference_instance_against_high_precision_values() {
    // 40-digit reference values
    let lin = linearize(0.25, 0.027).unwrap();
    assert!((lin.alpha - -0.060_981_363_710_204_88).abs() < 1e-9);
    assert!((lin.beta - 0.520_192_364_202_855).abs() < 1e-9);
    assert!((lin.psi - -0.683_783_999_659_777_2).abs() < 1e-12);
    assert!((normal_quantile(0.25).unwrap() - -0.674_489_750_196_081_7).abs() < 1e-14);
}

#[test]
fn approximation_tracks_exact_near_zero() {
    let m = GciModel::new(0.25, 0.027, 1000.0, 2, 1.0).unwrap();
    for z in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        assert!((m.pd_exact(z) - m.pd_approx(z)).abs() < 5e-5);
    }
    // at the grid edges the error is ~1.1e-3
    assert!((m.pd_exact(-1.0) - 0.302_507_23).abs() < 1e-8);
    assert!((m.pd_approx(-1.0) - 0.301_406_86).abs() < 1e-8);
    assert!((m.pd_exact(-1.0) - m.pd_approx(-1.0)).abs() < 1.5e-3);
}

use brox_core::variational::{c1_bounds, c1_eigen, C1Problem};
use statrs::function::gamma::gamma;

/// `x^k J_{-k}(x) 2^{-k}` by its power series.
fn scaled_bessel(k: f64, x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0 / gamma(1.0 - k);
    let mut sum = term;
    for m in 1..200 {
        term *= q / (m as f64 * (m as f64 - k));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn first_zero(k: f64) -> f64 {
    let (mut lo, mut hi) = (1e-6, 1e-6);
    while scaled_bessel(k, hi) > 0.0 {
        lo = hi;
        hi += 0.05;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if scaled_bessel(k, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn bessel_zero_oracle() {
    assert!((first_zero(0.5) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    for k in [0.3, 0.5, 0.7] {
        let j = first_zero(k);
        let want = j * j / (8.0 * k * k);
        let got = c1_eigen(&C1Problem::new(k, 256).unwrap()).unwrap();
        assert!((got.value / want - 1.0).abs() < 1e-4, "{k}: {} vs {want}", got.value);
        assert!(got.single_signed);
        let (lo, hi) = c1_bounds(k).unwrap();
        assert!(lo < hi && lo <= got.value && got.value <= hi);
    }
}

#[test]
fn vector_problem_reduces_to_scalar() {
    let one = c1_eigen(&C1Problem::new(0.6, 64).unwrap()).unwrap();
    let four = c1_eigen(&C1Problem::new(0.6, 64).unwrap().with_coords(4)).unwrap();
    assert!((one.value - four.value).abs() <= 1e-9, "{} {}", one.value, four.value);
}

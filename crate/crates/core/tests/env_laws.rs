use brox_core::diffusion::{path_exit, EnvSpec};
use brox_core::env::{build_potential, default_left_extent, scale_table, Noise};
use brox_core::rng::{tag, try_replicate, Stream};
use brox_core::stats::{dkw_band, EmpiricalDistribution};

#[test]
fn potential_at_one_has_mean_minus_half() {
    let n = 10_000;
    let w = try_replicate(n, Stream::new(11), |_, s| {
        build_potential(1.0, 0.01, 0.0, 1.0, &s, Noise::Brownian)?.value_at(1.0)
    })
    .unwrap();
    let mean = w.iter().sum::<f64>() / n as f64;
    // W(1) ~ N(-1/2, 1)
    assert!((mean + 0.5).abs() <= 3.0 / (n as f64).sqrt(), "{mean}");
}

#[test]
fn drift_only_scale_matches_closed_form() {
    let (k, h) = (0.8, 0.01);
    let g = build_potential(k, h, -5.0, 40.0, &Stream::new(0), Noise::DriftOnly).unwrap();
    let t = scale_table(g, 1e-6).unwrap();
    // trapezoid on e^{-c x} overshoots every cell by the same factor (ch/2) coth(ch/2)
    let c = k / 2.0;
    let factor = (c * h / 2.0) / (c * h / 2.0).tanh();
    let a = |x: f64| (2.0 / k) * (1.0 - (-c * x).exp());
    for x in [-4.0, -1.0, 0.0, 0.5, 3.0, 20.0] {
        let got = t.a_at(x).unwrap();
        assert!(
            (got - factor * a(x)).abs() <= 1e-10 * (1.0 + a(x).abs()),
            "{x}: {got} vs {}",
            a(x)
        );
        assert!((got - a(x)).abs() <= h * h * (1.0 + a(x).abs()));
    }
    let top = t.grid().x_max();
    let tail = (2.0 / k) * (-c * top).exp();
    assert!((t.a_inf() - (factor * a(top) + tail)).abs() <= 1e-10);
    let p = t.exit_probability(-2.0, 1.0, 6.0).unwrap();
    assert!((p - (a(1.0) - a(-2.0)) / (a(6.0) - a(-2.0))).abs() < 1e-10);
    for k in [0.5, 2.0, 3.0] {
        let g = build_potential(k, h, -1.0, 60.0, &Stream::new(0), Noise::DriftOnly).unwrap();
        let f = scale_table(g, f64::MAX).unwrap().solve_f(10.0).unwrap();
        let want = 10.0 - (2.0 / k) * (k / 2.0).ln();
        assert!((f - want).abs() <= h * h, "{k}: {f} vs {want}");
    }
}

/// `F(r) - r = (2/k) (B(F) + ln A')` with `A'` an independent copy of `A_inf`,
/// so `F(r)/r - 1` has spread `2 / (k sqrt r)`.
fn f_over_r(n: usize) -> Vec<f64> {
    let r = 400.0;
    let env = EnvSpec::new(1.0, 0.01).unwrap();
    try_replicate(n, Stream::new(12), |_, s| Ok(env.table_for_f(r, &s)?.solve_f(r)? / r)).unwrap()
}

#[test]
fn f_of_r_spread() {
    let d = EmpiricalDistribution::new(f_over_r(1000)).unwrap();
    let sd = d.variance().sqrt();
    assert!((sd / 0.1 - 1.0).abs() <= 0.1, "{sd}");
    assert!((d.median() - 1.0).abs() <= 0.02, "{}", d.median());
}

#[test]
#[ignore = "|F/r - 1| <= 0.2 is a two-sigma event at r = 400 (frequency about 0.95), not 0.99"]
fn f_of_r_is_close_to_r() {
    let f = f_over_r(1000);
    let close = f.iter().filter(|&&x| (x - 1.0).abs() <= 0.2).count();
    assert!(close as f64 / f.len() as f64 >= 0.99, "{close}");
}

#[test]
fn exit_frequency_matches_scale_ratio() {
    let env = EnvSpec::new(0.7, 0.01).unwrap();
    let table = env.table_to(3.0, &Stream::new(13)).unwrap();
    let (lo, start, hi) = (-1.5, 0.2, 1.5);
    let p = table.exit_probability(lo, start, hi).unwrap();
    let n = 2000;
    let up = try_replicate(n, Stream::new(14), |_, s| {
        path_exit(&table, lo, start, hi, 1e-4, &mut s.split(tag::PATH).rng())
    })
    .unwrap();
    let freq = up.iter().filter(|&&u| u).count() as f64 / n as f64;
    assert!((freq - p).abs() <= dkw_band(n, 0.01).unwrap(), "{freq} vs {p}");
}

#[test]
fn sup_of_potential_is_exponential() {
    let k = 1.5;
    let sups = try_replicate(10_000, Stream::new(15), |_, s| {
        Ok(build_potential(k, 0.01, 0.0, 60.0, &s, Noise::Brownian)?.sup_right())
    })
    .unwrap();
    let d = EmpiricalDistribution::new(sups).unwrap();
    let ks = d.ks_statistic(|x| if x <= 0.0 { 0.0 } else { 1.0 - (-k * x).exp() });
    assert!(ks <= 0.02, "{ks}");
}

#[test]
fn left_extent_solves_its_equation() {
    for k in [0.5, 1.0, 2.0] {
        let l = default_left_extent(k);
        assert!((k * l / 2.0 - 5.0 * l.sqrt() - 30.0).abs() < 1e-6, "{k}: {l}");
    }
}

use brox_core::bessel::{besq_path, rn1_profile, rn2_profile};
use brox_core::diffusion::{hitting_sample_rk, EnvSpec};
use brox_core::env::{build_potential, Noise};
use brox_core::rng::{tag, Stream};
use brox_core::stable::{constants, t_pm, Side};
use brox_core::stats::EmpiricalDistribution;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_grid_shape(kappa in 0.1f64..3.0, step in 0.005f64..0.1, left in 0.0f64..10.0, right in 0.0f64..10.0, seed: u64) {
        let g = build_potential(kappa, step, -left, right, &Stream::new(seed), Noise::Brownian).unwrap();
        prop_assert_eq!(g.values()[g.origin()], 0.0);
        prop_assert_eq!(g.x(g.origin()), 0.0);
        for i in 1..g.len() {
            prop_assert!(((g.x(i) - g.x(i - 1)) - step).abs() <= 1e-9 * step.max(g.x(i).abs()));
        }
        prop_assert!(g.x_min() <= 0.0 && g.x_max() >= 0.0);
        let d = build_potential(kappa, step, -left, right, &Stream::new(seed), Noise::DriftOnly).unwrap();
        for i in 0..d.len() {
            prop_assert_eq!(d.values()[i], -kappa * d.x(i) / 2.0);
        }
    }

    #[test]
    fn scale_table_shape(kappa in 0.3f64..3.0, seed: u64) {
        let env = EnvSpec::new(kappa, 0.01).unwrap();
        let t = env.table_to(20.0, &Stream::new(seed)).unwrap();
        let a = t.a_values();
        // far right the cells fall below the spacing of doubles near A_inf; the log tail keeps them
        prop_assert!(a.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(t.ln_tail().windows(2).all(|w| w[1] < w[0]));
        prop_assert_eq!(a[t.grid().origin()], 0.0);
        let top = *a.last().unwrap();
        prop_assert!(t.a_inf() >= top && t.a_inf() - top <= t.tail_bound() + 1e-12 * t.a_inf());
    }

    #[test]
    fn f_is_monotone(kappa in 0.5f64..2.0, r1 in 5.0f64..40.0, gap in 0.1f64..20.0, seed: u64) {
        let env = EnvSpec::new(kappa, 0.01).unwrap();
        let t = env.table_for_f(r1 + gap, &Stream::new(seed)).unwrap();
        let (f1, f2) = (t.solve_f(r1).unwrap(), t.solve_f(r1 + gap).unwrap());
        prop_assert!(f1 < f2);
        let ln_d = t.ln_tail_at(f2).unwrap();
        prop_assert!((ln_d + kappa * (r1 + gap) / 2.0).abs() <= 1e-9 * (r1 + gap));
    }

    #[test]
    fn besq0_stays_absorbed(start in 0.01f64..5.0, seed: u64) {
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let p = besq_path(0.0, start, &grid, &mut Stream::new(seed).rng()).unwrap();
        prop_assert_eq!(p.values[0], start);
        if let Some(t) = p.absorbed_at {
            for (g, v) in grid.iter().zip(&p.values) {
                if *g >= t {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn profile_shapes(level in 0.1f64..10.0, seed: u64) {
        let mut rng = Stream::new(seed).rng();
        let p = rn2_profile(level, 0.02, &mut rng).unwrap();
        prop_assert_eq!(p.ell[0], level);
        prop_assert!(p.grid.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(p.ell.iter().all(|&l| l >= 0.0));
        prop_assert_eq!(*p.ell.last().unwrap(), 0.0);
        let q = rn1_profile(level, 50.0 * level, 0.02, &mut rng).unwrap();
        prop_assert_eq!(*q.grid.last().unwrap(), level);
        prop_assert_eq!(*q.ell.last().unwrap(), 0.0);
        if !q.truncated {
            prop_assert_eq!(q.ell[0], 0.0);
        }
    }

    #[test]
    fn hitting_sample_parts(kappa in 0.5f64..2.5, r in 2.0f64..20.0, seed: u64) {
        let s = Stream::new(seed);
        let env = EnvSpec::new(kappa, 0.02).unwrap();
        let t = env.table_for_f(r, &s.split(tag::ENV)).unwrap();
        let x = hitting_sample_rk(&t, r, true, &mut s.split(tag::PROFILE).rng()).unwrap();
        prop_assert!(x.h_total > 0.0 && x.h_plus > 0.0 && x.l_star > 0.0 && x.l_neg >= 0.0);
        prop_assert_eq!(x.h_total, x.h_minus + x.h_plus);
        prop_assert!(x.l_star >= x.l_neg);
    }

    #[test]
    fn bracket_times_are_ordered(kappa in 0.1f64..1.9, delta1 in 0.1f64..1.0, lr in 0.0f64..12.0) {
        let b = constants(kappa, delta1).unwrap();
        let r = 10f64.powf(lr);
        if r.powf(delta1) > b.c5 {
            let (lo, hi) = (t_pm(&b, r, Side::Minus).unwrap(), t_pm(&b, r, Side::Plus).unwrap());
            prop_assert!(hi > lo && lo > 0.0);
        }
        let r = 1e12;
        let gap = t_pm(&b, r, Side::Plus).unwrap() / b.t0(r) - 1.0;
        prop_assert!(gap <= 2.0 * b.c5 * 10f64.powf(-12.0 * delta1) * (1.0 + 1e-9));
    }

    #[test]
    fn ecdf_and_ks(a in prop::collection::vec(-10.0f64..10.0, 1..60), b in prop::collection::vec(-10.0f64..10.0, 1..60)) {
        let da = EmpiricalDistribution::new(a.clone()).unwrap();
        let db = EmpiricalDistribution::new(b).unwrap();
        prop_assert_eq!(da.ks_two_sample(&db), db.ks_two_sample(&da));
        let s = da.samples();
        prop_assert!(s.windows(2).all(|w| w[1] >= w[0]));
        for &x in s {
            prop_assert!(da.ecdf(x) >= da.ecdf(x - 1e-9));
            prop_assert_eq!(da.ecdf(x), da.ecdf(x + 1e-12 * x.abs().max(1e-300)).min(da.ecdf(x)));
            let at_most = a.iter().filter(|&&y| y <= x).count() as f64 / a.len() as f64;
            prop_assert_eq!(da.ecdf(x), at_most);
        }
    }
}

#[test]
fn same_stream_same_draws() {
    let s = Stream::new(7);
    let a = rn2_profile(3.0, 0.01, &mut s.split(3).rng()).unwrap();
    let b = rn2_profile(3.0, 0.01, &mut s.split(3).rng()).unwrap();
    assert_eq!(a.ell, b.ell);
    let c = rn2_profile(3.0, 0.01, &mut s.split(4).rng()).unwrap();
    assert_ne!(a.ell, c.ell);
}

use approx::assert_relative_eq;
use num_complex::Complex64 as C64;
use pointnls::config::Config;
use pointnls::fractional::{half_integral, TimeGrid, TimeSeries};
use pointnls::harness::fit_rate;
use pointnls::limit::check_guard;
use pointnls::radial::{KGrid, RadialField, Tail};
use proptest::prelude::*;
use std::sync::Arc;

fn c64() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_integral_is_linear(a in c64(), w in 0.5..6.0f64, n in 16usize..200) {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let f = TimeSeries::from_fn(grid, |s| C64::new((w * s).sin(), s * s));
        let g = TimeSeries::from_fn(grid, |s| C64::new((-s).exp(), 0.0));
        let lhs = half_integral(&TimeSeries::from_fn(grid, |s| a * C64::new((w * s).sin(), s * s) + (-s).exp()));
        let (fi, gi) = (half_integral(&f), half_integral(&g));
        for j in 0..=n {
            prop_assert!((lhs.values[j] - (a * fi.values[j] + gi.values[j])).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn half_integral_exact_on_lines(c0 in c64(), c1 in c64(), n in 4usize..300) {
        // I^{1/2}[c0 + c1 s](t) = 2 c0 sqrt(t) + (4/3) c1 t^{3/2}
        let grid = TimeGrid::new(2.0, n).unwrap();
        let v = half_integral(&TimeSeries::from_fn(grid, |s| c0 + c1 * s));
        for j in 0..=n {
            let t = grid.node(j);
            let exact = 2.0 * c0 * t.sqrt() + 4.0 / 3.0 * c1 * t.powf(1.5);
            prop_assert!((v.values[j] - exact).norm() < 1e-12 * (1.0 + exact.norm()));
        }
    }

    #[test]
    fn power_laws_are_recovered(c in 0.01..100.0f64, delta in 0.05..2.0f64, m in 3usize..7) {
        let eps: Vec<f64> = (0..m).map(|i| 0.4 * 0.5f64.powi(i as i32)).collect();
        let err: Vec<f64> = eps.iter().map(|e| c * e.powf(delta)).collect();
        let fit = fit_rate(&eps, &err).unwrap();
        assert_relative_eq!(fit.slope, delta, epsilon = 1e-10);
        prop_assert!(fit.r_squared > 1.0 - 1e-10);
        prop_assert!(fit.dropped_eps.is_none());
    }

    #[test]
    fn guard_region(gamma in -5.0..5.0f64, mu in 0.0..3.0f64) {
        let allowed = gamma >= 0.0 || mu < 1.0;
        prop_assert_eq!(check_guard(gamma, mu).is_ok(), allowed);
        let text = format!("gamma = {gamma:?}\nmu = {mu:?}\n");
        prop_assert_eq!(Config::parse(&text, false).is_ok(), allowed);
    }

    #[test]
    fn config_round_trips_through_json(gamma in 0.0..5.0f64, q in c64(), n in 2usize..100_000) {
        let cfg = Config { gamma, q0: q, n, ..Default::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        prop_assert_eq!(Config::parse(&text, true).unwrap(), cfg);
    }

    #[test]
    fn norm_is_homogeneous(c in c64(), w in 0.2..3.0f64) {
        let grid = Arc::new(KGrid::geometric(40, 12, 1e-3, 40.0).unwrap());
        let f = RadialField::from_fn(grid, |k| C64::new((-w * k * k).exp(), k * (-k * k).exp()), Tail::none());
        let scaled = f.scale(c);
        assert_relative_eq!(scaled.l2_norm().unwrap(), c.norm() * f.l2_norm().unwrap(), max_relative = 1e-12);
        // int 4 pi k^2 e^{-2 w k^2} dk = (pi / 2w)^{3/2}
        let g = RadialField::from_fn(f.grid.clone(), |k| C64::new((-w * k * k).exp(), 0.0), Tail::none());
        assert_relative_eq!(g.l2_norm_sqr().unwrap(), (std::f64::consts::PI / (2.0 * w)).powf(1.5), max_relative = 1e-9);
    }
}

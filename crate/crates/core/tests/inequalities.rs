use dlss_core::inequalities::{
    auto_horizon, convex_sobolev_check, heatflow_verify, minimize_multistart, minimize_quotient, quotient_value,
    random_admissible, remainder_r, HeatFlow, MinimizeOptions, QuotientKind, QuotientSpec,
};
use dlss_core::rng::SplitMix64;
use dlss_core::{DiffBackend, Field, FieldKind, PeriodicGrid};
use std::f64::consts::{PI, TAU};

fn grid(n: usize) -> PeriodicGrid {
    PeriodicGrid::new(TAU, n).unwrap()
}

fn cosine(g: &PeriodicGrid, amp: f64) -> Field {
    Field::from_fn(g, FieldKind::Density, |x| 1.0 + amp * x.cos()).unwrap()
}

fn spec(kind: QuotientKind, n: usize) -> QuotientSpec {
    QuotientSpec::new(kind, &grid(n)).unwrap()
}

#[test]
fn poincare_from_random_mean_zero_start() {
    let s = spec(QuotientKind::Poincare(1), 128);
    let init = random_admissible(&s, &mut SplitMix64::new(42)).unwrap();
    assert!(init.mean().abs() < 1e-14);
    let r = minimize_quotient(&s, &init, 2000, 1e-14).unwrap();
    assert!(r.converged);
    assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
}

#[test]
fn logsob_minimization_reaches_half() {
    let s = spec(QuotientKind::LogSobolev(1), 64);
    let r = minimize_quotient(&s, &cosine(&s.grid, 0.5), 3000, 1e-9).unwrap();
    assert!(r.value >= 0.5 - 1e-6);
    assert!(r.rel_error() < 0.01, "{}", r.value);
}

#[test]
fn higher_order_logsob_reaches_half() {
    let s = spec(QuotientKind::LogSobolev(2), 64);
    let r = minimize_multistart(
        &s,
        1,
        3,
        MinimizeOptions {
            max_iters: 3000,
            tol: 1e-9,
            remainder: false,
        },
    )
    .unwrap();
    assert!(r.rel_error() < 0.01, "{}", r.value);
}

#[test]
fn poincare_minimizers_live_on_the_first_mode() {
    for n in 1..=3 {
        let s = spec(QuotientKind::Poincare(n), 64);
        let init = random_admissible(&s, &mut SplitMix64::new(7 + n as u64)).unwrap();
        let r = minimize_quotient(&s, &init, 3000, 1e-14).unwrap();
        let hat = s.grid.forward(r.minimizer.values());
        let total: f64 = hat.iter().map(|z| z.norm_sqr()).sum();
        let first = hat[1].norm_sqr() + hat[63].norm_sqr();
        assert!(first / total >= 0.99, "order {n}: {}", first / total);
        assert!(r.rel_error() < 1e-6, "order {n}: {}", r.value);
    }
}

#[test]
fn near_constants_approach_the_optimal_constant() {
    let s = spec(QuotientKind::LogSobolev(1), 128);
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&e| quotient_value(&s, &cosine(&s.grid, e)).unwrap() - 0.5)
        .collect();
    for (gap, e) in gaps.iter().zip([1e-1, 1e-2, 1e-3]) {
        assert!(gap.abs() <= 0.5 * e, "eps {e}: gap {gap}");
    }
    assert!(gaps[2].abs() < gaps[1].abs() && gaps[1].abs() < gaps[0].abs());
}

#[test]
fn constant_heat_flow_is_stationary() {
    let g = grid(32);
    let one = Field::constant(&g, 1.0, FieldKind::Density).unwrap();
    let recs = heatflow_verify(&one, 1.0, 1.0, 0.1).unwrap();
    assert!(recs.iter().all(|r| r.f_value.abs() < 1e-14));
}

#[test]
fn log_heat_flow_decreases_to_zero() {
    let g = grid(128);
    let u = cosine(&g, 0.5);
    let recs = heatflow_verify(&u, 1.0, 10.0, 0.01).unwrap();
    let f0 = recs[0].f_value;
    assert!(f0 > 0.0);
    assert!(recs.windows(2).all(|w| w[1].f_value <= w[0].f_value + 1e-10));
    assert!(recs.last().unwrap().f_value < 1e-6 * f0);
}

#[test]
fn initial_f_matches_quotient_arithmetic() {
    let g = grid(128);
    let u = cosine(&g, 0.5);
    let f0 = heatflow_verify(&u, 1.0, 0.0, 0.1).unwrap()[0].f_value;
    let ux = u.derivative(1, DiffBackend::Spectral).unwrap();
    let num = g.integrate(&ux.values().iter().map(|x| x * x).collect::<Vec<_>>());
    let norm2 = g.integrate(&u.values().iter().map(|x| x * x).collect::<Vec<_>>());
    let den = g.integrate(
        &u.values()
            .iter()
            .map(|x| x * x * (x * x * g.length() / norm2).ln())
            .collect::<Vec<_>>(),
    );
    let expected = num - 2.0 * PI * PI / (g.length() * g.length()) * den;
    assert!((f0 - expected).abs() < 1e-12, "{f0} vs {expected}");
}

#[test]
fn entropy_dissipation_identity() {
    let g = grid(128);
    let flow = HeatFlow::new(&cosine(&g, 0.5).map(|x| x * x).unwrap(), 1.0).unwrap();
    let dt = 1e-4;
    for t in [0.05, 0.3, 1.0] {
        let lhs = (flow.entropy(t + dt).unwrap() - flow.entropy(t - dt).unwrap()) / (2.0 * dt);
        let rhs = -4.0 * flow.fisher(t).unwrap();
        assert!((lhs - rhs).abs() <= 0.02 * rhs.abs(), "t {t}: {lhs} vs {rhs}");
    }
}

#[test]
fn remainder_of_constant_vanishes() {
    let g = grid(32);
    let c = Field::constant(&g, 2.0, FieldKind::Density).unwrap();
    let r = remainder_r(&c, 1.0, 5.0, 0.1).unwrap();
    assert!(r.total().abs() < 1e-14);
    assert_eq!(auto_horizon(&c, 1.0).unwrap(), 0.0);
}

/// `(p/4) int sigma''(v) v_x^2` and `(2 pi^2 p / L^2) int sigma(v)` by direct quadrature.
fn strengthened_sides(v: &Field, p: f64) -> (f64, f64) {
    let g = v.grid();
    let l = g.length();
    let vx = v.derivative(1, DiffBackend::Spectral).unwrap();
    let vbar = v.mean();
    let (fisher, sigma): (Vec<f64>, Vec<f64>) = v
        .values()
        .iter()
        .zip(vx.values())
        .map(|(&x, &dx)| {
            if p == 1.0 {
                (dx * dx / x, x * (x / vbar).ln())
            } else {
                (p * x.powf(p - 2.0) * dx * dx, (x.powf(p) - vbar.powf(p)) / (p - 1.0))
            }
        })
        .unzip();
    (
        p / 4.0 * g.integrate(&fisher),
        2.0 * PI * PI * p / (l * l) * g.integrate(&sigma),
    )
}

#[test]
fn remainder_strengthens_the_inequality() {
    let g = grid(128);
    for p in [1.0, 1.5] {
        let v = cosine(&g, 0.5);
        let horizon = auto_horizon(&v, p).unwrap();
        let r = remainder_r(&v, p, horizon, 0.01).unwrap();
        let (lhs, rhs) = strengthened_sides(&v, p);
        assert!(r.total() >= -1e-12, "p {p}: {}", r.total());
        assert!(lhs + r.total() >= rhs - 1e-8, "p {p}");
        // the flow drives f to zero, so the remainder recovers the deficit exactly
        assert!(
            (r.total() - (lhs - rhs)).abs() < 1e-8 * lhs,
            "p {p}: {} vs {}",
            r.total(),
            lhs - rhs
        );
        assert!(r.f_horizon.abs() < 1e-10);
    }
}

#[test]
fn remainder_vanishes_quadratically_for_near_constants() {
    let g = grid(64);
    let ratios: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&e| {
            let v = cosine(&g, e);
            let r = remainder_r(&v, 1.0, auto_horizon(&v, 1.0).unwrap(), 0.01).unwrap();
            assert!(r.total() >= 0.0);
            r.total() / (e * e)
        })
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] <= w[0] * 1.0001), "{ratios:?}");
}

#[test]
fn convex_sobolev_examples() {
    let g = grid(128);
    let c = Field::constant(&g, 1.7, FieldKind::Density).unwrap();
    for p in [1.0, 1.5, 2.0] {
        let (lhs, rhs, holds) = convex_sobolev_check(&c, p, DiffBackend::Spectral).unwrap();
        assert!(lhs.abs() < 1e-12 && rhs.abs() < 1e-12 && holds);
    }

    let u = Field::from_fn(&g, FieldKind::Density, |x| 1.0 + 0.3 * x.cos()).unwrap();
    let (lhs, rhs, holds) = convex_sobolev_check(&u, 1.5, DiffBackend::Spectral).unwrap();
    // int u_x^2 = 0.09 pi, so the right side is (4/3)(0.09 pi)
    assert!((rhs - 0.12 * PI).abs() < 1e-12, "{rhs}");
    let fine = 4096;
    let m = (0..fine)
        .map(|j| (1.0 + 0.3 * (TAU * j as f64 / fine as f64).cos()).powf(4.0 / 3.0))
        .sum::<f64>()
        / fine as f64;
    let oracle = (TAU * (1.0 + 0.045) - TAU * m.powf(1.5)) / 0.5;
    assert!((lhs - oracle).abs() < 1e-12, "{lhs} vs {oracle}");
    assert!(holds && lhs > 0.0);

    let mut ratios = Vec::new();
    for e in [0.3, 0.1, 0.01] {
        let u = Field::from_fn(&g, FieldKind::Density, |x| 1.0 + e * x.cos()).unwrap();
        let (lhs, rhs, _) = convex_sobolev_check(&u, 2.0, DiffBackend::Spectral).unwrap();
        let sq = g.integrate(&u.values().iter().map(|x| x * x).collect::<Vec<_>>());
        assert!((lhs - (sq - g.length() * u.mean().powi(2))).abs() < 1e-12);
        ratios.push(rhs / lhs);
    }
    assert!(ratios.iter().all(|&r| r >= 1.0 - 1e-12));
    assert!((ratios[2] - 1.0).abs() < 1e-10, "{ratios:?}");
}

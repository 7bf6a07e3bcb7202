use super::*;
use crate::initial::InitialData;
use proptest::prelude::*;

fn cosine() -> PeriodicPotential {
    PeriodicPotential::cosine(2.0, 1.0).unwrap()
}

fn line(lo: f64, hi: f64, dx: f64, f: impl Fn(f64) -> f64) -> Field {
    let n = ((hi - lo) / dx).round() as usize + 1;
    Field::new(1, dx, [lo, 0.0], [n, 1], (0..n).map(|i| f(lo + i as f64 * dx)).collect()).unwrap()
}

#[test]
fn constant_data_with_constant_forcing() {
    let g = PeriodicPotential::constant(1.5).unwrap();
    let u0 = line(-1.0, 1.0, 0.05, |_| 0.3);
    let cfg = SimConfig::new(0.1, 1.0, 1.0);
    let traj = simulate(&u0, &g, &cfg).unwrap();
    let last = traj.snapshots.last().unwrap();
    assert_eq!(last.time, 1.0);
    for v in &last.values {
        assert!((v - 1.8).abs() < 1e-12);
    }
}

#[test]
fn affine_data_is_exact_with_linear_extension() {
    let g = PeriodicPotential::constant(2.0).unwrap();
    let u0 = Field::sample_1d(
        &InitialData::Affine {
            slope: vec![0.7],
            offset: -0.2,
        },
        -1.0,
        1.0,
        0.02,
    )
    .unwrap();
    let cfg = SimConfig::new(0.05, 0.5, 1.0);
    let last = simulate(&u0, &g, &cfg).unwrap().snapshots.pop().unwrap();
    for (a, b) in last.values.iter().zip(&u0.values) {
        assert!((a - b - 2.0).abs() < 1e-10);
    }
}

#[test]
fn affine_data_in_two_dimensions() {
    let g = PeriodicPotential::constant(1.0).unwrap();
    let u0 = Field::sample_2d(
        &InitialData::Affine {
            slope: vec![0.3, -0.4],
            offset: 0.0,
        },
        [-0.5, -0.5],
        [0.5, 0.5],
        0.05,
    )
    .unwrap();
    let cfg = SimConfig::new(0.1, 1.0, 0.5);
    let last = simulate(&u0, &g, &cfg).unwrap().snapshots.pop().unwrap();
    for (a, b) in last.values.iter().zip(&u0.values) {
        assert!((a - b - 0.5).abs() < 1e-10);
    }
}

#[test]
fn zero_final_time_returns_input() {
    let u0 = line(-1.0, 1.0, 0.1, |x| -x.abs());
    let traj = simulate(&u0, &cosine(), &SimConfig::new(0.1, 0.5, 0.0)).unwrap();
    assert_eq!(traj.steps, 0);
    assert_eq!(traj.snapshots, vec![u0]);
}

#[test]
fn snapshots_land_on_output_times() {
    let u0 = line(-1.0, 1.0, 0.05, |x| -x.abs());
    let mut cfg = SimConfig::new(0.1, 0.5, 0.37);
    cfg.output_times = vec![0.1, 0.2513, 0.37];
    let traj = simulate(&u0, &cosine(), &cfg).unwrap();
    let times: Vec<f64> = traj.snapshots.iter().map(|f| f.time).collect();
    assert_eq!(times, vec![0.1, 0.2513, 0.37]);
}

#[test]
fn step_above_the_bound_is_rejected() {
    let u0 = line(-1.0, 1.0, 0.05, |x| x);
    let g = cosine();
    let mut cfg = SimConfig::new(0.1, 1.0, 1.0);
    let bound = cfg.cfl_safety * cfg.stable_dt(1, 0.05, &g);
    cfg.dt_override = Some(1.01 * bound);
    assert_eq!(simulate(&u0, &g, &cfg).unwrap_err().kind(), "CflViolation");
    assert_eq!(step(&u0, &g, &cfg, 2.0 * bound).unwrap_err().kind(), "CflViolation");
    // The combined bound implies both separate ones.
    let s = cfg.stable_dt(1, 0.05, &g);
    assert!(s <= 0.05 * 0.05 / (2.0 * cfg.diffusion()));
    assert!(s <= cfg.eps / g.lipschitz_bound());
}

#[test]
fn vertical_period_shift_is_exact_per_step() {
    let g = cosine();
    let eps = 0.05;
    let cfg = SimConfig::new(eps, 0.5, 0.3);
    let u0 = line(-1.0, 1.0, eps / 8.0, |x| -x.abs() + 0.3 * (7.0 * x).sin());
    let v0 = u0.map(|v| v + eps);
    let dt = cfg.dt(1, u0.dx, &g).unwrap();
    let (mut u, mut v) = (u0, v0);
    while u.time < cfg.t_final {
        u = step(&u, &g, &cfg, dt).unwrap();
        v = step(&v, &g, &cfg, dt).unwrap();
        for (a, b) in u.values.iter().zip(&v.values) {
            assert!((b - a - eps).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }
}

#[test]
fn periodic_boundary_commutes_with_grid_shift() {
    let g = cosine();
    let mut cfg = SimConfig::new(0.1, 1.0, 0.2);
    cfg.boundary = Boundary::Periodic;
    let u0 = line(0.0, 1.0 - 1.0 / 64.0, 1.0 / 64.0, |x| 0.2 * (2.0 * std::f64::consts::PI * x).sin());
    let a = simulate(&u0.roll_x(1), &g, &cfg).unwrap().snapshots.pop().unwrap();
    let b = simulate(&u0, &g, &cfg).unwrap().snapshots.pop().unwrap().roll_x(1);
    assert_eq!(a.values, b.values);
}

#[test]
fn global_bound_between_harmonic_drifts() {
    // inf u0 + tH − 5ε ≤ u ≤ sup u0 + tH + 5ε for bounded data.
    let g = cosine();
    let h = 3f64.sqrt();
    let eps = 0.05;
    let cfg = SimConfig::new(eps, 1.5, 1.0);
    let u0 = line(-2.0, 2.0, eps / 8.0, |x| 0.5 * (3.0 * x).cos());
    let last = simulate(&u0, &g, &cfg).unwrap().snapshots.pop().unwrap();
    for v in &last.values {
        assert!(*v >= -0.5 + h - 5.0 * eps && *v <= 0.5 + h + 5.0 * eps, "{v}");
    }
}

#[test]
fn lipschitz_report_on_cone_and_constant() {
    let g = cosine();
    let eps = 0.05;
    let mut cfg = SimConfig::new(eps, 0.5, 0.5);
    cfg.output_times = vec![0.0, 0.25, 0.5];
    let lim = LipschitzLimits {
        space: 1.0,
        g_sup: 3.0,
        time_c: 0.0,
        eps,
        alpha: 0.5,
        monotone_delta: None,
        margin: 0.5,
    };
    let cone = line(-2.0, 2.0, eps / 8.0, |x| -x.abs());
    let rep = lipschitz_report(&simulate(&cone, &g, &cfg).unwrap(), &lim).unwrap();
    assert!(rep.space_ok && rep.time_ok, "{rep:?}");
    // The plain neighbour quotient does exceed L at the ε scale.
    assert!(rep.space_quotient[2] > 1.0);
    // Near the truncation the boundary nodes lag behind the flank.
    let all = LipschitzLimits { margin: 0.0, ..lim };
    assert!(!lipschitz_report(&simulate(&cone, &g, &cfg).unwrap(), &all).unwrap().space_ok);
    let flat = line(-2.0, 2.0, eps / 8.0, |_| 0.1);
    let rep = lipschitz_report(&simulate(&flat, &g, &cfg).unwrap(), &lim).unwrap();
    assert!(rep.space_quotient.iter().all(|q| *q == 0.0));
}

#[test]
fn monotone_data_keeps_increments() {
    let g = cosine();
    let eps = 0.05;
    let mut cfg = SimConfig::new(eps, 0.5, 0.5);
    cfg.output_times = vec![0.0, 0.25, 0.5];
    let u0 = line(-1.0, 1.0, eps / 8.0, |x| 0.5 * x + 0.2 * x.max(0.0));
    let traj = simulate(&u0, &g, &cfg).unwrap();
    let rep = lipschitz_report(
        &traj,
        &LipschitzLimits {
            space: 0.7,
            g_sup: 3.0,
            time_c: 0.0,
            eps,
            alpha: 0.5,
            monotone_delta: Some(0.5),
            margin: 0.25,
        },
    )
    .unwrap();
    assert!(rep.monotone_ok, "{:?}", rep.monotone_excess);
}

#[test]
fn oversized_two_dimensional_grid_is_rejected() {
    let err = Field::sample_2d(&InitialData::Constant { value: 0.0 }, [0.0, 0.0], [1.0, 1.0], 1.0 / 600.0);
    assert!(err.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn ordered_data_stay_ordered(
        seed_a in proptest::collection::vec(-1.0f64..1.0, 6),
        gap in proptest::collection::vec(0.0f64..0.3, 6),
        alpha in 0.0f64..2.0,
    ) {
        let g = cosine();
        let eps = 0.1;
        let mut cfg = SimConfig::new(eps, alpha, 0.2);
        cfg.boundary = Boundary::LinearExtension;
        let u = |x: f64| seed_a.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x).sin()).sum::<f64>();
        let w = |x: f64| gap.iter().enumerate().map(|(k, a)| a * (1.0 + ((k + 2) as f64 * x).cos())).sum::<f64>();
        let mut a = line(-1.0, 1.0, eps / 4.0, u);
        let mut b = line(-1.0, 1.0, eps / 4.0, |x| u(x) + w(x));
        let dt = cfg.dt(1, a.dx, &g).unwrap();
        while a.time < cfg.t_final {
            a = step(&a, &g, &cfg, dt).unwrap();
            b = step(&b, &g, &cfg, dt).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(x <= y);
            }
        }
    }
}


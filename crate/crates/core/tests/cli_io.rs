use dlss_core::config::{parse_config, Command, InitialDatum};
use dlss_core::decay::{default_window, entropy_series, fit_decay, fit_records};
use dlss_core::identity::{identity_suite, identity_suite_fields, identity_suite_on, random_exponents};
use dlss_core::io::{emit_timeseries, read_timeseries, write_json, CertificationReport, TIMESERIES_HEADER};
use dlss_core::rng::default_max_mode;
use dlss_core::{solver, DiffBackend, Error, Field, FieldKind, PeriodicGrid, SolverConfig};
use std::f64::consts::TAU;

#[test]
fn config_examples() {
    let c = parse_config("L = 6.283185307179586\nN = 256\ncommand = solve\n").unwrap();
    assert_eq!(c.command, Command::Solve);
    assert!((c.length - TAU).abs() < 1e-15);
    assert_eq!(
        parse_config("L = 6.283185307179586\ncommand = solve\n").unwrap_err(),
        Error::Validation {
            field: "N".into(),
            reason: "required".into()
        }
    );
    let e =
        parse_config("N = 64\ncommand = solve\n[initial]\ninitial = cosine\namplitude = 2\nbase = 1\n").unwrap_err();
    assert!(e.is_validation());
}

#[test]
fn file_datum_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("u0.txt");
    let vals: Vec<String> = (0..16).map(|j| format!("{}", 1.0 + 0.01 * j as f64)).collect();
    std::fs::write(&data, vals.join("\n")).unwrap();
    let text = format!(
        "command = solve\nN = 16\n[initial]\ninitial = file\npath = {}\n",
        data.display()
    );
    let c = parse_config(&text).unwrap();
    assert_eq!(c.initial, InitialDatum::FromFile(data.clone()));
    let u = c.initial.field(&c.grid().unwrap()).unwrap();
    assert_eq!(u.values()[3], 1.03);
}

#[test]
fn trajectory_csv_file() {
    let g = PeriodicGrid::new(TAU, 32).unwrap();
    let u0 = Field::from_fn(&g, FieldKind::Density, |x| 1.0 + 0.2 * x.cos()).unwrap();
    let cfg = SolverConfig {
        tau: 1e-3,
        ..Default::default()
    };
    let tr = solver::solve(&u0, 3e-3, &cfg, 1).unwrap();
    assert_eq!(tr.records.len(), 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    emit_timeseries(&tr.records, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4 + 1);
    assert_eq!(text.lines().next().unwrap(), TIMESERIES_HEADER);
    assert!(!text.contains('\r'));
    assert_eq!(read_timeseries(&path).unwrap(), tr.records);
}

#[test]
fn json_report_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    write_json(&CertificationReport::new("logsob", 0.5005, 0.5), &path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys.len(), 4);
    for k in ["kind", "value", "analytic", "rel_error"] {
        assert!(keys.contains(&k));
    }
    assert!((v["rel_error"].as_f64().unwrap() - 1e-3).abs() < 1e-12);
}

#[test]
fn linearized_decay_matches_the_rate() {
    // small amplitude so the linearization about the mean governs the decay
    let g = PeriodicGrid::new(TAU, 32).unwrap();
    let u0 = Field::from_fn(&g, FieldKind::Density, |x| 1.0 + 1e-3 * x.cos()).unwrap();
    let cfg = SolverConfig {
        tau: 1e-3,
        newton_tol: 1e-14,
        ..Default::default()
    };
    let tr = solver::solve(&u0, 2.0, &cfg, 10).unwrap();
    let r = fit_records(&tr.records, TAU).unwrap();
    assert!((r.theoretical_m - 2.0).abs() < 1e-14);
    // the implicit Euler rate is log(1 + tau M) / tau
    let discrete = (1.0 + 2e-3f64).ln() / 1e-3 / 2.0;
    assert!((r.ratio - discrete).abs() < 1e-3, "{} vs {discrete}", r.ratio);
    assert!(r.r_squared > 0.999999);
    let series = entropy_series(&tr.records);
    let (lo, hi) = default_window(&series);
    assert!(lo >= 0.4 - 1e-12 && hi <= 2.0);
    assert_eq!(fit_decay(&series, (lo, hi), TAU).unwrap(), r);
}

#[test]
fn identity_examples() {
    let g = PeriodicGrid::new(TAU, 256).unwrap();
    let one = Field::constant(&g, 1.0, FieldKind::Density).unwrap();
    let r = identity_suite_fields(&[one], DiffBackend::Spectral).unwrap();
    assert_eq!((r.decomposition_max_rel_error, r.ibp_max_rel_error), (0.0, 0.0));

    let u = Field::from_fn(&g, FieldKind::Density, |x| x.cos().exp()).unwrap();
    let r = identity_suite_fields(&[u], DiffBackend::Spectral).unwrap();
    assert!(r.decomposition_max_rel_error < 1e-8 && r.ibp_max_rel_error < 1e-8);

    let r = identity_suite(&g, DiffBackend::Spectral, 20, 5).unwrap();
    assert!(
        r.decomposition_max_rel_error < 1e-8 && r.ibp_max_rel_error < 1e-8,
        "{r:?}"
    );
    assert_eq!(r.logsob_violations + r.poincare_violations, 0);
}

#[test]
fn second_order_differences_converge_quadratically() {
    // the same continuum fields sampled at each resolution
    let coarse = PeriodicGrid::new(TAU, 128).unwrap();
    let series = random_exponents(3, 10, TAU, default_max_mode(&coarse));
    let errs: Vec<(f64, f64)> = [128, 256, 512]
        .iter()
        .map(|&n| {
            let g = PeriodicGrid::new(TAU, n).unwrap();
            let r = identity_suite_on(&g, DiffBackend::FD2, &series).unwrap();
            (r.decomposition_max_rel_error, r.ibp_max_rel_error)
        })
        .collect();
    for w in errs.windows(2) {
        for (a, b) in [(w[0].0, w[1].0), (w[0].1, w[1].1)] {
            let order = (a / b).log2();
            assert!((order - 2.0).abs() < 0.3, "order {order} from {errs:?}");
        }
    }
}

use idk_core::ansatz::reproduce_case;
use idk_core::expr::parse_with;
use idk_core::scenarios::{builtin_json, load_scenario, scenario_names, ScenarioError, ScenarioFile};
use idk_core::verify::Controls;
use idk_core::{Expr, Scenario, Var};

#[test]
fn catalogue_is_complete() {
    let names = scenario_names();
    for n in [
        "straight-lines",
        "xym-case1",
        "xym-case2",
        "xym-case3a",
        "xym-case3b",
        "xym-case3c-generic",
        "xym-m1",
        "xym-m1over2",
        "xym-m1over3-derived",
        "conics",
    ] {
        assert!(names.contains(&n), "{n}");
    }
    assert_eq!(names.len(), 10);
}

#[test]
fn unknown_name() {
    assert!(matches!(load_scenario("xym-case9"), Err(ScenarioError::UnknownScenario(_))));
}

#[test]
fn every_scenario_checks_out() {
    for n in scenario_names() {
        let sc = load_scenario(n).unwrap();
        let c = sc.check(64, 11).unwrap();
        assert!(c.passes(1e-9, 1e-12), "{n}: {c:?}");
        assert!(c.eta_at_point > 0.0, "{n}");
        assert!(sc.expected_mismatches().unwrap().is_empty(), "{n}");
    }
}

#[test]
fn loading_is_deterministic() {
    for n in scenario_names() {
        let a = load_scenario(n).unwrap();
        let b = load_scenario(n).unwrap();
        assert_eq!(a.solution.v, b.solution.v);
        assert_eq!(a.forces, b.forces);
    }
}

#[test]
fn stored_records_match_the_engine() {
    for n in scenario_names() {
        let file: ScenarioFile = serde_json::from_str(builtin_json(n).unwrap()).unwrap();
        if let Some(rec) = file.record {
            let pairs: Vec<_> = rec.params.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
            assert_eq!(reproduce_case(&rec.name, &pairs).unwrap(), rec, "{n}");
        }
    }
}

#[test]
fn stale_record_is_rejected() {
    let mut file: ScenarioFile = serde_json::from_str(builtin_json("xym-case1").unwrap()).unwrap();
    let rec = file.record.as_mut().unwrap();
    rec.v = Expr::zero();
    assert!(matches!(Scenario::from_file(file), Err(ScenarioError::StaleRecord)));
}

#[test]
fn orbits_stay_on_their_curve() {
    for n in scenario_names() {
        let sc = load_scenario(n).unwrap();
        let tr = sc.launch(sc.point, 1.0, 1.0, &Controls::adaptive(1e-9, 1e-12)).unwrap();
        let d = sc.drift(&tr).unwrap();
        assert!(d.f_drift <= 1e-6, "{n}: {}", d.f_drift);
        assert!(d.energy_drift <= 1e-8, "{n}: {}", d.energy_drift);
        assert!(tr.samples.len() > 10, "{n}");
    }
}

#[test]
fn wrong_speed_leaves_curved_families() {
    for n in scenario_names().into_iter().filter(|n| *n != "straight-lines") {
        let sc = load_scenario(n).unwrap();
        let tr = sc.launch(sc.point, 1.1, 1.0, &Controls::adaptive(1e-9, 1e-12)).unwrap();
        assert!(sc.drift(&tr).unwrap().f_drift > 1e-3, "{n}");
    }
}

#[test]
fn conic_energy_is_the_family_value() {
    let sc = load_scenario("conics").unwrap();
    let tr = sc.launch((1.0, 1.0), 1.0, 2.0, &Controls::adaptive(1e-9, 1e-12)).unwrap();
    let d = sc.drift(&tr).unwrap();
    assert_eq!(d.c0, 4.5);
    assert!(d.ebar_defect.unwrap() < 1e-8);
}

#[test]
fn conic_function_pair() {
    let sc = load_scenario("conics").unwrap();
    let b = sc.bindings::<f64>();
    let g = Expr::func("G", Expr::x());
    let f = Expr::func("F", Expr::x());
    for z in [-2.0, -0.5, 0.0, 0.3, 1.7] {
        let gv = g.eval(z, 0.0, &b).unwrap();
        assert!((gv - 1.0 / (1.0 + z * z)).abs() < 1e-15);
        // a = 1, b = 2
        let want = -0.5 * 2.0 * (1.0 + 2.0 * z * z) * gv;
        assert!((f.eval(z, 0.0, &b).unwrap() - want).abs() < 1e-14);
    }
    let gp = Expr::func("G'", Expr::x());
    assert!((gp.eval(1.0, 0.0, &b).unwrap() + 0.5).abs() < 1e-15);
}

#[test]
fn straight_line_lagrangian() {
    let sc = load_scenario("straight-lines").unwrap();
    // L = 1/2 g(v, v) - V; the kinetic part is fixed by g, so matching L means
    // V = -1/2 g11 psi(g11 x + g12 y) up to a constant
    assert_eq!(sc.solution.g.to_string(), "[2, 1, 3]");
    let subs = sc.params.iter().map(|(k, v)| (k.clone(), Expr::constant(v.clone()))).collect();
    let v_disp = parse_with("-(1/2)*g11*psi(g11*x + g12*y)", &subs).unwrap();
    let d = &sc.solution.v - &v_disp;
    assert!(d.diff(Var::X).is_zero() && d.diff(Var::Y).is_zero());
    assert!(sc.expected.contains_key("L"));
    // sigma = 0 makes the restricted energy vanish
    assert_eq!(sc.ebar_at(1.0), Some(0.0));
}

#[test]
fn point_outside_domain_is_infeasible() {
    let sc = load_scenario("xym-case1").unwrap();
    let err = sc.launch((1.0, -1.0), 1.0, 1.0, &Controls::default()).unwrap_err();
    assert!(matches!(err, ScenarioError::Verify(idk_core::verify::VerifyError::OutsideDomain { .. })));
}

#[test]
fn scenario_files_round_trip() {
    for n in scenario_names() {
        let file: ScenarioFile = serde_json::from_str(builtin_json(n).unwrap()).unwrap();
        let again: ScenarioFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(file, again, "{n}");
    }
}

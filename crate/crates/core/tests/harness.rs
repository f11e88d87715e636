use holonomy_fields::fixtures::{self, fig6_trivial};
use holonomy_fields::harness::{
    check_names, experiment_splittings, rel, run_check, run_checks, CheckReport, Comparison, Method, RunOptions,
};
use holonomy_fields::io::report_json;
use holonomy_fields::linalg::c;
use holonomy_fields::{CMat, C64};

fn opts(samples: usize) -> RunOptions {
    RunOptions { seed: 11, samples, tol: None, timings: false }
}

#[test]
fn thirteen_named_checks() {
    let names = check_names();
    assert_eq!(names.len(), 13);
    for n in ["green-closed-form", "feynman-kac", "le-jan-sznitman", "hidden-loops", "symanzik"] {
        assert!(names.contains(&n));
    }
}

#[test]
fn unknown_names_are_reported() {
    let fx = fig6_trivial();
    assert!(run_check("nosuch", &fx, &opts(10)).is_none());
    assert_eq!(run_checks(&["gauge", "nosuch"], &fx, &opts(10)).unwrap_err(), "nosuch");
}

#[test]
fn deterministic_checks_pass_on_the_random_fixture() {
    let fx = fixtures::five_vertex_r2(7);
    let names = ["green-closed-form", "log-det", "kato", "gauge", "symanzik"];
    let reports = run_checks(&names, &fx, &opts(2000)).unwrap();
    for (rep, name) in reports.iter().zip(names) {
        assert_eq!(rep.name, name);
        assert!(rep.pass, "{name}: {:?} {:?}", rep.error, rep.failures().collect::<Vec<_>>());
        assert!(rep.runtime_s.is_none());
    }
}

#[test]
fn reports_depend_only_on_seed_and_samples() {
    let fx = fixtures::five_vertex_r2(7);
    let a = run_checks(&["gff", "feynman-kac"], &fx, &opts(4000)).unwrap();
    let b = run_checks(&["gff", "feynman-kac"], &fx, &opts(4000)).unwrap();
    assert_eq!(report_json(&a).unwrap(), report_json(&b).unwrap());
    let c = run_checks(&["gff"], &fx, &RunOptions { seed: 12, ..opts(4000) }).unwrap();
    assert_ne!(report_json(&a[..1]).unwrap(), report_json(&c).unwrap());
}

#[test]
fn timings_are_opt_in() {
    let fx = fig6_trivial();
    let rep = run_check("green-closed-form", &fx, &RunOptions { timings: true, ..opts(10) }).unwrap();
    assert!(rep.runtime_s.unwrap() >= 0.0);
}

#[test]
fn tolerance_override_applies() {
    let fx = fixtures::five_vertex_r2(7);
    let rep = run_check("green-closed-form", &fx, &RunOptions { tol: Some(0.0), ..opts(10) }).unwrap();
    let exact: Vec<_> = rep.comparisons.iter().filter(|c| c.method == Method::Exact).collect();
    assert!(!exact.is_empty());
    assert!(exact.iter().all(|c| c.tol == Some(0.0)));
}

#[test]
fn comparison_pass_rules() {
    assert!(Comparison::exact("a", 1.0, 1.0 + 1e-10, 1e-9).pass);
    assert!(!Comparison::exact("a", 1.0, 1.1, 1e-9).pass);
    assert!(Comparison::exact("zeros", 0.0, 1e-16, 1e-1).pass);
    assert_eq!(rel(0.0, 0.0), 0.0);
    assert!((rel(2.0, 1.0) - 0.5).abs() < 1e-15);

    assert!(Comparison::exact_budget("b", 1.0, 1.0 + 1e-4, 1e-9, 2e-4).pass);
    assert!(!Comparison::exact_budget("b", 1.0, 1.0 + 1e-3, 1e-9, 2e-4).pass);

    assert!(Comparison::mc("m", 1.0, 0.1, 1.29, 0.0).pass);
    assert!(!Comparison::mc("m", 1.0, 0.1, 1.31, 0.0).pass);
    assert!(Comparison::mc("m", 1.0, 0.3, 1.0 + 0.3 * 10f64.sqrt(), 0.3).pass);
    assert!(Comparison::mc_budget("m", 1.0, 0.01, 1.5, 0.0, 0.48).pass);

    let target = CMat::zeros(2, 10);
    let se = CMat::from_element(2, 10, C64::new(1.0, 1.0));
    let mut mean = CMat::zeros(2, 10);
    mean[(0, 0)] = c(3.5);
    assert!(Comparison::mc_mat("family", &mean, &se, &target, None).pass);
    mean[(1, 1)] = c(3.5);
    mean[(1, 2)] = c(-3.5);
    assert!(!Comparison::mc_mat("family", &mean, &se, &target, None).pass);
    let mut mean = CMat::zeros(2, 10);
    mean[(0, 0)] = c(5.5);
    assert!(!Comparison::mc_mat("family", &mean, &se, &target, None).pass);

    assert!(Comparison::ks("ks", 0.01, 0.2, 0.01).pass);
    assert!(!Comparison::ks("ks", 0.3, 0.001, 0.01).pass);
    assert!(Comparison::bound("bound", 2.0, 1.0).pass);
    assert!(!Comparison::bound("bound", 0.5, 1.0).pass);
}

#[test]
fn report_summary_rules() {
    let mut rep = CheckReport::new("x", "f", 1, 10);
    rep.finish();
    assert!(!rep.pass, "an empty check must not pass");

    rep.push(Comparison::exact("a", 1.0, 1.0, 1e-9));
    rep.push(Comparison::mc("m", 1.0, 0.1, 1.2, 0.0));
    rep.finish();
    assert!(rep.pass);
    assert!((rep.max_abs_z - 2.0).abs() < 1e-12);

    rep.error = Some("boom".into());
    rep.finish();
    assert!(!rep.pass);
}

#[test]
fn splitting_experiment_reports_rows() {
    let fx = fixtures::triangle_r2(5);
    let rep = experiment_splittings(&fx, &opts(2000)).unwrap();
    assert!(!rep.rows.is_empty());
    for row in &rep.rows {
        assert_eq!(row.potential.len(), fx.graph.n_proper());
        assert!((row.abs_diff - (row.lhs_log - row.rhs_log).abs()).abs() < 1e-15);
    }
    assert!(rep.tail_bound.is_finite());
}

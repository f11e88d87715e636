use holonomy_fields::bundle::Potential;
use holonomy_fields::coloured::{loop_table, sample_loop_soups, StateSpace};
use holonomy_fields::fixtures::{self, fig6_trivial, p2_trivial};
use holonomy_fields::io::{
    field_csv, load, load_fixture, loops_jsonl, matrix_csv, occupation_csv, read_config, report_json, save_fixture,
    walks_jsonl, write_text,
};
use holonomy_fields::linalg::{c, frob};
use holonomy_fields::paths::sample_walk;
use holonomy_fields::{mc, CMat, CVec, Error, C64};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.config.json"))
}

#[test]
fn fixtures_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = mc::rng(1, "test/io/pot", 0);
    let fx = fixtures::triangle_r2(5);
    let pot = Potential::random(&fx.graph, &fx.bundle, 0.0, 1.0, &mut rng);
    let fx = fx.with_potential(pot);
    let path = save_fixture(&fx, dir.path(), "tri").unwrap();
    let (config, back) = load_fixture(&path).unwrap();
    assert_eq!(config.name.as_deref(), Some("triangle-r2"));
    assert_eq!(back.graph.spec(), fx.graph.spec());
    assert_eq!(back.bundle, fx.bundle);
    for (a, b) in back.connection.all().iter().zip(fx.connection.all()) {
        assert!(frob(&(a - b)) < 1e-15);
    }
    for (a, b) in back.potential.all().iter().zip(fx.potential.all()) {
        assert!(frob(&(a - b)) < 1e-15);
    }
    for x in 0..fx.graph.n_proper() {
        assert_eq!(back.splitting.n_colours(x), 2);
        for i in 0..2 {
            assert!(frob(&(back.splitting.proj(x, i) - fx.splitting.proj(x, i))) < 1e-15);
        }
    }
}

#[test]
fn shipped_fixtures_load() {
    for name in ["fig6", "fig6-trivial", "p2", "five-r2", "triangle-r2"] {
        let loaded = load(&shipped(name)).unwrap();
        assert!(loaded.first_failure().is_none(), "{name}");
        assert_eq!(loaded.log.len(), 5);
        assert!(loaded.into_fixture().is_ok());
    }
    let (_, fx) = load_fixture(&shipped("fig6")).unwrap();
    let e = fx.graph.edge_by_id("e").unwrap();
    assert!((fx.connection.hol(e)[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn validation_names_the_offender() {
    let loaded = load(&shipped("bad-unitary")).unwrap();
    let names: Vec<_> = loaded.log.iter().map(|v| v.invariant).collect();
    assert_eq!(names, ["graph", "bundle", "connection"]);
    assert_eq!(loaded.first_failure(), Some(&Error::ConnectionNotUnitary("e".into())));
    assert!(loaded.fixture.is_none());

    let loaded = load(&shipped("bad-eq1")).unwrap();
    assert_eq!(loaded.log.len(), 1);
    assert_eq!(loaded.first_failure().unwrap().to_string(), "Eq1Violation:x");
}

#[test]
fn malformed_configs_fail_to_parse() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, r#"{"graph": "g.json", "bundle": "b.json", "colour": 1}"#).unwrap();
    assert!(matches!(read_config(&p), Err(Error::Parse(_))));
    fs::write(&p, r#"{"graph": "missing.json", "bundle": "b.json"}"#).unwrap();
    let loaded = load(&p).unwrap();
    assert!(matches!(loaded.first_failure(), Some(Error::Io(_))));
    assert!(matches!(read_config(&dir.path().join("none.json")), Err(Error::Io(_))));
}

#[test]
fn walks_export_as_json_lines() {
    let fx = p2_trivial();
    let g = &fx.graph;
    let mut rng = mc::rng(2, "test/io/walks", 0);
    let walks: Vec<_> = (0..5).map(|_| sample_walk(g, 0, &mut rng).unwrap()).collect();
    let text = walks_jsonl(g, &walks).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    for (line, w) in lines.iter().zip(&walks) {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["start"], "a");
        assert_eq!(v["vertices"].as_array().unwrap().last().unwrap(), "w");
        assert_eq!(v["edges"].as_array().unwrap().len(), w.n_jumps());
        assert!(v["holding"].as_array().unwrap().last().unwrap().is_null());
    }
}

#[test]
fn loops_and_occupations_export() {
    let fx = fig6_trivial();
    let (g, h, s) = (&fx.graph, &fx.connection, &fx.splitting);
    let t = loop_table(g, h, s, 1e-4).unwrap();
    let mut rng = mc::rng(3, "test/io/loops", 0);
    let soups = sample_loop_soups(g, &t, 1.0, 20, &mut rng).unwrap();
    let text = loops_jsonl(g, &soups).unwrap();
    let total: usize = soups.iter().map(|e| e.positive.len() + e.negative.len()).sum();
    assert_eq!(text.lines().count(), total);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["sign"], 1);
        let vs = v["vertices"].as_array().unwrap();
        assert_eq!(vs.first(), vs.last());
        assert_eq!(v["colours"].as_array().unwrap().len(), vs.len());
    }
    let st = StateSpace::new(s);
    let occ: Vec<_> = soups.iter().map(|e| e.positive_occupation(g, &st)).collect();
    let csv = occupation_csv(g, &st, &occ);
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("sample,vertex,colour,value"));
    assert_eq!(rows.count(), 20);
}

#[test]
fn csv_exports() {
    let m = CMat::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64));
    assert_eq!(matrix_csv(&m), "0e0,0e0,0e0,1e0\n1e0,0e0,1e0,1e0\n");

    let fx = fixtures::five_vertex_r2(7);
    let samples = vec![CVec::from_element(10, c(0.5)); 3];
    let csv = field_csv(&fx.graph, 2, &samples);
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("sample,vertex,component,re,im"));
    assert_eq!(rows.next(), Some("0,v0,0,5e-1,0e0"));
    assert_eq!(rows.count(), 29);
}

#[test]
fn reports_and_text_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out/report.json");
    let text = report_json(&[1, 2]).unwrap();
    assert!(text.ends_with('\n'));
    write_text(&path, &text).unwrap();
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v, serde_json::json!([1, 2]));
}

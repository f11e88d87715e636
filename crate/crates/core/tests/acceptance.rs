//! Acceptance battery: one line per criterion, non-zero exit if any fails.

use holonomy_fields::fixtures::Fixture;
use holonomy_fields::harness::{check_names, run_check, run_checks, CheckReport, RunOptions};
use holonomy_fields::io::{load_fixture, report_json};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

const SEED: u64 = 1;
const SAMPLES: usize = 100_000;

fn shipped(name: &str) -> Fixture {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.config.json"));
    load_fixture(&path).unwrap_or_else(|e| panic!("{name}: {e}")).1
}

struct Outcome {
    pass: bool,
    detail: String,
}

/// Runs `check` on each fixture; passes when every report passes.
fn checks(check: &str, fixtures: &[&Fixture]) -> Outcome {
    let opts = RunOptions { seed: SEED, samples: SAMPLES, ..Default::default() };
    let reports: Vec<CheckReport> =
        fixtures.iter().map(|fx| run_check(check, fx, &opts).expect("known check")).collect();
    let pass = reports.iter().all(|r| r.pass);
    let detail = reports
        .iter()
        .map(|r| {
            let mut s = format!("{}: max rel {:.1e}, max |z| {:.2}", r.fixture, r.max_rel_err, r.max_abs_z);
            if let Some(e) = &r.error {
                s += &format!(", error {e}");
            }
            for c in r.failures() {
                s += &format!(", failed {:?}", c.label);
            }
            s
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass, detail }
}

fn determinism(fx: &Fixture) -> Outcome {
    let opts = RunOptions { seed: SEED, samples: SAMPLES, ..Default::default() };
    let names = check_names();
    let a = report_json(&run_checks(&names, fx, &opts).expect("known checks")).expect("serializable");
    let b = report_json(&run_checks(&names, fx, &opts).expect("known checks")).expect("serializable");
    Outcome { pass: a == b, detail: format!("{}: {} report bytes, identical: {}", fx.name, a.len(), a == b) }
}

fn main() -> ExitCode {
    let fig6 = shipped("fig6");
    let five = shipped("five-r2");
    type Run<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, u64, Run)> = vec![
        ("closed-form Green section", 1, Box::new(|| checks("green-closed-form", &[&fig6]))),
        ("Feynman-Kac heat kernel", 30, Box::new(|| checks("feynman-kac", &[&fig6, &five]))),
        ("Green identity", 30, Box::new(|| checks("green-identity", &[&five]))),
        ("log-det identities", 60, Box::new(|| checks("log-det", &[&five]))),
        ("Kato inequality", 10, Box::new(|| checks("kato", &[&five]))),
        ("adjointness and gauge suite", 10, Box::new(|| checks("gauge", &[&five]))),
        ("GFF covariance and Laplace transform", 30, Box::new(|| checks("gff", &[&five]))),
        ("Dynkin isomorphism", 60, Box::new(|| checks("dynkin", &[&five]))),
        ("Eisenbaum isomorphism", 60, Box::new(|| checks("eisenbaum", &[&five]))),
        ("Le Jan-Sznitman isomorphism", 300, Box::new(|| checks("le-jan-sznitman", &[&five]))),
        ("Symanzik identity", 60, Box::new(|| checks("symanzik", &[&five]))),
        ("hidden loops", 60, Box::new(|| checks("hidden-loops", &[&five]))),
        ("determinism of verify all", 600, Box::new(|| determinism(&five))),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(*limit);
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{:>2} {}  {name}  {:.1}s (limit {limit}s{})  {}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if in_time { "" } else { ", exceeded" },
            out.detail
        );
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

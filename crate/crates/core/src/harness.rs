//! Verification harness. Each check evaluates both sides of an identity
//! independently, by exact linear algebra or by seeded Monte Carlo, and
//! records the comparisons in a [`CheckReport`].
//!
//! Checks draw from their own random streams keyed by the run seed and the
//! check name, so a report depends only on the fixture, the seed and the
//! sample count.

mod gaussian;
mod hidden;
mod operators;
mod report;
mod soups;

pub use report::{rel, rel_mat, CheckReport, Comparison, Method, ABS_FLOOR, Z_MAX};
pub use soups::{experiment_splittings, ExperimentReport};

use crate::bundle::Potential;
use crate::fixtures::Fixture;
use crate::mc;
use crate::{CVec, Result, C64};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::time::Instant;

/// Settings shared by every check of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// Monte Carlo sample count; soup checks draw a tenth as many soups.
    pub samples: usize,
    /// Overrides the default exact tolerance of every check.
    pub tol: Option<f64>,
    /// Record wall-clock runtimes in the reports.
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 1, samples: 100_000, tol: None, timings: false }
    }
}

/// Inputs of a check: the fixture, the run options and the derived test
/// potential.
pub struct Ctx<'a> {
    pub fx: &'a Fixture,
    pub opts: &'a RunOptions,
    /// The fixture potential, or a fixed positive one when it is zero.
    pub pot: Potential,
}

/// Stream seed for quantities that must not vary with the run seed.
const FIXED_SEED: u64 = 0x5eed;

impl<'a> Ctx<'a> {
    pub fn new(fx: &'a Fixture, opts: &'a RunOptions) -> Self {
        let pot = if fx.potential.is_zero() {
            let mut rng = mc::rng(FIXED_SEED, "harness/potential", 0);
            Potential::random(&fx.graph, &fx.bundle, 0.1, 0.8, &mut rng)
        } else {
            fx.potential.clone()
        };
        Ctx { fx, opts, pot }
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.opts.tol.unwrap_or(default)
    }

    pub fn seed(&self) -> u64 {
        self.opts.seed
    }

    pub fn samples(&self) -> usize {
        self.opts.samples
    }

    /// The `k`-th fixed test section, real in the real mode, with unit
    /// `Ω⁰` norm.
    pub fn section(&self, k: u64) -> CVec {
        test_section(self.fx, k)
    }
}

/// The `k`-th fixed test section of a fixture, with unit `Ω⁰` norm.
pub fn test_section(fx: &Fixture, k: u64) -> CVec {
    let mut rng = mc::rng(FIXED_SEED, "harness/section", k);
    let complex = fx.bundle.field.is_complex();
    let n = fx.bundle.rank * fx.graph.n_proper();
    let f = CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
        C64::new(re, im)
    });
    let norm = crate::calculus::inner(&fx.graph, fx.bundle.rank, &f, &f).re.sqrt();
    f.unscale(norm)
}

type CheckFn = fn(&Ctx, &mut CheckReport) -> Result<()>;

/// Every check in declaration order.
const CHECKS: &[(&str, CheckFn)] = &[
    ("green-closed-form", operators::green_closed_form),
    ("feynman-kac", operators::feynman_kac),
    ("green-identity", operators::green_identity),
    ("reversibility", operators::reversibility),
    ("log-det", operators::log_det),
    ("kato", operators::kato),
    ("gauge", operators::gauge),
    ("gff", gaussian::gff),
    ("dynkin", gaussian::dynkin),
    ("eisenbaum", gaussian::eisenbaum),
    ("le-jan-sznitman", soups::le_jan_sznitman),
    ("symanzik", gaussian::symanzik),
    ("hidden-loops", hidden::hidden_loops),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs one check; `None` for an unknown name. Errors raised inside the
/// check are recorded in a failing report.
pub fn run_check(name: &str, fx: &Fixture, opts: &RunOptions) -> Option<CheckReport> {
    let (_, f) = CHECKS.iter().find(|c| c.0 == name)?;
    let start = Instant::now();
    let ctx = Ctx::new(fx, opts);
    let mut rep = CheckReport::new(name, &fx.name, opts.seed, opts.samples);
    if let Err(e) = f(&ctx, &mut rep) {
        rep.error = Some(e.to_string());
    }
    rep.finish();
    if opts.timings {
        rep.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    Some(rep)
}

/// Runs the named checks (or all of them for `"all"`) in parallel and
/// returns the reports in request order. Fails with the first unknown name.
pub fn run_checks(names: &[&str], fx: &Fixture, opts: &RunOptions) -> std::result::Result<Vec<CheckReport>, String> {
    let mut list: Vec<&str> = Vec::new();
    for &n in names {
        if n == "all" {
            list.extend(check_names());
        } else if CHECKS.iter().any(|c| c.0 == n) {
            list.push(n);
        } else {
            return Err(n.to_string());
        }
    }
    Ok(list.par_iter().map(|n| run_check(n, fx, opts).expect("known check")).collect())
}

pub fn run_suite(fx: &Fixture, opts: &RunOptions) -> Vec<CheckReport> {
    run_checks(&["all"], fx, opts).expect("all names are known")
}

/// A standard normal vector, real or complex, for random sections in
/// property draws.
pub(crate) fn random_vec<R: Rng + ?Sized>(n: usize, complex: bool, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
        C64::new(re, im)
    })
}

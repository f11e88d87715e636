//! Comparison records and per-check reports.

use crate::linalg;
use crate::stats::{matrix_z, ZSummary};
use crate::CMat;
use serde::Serialize;

/// Bound on `|z|` for a single Monte Carlo comparison.
pub const Z_MAX: f64 = 3.0;

/// Magnitudes below this are treated as zero when forming relative errors.
pub const ABS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Both sides by deterministic computation.
    Exact,
    /// A one-sided inequality `lhs ≥ rhs`.
    Bound,
    /// At least one side by Monte Carlo.
    MonteCarlo,
    /// Kolmogorov–Smirnov test of a sample against an exact law.
    Ks,
}

/// One side-by-side comparison inside a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub label: String,
    pub method: Method,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Additional absolute allowance, e.g. an enumeration tail bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// Entrywise z-scores of a matrix comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries: Option<ZSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub pass: bool,
}

/// `|a − b| / max(|a|, |b|)`, zero when both are below [`ABS_FLOOR`].
pub fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let s = a.abs().max(b.abs());
    if s < ABS_FLOOR {
        d / ABS_FLOOR
    } else {
        d / s
    }
}

/// Frobenius version of [`rel`].
pub fn rel_mat(a: &CMat, b: &CMat) -> f64 {
    let d = linalg::frob(&(a - b));
    let s = linalg::frob(a).max(linalg::frob(b));
    if s < ABS_FLOOR {
        d / ABS_FLOOR
    } else {
        d / s
    }
}

impl Comparison {
    fn base(label: &str, method: Method, lhs: f64, rhs: f64) -> Self {
        Comparison {
            label: label.into(),
            method,
            lhs,
            rhs,
            abs_err: (lhs - rhs).abs(),
            rel_err: rel(lhs, rhs),
            tol: None,
            budget: None,
            stderr: None,
            z: None,
            entries: None,
            p_value: None,
            pass: false,
        }
    }

    /// Passes when the relative error is at most `tol`.
    pub fn exact(label: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let mut c = Self::base(label, Method::Exact, lhs, rhs);
        c.tol = Some(tol);
        c.pass = c.rel_err <= tol;
        c
    }

    /// Passes when `|lhs − rhs| ≤ tol · max(|lhs|, |rhs|, 1) + budget`.
    pub fn exact_budget(label: &str, lhs: f64, rhs: f64, tol: f64, budget: f64) -> Self {
        let mut c = Self::base(label, Method::Exact, lhs, rhs);
        c.tol = Some(tol);
        c.budget = Some(budget);
        c.pass = c.abs_err <= tol * lhs.abs().max(rhs.abs()).max(1.0) + budget;
        c
    }

    /// Matrix comparison in Frobenius norm; `lhs` and `rhs` hold the norms.
    pub fn exact_mat(label: &str, lhs: &CMat, rhs: &CMat, tol: f64) -> Self {
        let mut c = Self::base(label, Method::Exact, linalg::frob(lhs), linalg::frob(rhs));
        c.abs_err = linalg::frob(&(lhs - rhs));
        c.rel_err = rel_mat(lhs, rhs);
        c.tol = Some(tol);
        c.pass = c.rel_err <= tol;
        c
    }

    /// Worst relative error over `count` exact draws.
    pub fn worst(label: &str, worst: f64, count: usize, tol: f64) -> Self {
        let mut c = Self::base(&format!("{label} (worst of {count})"), Method::Exact, worst, 0.0);
        c.rel_err = worst;
        c.tol = Some(tol);
        c.pass = worst <= tol;
        c
    }

    /// Passes when `value ≥ floor`.
    pub fn bound(label: &str, value: f64, floor: f64) -> Self {
        let mut c = Self::base(label, Method::Bound, value, floor);
        c.pass = value >= floor;
        c
    }

    /// Scalar Monte Carlo estimate against a target with its own error.
    pub fn mc(label: &str, est: f64, se: f64, target: f64, target_se: f64) -> Self {
        Self::mc_budget(label, est, se, target, target_se, 0.0)
    }

    /// Passes when `|est − target| ≤ allowance + 3σ`.
    pub fn mc_budget(label: &str, est: f64, se: f64, target: f64, target_se: f64, allowance: f64) -> Self {
        let mut c = Self::base(label, Method::MonteCarlo, est, target);
        let s = se.hypot(target_se);
        let excess = (c.abs_err - allowance).max(0.0);
        let z = if excess == 0.0 {
            0.0
        } else if s > 0.0 {
            excess / s
        } else {
            f64::INFINITY
        };
        c.stderr = Some(s);
        if allowance > 0.0 {
            c.budget = Some(allowance);
        }
        c.z = Some(z * (est - target).signum());
        c.pass = z <= Z_MAX;
        c
    }

    /// Matrix Monte Carlo estimate: at most 5% of entries beyond 3σ and none
    /// beyond 5σ.
    pub fn mc_mat(label: &str, mean: &CMat, se: &CMat, target: &CMat, target_se: Option<&CMat>) -> Self {
        let zs = matrix_z(mean, se, target, target_se);
        Self::from_zs(label, mean, target, &zs, None)
    }

    /// Matrix version of [`Comparison::mc_budget`]: each entry's deviation
    /// is first reduced by `allowance`.
    pub fn mc_mat_budget(label: &str, mean: &CMat, se: &CMat, target: &CMat, allowance: f64) -> Self {
        let mut zs = Vec::with_capacity(2 * mean.len());
        for k in 0..mean.len() {
            for (m, s, t) in [(mean[k].re, se[k].re, target[k].re), (mean[k].im, se[k].im, target[k].im)] {
                let excess = ((m - t).abs() - allowance).max(0.0);
                let z = if excess == 0.0 {
                    0.0
                } else if s > 0.0 {
                    excess / s
                } else {
                    f64::INFINITY
                };
                zs.push(z);
            }
        }
        Self::from_zs(label, mean, target, &zs, Some(allowance))
    }

    fn from_zs(label: &str, mean: &CMat, target: &CMat, zs: &[f64], allowance: Option<f64>) -> Self {
        let mut c = Self::base(label, Method::MonteCarlo, linalg::frob(mean), linalg::frob(target));
        c.abs_err = linalg::frob(&(mean - target));
        c.rel_err = rel_mat(mean, target);
        let summary = ZSummary::new(zs);
        c.z = Some(summary.max_abs);
        c.entries = Some(summary);
        c.budget = allowance;
        c.pass = summary.passes_family();
        c
    }

    /// Kolmogorov–Smirnov statistic `d` with p-value `p`; passes when
    /// `p > alpha`.
    pub fn ks(label: &str, d: f64, p: f64, alpha: f64) -> Self {
        let mut c = Self::base(label, Method::Ks, d, 0.0);
        c.p_value = Some(p);
        c.tol = Some(alpha);
        c.pass = p > alpha;
        c
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub fixture: String,
    pub seed: u64,
    pub samples: usize,
    pub pass: bool,
    /// Largest relative error among exact comparisons.
    pub max_rel_err: f64,
    /// Largest `|z|` among Monte Carlo comparisons.
    pub max_abs_z: f64,
    pub comparisons: Vec<Comparison>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
}

impl CheckReport {
    pub fn new(name: &str, fixture: &str, seed: u64, samples: usize) -> Self {
        CheckReport {
            name: name.into(),
            fixture: fixture.into(),
            seed,
            samples,
            pass: false,
            max_rel_err: 0.0,
            max_abs_z: 0.0,
            comparisons: Vec::new(),
            notes: Vec::new(),
            error: None,
            runtime_s: None,
        }
    }

    pub fn push(&mut self, c: Comparison) {
        self.comparisons.push(c);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Fills the summary fields; a check passes when it ran without error,
    /// compared something and every comparison passed.
    pub fn finish(&mut self) {
        self.max_rel_err =
            self.comparisons.iter().filter(|c| c.method == Method::Exact).fold(0.0, |m, c| m.max(c.rel_err));
        self.max_abs_z = self.comparisons.iter().filter_map(|c| c.z).fold(0.0, |m, z| m.max(z.abs()));
        self.pass = self.error.is_none() && !self.comparisons.is_empty() && self.comparisons.iter().all(|c| c.pass);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Comparison> {
        self.comparisons.iter().filter(|c| !c.pass)
    }
}

//! Streaming moment accumulators, z-scores, quadrature and a KS test.

use crate::{CMat, C64};
use serde::Serialize;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Sum and sum of squares of a real sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalarAcc {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl ScalarAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, o: &ScalarAcc) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn var(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sumsq - self.n as f64 * m * m) / (self.n - 1) as f64).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        (self.var() / self.n as f64).sqrt()
    }

    /// Standard error floored at `bound / n`, the weight of one sample of
    /// modulus at most `bound`. Means fed only by rare events otherwise
    /// report a rounding-level spread.
    pub fn stderr_bounded(&self, bound: f64) -> f64 {
        self.stderr().max(bound / self.n.max(1) as f64)
    }
}

/// Entrywise accumulator for matrix-valued samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MatAcc {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<ScalarAcc>,
    pub im: Vec<ScalarAcc>,
}

impl MatAcc {
    pub fn new(rows: usize, cols: usize) -> Self {
        MatAcc { rows, cols, re: vec![ScalarAcc::default(); rows * cols], im: vec![ScalarAcc::default(); rows * cols] }
    }

    pub fn push(&mut self, m: &CMat) {
        for j in 0..self.cols {
            for i in 0..self.rows {
                let z = m[(i, j)];
                self.re[i + j * self.rows].push(z.re);
                self.im[i + j * self.rows].push(z.im);
            }
        }
    }

    /// Records a sample that is zero except on the listed block.
    pub fn push_sparse(&mut self, blocks: &[(usize, usize, CMat)]) {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (i0, j0, b) in blocks {
            let mut v = m.view_mut((*i0, *j0), (b.nrows(), b.ncols()));
            v += b;
        }
        self.push(&m);
    }

    pub fn merge(&mut self, o: &MatAcc) {
        for (a, b) in self.re.iter_mut().zip(&o.re) {
            a.merge(b);
        }
        for (a, b) in self.im.iter_mut().zip(&o.im) {
            a.merge(b);
        }
    }

    pub fn count(&self) -> u64 {
        self.re.first().map_or(0, |a| a.n)
    }

    pub fn mean(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = i + j * self.rows;
            C64::new(self.re[k].mean(), self.im[k].mean())
        })
    }

    /// Standard errors, real parts in `.re`, imaginary parts in `.im`.
    pub fn stderr(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = i + j * self.rows;
            C64::new(self.re[k].stderr(), self.im[k].stderr())
        })
    }

    /// Entrywise [`ScalarAcc::stderr_bounded`].
    pub fn stderr_bounded(&self, bound: f64) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| {
            let k = i + j * self.rows;
            C64::new(self.re[k].stderr_bounded(bound), self.im[k].stderr_bounded(bound))
        })
    }
}

/// Ratio `E[Y]/E[W]` of a vector-valued numerator over a positive scalar
/// weight, with delta-method standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioAcc {
    pub n: u64,
    pub sw: f64,
    pub sww: f64,
    pub sy: Vec<C64>,
    pub syy_re: Vec<f64>,
    pub syy_im: Vec<f64>,
    pub syw: Vec<C64>,
}

impl RatioAcc {
    pub fn new(dim: usize) -> Self {
        RatioAcc {
            n: 0,
            sw: 0.0,
            sww: 0.0,
            sy: vec![C64::new(0.0, 0.0); dim],
            syy_re: vec![0.0; dim],
            syy_im: vec![0.0; dim],
            syw: vec![C64::new(0.0, 0.0); dim],
        }
    }

    pub fn push(&mut self, w: f64, y: &[C64]) {
        self.n += 1;
        self.sw += w;
        self.sww += w * w;
        for (k, z) in y.iter().enumerate() {
            self.sy[k] += z;
            self.syy_re[k] += z.re * z.re;
            self.syy_im[k] += z.im * z.im;
            self.syw[k] += z * w;
        }
    }

    pub fn merge(&mut self, o: &RatioAcc) {
        self.n += o.n;
        self.sw += o.sw;
        self.sww += o.sww;
        for k in 0..self.sy.len() {
            self.sy[k] += o.sy[k];
            self.syy_re[k] += o.syy_re[k];
            self.syy_im[k] += o.syy_im[k];
            self.syw[k] += o.syw[k];
        }
    }

    pub fn ratio(&self) -> Vec<C64> {
        self.sy.iter().map(|y| y / self.sw).collect()
    }

    pub fn weight(&self) -> ScalarAcc {
        ScalarAcc { n: self.n, sum: self.sw, sumsq: self.sww }
    }

    /// Delta-method standard errors of the real and imaginary parts.
    pub fn stderr(&self) -> Vec<C64> {
        let n = self.n as f64;
        let mw = self.sw / n;
        let vw = (self.sww / n - mw * mw).max(0.0);
        (0..self.sy.len())
            .map(|k| {
                let part = |sy: f64, syy: f64, syw: f64| {
                    let my = sy / n;
                    let vy = (syy / n - my * my).max(0.0);
                    let cyw = syw / n - my * mw;
                    let r = my / mw;
                    ((vy - 2.0 * r * cyw + r * r * vw).max(0.0) / (n * mw * mw)).sqrt()
                };
                C64::new(
                    part(self.sy[k].re, self.syy_re[k], self.syw[k].re),
                    part(self.sy[k].im, self.syy_im[k], self.syw[k].im),
                )
            })
            .collect()
    }
}

/// z-score of `est − target` given a standard error; entries whose error is
/// below `1e-12` with a numerically zero stderr are treated as exact.
pub fn z_score(est: f64, se: f64, target: f64) -> Option<f64> {
    let d = est - target;
    if se <= 1e-300 {
        if d.abs() <= 1e-12 {
            None
        } else {
            Some(f64::INFINITY * d.signum())
        }
    } else {
        Some(d / se)
    }
}

/// Per-entry z-scores (real and imaginary parts) of an MC matrix against a
/// reference, optionally itself uncertain.
pub fn matrix_z(mean: &CMat, se: &CMat, target: &CMat, target_se: Option<&CMat>) -> Vec<f64> {
    let mut zs = Vec::with_capacity(2 * mean.len());
    for k in 0..mean.len() {
        let (ts_re, ts_im) = target_se.map_or((0.0, 0.0), |t| (t[k].re, t[k].im));
        let se_re = (se[k].re.powi(2) + ts_re.powi(2)).sqrt();
        let se_im = (se[k].im.powi(2) + ts_im.powi(2)).sqrt();
        zs.extend(z_score(mean[k].re, se_re, target[k].re));
        zs.extend(z_score(mean[k].im, se_im, target[k].im));
    }
    zs
}

/// Summary of a family of z-scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZSummary {
    pub count: usize,
    pub max_abs: f64,
    pub over_3: usize,
}

impl ZSummary {
    pub fn new(zs: &[f64]) -> Self {
        ZSummary {
            count: zs.len(),
            max_abs: zs.iter().fold(0.0f64, |m, z| m.max(z.abs())),
            over_3: zs.iter().filter(|z| z.abs() > 3.0).count(),
        }
    }

    /// At most 5% of entries beyond 3σ and none beyond 5σ.
    pub fn passes_family(&self) -> bool {
        self.max_abs <= 5.0 && self.over_3 <= self.count / 20
    }

    pub fn passes_strict(&self) -> bool {
        self.max_abs <= 3.0
    }
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    (d, kolmogorov_q(lam))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lam: f64) -> f64 {
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lam * lam).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

//! Covariant Gaussian free fields: sampling, Wick moments, shifted squares,
//! split fields and finitely supported annealed mixtures.
//!
//! The field has density proportional to `exp(−(β/2)(φ, Δφ))` with respect
//! to Lebesgue measure on real or complex sections, so that in both modes
//! `E[Φ_x ⊗ Φ̄_y]` is the Green block `(G_{h,H})_{x,y}`.

use crate::bundle::{Bundle, Connection, GaugeTransform, Potential, ScalarField, Splitting};
use crate::calculus::LaplacianOperator;
use crate::graph::Graph;
use crate::linalg;
use crate::mc;
use crate::stats::{MatAcc, ScalarAcc};
use crate::{CMat, CVec, Error, Result, C64};
use rand::Rng;
use rand_distr::StandardNormal;

/// Draws `Φ = Aξ` with `AA* = Δ⁻¹Λ⁻¹`.
#[derive(Debug, Clone)]
pub struct GffSampler {
    factor: CMat,
    field: ScalarField,
}

impl GffSampler {
    pub fn new(g: &Graph, b: &Bundle, h: &Connection, pot: &Potential) -> Result<Self> {
        let op = LaplacianOperator::new(g, h, pot);
        op.check_positive()?;
        Ok(Self::from_covariance(&op.green()?, b.field))
    }

    pub fn from_covariance(cov: &CMat, field: ScalarField) -> Self {
        let mut factor = linalg::psd_factor(cov);
        if !field.is_complex() {
            factor.iter_mut().for_each(|z| z.im = 0.0);
        }
        GffSampler { factor, field }
    }

    /// Sampler for the gauge-transformed data `j·h, j·H`: the factor is
    /// `J A`, so equal noise yields `j·Φ`.
    pub fn gauged(&self, g: &Graph, j: &GaugeTransform) -> Self {
        GffSampler { factor: j.proper_block_diag(g) * &self.factor, field: self.field }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &CMat {
        &self.factor
    }

    /// Standard noise: real `N(0, 1)` or circular complex with `E|ξ|² = 1`.
    pub fn noise<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let n = self.dim();
        match self.field {
            ScalarField::Real => CVec::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), 0.0)),
            ScalarField::Complex => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                CVec::from_fn(n, |_, _| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    C64::new(s * re, s * im)
                })
            }
        }
    }

    pub fn apply(&self, xi: &CVec) -> CVec {
        &self.factor * xi
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let xi = self.noise(rng);
        self.apply(&xi)
    }
}

/// `n` field samples, reproducible for a given seed.
pub fn sample_gff(g: &Graph, b: &Bundle, h: &Connection, pot: &Potential, n: usize, seed: u64) -> Result<Vec<CVec>> {
    let sampler = GffSampler::new(g, b, h, pot)?;
    let out = mc::run_batches(seed, "gff", n, mc::Collect::default, |rng, count, acc| {
        acc.0.extend((0..count).map(|_| sampler.sample(rng)));
        Ok(())
    })?;
    Ok(out.0)
}

/// Empirical `E[Φ Φ*]` from a sampler.
pub fn covariance_mc(sampler: &GffSampler, n: usize, seed: u64, tag: &str) -> Result<MatAcc> {
    let d = sampler.dim();
    mc::run_batches(
        seed,
        tag,
        n,
        || MatAcc::new(d, d),
        |rng, count, acc| {
            for _ in 0..count {
                let phi = sampler.sample(rng);
                acc.push(&(&phi * phi.adjoint()));
            }
            Ok(())
        },
    )
}

/// `(f, Φ)_{Ω⁰} = Σ_x λ_x ⟨f_x, Φ_x⟩`.
pub fn pairing(g: &Graph, r: usize, f: &CVec, phi: &CVec) -> C64 {
    crate::calculus::inner(g, r, f, phi)
}

/// Exact `e^{(β/2)(f, Δ⁻¹f)}`.
pub fn laplace_exact(g: &Graph, b: &Bundle, op: &LaplacianOperator, f: &CVec) -> Result<f64> {
    let q = pairing(g, b.rank, f, &op.solve(f)?).re;
    Ok((0.5 * b.beta() * q).exp())
}

/// Monte Carlo `E|e^{(β/2)(f, Φ)}|²`.
pub fn laplace_mc(g: &Graph, b: &Bundle, sampler: &GffSampler, f: &CVec, n: usize, seed: u64) -> Result<ScalarAcc> {
    let c = 0.5 * b.beta();
    mc::run_batches(seed, "laplace", n, ScalarAcc::default, |rng, count, acc| {
        for _ in 0..count {
            let y = pairing(g, b.rank, f, &sampler.sample(rng));
            acc.push((2.0 * c * y.re).exp());
        }
        Ok(())
    })
}

/// `E[Π_i (f_i, Φ) · Π_j conj((f'_j, Φ))]` by Wick's rule.
///
/// In the real mode the antiholomorphic slots become holomorphic slots with
/// conjugated sections and the moment is a sum over pairings; in the complex
/// mode it is the permanent of `((f_i, Δ⁻¹ f'_j))` and vanishes unless the
/// slot counts agree.
pub fn wick_moment(g: &Graph, b: &Bundle, op: &LaplacianOperator, holo: &[CVec], anti: &[CVec]) -> Result<C64> {
    let r = b.rank;
    let pair = |f: &CVec, fp: &CVec| -> Result<C64> { Ok(pairing(g, r, f, &op.solve(fp)?)) };
    match b.field {
        ScalarField::Real => {
            let mut slots: Vec<CVec> = holo.to_vec();
            slots.extend(anti.iter().map(|f| f.map(|z| z.conj())));
            if slots.len() % 2 == 1 {
                return Ok(C64::new(0.0, 0.0));
            }
            let k = slots.len();
            let mut m = CMat::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    let conj_j = slots[j].map(|z| z.conj());
                    m[(i, j)] = pair(&slots[i], &conj_j)?;
                }
            }
            Ok(pairings_sum(&m))
        }
        ScalarField::Complex => {
            if holo.len() != anti.len() {
                return Ok(C64::new(0.0, 0.0));
            }
            let k = holo.len();
            let mut m = CMat::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    m[(i, j)] = pair(&holo[i], &anti[j])?;
                }
            }
            Ok(permanent(&m))
        }
    }
}

/// `Σ` over perfect matchings of `Π m[a, b]`.
pub fn pairings_sum(m: &CMat) -> C64 {
    fn rec(m: &CMat, free: &mut Vec<usize>) -> C64 {
        if free.is_empty() {
            return C64::new(1.0, 0.0);
        }
        let a = free.remove(0);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..free.len() {
            let b = free.remove(k);
            acc += m[(a, b)] * rec(m, free);
            free.insert(k, b);
        }
        free.insert(0, a);
        acc
    }
    let mut free: Vec<usize> = (0..m.nrows()).collect();
    rec(m, &mut free)
}

/// Permanent by Ryser's formula.
pub fn permanent(m: &CMat) -> C64 {
    let n = m.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for set in 1u32..(1 << n) {
        let mut prod = C64::new(1.0, 0.0);
        for i in 0..n {
            let row: C64 = (0..n).filter(|j| set & (1 << j) != 0).map(|j| m[(i, j)]).sum();
            prod *= row;
        }
        let sign = if (n as u32 - set.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

/// Both sides of the shifted-square identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedSquare {
    /// `(det Δ_h / det Δ_{h,H})^{β/2}`.
    pub det_ratio: f64,
    /// `(f, Hf) − (Hf, Δ_{h,H}⁻¹ H f)`.
    pub quadratic: f64,
    /// `det_ratio · e^{−(β/2) quadratic}`.
    pub value: f64,
}

/// Exact `E^h[e^{−(β/2)(Φ + f, H(Φ + f))}]` through the determinant ratio and
/// the completed square.
pub fn shifted_square_exact(g: &Graph, b: &Bundle, h: &Connection, pot: &Potential, f: &CVec) -> Result<ShiftedSquare> {
    let r = b.rank;
    let op0 = LaplacianOperator::new(g, h, &Potential::zero(g, b));
    let op = LaplacianOperator::new(g, h, pot);
    let det_ratio = (0.5 * b.beta() * (op0.logdet()? - op.logdet()?)).exp();
    let hf = pot.block_diag() * f;
    let quadratic = pairing(g, r, f, &hf).re - pairing(g, r, &hf, &op.solve(&hf)?).re;
    Ok(ShiftedSquare { det_ratio, quadratic, value: det_ratio * (-0.5 * b.beta() * quadratic).exp() })
}

/// Monte Carlo `E^h[e^{−(β/2)(Φ + f, H(Φ + f))}]`.
pub fn shifted_square_mc(
    g: &Graph,
    b: &Bundle,
    h: &Connection,
    pot: &Potential,
    f: &CVec,
    n: usize,
    seed: u64,
) -> Result<ScalarAcc> {
    let sampler = GffSampler::new(g, b, h, &Potential::zero(g, b))?;
    let hm = pot.block_diag();
    let c = 0.5 * b.beta();
    mc::run_batches(seed, "shifted-square", n, ScalarAcc::default, |rng, count, acc| {
        for _ in 0..count {
            let v = sampler.sample(rng) + f;
            acc.push((-c * pairing(g, b.rank, &v, &(&hm * &v)).re).exp());
        }
        Ok(())
    })
}

/// Colour components `π_x^i Φ_x` and their squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitField {
    pub components: Vec<Vec<CVec>>,
    pub norms: Vec<Vec<f64>>,
}

pub fn split_field(s: &Splitting, r: usize, phi: &CVec) -> SplitField {
    let mut components = Vec::with_capacity(s.n_vertices());
    let mut norms = Vec::with_capacity(s.n_vertices());
    for x in 0..s.n_vertices() {
        let fx = linalg::block(phi, x, r);
        let comps: Vec<CVec> = (0..s.n_colours(x)).map(|i| s.proj(x, i) * &fx).collect();
        norms.push(comps.iter().map(|c| c.norm_squared()).collect());
        components.push(comps);
    }
    SplitField { components, norms }
}

impl SplitField {
    /// Norms flattened over colour states.
    pub fn flat_norms(&self) -> Vec<f64> {
        self.norms.iter().flatten().copied().collect()
    }
}

/// A finitely supported probability measure on connections and potentials.
#[derive(Debug, Clone)]
pub struct AnnealedSpec {
    pub components: Vec<(Connection, Potential, f64)>,
}

impl AnnealedSpec {
    pub fn new(components: Vec<(Connection, Potential, f64)>) -> Result<Self> {
        if components.is_empty() || components.iter().any(|c| c.2 <= 0.0) {
            return Err(Error::InvalidArgument("annealing weights must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.2).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("annealing weights sum to {total}")));
        }
        Ok(AnnealedSpec { components })
    }

    pub fn singleton(h: Connection, pot: Potential) -> Self {
        AnnealedSpec { components: vec![(h, pot, 1.0)] }
    }
}

/// Annealed moment and the normalized partition weights `Z_j / Z^P`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedMoment {
    pub value: C64,
    pub weights: Vec<f64>,
}

/// `(1/Z^P) Σ_j p_j Z_j · wick_j` with `Z_j ∝ det Δ_j^{−β/2}`.
pub fn annealed_moments(
    g: &Graph,
    b: &Bundle,
    spec: &AnnealedSpec,
    holo: &[CVec],
    anti: &[CVec],
) -> Result<AnnealedMoment> {
    let mut log_z = Vec::with_capacity(spec.components.len());
    let mut wicks = Vec::with_capacity(spec.components.len());
    for (h, pot, _) in &spec.components {
        let op = LaplacianOperator::new(g, h, pot);
        log_z.push(-0.5 * b.beta() * op.logdet()?);
        wicks.push(wick_moment(g, b, &op, holo, anti)?);
    }
    let ps: Vec<f64> = spec.components.iter().map(|c| c.2).collect();
    let weights = normalized_weights(&ps, &log_z);
    let value = weights.iter().zip(&ps).zip(&wicks).map(|((w, p), m)| m * (w * p)).sum();
    Ok(AnnealedMoment { value, weights })
}

/// `Z_j / Σ_k p_k Z_k` from `log Z_j`, by log-sum-exp.
pub fn normalized_weights(p: &[f64], log_z: &[f64]) -> Vec<f64> {
    let m = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = p.iter().zip(log_z).map(|(p, l)| p * (l - m).exp()).sum();
    log_z.iter().map(|l| (l - m).exp() / denom).collect()
}

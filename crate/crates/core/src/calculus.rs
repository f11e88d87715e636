//! Differentials, covariant Laplacians, Green sections and heat operators.
//!
//! Operators act on sections over the proper vertices in standard
//! coordinates. `ΛΔ` is Hermitian, so all spectral work goes through the
//! Hermitian matrix `S = Λ^{1/2} Δ Λ^{-1/2}`, whose eigenvalues are those of
//! `Δ` for the λ-weighted product.

use crate::bundle::{Connection, Potential};
use crate::graph::Graph;
use crate::linalg::{self, HermEig};
use crate::{CMat, CVec, Error, Result, C64};
use std::sync::OnceLock;

/// Condition number beyond which an operator counts as singular.
pub const SINGULAR_COND: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Supported on proper vertices, zero on the well.
    Proper,
    /// Defined on every vertex.
    Full,
}

/// A section tagged with its support; the only way from `Full` to `Proper`
/// is [`Section::project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub support: Support,
    pub data: CVec,
}

impl Section {
    pub fn proper(data: CVec) -> Self {
        Section { support: Support::Proper, data }
    }

    pub fn full(data: CVec) -> Self {
        Section { support: Support::Full, data }
    }

    /// Extension by zero to the whole graph.
    pub fn extend(&self, g: &Graph, r: usize) -> Section {
        match self.support {
            Support::Full => self.clone(),
            Support::Proper => {
                let mut out = CVec::zeros(r * g.n_vertices());
                for k in 0..g.n_proper() {
                    linalg::set_block(&mut out, g.proper_vertex(k), r, &linalg::block(&self.data, k, r));
                }
                Section::full(out)
            }
        }
    }

    /// Restriction to the proper vertices.
    pub fn project(&self, g: &Graph, r: usize) -> Section {
        match self.support {
            Support::Proper => self.clone(),
            Support::Full => {
                let mut out = CVec::zeros(r * g.n_proper());
                for k in 0..g.n_proper() {
                    linalg::set_block(&mut out, k, r, &linalg::block(&self.data, g.proper_vertex(k), r));
                }
                Section::proper(out)
            }
        }
    }
}

/// A 1-form stored in source-fibre coordinates: `ω̃(e⁻¹) = -hol_e ω̃(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub values: Vec<CVec>,
}

impl OneForm {
    /// Largest violation of the antisymmetry relation.
    pub fn antisymmetry_defect(&self, g: &Graph, h: &Connection) -> f64 {
        g.edges()
            .iter()
            .enumerate()
            .filter_map(|(e, ed)| ed.inv.map(|j| linalg::vnorm(&(&self.values[j] + h.hol(e) * &self.values[e]))))
            .fold(0.0, f64::max)
    }

    /// Antisymmetrises arbitrary per-edge data.
    pub fn antisymmetrize(g: &Graph, h: &Connection, raw: Vec<CVec>) -> OneForm {
        let mut values = raw.clone();
        for (e, ed) in g.edges().iter().enumerate() {
            if let Some(j) = ed.inv {
                if e < j {
                    let v = (&raw[e] - h.hol(j) * &raw[j]).scale(0.5);
                    values[j] = -(h.hol(e) * &v);
                    values[e] = v;
                }
            }
        }
        OneForm { values }
    }
}

/// `(df)(e) = hol_e⁻¹ f(ē) − f(e̲)` for a section on the whole graph.
pub fn differential(g: &Graph, h: &Connection, f: &Section) -> Result<OneForm> {
    if f.support != Support::Full {
        return Err(Error::InvalidArgument("differential needs a full section".into()));
    }
    let r = h.rank();
    let values = g
        .edges()
        .iter()
        .enumerate()
        .map(|(e, ed)| h.hol(e).adjoint() * linalg::block(&f.data, ed.dst, r) - linalg::block(&f.data, ed.src, r))
        .collect();
    Ok(OneForm { values })
}

/// `d*ω(x) = λ_x⁻¹ [Σ_{ē=x} s_e χ_e hol_e ω̃(e) − Σ_{e̲=x} s_e χ_e ω̃(e)]` on every
/// vertex.
pub fn codifferential(g: &Graph, h: &Connection, w: &OneForm) -> Section {
    let r = h.rank();
    let mut out = CVec::zeros(r * g.n_vertices());
    for (e, ed) in g.edges().iter().enumerate() {
        let c = g.symmetry(e) * ed.chi;
        let into = (h.hol(e) * &w.values[e]).scale(c);
        let outof = w.values[e].scale(c);
        out.rows_mut(ed.dst * r, r).add_assign(&into);
        out.rows_mut(ed.src * r, r).sub_assign(&outof);
    }
    for v in 0..g.n_vertices() {
        let l = g.lambda(v);
        out.rows_mut(v * r, r).unscale_mut(l);
    }
    Section::full(out)
}

trait AddSub {
    fn add_assign(&mut self, v: &CVec);
    fn sub_assign(&mut self, v: &CVec);
}

impl AddSub for nalgebra::DVectorViewMut<'_, C64> {
    fn add_assign(&mut self, v: &CVec) {
        for (a, b) in self.iter_mut().zip(v.iter()) {
            *a += b;
        }
    }
    fn sub_assign(&mut self, v: &CVec) {
        for (a, b) in self.iter_mut().zip(v.iter()) {
            *a -= b;
        }
    }
}

/// `Σ_e s_e χ_e ⟨ω₁(e), ω₂(e)⟩`.
pub fn one_form_inner(g: &Graph, a: &OneForm, b: &OneForm) -> C64 {
    (0..g.n_edges()).map(|e| linalg::dot(&a.values[e], &b.values[e]) * (g.symmetry(e) * g.edge(e).chi)).sum()
}

/// `Σ_x λ_x ⟨f(x), g(x)⟩` over the proper vertices.
pub fn inner(g: &Graph, r: usize, a: &CVec, b: &CVec) -> C64 {
    (0..g.n_proper())
        .map(|k| linalg::dot(&linalg::block(a, k, r), &linalg::block(b, k, r)) * g.lambda(g.proper_vertex(k)))
        .sum()
}

/// The same product over every vertex of the graph.
pub fn inner_full(g: &Graph, r: usize, a: &CVec, b: &CVec) -> C64 {
    (0..g.n_vertices()).map(|v| linalg::dot(&linalg::block(a, v, r), &linalg::block(b, v, r)) * g.lambda(v)).sum()
}

/// `Δ_{h,H}` in standard coordinates with a lazily computed spectrum.
#[derive(Debug)]
pub struct LaplacianOperator {
    mat: CMat,
    sqrt_lambda: Vec<f64>,
    rank: usize,
    spectrum: OnceLock<HermEig>,
}

impl Clone for LaplacianOperator {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        LaplacianOperator { mat: self.mat.clone(), sqrt_lambda: self.sqrt_lambda.clone(), rank: self.rank, spectrum }
    }
}

impl LaplacianOperator {
    pub fn new(g: &Graph, h: &Connection, pot: &Potential) -> Self {
        let r = h.rank();
        let n = g.n_proper();
        let mut mat = linalg::identity(n * r) + pot.block_diag();
        for (e, ed) in g.edges().iter().enumerate() {
            if let (Some(x), Some(y)) = (g.pindex(ed.src), g.pindex(ed.dst)) {
                let p = ed.chi / g.lambda(ed.src);
                let blk = h.hol(e).adjoint().scale(p);
                let mut v = mat.view_mut((x * r, y * r), (r, r));
                v -= blk;
            }
        }
        let sqrt_lambda = g.lambda_proper().iter().map(|l| l.sqrt()).collect();
        LaplacianOperator { mat, sqrt_lambda, rank: r, spectrum: OnceLock::new() }
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    fn sl(&self, i: usize) -> f64 {
        self.sqrt_lambda[i / self.rank]
    }

    /// `ΛΔ`.
    pub fn lambda_weighted(&self) -> CMat {
        CMat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * self.sl(i) * self.sl(i))
    }

    /// `Λ^{1/2} Δ Λ^{-1/2}`, Hermitian.
    pub fn symmetrized(&self) -> CMat {
        let s = CMat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * (self.sl(i) / self.sl(j)));
        (s.clone() + s.adjoint()).scale(0.5)
    }

    pub fn spectrum(&self) -> &HermEig {
        self.spectrum.get_or_init(|| HermEig::new(&self.symmetrized()))
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.spectrum().min()
    }

    pub fn condition(&self) -> f64 {
        let s = self.spectrum();
        let amax = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let amin = s.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if amin == 0.0 {
            f64::INFINITY
        } else {
            amax / amin
        }
    }

    pub fn check_invertible(&self) -> Result<()> {
        let c = self.condition();
        if c > SINGULAR_COND || !c.is_finite() {
            return Err(Error::SingularOperator(c));
        }
        Ok(())
    }

    pub fn check_positive(&self) -> Result<()> {
        self.check_invertible()?;
        if self.smallest_eigenvalue() <= 0.0 {
            return Err(Error::SingularOperator(self.condition()));
        }
        Ok(())
    }

    /// `f(Δ) = Λ^{-1/2} U f(μ) U* Λ^{1/2}`.
    pub fn func<F: Fn(f64) -> C64>(&self, f: F) -> CMat {
        let m = self.spectrum().map(f);
        CMat::from_fn(self.dim(), self.dim(), |i, j| m[(i, j)] * (self.sl(j) / self.sl(i)))
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.check_invertible()?;
        Ok(self.func(|m| C64::new(1.0 / m, 0.0)))
    }

    /// Green section `(ΛΔ)⁻¹ = Δ⁻¹Λ⁻¹`, Hermitian.
    pub fn green(&self) -> Result<CMat> {
        self.check_invertible()?;
        let m = self.spectrum().map_real(|m| 1.0 / m);
        let gm = CMat::from_fn(self.dim(), self.dim(), |i, j| m[(i, j)] / (self.sl(i) * self.sl(j)));
        Ok((gm.clone() + gm.adjoint()).scale(0.5))
    }

    pub fn heat(&self, t: f64) -> CMat {
        if t == 0.0 {
            return linalg::identity(self.dim());
        }
        self.func(|m| C64::new((-t * m).exp(), 0.0))
    }

    /// Principal logarithm; needs a positive spectrum.
    pub fn log(&self) -> Result<CMat> {
        self.check_positive()?;
        Ok(self.func(|m| C64::new(m.ln(), 0.0)))
    }

    pub fn logdet(&self) -> Result<f64> {
        self.check_positive()?;
        Ok(self.spectrum().values.iter().map(|m| m.ln()).sum())
    }

    pub fn apply(&self, f: &CVec) -> CVec {
        &self.mat * f
    }

    pub fn solve(&self, f: &CVec) -> Result<CVec> {
        Ok(self.inverse()? * f)
    }
}

pub fn laplacian(g: &Graph, h: &Connection, pot: &Potential) -> LaplacianOperator {
    LaplacianOperator::new(g, h, pot)
}

pub fn green_section(g: &Graph, h: &Connection, pot: &Potential) -> Result<CMat> {
    laplacian(g, h, pot).green()
}

pub fn heat_operator(g: &Graph, h: &Connection, pot: &Potential, t: f64) -> Result<CMat> {
    if t < 0.0 {
        return Err(Error::InvalidArgument("t < 0".into()));
    }
    Ok(laplacian(g, h, pot).heat(t))
}

/// `σ_h = min Spec Δ_h`.
pub fn smallest_eigenvalue(g: &Graph, h: &Connection) -> f64 {
    let b = crate::bundle::Bundle::complex(h.rank());
    laplacian(g, h, &Potential::zero(g, &b)).smallest_eigenvalue()
}

pub fn logdet(g: &Graph, h: &Connection, pot: &Potential) -> Result<f64> {
    laplacian(g, h, pot).logdet()
}

/// Dirichlet energy `(f, Δ_{h,H} f)` of a proper section.
pub fn dirichlet_energy(g: &Graph, h: &Connection, pot: &Potential, f: &CVec) -> f64 {
    let op = laplacian(g, h, pot);
    inner(g, h.rank(), f, &op.apply(f)).re
}

/// The same energy as an explicit edge sum plus the potential term.
pub fn dirichlet_energy_edges(g: &Graph, h: &Connection, pot: &Potential, f: &CVec) -> f64 {
    let r = h.rank();
    let full = Section::proper(f.clone()).extend(g, r);
    let df = differential(g, h, &full).expect("full section");
    let edge_part: f64 = (0..g.n_edges())
        .map(|e| g.symmetry(e) * g.edge(e).chi * df.values[e].iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    let pot_part: f64 = (0..g.n_proper())
        .map(|k| {
            let b = linalg::block(f, k, r);
            g.lambda(g.proper_vertex(k)) * linalg::dot(&b, &(pot.h(k) * &b)).re
        })
        .sum();
    edge_part + pot_part
}

/// Rim section `b(x) = Σ_{e̲=x, ē∈W} P_{x,e} hol_e⁻¹ w(ē)` of well data `w`
/// (a full section, only read on the well).
pub fn rim_section(g: &Graph, h: &Connection, w: &Section) -> CVec {
    let r = h.rank();
    let mut b = CVec::zeros(r * g.n_proper());
    for (e, ed) in g.edges().iter().enumerate() {
        if g.is_well(ed.dst) {
            let x = g.pindex(ed.src).expect("edges leave proper vertices");
            let p = ed.chi / g.lambda(ed.src);
            let v = h.hol(e).adjoint() * linalg::block(&w.data, ed.dst, r);
            let cur = linalg::block(&b, x, r);
            linalg::set_block(&mut b, x, r, &(cur + v.scale(p)));
        }
    }
    b
}

/// Harmonic extension of well data: `f|_W = w` and `(d*d + H) f = 0` on `V`.
pub fn dirichlet_solve(g: &Graph, h: &Connection, pot: &Potential, w: &Section) -> Result<Section> {
    if w.support != Support::Full {
        return Err(Error::InvalidArgument("well data must be a full section".into()));
    }
    let r = h.rank();
    let op = laplacian(g, h, pot);
    let inside = op.solve(&rim_section(g, h, w))?;
    let mut out = w.data.clone();
    for k in 0..g.n_proper() {
        linalg::set_block(&mut out, g.proper_vertex(k), r, &linalg::block(&inside, k, r));
    }
    Ok(Section::full(out))
}

/// Largest fibre norm of `(d*d f + H f)` over proper vertices.
pub fn dirichlet_residual(g: &Graph, h: &Connection, pot: &Potential, f: &Section) -> Result<f64> {
    let r = h.rank();
    let ddf = codifferential(g, h, &differential(g, h, f)?);
    let mut worst: f64 = 0.0;
    for k in 0..g.n_proper() {
        let v = g.proper_vertex(k);
        let res = linalg::block(&ddf.data, v, r) + pot.h(k) * linalg::block(&f.data, v, r);
        worst = worst.max(linalg::vnorm(&res));
    }
    Ok(worst)
}

/// `∫_0^∞ e^{-tΔ} dt` by Gauss–Legendre on a logarithmic grid up to
/// `T = 40/σ`, with the discarded tail bounded by `e^{-40}`.
pub fn integrated_heat(op: &LaplacianOperator) -> CMat {
    let sigma = op.smallest_eigenvalue();
    let t_max = 40.0 / sigma;
    let (nodes, weights) = crate::stats::gauss_legendre(16);
    let lo = (1e-8f64).ln();
    let hi = t_max.ln();
    let panels = 160;
    let h = (hi - lo) / panels as f64;
    let mut acc = CMat::zeros(op.dim(), op.dim());
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (x, w) in nodes.iter().zip(&weights) {
            let u = a + 0.5 * h * (x + 1.0);
            let t = u.exp();
            acc += op.heat(t).scale(0.5 * h * w * t);
        }
    }
    // [0, 1e-8] contributes ≈ 1e-8·Id.
    acc + linalg::identity(op.dim()).scale(1e-8)
}

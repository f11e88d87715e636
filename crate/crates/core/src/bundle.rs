//! Fibres, connections, potentials, splittings and gauge transformations.
//!
//! Edge fibres are identified with the fibre at the source vertex, so a
//! connection is one unitary `hol_e : F_src → F_dst` per oriented edge with
//! `hol_{e⁻¹} = hol_e⁻¹`.

use crate::graph::Graph;
use crate::linalg::{self, HermEig};
use crate::paths::{ColouredPath, ContinuousPath};
use crate::{CMat, CVec, Error, Result, C64};
use rand::Rng;
use serde::{Deserialize, Serialize};

const UNITARY_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-12;
const EIGEN_GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarField {
    Real,
    Complex,
}

impl ScalarField {
    pub fn beta(self) -> f64 {
        match self {
            ScalarField::Real => 1.0,
            ScalarField::Complex => 2.0,
        }
    }

    pub fn is_complex(self) -> bool {
        self == ScalarField::Complex
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bundle {
    pub rank: usize,
    pub field: ScalarField,
}

impl Bundle {
    pub fn new(rank: usize, field: ScalarField) -> Result<Bundle> {
        if rank == 0 {
            return Err(Error::InvalidArgument("rank".into()));
        }
        Ok(Bundle { rank, field })
    }

    pub fn real(rank: usize) -> Bundle {
        Bundle { rank, field: ScalarField::Real }
    }

    pub fn complex(rank: usize) -> Bundle {
        Bundle { rank, field: ScalarField::Complex }
    }

    pub fn beta(&self) -> f64 {
        self.field.beta()
    }

    fn check_real(&self, m: &CMat, what: &str) -> Result<()> {
        if !self.field.is_complex() && linalg::max_imag(m) > 0.0 {
            return Err(Error::NotReal(what.into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Connection {
    hol: Vec<CMat>,
}

impl Connection {
    /// Validates unitarity, realness and inverse pairing of per-edge matrices.
    pub fn new(g: &Graph, b: &Bundle, hol: Vec<CMat>) -> Result<Connection> {
        if hol.len() != g.n_edges() {
            return Err(Error::ShapeMismatch(format!("connection has {} edges", hol.len())));
        }
        for (e, m) in hol.iter().enumerate() {
            let id = &g.edge(e).id;
            if m.nrows() != b.rank || m.ncols() != b.rank {
                return Err(Error::ShapeMismatch(id.clone()));
            }
            b.check_real(m, id)?;
            if linalg::unitarity_defect(m) > UNITARY_TOL {
                return Err(Error::ConnectionNotUnitary(id.clone()));
            }
            if let Some(j) = g.edge(e).inv {
                if linalg::frob(&(&hol[j] - m.adjoint())) > UNITARY_TOL {
                    return Err(Error::ConnectionNotUnitary(id.clone()));
                }
            }
        }
        Ok(Connection { hol })
    }

    /// Builds a connection from one matrix per geometric edge; inverse edges
    /// receive the adjoint.
    pub fn from_geometric<F: FnMut(usize) -> CMat>(g: &Graph, b: &Bundle, mut f: F) -> Result<Connection> {
        let mut hol = vec![CMat::zeros(0, 0); g.n_edges()];
        for e in g.geometric_edges() {
            let m = f(e);
            if let Some(j) = g.edge(e).inv {
                hol[j] = m.adjoint();
            }
            hol[e] = m;
        }
        Connection::new(g, b, hol)
    }

    pub fn trivial(g: &Graph, b: &Bundle) -> Connection {
        Connection { hol: vec![linalg::identity(b.rank); g.n_edges()] }
    }

    /// Independent Haar unitaries on geometric edges.
    pub fn random<R: Rng + ?Sized>(g: &Graph, b: &Bundle, rng: &mut R) -> Connection {
        let complex = b.field.is_complex();
        Connection::from_geometric(g, b, |_| linalg::haar_unitary(b.rank, complex, rng))
            .expect("Haar samples are unitary")
    }

    pub fn hol(&self, e: usize) -> &CMat {
        &self.hol[e]
    }

    pub fn all(&self) -> &[CMat] {
        &self.hol
    }

    pub fn rank(&self) -> usize {
        self.hol.first().map_or(0, |m| m.nrows())
    }
}

/// Hermitian endomorphism per proper vertex, zero on the well.
#[derive(Debug, Clone)]
pub struct Potential {
    h: Vec<CMat>,
    eig: Vec<HermEig>,
}

impl Potential {
    pub fn new(g: &Graph, b: &Bundle, h: Vec<CMat>) -> Result<Potential> {
        if h.len() != g.n_proper() {
            return Err(Error::ShapeMismatch(format!("potential has {} vertices", h.len())));
        }
        for (k, m) in h.iter().enumerate() {
            let id = g.vertex_id(g.proper_vertex(k));
            if m.nrows() != b.rank || m.ncols() != b.rank {
                return Err(Error::ShapeMismatch(id.into()));
            }
            b.check_real(m, id)?;
            if linalg::hermiticity_defect(m) > HERMITIAN_TOL {
                return Err(Error::PotentialNotHermitian(id.into()));
            }
        }
        let h: Vec<CMat> = h.into_iter().map(|m| (m.clone() + m.adjoint()).scale(0.5)).collect();
        let eig = h.iter().map(HermEig::new).collect();
        Ok(Potential { h, eig })
    }

    pub fn zero(g: &Graph, b: &Bundle) -> Potential {
        Potential::new(g, b, vec![CMat::zeros(b.rank, b.rank); g.n_proper()]).expect("zero is Hermitian")
    }

    /// `H_x = c_x Id`.
    pub fn scalar(g: &Graph, b: &Bundle, c: &[f64]) -> Result<Potential> {
        Potential::new(g, b, c.iter().map(|&v| linalg::identity(b.rank).scale(v)).collect())
    }

    pub fn random<R: Rng + ?Sized>(g: &Graph, b: &Bundle, lo: f64, hi: f64, rng: &mut R) -> Potential {
        let complex = b.field.is_complex();
        let h = (0..g.n_proper()).map(|_| linalg::random_hermitian(b.rank, complex, lo, hi, rng)).collect();
        Potential::new(g, b, h).expect("random Hermitian")
    }

    pub fn h(&self, x: usize) -> &CMat {
        &self.h[x]
    }

    pub fn all(&self) -> &[CMat] {
        &self.h
    }

    pub fn eig(&self, x: usize) -> &HermEig {
        &self.eig[x]
    }

    pub fn is_zero_at(&self, x: usize) -> bool {
        self.h[x].iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        (0..self.h.len()).all(|x| self.is_zero_at(x))
    }

    /// `e^{-τ H_x}`.
    pub fn decay(&self, x: usize, tau: f64) -> CMat {
        self.eig[x].map_real(|m| (-tau * m).exp())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig.iter().map(HermEig::min).fold(f64::INFINITY, f64::min)
    }

    /// `H + c`, the same potential shifted by a scalar.
    pub fn shifted(&self, g: &Graph, b: &Bundle, c: f64) -> Potential {
        let h = self.h.iter().map(|m| m + linalg::identity(b.rank).scale(c)).collect();
        Potential::new(g, b, h).expect("shift keeps Hermiticity")
    }

    /// Block-diagonal `blockdiag(H_x)` in standard coordinates.
    pub fn block_diag(&self) -> CMat {
        linalg::block_diag(&self.h)
    }
}

/// Orthogonal decomposition of every proper fibre into coloured subspaces.
#[derive(Debug, Clone)]
pub struct Splitting {
    proj: Vec<Vec<CMat>>,
}

impl Splitting {
    pub fn new(g: &Graph, b: &Bundle, proj: Vec<Vec<CMat>>) -> Result<Splitting> {
        if proj.len() != g.n_proper() {
            return Err(Error::ShapeMismatch(format!("splitting has {} vertices", proj.len())));
        }
        let r = b.rank;
        for (k, ps) in proj.iter().enumerate() {
            let id = g.vertex_id(g.proper_vertex(k)).to_string();
            let mut sum = CMat::zeros(r, r);
            for (i, p) in ps.iter().enumerate() {
                if p.nrows() != r || p.ncols() != r {
                    return Err(Error::ShapeMismatch(id.clone()));
                }
                b.check_real(p, &id)?;
                let idem = linalg::frob(&(p * p - p));
                let herm = linalg::hermiticity_defect(p);
                let rank = p.trace().re.round();
                if idem > PROJECTOR_TOL || herm > PROJECTOR_TOL || rank < 1.0 {
                    return Err(Error::BadSplitting(id.clone()));
                }
                for q in &ps[..i] {
                    if linalg::frob(&(q * p)) > PROJECTOR_TOL {
                        return Err(Error::BadSplitting(id.clone()));
                    }
                }
                sum += p;
            }
            if linalg::frob(&(sum - linalg::identity(r))) > PROJECTOR_TOL {
                return Err(Error::BadSplitting(id));
            }
        }
        Ok(Splitting { proj })
    }

    pub fn trivial(g: &Graph, b: &Bundle) -> Splitting {
        Splitting { proj: vec![vec![linalg::identity(b.rank)]; g.n_proper()] }
    }

    /// Complete splitting into the lines spanned by the columns of `bases[x]`.
    pub fn complete(g: &Graph, b: &Bundle, bases: &[CMat]) -> Result<Splitting> {
        let proj = bases
            .iter()
            .map(|u| {
                (0..b.rank)
                    .map(|i| {
                        let col = u.column(i).into_owned();
                        &col * col.adjoint()
                    })
                    .collect()
            })
            .collect();
        Splitting::new(g, b, proj)
    }

    pub fn n_colours(&self, x: usize) -> usize {
        self.proj[x].len()
    }

    pub fn proj(&self, x: usize, i: usize) -> &CMat {
        &self.proj[x][i]
    }

    pub fn rank(&self, x: usize, i: usize) -> usize {
        self.proj[x][i].trace().re.round() as usize
    }

    pub fn n_vertices(&self) -> usize {
        self.proj.len()
    }

    /// Offsets of the flattened `(x, i)` colour states.
    pub fn state_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.proj.len() + 1);
        let mut acc = 0;
        off.push(0);
        for ps in &self.proj {
            acc += ps.len();
            off.push(acc);
        }
        off
    }

    pub fn max_colours(&self) -> usize {
        self.proj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Potential `H_x = Σ_i a[x][i] π_x^i`, adapted to this splitting.
    pub fn adapted_potential(&self, g: &Graph, b: &Bundle, a: &[Vec<f64>]) -> Result<Potential> {
        let h = self
            .proj
            .iter()
            .zip(a)
            .map(|(ps, vals)| {
                let mut m = CMat::zeros(b.rank, b.rank);
                for (p, &v) in ps.iter().zip(vals) {
                    m += p.scale(v);
                }
                m
            })
            .collect();
        Potential::new(g, b, h)
    }

    /// Colour eigenvalues `H_x^i` when `H` is adapted to the splitting.
    pub fn adapted_values(&self, pot: &Potential) -> Option<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.proj.len());
        for (x, ps) in self.proj.iter().enumerate() {
            let h = pot.h(x);
            let mut vals = Vec::with_capacity(ps.len());
            let mut recon = CMat::zeros(h.nrows(), h.ncols());
            for p in ps {
                let a = (p * h).trace().re / p.trace().re;
                recon += p.scale(a);
                vals.push(a);
            }
            if linalg::frob(&(recon - h)) > 1e-9 {
                return None;
            }
            out.push(vals);
        }
        Some(out)
    }

    /// Whether every subspace of `self` lies inside a subspace of `coarser`.
    pub fn refines(&self, coarser: &Splitting) -> bool {
        self.coarsening_map(coarser).is_some()
    }

    /// For each vertex, the colour of `coarser` containing each colour of
    /// `self`.
    pub fn coarsening_map(&self, coarser: &Splitting) -> Option<Vec<Vec<usize>>> {
        if self.proj.len() != coarser.proj.len() {
            return None;
        }
        self.proj
            .iter()
            .zip(&coarser.proj)
            .map(|(fine, coarse)| {
                fine.iter()
                    .map(|p| coarse.iter().position(|q| linalg::frob(&(q * p - p)) < 1e-9))
                    .collect::<Option<Vec<usize>>>()
            })
            .collect()
    }
}

/// Eigenspace projectors of each `H_x`, eigenvalues grouped within 1e-9.
pub fn eigensplitting(pot: &Potential) -> Splitting {
    let proj = (0..pot.all().len())
        .map(|x| {
            let e = pot.eig(x);
            let r = e.values.len();
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for i in 0..r {
                match groups.last_mut() {
                    Some(gr) if (e.values[i] - e.values[gr[gr.len() - 1]]).abs() <= EIGEN_GROUP_TOL => gr.push(i),
                    _ => groups.push(vec![i]),
                }
            }
            groups
                .iter()
                .map(|gr| {
                    let mut p = CMat::zeros(r, r);
                    for &i in gr {
                        let v = e.vectors.column(i).into_owned();
                        p += &v * v.adjoint();
                    }
                    p
                })
                .collect()
        })
        .collect();
    Splitting { proj }
}

/// Per-vertex unitary change of frame.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    j: Vec<CMat>,
}

impl GaugeTransform {
    pub fn new(g: &Graph, b: &Bundle, j: Vec<CMat>) -> Result<GaugeTransform> {
        if j.len() != g.n_vertices() {
            return Err(Error::ShapeMismatch("gauge".into()));
        }
        for (v, m) in j.iter().enumerate() {
            b.check_real(m, g.vertex_id(v))?;
            if linalg::unitarity_defect(m) > UNITARY_TOL {
                return Err(Error::ConnectionNotUnitary(g.vertex_id(v).into()));
            }
        }
        Ok(GaugeTransform { j })
    }

    pub fn identity(g: &Graph, b: &Bundle) -> GaugeTransform {
        GaugeTransform { j: vec![linalg::identity(b.rank); g.n_vertices()] }
    }

    pub fn random<R: Rng + ?Sized>(g: &Graph, b: &Bundle, rng: &mut R) -> GaugeTransform {
        let complex = b.field.is_complex();
        GaugeTransform { j: (0..g.n_vertices()).map(|_| linalg::haar_unitary(b.rank, complex, rng)).collect() }
    }

    pub fn at(&self, v: usize) -> &CMat {
        &self.j[v]
    }

    /// `blockdiag(j_x)` over proper vertices.
    pub fn proper_block_diag(&self, g: &Graph) -> CMat {
        let blocks: Vec<CMat> = (0..g.n_proper()).map(|k| self.j[g.proper_vertex(k)].clone()).collect();
        linalg::block_diag(&blocks)
    }

    pub fn connection(&self, g: &Graph, h: &Connection) -> Connection {
        let hol =
            g.edges().iter().enumerate().map(|(e, ed)| &self.j[ed.dst] * h.hol(e) * self.j[ed.src].adjoint()).collect();
        Connection { hol }
    }

    pub fn potential(&self, g: &Graph, pot: &Potential) -> Potential {
        let h: Vec<CMat> = (0..g.n_proper())
            .map(|k| {
                let j = &self.j[g.proper_vertex(k)];
                j * pot.h(k) * j.adjoint()
            })
            .collect();
        let h: Vec<CMat> = h.into_iter().map(|m| (m.clone() + m.adjoint()).scale(0.5)).collect();
        let eig = h.iter().map(HermEig::new).collect();
        Potential { h, eig }
    }

    /// Acts on a section over the proper vertices.
    pub fn section(&self, g: &Graph, f: &CVec) -> CVec {
        let r = self.j.first().map_or(0, |m| m.nrows());
        let mut out = f.clone();
        for k in 0..g.n_proper() {
            let b = &self.j[g.proper_vertex(k)] * linalg::block(f, k, r);
            linalg::set_block(&mut out, k, r, &b);
        }
        out
    }

    pub fn splitting(&self, g: &Graph, s: &Splitting) -> Splitting {
        let proj = (0..g.n_proper())
            .map(|k| {
                let j = &self.j[g.proper_vertex(k)];
                (0..s.n_colours(k)).map(|i| j * s.proj(k, i) * j.adjoint()).collect()
            })
            .collect();
        Splitting { proj }
    }
}

/// `(j·h, j·H, j·f)`.
pub fn gauge_apply(
    g: &Graph,
    j: &GaugeTransform,
    h: &Connection,
    pot: &Potential,
    f: &CVec,
) -> (Connection, Potential, CVec) {
    (j.connection(g, h), j.potential(g, pot), j.section(g, f))
}

/// Twisted holonomy `e^{-τ_n H_{x_n}} h_{e_n} ⋯ h_{e_1} e^{-τ_0 H_{x_0}}`.
pub fn twisted_holonomy(g: &Graph, h: &Connection, pot: &Potential, path: &ContinuousPath) -> Result<CMat> {
    let r = h.rank();
    let decay = |v: usize, tau: f64| -> Result<Option<CMat>> {
        match g.pindex(v) {
            Some(x) if !pot.is_zero_at(x) => {
                if tau.is_infinite() {
                    Err(Error::InfiniteTailWithPotential)
                } else {
                    Ok(Some(pot.decay(x, tau)))
                }
            }
            _ => Ok(None),
        }
    };
    let mut m = decay(path.vertices[0], path.holding[0])?.unwrap_or_else(|| linalg::identity(r));
    for (k, &e) in path.edges.iter().enumerate() {
        m = h.hol(e) * m;
        if let Some(d) = decay(path.vertices[k + 1], path.holding[k + 1])? {
            m = d * m;
        }
    }
    Ok(m)
}

/// Colour-projected twisted holonomy along a coloured path.
pub fn amplitude(g: &Graph, h: &Connection, pot: &Potential, s: &Splitting, eta: &ColouredPath) -> Result<CMat> {
    let path = &eta.path;
    let proj = |k: usize| -> Result<&CMat> {
        let v = path.vertices[k];
        let x = g.pindex(v).ok_or_else(|| Error::ColourMismatch(g.vertex_id(v).into()))?;
        let i = eta.colours[k];
        if i >= s.n_colours(x) {
            return Err(Error::ColourMismatch(format!("{}#{}", g.vertex_id(v), i)));
        }
        Ok(s.proj(x, i))
    };
    if eta.colours.len() != path.vertices.len() {
        return Err(Error::ColourMismatch("length".into()));
    }
    let step = |k: usize| -> Result<CMat> {
        let x = g.pindex(path.vertices[k]).expect("checked by proj");
        let tau = path.holding[k];
        if pot.is_zero_at(x) {
            Ok(proj(k)?.clone())
        } else if tau.is_infinite() {
            Err(Error::InfiniteTailWithPotential)
        } else {
            Ok(proj(k)? * pot.decay(x, tau))
        }
    };
    let mut m = step(0)?;
    for (k, &e) in path.edges.iter().enumerate() {
        m = step(k + 1)? * h.hol(e) * m;
    }
    Ok(m)
}

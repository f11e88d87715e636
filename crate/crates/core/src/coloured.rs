//! Signed measures on coloured loops and paths, enumerated up to a jump
//! cutoff, and Poissonian ensembles drawn from them.
//!
//! A coloured skeleton visits states `(x, i)`: a proper vertex and a colour
//! of the splitting at that vertex. Enumerated skeletons are stored in flat
//! arenas; the weights are time independent because the connection carries
//! no potential here. Holding times are drawn afterwards from the
//! conditional law given the skeleton.

use crate::bundle::{Connection, Splitting};
use crate::graph::Graph;
use crate::linalg;
use crate::measures::{mu_holding, nu_holding};
use crate::paths::{ColouredPath, ContinuousPath};
use crate::stats::gauss_legendre;
use crate::{CMat, CVec, Error, Result};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::Serialize;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Loops,
    Paths,
}

/// Flattened colour states `(x, i)` of a splitting.
#[derive(Debug, Clone)]
pub struct StateSpace {
    offsets: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl StateSpace {
    pub fn new(s: &Splitting) -> Self {
        let offsets = s.state_offsets();
        let ranks = (0..s.n_vertices()).flat_map(|x| (0..s.n_colours(x)).map(move |i| s.rank(x, i))).collect();
        StateSpace { offsets, ranks }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn index(&self, x: usize, i: usize) -> usize {
        self.offsets[x] + i
    }

    pub fn vertex(&self, s: usize) -> usize {
        self.offsets.partition_point(|&o| o <= s) - 1
    }

    pub fn colour(&self, s: usize) -> usize {
        s - self.offsets[self.vertex(s)]
    }

    /// Per-state values from per-vertex, per-colour values.
    pub fn flatten(&self, a: &[Vec<f64>]) -> Vec<f64> {
        a.iter().flatten().copied().collect()
    }
}

/// Transfer matrix `T_{s,t} = Σ_e P_e ‖π_t h_e π_s‖` between colour states.
pub fn transfer_matrix(g: &Graph, h: &Connection, s: &Splitting) -> DMatrix<f64> {
    let st = StateSpace::new(s);
    let ts = g.transition();
    let mut t = DMatrix::zeros(st.len(), st.len());
    for x in 0..g.n_proper() {
        for &e in g.out_edges(g.proper_vertex(x)) {
            let Some(y) = g.pindex(g.edge(e).dst) else { continue };
            for i in 0..s.n_colours(x) {
                for j in 0..s.n_colours(y) {
                    let m = s.proj(y, j) * h.hol(e) * s.proj(x, i);
                    t[(st.index(x, i), st.index(y, j))] += ts.p[e] * linalg::op_norm(&m);
                }
            }
        }
    }
    t
}

pub fn spectral_radius(t: &DMatrix<f64>) -> f64 {
    if t.nrows() == 0 {
        return 0.0;
    }
    t.complex_eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// `T^{N+1}(I − T)⁻¹`, or `None` when `ρ(T) ≥ 1`.
fn transfer_tail(t: &DMatrix<f64>, n_max: usize) -> Option<DMatrix<f64>> {
    if spectral_radius(t) >= 1.0 {
        return None;
    }
    let n = t.nrows();
    let res = (DMatrix::identity(n, n) - t).try_inverse()?;
    Some(t.pow((n_max + 1) as u32) * res)
}

/// Bound on the total variation of the coloured loop measure beyond `n_max`
/// jumps: `Σ_s rank_s (T^{N+1}(I−T)⁻¹)_{ss} / (N+1)`.
pub fn loop_tail_bound(g: &Graph, h: &Connection, s: &Splitting, n_max: usize) -> f64 {
    let st = StateSpace::new(s);
    let t = transfer_matrix(g, h, s);
    match transfer_tail(&t, n_max) {
        Some(m) => (0..st.len()).map(|k| st.ranks[k] as f64 * m[(k, k)]).sum::<f64>() / (n_max + 1) as f64,
        None => f64::INFINITY,
    }
}

/// Bound on the total variation of the coloured path measure of `Δf` beyond
/// `n_max` jumps: `aᵀ T^{N+1}(I−T)⁻¹ b`.
pub fn path_tail_bound(g: &Graph, h: &Connection, s: &Splitting, df: &CVec, n_max: usize) -> f64 {
    let st = StateSpace::new(s);
    let r = h.rank();
    let t = transfer_matrix(g, h, s);
    let lam = g.lambda_proper();
    let norms: Vec<f64> = (0..st.len())
        .map(|k| {
            let x = st.vertex(k);
            linalg::vnorm(&(s.proj(x, st.colour(k)) * linalg::block(df, x, r)))
        })
        .collect();
    match transfer_tail(&t, n_max) {
        Some(m) => {
            let mut acc = 0.0;
            for a in 0..st.len() {
                for b in 0..st.len() {
                    acc += lam[st.vertex(a)] * norms[a] * m[(a, b)] * norms[b];
                }
            }
            acc
        }
        None => f64::INFINITY,
    }
}

/// Enumerated coloured skeletons with their signed weights.
///
/// Item `k` starts at proper vertex `starts[k]`, jumps along
/// `edges[offsets[k]..offsets[k+1]]` and carries the colours
/// `colours[offsets[k]+k..offsets[k+1]+k+1]`.
#[derive(Debug, Clone)]
pub struct ColouredTable {
    pub kind: TableKind,
    pub n_max: usize,
    pub states: StateSpace,
    pub starts: Vec<u32>,
    pub offsets: Vec<u32>,
    pub edges: Vec<u32>,
    pub colours: Vec<u8>,
    pub weights: Vec<f64>,
    pub tail_bound: f64,
}

impl ColouredTable {
    fn empty(kind: TableKind, n_max: usize, s: &Splitting) -> Self {
        ColouredTable {
            kind,
            n_max,
            states: StateSpace::new(s),
            starts: Vec::new(),
            offsets: vec![0],
            edges: Vec::new(),
            colours: Vec::new(),
            weights: Vec::new(),
            tail_bound: 0.0,
        }
    }

    fn push(&mut self, start: usize, edges: &[u32], colours: &[u8], w: f64) {
        self.starts.push(start as u32);
        self.edges.extend_from_slice(edges);
        self.colours.extend_from_slice(colours);
        self.offsets.push(self.edges.len() as u32);
        self.weights.push(w);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn item_edges(&self, k: usize) -> &[u32] {
        &self.edges[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }

    pub fn item_colours(&self, k: usize) -> &[u8] {
        &self.colours[self.offsets[k] as usize + k..self.offsets[k + 1] as usize + k + 1]
    }

    /// Proper vertices visited by item `k`.
    pub fn item_vertices(&self, g: &Graph, k: usize) -> Vec<usize> {
        let mut v = vec![self.starts[k] as usize];
        for &e in self.item_edges(k) {
            v.push(g.pindex(g.edge(e as usize).dst).expect("proper skeleton"));
        }
        v
    }

    /// Colour states visited by item `k`.
    pub fn item_states(&self, g: &Graph, k: usize) -> Vec<usize> {
        self.item_vertices(g, k)
            .into_iter()
            .zip(self.item_colours(k))
            .map(|(x, &i)| self.states.index(x, i as usize))
            .collect()
    }

    pub fn positive_mass(&self) -> f64 {
        self.weights.iter().filter(|w| **w > 0.0).sum()
    }

    pub fn negative_mass(&self) -> f64 {
        -self.weights.iter().filter(|w| **w < 0.0).sum::<f64>()
    }

    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Fails when the tail bound exceeds `rel` times the enumerated total
    /// variation.
    pub fn check_tail(&self, rel: f64) -> Result<()> {
        let budget = rel * self.total_variation();
        if self.tail_bound > budget {
            return Err(Error::TailBoundExceeded { bound: self.tail_bound, budget });
        }
        Ok(())
    }

    /// Coloured path of item `k` with the given holding times.
    pub fn coloured_path(&self, g: &Graph, k: usize, holding: Vec<f64>) -> ColouredPath {
        let vertices = self.item_vertices(g, k).into_iter().map(|x| g.proper_vertex(x)).collect();
        ColouredPath {
            path: ContinuousPath { vertices, edges: self.item_edges(k).iter().map(|&e| e as usize).collect(), holding },
            colours: self.item_colours(k).iter().map(|&c| c as usize).collect(),
        }
    }

    /// Holding times from the conditional law given the skeleton.
    pub fn sample_holding<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<f64> {
        let n = self.item_edges(k).len();
        match self.kind {
            TableKind::Loops => mu_holding(n, rng),
            TableKind::Paths => nu_holding(n, rng),
        }
    }

    /// Visit-count key of item `k`; the root of a loop is counted twice.
    fn key(&self, g: &Graph, k: usize) -> Vec<u8> {
        let mut key = vec![0u8; self.states.len()];
        for s in self.item_states(g, k) {
            key[s] += 1;
        }
        key
    }

    /// Signed weights aggregated by visit-count key, split by sign.
    pub fn aggregate(&self, g: &Graph) -> Vec<(Vec<u8>, f64, f64)> {
        let mut map: HashMap<Vec<u8>, (f64, f64)> = HashMap::new();
        for k in 0..self.len() {
            let w = self.weights[k];
            let e = map.entry(self.key(g, k)).or_default();
            if w > 0.0 {
                e.0 += w;
            } else {
                e.1 -= w;
            }
        }
        let mut out: Vec<_> = map.into_iter().map(|(k, (p, n))| (k, p, n)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// `(∫ (e^{-Σ a θ} − 1) dm⁺, ∫ (e^{-Σ a θ} − 1) dm⁻)` over the
    /// enumerated non-constant skeletons, with `a ≥ 0` per colour state.
    pub fn laplace_log(&self, g: &Graph, a: &[f64]) -> (f64, f64) {
        let quad = JQuadrature::new();
        let mut pos = 0.0;
        let mut neg = 0.0;
        for (key, p, n) in self.aggregate(g) {
            let f = match self.kind {
                TableKind::Loops => {
                    // Weights carry the 1/n of the loop measure and J(0) = 1/n.
                    let len: usize = key.iter().map(|&c| c as usize).sum::<usize>() - 1;
                    len as f64 * quad.j(&key, a) - 1.0
                }
                TableKind::Paths => {
                    key.iter().zip(a).map(|(&c, &ak)| (1.0 + ak).powi(-(c as i32))).product::<f64>() - 1.0
                }
            };
            pos += p * f;
            neg += n * f;
        }
        (pos, neg)
    }
}

/// Depth-first enumeration of coloured loops with `1 ≤ n ≤ n_max` jumps and
/// weight `ΠP · Re Tr amp / n`.
pub fn enumerate_loops(g: &Graph, h: &Connection, s: &Splitting, n_max: usize) -> ColouredTable {
    let ts = g.transition();
    let mut table = ColouredTable::empty(TableKind::Loops, n_max, s);
    let jumps = crate::measures::proper_jumps(g, &ts);
    struct Ctx<'a> {
        h: &'a Connection,
        s: &'a Splitting,
        jumps: &'a [Vec<(usize, usize, f64)>],
        n_max: usize,
        root: (usize, usize),
        edges: Vec<u32>,
        colours: Vec<u8>,
    }
    fn rec(c: &mut Ctx, table: &mut ColouredTable, x: usize, m: &CMat, weight: f64) {
        let n = c.edges.len();
        if n >= 1 && (x, *c.colours.last().expect("non-empty") as usize) == c.root {
            let w = weight * m.trace().re / n as f64;
            if w != 0.0 {
                table.push(c.root.0, &c.edges, &c.colours, w);
            }
        }
        if n == c.n_max {
            return;
        }
        for &(e, y, p) in &c.jumps[x] {
            let hm = c.h.hol(e) * m;
            for j in 0..c.s.n_colours(y) {
                let next = c.s.proj(y, j) * &hm;
                if next.iter().all(|z| z.norm_sqr() < 1e-30) {
                    continue;
                }
                c.edges.push(e as u32);
                c.colours.push(j as u8);
                rec(c, table, y, &next, weight * p);
                c.edges.pop();
                c.colours.pop();
            }
        }
    }
    for x in 0..g.n_proper() {
        for i in 0..s.n_colours(x) {
            let mut c = Ctx { h, s, jumps: &jumps, n_max, root: (x, i), edges: vec![], colours: vec![i as u8] };
            rec(&mut c, &mut table, x, &s.proj(x, i).clone(), 1.0);
        }
    }
    table.tail_bound = loop_tail_bound(g, h, s, n_max);
    table
}

/// Depth-first enumeration of coloured paths with `0 ≤ n ≤ n_max` jumps and
/// weight `λ_{x_0} ΠP · Re⟨amp (Δf)(x_0), (Δf)(x_n)⟩`.
pub fn enumerate_paths(g: &Graph, h: &Connection, s: &Splitting, df: &CVec, n_max: usize) -> ColouredTable {
    let ts = g.transition();
    let r = h.rank();
    let lam = g.lambda_proper();
    let mut table = ColouredTable::empty(TableKind::Paths, n_max, s);
    let jumps = crate::measures::proper_jumps(g, &ts);
    let blocks: Vec<CVec> = (0..g.n_proper()).map(|x| linalg::block(df, x, r)).collect();
    struct Ctx<'a> {
        h: &'a Connection,
        s: &'a Splitting,
        jumps: &'a [Vec<(usize, usize, f64)>],
        blocks: &'a [CVec],
        n_max: usize,
        start: usize,
        scale: f64,
        edges: Vec<u32>,
        colours: Vec<u8>,
    }
    fn rec(c: &mut Ctx, table: &mut ColouredTable, x: usize, v: &CVec, weight: f64) {
        let w = c.scale * weight * linalg::dot(v, &c.blocks[x]).re;
        if w != 0.0 {
            table.push(c.start, &c.edges, &c.colours, w);
        }
        if c.edges.len() == c.n_max {
            return;
        }
        for &(e, y, p) in &c.jumps[x] {
            let hv = c.h.hol(e) * v;
            for j in 0..c.s.n_colours(y) {
                let next = c.s.proj(y, j) * &hv;
                if linalg::vnorm(&next) < 1e-15 {
                    continue;
                }
                c.edges.push(e as u32);
                c.colours.push(j as u8);
                rec(c, table, y, &next, weight * p);
                c.edges.pop();
                c.colours.pop();
            }
        }
    }
    for x in 0..g.n_proper() {
        for i in 0..s.n_colours(x) {
            let v = s.proj(x, i) * &blocks[x];
            if linalg::vnorm(&v) < 1e-15 {
                continue;
            }
            let mut c = Ctx {
                h,
                s,
                jumps: &jumps,
                blocks: &blocks,
                n_max,
                start: x,
                scale: lam[x],
                edges: vec![],
                colours: vec![i as u8],
            };
            rec(&mut c, &mut table, x, &v, 1.0);
        }
    }
    table.tail_bound = path_tail_bound(g, h, s, df, n_max);
    table
}

/// Smallest cutoff whose loop tail bound is at most `abs`.
pub fn loop_cutoff(g: &Graph, h: &Connection, s: &Splitting, abs: f64, cap: usize) -> usize {
    (1..cap).find(|&n| loop_tail_bound(g, h, s, n) <= abs).unwrap_or(cap)
}

/// Smallest cutoff whose path tail bound is at most `abs`.
pub fn path_cutoff(g: &Graph, h: &Connection, s: &Splitting, df: &CVec, abs: f64, cap: usize) -> usize {
    (0..cap).find(|&n| path_tail_bound(g, h, s, df, n) <= abs).unwrap_or(cap)
}

/// Absolute tail allowed on enumerated tables in the harness.
pub const TABLE_TAIL: f64 = 1e-5;
/// Largest enumeration accepted, in estimated items.
pub const MAX_ITEMS: f64 = 3e6;

/// Branching factor of the coloured skeleton tree.
pub fn branching(g: &Graph, s: &Splitting) -> f64 {
    (0..g.n_proper())
        .map(|x| {
            g.out_edges(g.proper_vertex(x))
                .iter()
                .filter_map(|&e| g.pindex(g.edge(e).dst))
                .map(|y| s.n_colours(y))
                .sum::<usize>()
        })
        .max()
        .unwrap_or(0) as f64
}

/// Smallest cutoff from `start` whose tail is at most `abs`, or `None` when
/// the enumeration would exceed `MAX_ITEMS` first.
pub fn feasible_cutoff<F: Fn(usize) -> f64>(
    n_states: usize,
    branch: f64,
    start: usize,
    abs: f64,
    tail: F,
) -> Option<usize> {
    let mut n = start;
    loop {
        if tail(n) <= abs {
            return Some(n);
        }
        n += 1;
        if n_states as f64 * branch.max(1.0).powi(n as i32) > MAX_ITEMS {
            return None;
        }
    }
}

/// Loop table with tail at most `abs`, or `TailBoundExceeded` when that
/// needs more than `MAX_ITEMS` items.
pub fn loop_table(g: &Graph, h: &Connection, s: &Splitting, abs: f64) -> Result<ColouredTable> {
    let st = StateSpace::new(s);
    let branch = branching(g, s);
    match feasible_cutoff(st.len(), branch, 1, abs, |n| loop_tail_bound(g, h, s, n)) {
        Some(n) => Ok(enumerate_loops(g, h, s, n)),
        None => {
            let largest = ((MAX_ITEMS / st.len() as f64).ln() / branch.max(2.0).ln()) as usize;
            Err(Error::TailBoundExceeded { bound: loop_tail_bound(g, h, s, largest.max(1)), budget: abs })
        }
    }
}

/// `J(a) = ∫_0^∞ Π_k (1 + a_k + s)⁻¹ ds` for visit counts `key` over
/// states with rates `a`, by Gauss–Legendre in `u = log s`.
pub struct JQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

const J_LO: f64 = -50.0;
const J_HI: f64 = 50.0;
const J_PANELS: usize = 200;

impl Default for JQuadrature {
    fn default() -> Self {
        Self::new()
    }
}

impl JQuadrature {
    pub fn new() -> Self {
        let (x, w) = gauss_legendre(16);
        let h = (J_HI - J_LO) / J_PANELS as f64;
        let mut nodes = Vec::with_capacity(J_PANELS * 16);
        let mut weights = Vec::with_capacity(J_PANELS * 16);
        for p in 0..J_PANELS {
            let a = J_LO + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(a + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        JQuadrature { nodes, weights }
    }

    pub fn j(&self, key: &[u8], a: &[f64]) -> f64 {
        let terms: Vec<(f64, i32)> =
            key.iter().zip(a).filter(|(c, _)| **c > 0).map(|(&c, &ak)| (1.0 + ak, c as i32)).collect();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| {
                let s = u.exp();
                w * s * terms.iter().map(|&(b, c)| (b + s).powi(-c)).product::<f64>()
            })
            .sum()
    }
}

/// Occupation field `θ` per colour state; `ℓ = θ / λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationField {
    pub theta: Vec<f64>,
}

impl OccupationField {
    pub fn zeros(n: usize) -> Self {
        OccupationField { theta: vec![0.0; n] }
    }

    pub fn add(&mut self, o: &OccupationField) {
        for (a, b) in self.theta.iter_mut().zip(&o.theta) {
            *a += b;
        }
    }

    pub fn local_time(&self, g: &Graph, st: &StateSpace) -> Vec<f64> {
        let lam = g.lambda_proper();
        self.theta.iter().enumerate().map(|(k, t)| t / lam[st.vertex(k)]).collect()
    }

    /// `Σ_s a_s θ_s`.
    pub fn pair(&self, a: &[f64]) -> f64 {
        self.theta.iter().zip(a).map(|(t, a)| t * a).sum()
    }
}

/// Positive and negative Poissonian ensembles plus the constant-loop field.
#[derive(Debug, Clone)]
pub struct SignedEnsemble {
    pub positive: Vec<ColouredPath>,
    pub negative: Vec<ColouredPath>,
    pub constant: OccupationField,
}

impl SignedEnsemble {
    fn occupation_of(g: &Graph, st: &StateSpace, paths: &[ColouredPath]) -> OccupationField {
        let mut occ = OccupationField::zeros(st.len());
        for p in paths {
            for (k, (&v, &i)) in p.path.vertices.iter().zip(&p.colours).enumerate() {
                let x = g.pindex(v).expect("proper");
                occ.theta[st.index(x, i)] += p.path.holding[k];
            }
        }
        occ
    }

    /// Occupation of the positive part including constant loops.
    pub fn positive_occupation(&self, g: &Graph, st: &StateSpace) -> OccupationField {
        let mut occ = Self::occupation_of(g, st, &self.positive);
        occ.add(&self.constant);
        occ
    }

    pub fn negative_occupation(&self, g: &Graph, st: &StateSpace) -> OccupationField {
        Self::occupation_of(g, st, &self.negative)
    }
}

/// Poisson sampler over the enumerated items of a table, split by sign.
#[derive(Debug, Clone)]
pub struct EnsembleSampler<'a> {
    table: &'a ColouredTable,
    pos: (Vec<usize>, Vec<f64>),
    neg: (Vec<usize>, Vec<f64>),
    alpha: f64,
}

impl<'a> EnsembleSampler<'a> {
    pub fn new(table: &'a ColouredTable, alpha: f64) -> Self {
        let mut pos = (Vec::new(), Vec::new());
        let mut neg = (Vec::new(), Vec::new());
        let (mut cp, mut cn) = (0.0, 0.0);
        for (k, &w) in table.weights.iter().enumerate() {
            if w > 0.0 {
                cp += w;
                pos.0.push(k);
                pos.1.push(cp);
            } else if w < 0.0 {
                cn -= w;
                neg.0.push(k);
                neg.1.push(cn);
            }
        }
        EnsembleSampler { table, pos, neg, alpha }
    }

    fn draw<R: Rng + ?Sized>(&self, part: &(Vec<usize>, Vec<f64>), rng: &mut R) -> Vec<usize> {
        let Some(&total) = part.1.last() else { return Vec::new() };
        let mean = self.alpha * total;
        let count = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(rng) as usize } else { 0 };
        (0..count)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                part.0[part.1.partition_point(|&c| c <= u).min(part.0.len() - 1)]
            })
            .collect()
    }

    /// Item indices of one draw of the positive and negative ensembles.
    pub fn sample_items<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let p = self.draw(&self.pos, rng);
        let n = self.draw(&self.neg, rng);
        (p, n)
    }

    pub fn sample<R: Rng + ?Sized>(&self, g: &Graph, rng: &mut R) -> (Vec<ColouredPath>, Vec<ColouredPath>) {
        let (p, n) = self.sample_items(rng);
        let mut build = |items: Vec<usize>| -> Vec<ColouredPath> {
            items
                .into_iter()
                .map(|k| {
                    let hold = self.table.sample_holding(k, rng);
                    self.table.coloured_path(g, k, hold)
                })
                .collect()
        };
        let pos = build(p);
        let neg = build(n);
        (pos, neg)
    }

    /// Occupation fields of one draw, without materializing paths.
    pub fn sample_occupation<R: Rng + ?Sized>(&self, g: &Graph, rng: &mut R) -> (OccupationField, OccupationField) {
        let (p, n) = self.sample_items(rng);
        let st = &self.table.states;
        let mut fill = |items: Vec<usize>| {
            let mut occ = OccupationField::zeros(st.len());
            for k in items {
                let states = self.table.item_states(g, k);
                let hold = self.table.sample_holding(k, rng);
                for (s, t) in states.into_iter().zip(hold) {
                    occ.theta[s] += t;
                }
            }
            occ
        };
        let pos = fill(p);
        let neg = fill(n);
        (pos, neg)
    }
}

/// Constant coloured loops: `θ_{x,i} ~ Gamma(α · rank π_x^i, 1)`.
pub fn sample_constant_loops<R: Rng + ?Sized>(st: &StateSpace, alpha: f64, rng: &mut R) -> OccupationField {
    OccupationField {
        theta: st
            .ranks
            .iter()
            .map(|&k| Gamma::new(alpha * k as f64, 1.0).expect("positive shape").sample(rng))
            .collect(),
    }
}

/// `n` independent loop soups with intensity `α μ_h^{°,𝕀}` from an
/// enumerated table.
pub fn sample_loop_soups<R: Rng + ?Sized>(
    g: &Graph,
    table: &ColouredTable,
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SignedEnsemble>> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument("intensity must be positive".into()));
    }
    table.check_tail(1e-3)?;
    let sampler = EnsembleSampler::new(table, alpha);
    Ok((0..n)
        .map(|_| {
            let constant = sample_constant_loops(&table.states, alpha, rng);
            let (positive, negative) = sampler.sample(g, rng);
            SignedEnsemble { positive, negative, constant }
        })
        .collect())
}

/// `n` independent draws of the path ensembles with intensity
/// `α ν_{h,f}^𝕀`.
pub fn sample_path_ensembles<R: Rng + ?Sized>(
    g: &Graph,
    table: &ColouredTable,
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<SignedEnsemble>> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument("intensity must be positive".into()));
    }
    if !table.is_empty() {
        table.check_tail(1e-3)?;
    }
    let sampler = EnsembleSampler::new(table, alpha);
    Ok((0..n)
        .map(|_| {
            let (positive, negative) = sampler.sample(g, rng);
            SignedEnsemble { positive, negative, constant: OccupationField::zeros(table.states.len()) }
        })
        .collect())
}

/// `−Σ_{x,i} rank π_x^i · log(1 + a_{x,i})`, the constant-loop part of the
/// loop Laplace functional.
pub fn constant_loop_laplace_log(st: &StateSpace, a: &[f64]) -> f64 {
    st.ranks.iter().zip(a).map(|(&k, &ak)| -(k as f64) * ak.ln_1p()).sum()
}

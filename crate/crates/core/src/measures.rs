//! Path measures: skeleton masses of `μ°` and `μ`, the conditioned skeleton
//! sampler, and walk estimators of `ν`- and `μ`-integrals.
//!
//! A rooted discrete loop or path of length `n ≥ 1` with jump probabilities
//! `P` carries mass `ΠP / n` under `μ`; given its skeleton the lifetime is
//! `Gamma(n, 1)` and the jump times are uniform order statistics. Under `ν`
//! a skeleton carries mass `ΠP` and its `n + 1` holding times are i.i.d.
//! standard exponentials.

use crate::bundle::{twisted_holonomy, Connection, Potential};
use crate::graph::{Graph, TransitionStructure};
use crate::linalg::{self, HermEig};
use crate::mc::{self, McRng};
use crate::paths::{ContinuousPath, WalkSampler};
use crate::stats::{MatAcc, ScalarAcc};
use crate::{CMat, CVec, Error, Result, C64};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

/// `∫_0^τ e^{-sA} ds = A⁻¹(I − e^{-τA})` for Hermitian `A`.
pub fn phi(eig: &HermEig, tau: f64) -> CMat {
    eig.map_real(|m| phi_scalar(m, tau))
}

pub fn phi_scalar(m: f64, tau: f64) -> f64 {
    if m.abs() < 1e-8 {
        tau - tau * tau * m / 2.0 + tau.powi(3) * m * m / 6.0
    } else {
        -(-tau * m).exp_m1() / m
    }
}

/// A discrete skeleton inside the proper subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    /// Proper indices `x_0 … x_n`.
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    /// `Π P_{x_{k-1}, e_k}`.
    pub weight: f64,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Continuous path with the given holding times.
    pub fn with_holding(&self, g: &Graph, holding: Vec<f64>) -> ContinuousPath {
        ContinuousPath {
            vertices: self.vertices.iter().map(|&k| g.proper_vertex(k)).collect(),
            edges: self.edges.clone(),
            holding,
        }
    }
}

/// Proper-to-proper jumps out of each proper vertex: `(edge, dst, P)`.
pub fn proper_jumps(g: &Graph, ts: &TransitionStructure) -> Vec<Vec<(usize, usize, f64)>> {
    (0..g.n_proper())
        .map(|k| {
            g.out_edges(g.proper_vertex(k))
                .iter()
                .filter_map(|&e| g.pindex(g.edge(e).dst).map(|y| (e, y, ts.p[e])))
                .collect()
        })
        .collect()
}

/// Every discrete skeleton of length `lo..=hi` inside `V`, optionally only
/// the closed ones, by depth-first search.
pub fn enumerate_skeletons(g: &Graph, ts: &TransitionStructure, lo: usize, hi: usize, loops: bool) -> Vec<Skeleton> {
    let jumps = proper_jumps(g, ts);
    let mut out = Vec::new();
    fn rec(
        jumps: &[Vec<(usize, usize, f64)>],
        cur: &mut Skeleton,
        lo: usize,
        hi: usize,
        loops: bool,
        out: &mut Vec<Skeleton>,
    ) {
        let n = cur.len();
        if n >= lo && (!loops || cur.vertices[0] == cur.vertices[n]) {
            out.push(cur.clone());
        }
        if n == hi {
            return;
        }
        let v = cur.vertices[n];
        for &(e, y, p) in &jumps[v] {
            cur.vertices.push(y);
            cur.edges.push(e);
            let w = cur.weight;
            cur.weight *= p;
            rec(jumps, cur, lo, hi, loops, out);
            cur.weight = w;
            cur.vertices.pop();
            cur.edges.pop();
        }
    }
    for x in 0..g.n_proper() {
        let mut cur = Skeleton { vertices: vec![x], edges: vec![], weight: 1.0 };
        rec(&jumps, &mut cur, lo, hi, loops, &mut out);
    }
    out
}

/// Per-length masses, their truncated total and a rigorous tail bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonMasses {
    /// Index `n`, entry 0 unused.
    pub per_length: Vec<f64>,
    pub total: f64,
    /// Closed form of the untruncated total when one exists.
    pub exact_total: Option<f64>,
    pub tail_bound: f64,
}

fn resolvent_row_sums(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    (DMatrix::identity(n, n) - q).try_inverse().expect("ρ(Q) < 1")
}

/// Rooted loop masses `Tr(Qⁿ)/n`, total `−log det(I − Q)`.
pub fn loop_skeleton_masses(g: &Graph, n_max: usize) -> SkeletonMasses {
    let ts = g.transition();
    let pw = ts.powers(n_max + 1);
    let mut per_length = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        per_length[n] = pw[n].trace() / n as f64;
    }
    let n = ts.q.nrows();
    let i_q = DMatrix::identity(n, n) - &ts.q;
    let exact = -i_q.determinant().ln();
    let tail = (&pw[n_max + 1] * resolvent_row_sums(&ts.q)).trace() / (n_max + 1) as f64;
    SkeletonMasses { total: per_length.iter().sum(), per_length, exact_total: Some(exact), tail_bound: tail.max(0.0) }
}

/// Masses `1ᵀQⁿ1/n` of all discrete paths of length `n ≥ 1` under `μ`.
pub fn path_skeleton_masses(g: &Graph, n_max: usize) -> SkeletonMasses {
    let ts = g.transition();
    let pw = ts.powers(n_max + 1);
    let mut per_length = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        per_length[n] = pw[n].sum() / n as f64;
    }
    let tail = (&pw[n_max + 1] * resolvent_row_sums(&ts.q)).sum() / (n_max + 1) as f64;
    SkeletonMasses { total: per_length.iter().sum(), per_length, exact_total: None, tail_bound: tail.max(0.0) }
}

/// Smallest `N` whose tail bound falls below `tol`.
pub fn choose_n_max<F: Fn(usize) -> SkeletonMasses>(masses: F, tol: f64, cap: usize) -> usize {
    let mut n = 1;
    while n < cap && masses(n).tail_bound > tol {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkeletonKind {
    Loops,
    Paths,
}

/// Draws skeletons of length `1..=n_max` with probability proportional to
/// their `μ` mass, by length, then start, then a Doob-conditioned bridge.
#[derive(Debug, Clone)]
pub struct SkeletonSampler {
    kind: SkeletonKind,
    powers: Vec<DMatrix<f64>>,
    jumps: Vec<Vec<(usize, usize, f64)>>,
    len_cum: Vec<f64>,
    pub masses: SkeletonMasses,
}

impl SkeletonSampler {
    pub fn new(g: &Graph, kind: SkeletonKind, n_max: usize) -> Self {
        let ts = g.transition();
        let masses = match kind {
            SkeletonKind::Loops => loop_skeleton_masses(g, n_max),
            SkeletonKind::Paths => path_skeleton_masses(g, n_max),
        };
        let mut acc = 0.0;
        let len_cum = masses.per_length.iter().map(|m| {
            acc += m;
            acc
        });
        SkeletonSampler {
            kind,
            powers: ts.powers(n_max),
            jumps: proper_jumps(g, &ts),
            len_cum: len_cum.collect(),
            masses,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Skeleton {
        let u = rng.random::<f64>() * self.masses.total;
        let n = self.len_cum.partition_point(|&c| c <= u).clamp(1, self.len_cum.len() - 1);
        let dim = self.powers[0].nrows();
        let target = |m: usize, v: usize, x0: usize| -> f64 {
            match self.kind {
                SkeletonKind::Loops => self.powers[m][(v, x0)],
                SkeletonKind::Paths => self.powers[m].row(v).sum(),
            }
        };
        let start_w: Vec<f64> = (0..dim).map(|x| target(n, x, x)).collect();
        let x0 = categorical(&start_w, rng);
        let mut sk = Skeleton { vertices: vec![x0], edges: vec![], weight: 1.0 };
        let mut v = x0;
        for m in (1..=n).rev() {
            let w: Vec<f64> = self.jumps[v].iter().map(|&(_, y, p)| p * target(m - 1, y, x0)).collect();
            let k = categorical(&w, rng);
            let (e, y, p) = self.jumps[v][k];
            sk.vertices.push(y);
            sk.edges.push(e);
            sk.weight *= p;
            v = y;
        }
        sk
    }
}

pub fn categorical<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Holding times of a `μ` skeleton with `n ≥ 1` jumps: lifetime
/// `Gamma(n, 1)` cut at `n` sorted uniform points.
pub fn mu_holding<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let t = Gamma::new(n as f64, 1.0).expect("n ≥ 1").sample(rng);
    let mut cuts: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * t).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n + 1);
    let mut prev = 0.0;
    for c in cuts {
        out.push((c - prev).max(f64::MIN_POSITIVE));
        prev = c;
    }
    out.push((t - prev).max(f64::MIN_POSITIVE));
    out
}

/// `n + 1` i.i.d. standard exponential holding times of a `ν` skeleton.
pub fn nu_holding<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..=n).map(|_| rng.sample::<f64, _>(Exp1)).collect()
}

/// One walk's contribution to row `x` of the Green section: block `(x, y)`
/// receives `Σ_{k: x_k = y} A_k φ(H_y, τ_k) / λ_y` with
/// `A_{k+1} = A_k e^{-τ_k H_{x_k}} hol_{e_{k+1}}⁻¹`.
pub fn nu_row_sample(g: &Graph, h: &Connection, pot: &Potential, path: &ContinuousPath) -> CMat {
    let r = h.rank();
    let mut sample = CMat::zeros(r, r * g.n_proper());
    let mut a = linalg::identity(r);
    for k in 0..path.edges.len() {
        let y = g.pindex(path.vertices[k]).expect("walk is proper until absorbed");
        let tau = path.holding[k];
        let contrib = &a * phi(pot.eig(y), tau).unscale(g.lambda(path.vertices[k]));
        let mut blk = sample.view_mut((0, y * r), (r, r));
        blk += contrib;
        a = &a * pot.decay(y, tau) * h.hol(path.edges[k]).adjoint();
    }
    sample
}

/// Row `x` of the Green section estimated from walks.
pub fn nu_row_mc(
    g: &Graph,
    h: &Connection,
    pot: &Potential,
    x: usize,
    n_samples: usize,
    seed: u64,
    tag: &str,
) -> Result<MatAcc> {
    let r = h.rank();
    let walker = WalkSampler::new(g, &g.transition());
    mc::run_batches(
        seed,
        tag,
        n_samples,
        || MatAcc::new(r, r * g.n_proper()),
        |rng, count, acc| {
            for _ in 0..count {
                let path = walker.sample(g, g.proper_vertex(x), rng)?;
                acc.push(&nu_row_sample(g, h, pot, &path));
            }
            Ok(())
        },
    )
}

/// Estimate of `Σ_terms c·∫ hol_{h,H}(γ⁻¹) dμ` over non-constant paths (or
/// traces over non-constant rooted loops), truncated at `n_max` jumps.
pub struct MuEstimate {
    pub matrix: Option<MatAcc>,
    pub trace: Option<ScalarAcc>,
    pub tail_bound: f64,
    pub total_mass: f64,
}

pub fn mu_integral_mc(
    g: &Graph,
    terms: &[(&Connection, &Potential, f64)],
    kind: SkeletonKind,
    n_max: usize,
    n_samples: usize,
    seed: u64,
    tag: &str,
) -> Result<MuEstimate> {
    let r = terms.first().map_or(1, |t| t.0.rank());
    let n = g.n_proper();
    let sampler = SkeletonSampler::new(g, kind, n_max);
    let mass = sampler.total_mass();
    let sample_one = |rng: &mut McRng| -> Result<(Skeleton, CMat)> {
        let sk = sampler.sample(rng);
        let path = sk.with_holding(g, mu_holding(sk.len(), rng));
        let mut d = CMat::zeros(r, r);
        for (h, pot, c) in terms {
            d += twisted_holonomy(g, h, pot, &path)?.adjoint().scale(*c);
        }
        Ok((sk, d.scale(mass)))
    };
    let coef: f64 = terms.iter().map(|t| t.2.abs()).sum();
    match kind {
        SkeletonKind::Paths => {
            let acc = mc::run_batches(
                seed,
                tag,
                n_samples,
                || MatAcc::new(r * n, r * n),
                |rng, count, acc| {
                    for _ in 0..count {
                        let (sk, d) = sample_one(rng)?;
                        acc.push_sparse(&[(sk.vertices[0] * r, sk.vertices[sk.len()] * r, d)]);
                    }
                    Ok(())
                },
            )?;
            Ok(MuEstimate {
                matrix: Some(acc),
                trace: None,
                tail_bound: coef * sampler.masses.tail_bound,
                total_mass: mass,
            })
        }
        SkeletonKind::Loops => {
            let acc = mc::run_batches(seed, tag, n_samples, ScalarAcc::default, |rng, count, acc| {
                for _ in 0..count {
                    let (_, d) = sample_one(rng)?;
                    acc.push(d.trace().re);
                }
                Ok(())
            })?;
            Ok(MuEstimate {
                matrix: None,
                trace: Some(acc),
                tail_bound: coef * r as f64 * sampler.masses.tail_bound,
                total_mass: mass,
            })
        }
    }
}

/// Monte Carlo sides of the λ-reversibility identity
/// `λ_x E_x[F((γ|[0,t])⁻¹) 1{γ_t=y}] = λ_y E_y[F(γ|[0,t]) 1{γ_t=x}]`.
pub struct ReversibilityEstimate {
    pub lhs: (ScalarAcc, ScalarAcc),
    pub rhs: (ScalarAcc, ScalarAcc),
}

#[allow(clippy::too_many_arguments)]
pub fn reversibility_mc<F>(
    g: &Graph,
    x: usize,
    y: usize,
    t: f64,
    functional: F,
    n_samples: usize,
    seed: u64,
    tag: &str,
) -> Result<ReversibilityEstimate>
where
    F: Fn(&ContinuousPath) -> C64 + Sync,
{
    let walker = WalkSampler::new(g, &g.transition());
    let side = |from: usize, to: usize, reverse: bool, tag: String| {
        let lam = g.lambda(g.proper_vertex(from));
        mc::run_batches(
            seed,
            &tag,
            n_samples,
            || (ScalarAcc::default(), ScalarAcc::default()),
            |rng, count, acc| {
                for _ in 0..count {
                    let path = walker.sample(g, g.proper_vertex(from), rng)?;
                    let cut = path.restrict(t);
                    let v = if cut.end() == g.proper_vertex(to) {
                        let p = if reverse { cut.reverse(g).expect("inside V") } else { cut };
                        functional(&p) * lam
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    acc.0.push(v.re);
                    acc.1.push(v.im);
                }
                Ok(())
            },
        )
    };
    Ok(ReversibilityEstimate {
        lhs: side(x, y, true, format!("{tag}/lhs"))?,
        rhs: side(y, x, false, format!("{tag}/rhs"))?,
    })
}

/// `E_x[hol_{h,H}(γ|[0,T_γ]⁻¹) b(γ_{T−})]` from walks, as a fibre vector.
#[allow(clippy::too_many_arguments)]
pub fn hitting_mc(
    g: &Graph,
    h: &Connection,
    pot: &Potential,
    x: usize,
    b: &CVec,
    n_samples: usize,
    seed: u64,
    tag: &str,
) -> Result<MatAcc> {
    let r = h.rank();
    let walker = WalkSampler::new(g, &g.transition());
    mc::run_batches(
        seed,
        tag,
        n_samples,
        || MatAcc::new(r, 1),
        |rng, count, acc| {
            for _ in 0..count {
                let path = walker.sample(g, g.proper_vertex(x), rng)?.stopped(g);
                let last = g.pindex(path.end()).ok_or(Error::InvalidArgument("walk started in the well".into()))?;
                let hol = twisted_holonomy(g, h, pot, &path)?.adjoint();
                let v = hol * linalg::block(b, last, r);
                acc.push(&CMat::from_column_slice(r, 1, v.as_slice()));
            }
            Ok(())
        },
    )
}

//! Twisted holonomy as the average of plain holonomy over hidden loop-edge
//! excursions.

use super::{CheckReport, Comparison, Ctx};
use crate::bundle::{twisted_holonomy, Connection, Potential};
use crate::calculus::LaplacianOperator;
use crate::graph::Graph;
use crate::linalg::{self, HermEig};
use crate::mc;
use crate::paths::WalkSampler;
use crate::stats::{MatAcc, ScalarAcc};
use crate::{CMat, Error, Result, C64};
use rand::Rng;
use rand_distr::Exp1;

const T: f64 = 1.0;

/// Rate used where the potential vanishes.
const EPS_RATE: f64 = 1e-3;

/// Looping edge at one vertex: jump rate `r` and holonomy `U` with
/// `H = r(2 − (U + U⁻¹))`.
struct LoopEdge {
    rate: f64,
    u: CMat,
    u_inv: CMat,
}

impl LoopEdge {
    fn new(h: &CMat) -> LoopEdge {
        let eig = HermEig::new(h);
        let top = eig.max();
        if top <= 0.0 {
            let id = linalg::identity(h.nrows());
            return LoopEdge { rate: EPS_RATE, u: id.clone(), u_inv: id };
        }
        let rate = 0.5 * top;
        let angle = |m: f64| (1.0 - m.max(0.0) / (2.0 * rate)).clamp(-1.0, 1.0).acos();
        let u = eig.map(|m| C64::from_polar(1.0, angle(m)));
        let u_inv = u.adjoint();
        LoopEdge { rate, u, u_inv }
    }
}

/// Plain holonomy in the graph with looping edges along the rate-modified
/// walk up to time `t`, with the proper end vertex, or `None` once absorbed.
fn hidden_walk<R: Rng + ?Sized>(
    g: &Graph,
    h: &Connection,
    loops: &[LoopEdge],
    walker: &WalkSampler,
    start: usize,
    t: f64,
    rng: &mut R,
) -> Option<(usize, CMat)> {
    let mut hol = linalg::identity(h.rank());
    let mut v = start;
    let mut clock = 0.0;
    loop {
        let x = g.pindex(v)?;
        let le = &loops[x];
        let total = 1.0 + 2.0 * le.rate;
        clock += rng.sample::<f64, _>(Exp1) / total;
        if clock > t {
            return Some((x, hol));
        }
        let u = rng.random::<f64>() * total;
        if u < 1.0 {
            let e = walker.jump(v, rng);
            hol = h.hol(e) * hol;
            v = g.edge(e).dst;
        } else if u < 1.0 + le.rate {
            hol = &le.u * hol;
        } else {
            hol = &le.u_inv * hol;
        }
    }
}

/// Row blocks `E_x[hol(·)* 1{X_t = y}]` from the hidden-loop walk and from
/// the twisted holonomy of ordinary walks.
fn compare(ctx: &Ctx, rep: &mut CheckReport, label: &str, h: &Connection, pot: &Potential) -> Result<()> {
    let g = &ctx.fx.graph;
    let r = h.rank();
    let n = g.n_proper();
    if pot.min_eigenvalue() < -1e-12 {
        return Err(Error::NonPsdPotential(label.into()));
    }
    let loops: Vec<LoopEdge> = (0..n).map(|x| LoopEdge::new(pot.h(x))).collect();
    let walker = WalkSampler::new(g, &g.transition());
    let mut means = [CMat::zeros(r * n, r * n), CMat::zeros(r * n, r * n)];
    let mut ses = means.clone();
    for x in 0..n {
        let init = || (MatAcc::new(r, r * n), MatAcc::new(r, r * n));
        let tag = format!("hidden-loops/{label}/{x}");
        let (lit, tw) = mc::run_batches(ctx.seed(), &tag, ctx.samples(), init, |rng, count, acc| {
            for _ in 0..count {
                match hidden_walk(g, h, &loops, &walker, g.proper_vertex(x), T, rng) {
                    Some((y, m)) => acc.0.push_sparse(&[(0, y * r, m.adjoint())]),
                    None => acc.0.push_sparse(&[]),
                }
                let cut = walker.sample(g, g.proper_vertex(x), rng)?.restrict(T);
                match g.pindex(cut.end()) {
                    Some(y) => acc.1.push_sparse(&[(0, y * r, twisted_holonomy(g, h, pot, &cut)?.adjoint())]),
                    None => acc.1.push_sparse(&[]),
                }
            }
            Ok(())
        })?;
        for (k, a) in [lit, tw].iter().enumerate() {
            means[k].rows_mut(x * r, r).copy_from(&a.mean());
            ses[k].rows_mut(x * r, r).copy_from(&a.stderr_bounded(1.0));
        }
    }
    let exact = LaplacianOperator::new(g, h, pot).heat(T);
    rep.push(Comparison::mc_mat(
        &format!("{label}: hidden-loop plain holonomy vs twisted holonomy, t = {T}"),
        &means[0],
        &ses[0],
        &means[1],
        Some(&ses[1]),
    ));
    rep.push(Comparison::mc_mat(
        &format!("{label}: hidden-loop plain holonomy vs e^(−tΔ)"),
        &means[0],
        &ses[0],
        &exact,
        None,
    ));
    rep.push(Comparison::mc_mat(&format!("{label}: twisted holonomy vs e^(−tΔ)"), &means[1], &ses[1], &exact, None));
    Ok(())
}

/// Scalar, diagonal and general potentials, plus the one-vertex Poisson
/// reduction `E[i^{N₊ − N₋}] = e^{−2t}`.
pub fn hidden_loops(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let n = g.n_proper();
    let r = b.rank;
    let c: Vec<f64> = (0..n).map(|x| 0.3 + 0.2 * (x % 3) as f64).collect();
    compare(ctx, rep, "scalar H", h, &Potential::scalar(g, b, &c)?)?;
    let diag: Vec<CMat> = (0..n)
        .map(|x| CMat::from_diagonal(&crate::CVec::from_fn(r, |i, _| C64::new(0.2 + 0.4 * ((x + i) % 3) as f64, 0.0))))
        .collect();
    compare(ctx, rep, "diagonal H", h, &Potential::new(g, b, diag)?)?;
    compare(ctx, rep, "test potential", h, &ctx.pot)?;

    // One vertex, H = 2, rate 1, U = i: only loop-edge jumps matter.
    let le = LoopEdge::new(&CMat::from_element(1, 1, C64::new(2.0, 0.0)));
    let (re, im) = mc::run_batches(
        ctx.seed(),
        "hidden-loops/poisson",
        ctx.samples(),
        || (ScalarAcc::default(), ScalarAcc::default()),
        |rng, count, acc| {
            for _ in 0..count {
                let mut z = C64::new(1.0, 0.0);
                let mut clock = rng.sample::<f64, _>(Exp1) / (2.0 * le.rate);
                while clock <= T {
                    z *= if rng.random::<bool>() { le.u[(0, 0)] } else { le.u_inv[(0, 0)] };
                    clock += rng.sample::<f64, _>(Exp1) / (2.0 * le.rate);
                }
                acc.0.push(z.re);
                acc.1.push(z.im);
            }
            Ok(())
        },
    )?;
    rep.push(Comparison::mc(
        "H = 2 at one vertex: E[U^(N₊−N₋)] vs e^(−2t), real part",
        re.mean(),
        re.stderr(),
        (-2.0 * T).exp(),
        0.0,
    ));
    rep.push(Comparison::mc("H = 2 at one vertex: imaginary part vanishes", im.mean(), im.stderr(), 0.0, 0.0));
    Ok(())
}

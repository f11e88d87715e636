//! Checks on the Laplacian, its Green section, heat kernel and determinant,
//! and on gauge covariance.

use super::{random_vec, CheckReport, Comparison, Ctx};
use crate::bundle::{twisted_holonomy, Bundle, Connection, GaugeTransform, Potential};
use crate::calculus::{self, LaplacianOperator, OneForm, Section};
use crate::fields::{laplace_exact, shifted_square_exact, wick_moment};
use crate::fixtures;
use crate::graph::Graph;
use crate::linalg;
use crate::mc;
use crate::measures::{self, mu_holding, SkeletonKind, SkeletonSampler};
use crate::paths::WalkSampler;
use crate::stats::MatAcc;
use crate::{CMat, Error, Result, C64};
use rand::Rng;

const HEAT_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

/// Cutoff so that the skeleton tail stays below this absolute mass.
const SKELETON_TAIL: f64 = 1e-4;

fn vid(g: &Graph, x: usize) -> &str {
    g.vertex_id(g.proper_vertex(x))
}

/// `diag(λ_x⁻¹ Id)` in standard coordinates.
fn lambda_inv(g: &Graph, r: usize) -> CMat {
    let lam = g.lambda_proper();
    CMat::from_diagonal(&crate::CVec::from_fn(r * lam.len(), |i, _| C64::new(1.0 / lam[i / r], 0.0)))
}

/// Green section of FIG6 against `(χ(2 − (m + m*)) + κ)⁻¹` for random
/// conductances and loop unitaries.
pub fn green_closed_form(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let tol = ctx.tol(1e-12);
    let mut rng = mc::rng(ctx.seed(), "green-closed-form", 0);
    let mut worst: f64 = 0.0;
    let draws = 50;
    for k in 0..draws {
        let chi = 0.2 + 2.8 * rng.random::<f64>();
        let kappa = 0.2 + 2.8 * rng.random::<f64>();
        let r = 1 + k % 3;
        let complex = k % 2 == 0;
        let b = fixtures::bundle(
            r,
            if complex { crate::bundle::ScalarField::Complex } else { crate::bundle::ScalarField::Real },
        );
        let g = fixtures::fig6_graph(chi, kappa);
        let m = linalg::haar_unitary(r, complex, &mut rng);
        let h = fixtures::fig6_connection(&g, &b, m.clone())?;
        let green = calculus::green_section(&g, &h, &Potential::zero(&g, &b))?;
        let id = linalg::identity(r);
        let closed = ((id.scale(2.0) - (&m + m.adjoint())).scale(chi) + id.scale(kappa))
            .try_inverse()
            .ok_or(Error::SingularOperator(f64::INFINITY))?;
        worst = worst.max(super::rel_mat(&green, &closed));
    }
    rep.push(Comparison::worst("FIG6 random χ, κ, loop unitary: green section vs closed form", worst, draws, tol));

    let triv = fixtures::fig6_trivial();
    let g1 = calculus::green_section(&triv.graph, &triv.connection, &triv.potential)?;
    rep.push(Comparison::exact_mat("FIG6 trivial: G = 1", &g1, &CMat::from_element(1, 1, C64::new(1.0, 0.0)), tol));
    let diag = fixtures::fig6_diag();
    let g2 = calculus::green_section(&diag.graph, &diag.connection, &diag.potential)?;
    let want = CMat::from_diagonal(&nalgebra::dvector![C64::new(1.0 / 3.0, 0.0), C64::new(0.2, 0.0)]);
    rep.push(Comparison::exact_mat("FIG6 hol = diag(i, −1): G = diag(1/3, 1/5)", &g2, &want, tol));
    Ok(())
}

/// Heat kernel blocks against walk averages of `hol_{h,H}(γ|[0,t]⁻¹)`.
pub fn feynman_kac(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, h, pot) = (&ctx.fx.graph, &ctx.fx.connection, &ctx.pot);
    let r = h.rank();
    let n = g.n_proper();
    let op = LaplacianOperator::new(g, h, pot);
    let walker = WalkSampler::new(g, &g.transition());
    let mut mean = vec![CMat::zeros(r * n, r * n); HEAT_TIMES.len()];
    let mut se = mean.clone();
    for x in 0..n {
        let init = || vec![MatAcc::new(r, r * n); HEAT_TIMES.len()];
        let accs = mc::run_batches(ctx.seed(), &format!("feynman-kac/{x}"), ctx.samples(), init, |rng, count, acc| {
            for _ in 0..count {
                let path = walker.sample(g, g.proper_vertex(x), rng)?;
                for (k, &t) in HEAT_TIMES.iter().enumerate() {
                    let cut = path.restrict(t);
                    match g.pindex(cut.end()) {
                        Some(y) => {
                            let m = twisted_holonomy(g, h, pot, &cut)?.adjoint();
                            acc[k].push_sparse(&[(0, y * r, m)]);
                        }
                        None => acc[k].push_sparse(&[]),
                    }
                }
            }
            Ok(())
        })?;
        for (k, a) in accs.iter().enumerate() {
            mean[k].rows_mut(x * r, r).copy_from(&a.mean());
            se[k].rows_mut(x * r, r).copy_from(&a.stderr_bounded(hol_bound(pot, HEAT_TIMES[k])));
        }
    }
    for (k, &t) in HEAT_TIMES.iter().enumerate() {
        let label = format!("t = {t}: walk average vs e^(−tΔ), all blocks");
        rep.push(Comparison::mc_mat(&label, &mean[k], &se[k], &op.heat(t), None));
    }
    rep.note(format!("{} walks per start vertex, potential min eigenvalue {:.3}", ctx.samples(), pot.min_eigenvalue()));
    Ok(())
}

/// Operator-norm bound on `hol_{h,H}` over a path of duration `t`.
fn hol_bound(pot: &Potential, t: f64) -> f64 {
    ((-pot.min_eigenvalue()).max(0.0) * t).exp()
}

/// Green section against the `ν`-walk estimator, and against the time
/// integral of the heat kernel.
pub fn green_identity(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, h, pot) = (&ctx.fx.graph, &ctx.fx.connection, &ctx.pot);
    let r = h.rank();
    let n = g.n_proper();
    let op = LaplacianOperator::new(g, h, pot);
    op.check_positive()?;
    let green = op.green()?;
    let mut mean = CMat::zeros(r * n, r * n);
    let mut se = mean.clone();
    for x in 0..n {
        let acc = measures::nu_row_mc(g, h, pot, x, ctx.samples(), ctx.seed(), &format!("green-identity/{x}"))?;
        mean.rows_mut(x * r, r).copy_from(&acc.mean());
        se.rows_mut(x * r, r).copy_from(&acc.stderr());
    }
    rep.push(Comparison::mc_mat("ν-walk estimate vs green section, all blocks", &mean, &se, &green, None));
    let via_heat = calculus::integrated_heat(&op) * lambda_inv(g, r);
    rep.push(Comparison::exact_mat("∫ e^(−tΔ) dt · Λ⁻¹ vs green section", &via_heat, &green, ctx.tol(1e-8)));
    Ok(())
}

/// `λ_x E_x[F(γ⁻¹) 1{γ_t = y}] = λ_y E_y[F(γ) 1{γ_t = x}]` with
/// `F = Tr hol_{h,H}`, both sides by Monte Carlo and against the heat
/// kernel.
pub fn reversibility(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, h, pot) = (&ctx.fx.graph, &ctx.fx.connection, &ctx.pot);
    let r = h.rank();
    let n = g.n_proper();
    let t = 1.0;
    let op = LaplacianOperator::new(g, h, pot);
    let heat = op.heat(t);
    let pairs: Vec<(usize, usize)> = if n > 1 { vec![(0, 0), (0, n - 1)] } else { vec![(0, 0)] };
    for (x, y) in pairs {
        let f = |p: &crate::paths::ContinuousPath| {
            twisted_holonomy(g, h, pot, p).map(|m| m.trace()).unwrap_or(C64::new(f64::NAN, 0.0))
        };
        let est =
            measures::reversibility_mc(g, x, y, t, f, ctx.samples(), ctx.seed(), &format!("reversibility/{x}-{y}"))?;
        let lam_x = g.lambda(g.proper_vertex(x));
        let exact = linalg::mat_block(&heat, x, y, r).trace() * lam_x;
        let name = format!("({}, {})", vid(g, x), vid(g, y));
        let bound = |v: usize| r as f64 * g.lambda(g.proper_vertex(v)) * hol_bound(pot, t);
        let (bl, br) = (bound(x), bound(y));
        for (part, l, rr, e) in [("Re", &est.lhs.0, &est.rhs.0, exact.re), ("Im", &est.lhs.1, &est.rhs.1, exact.im)] {
            let (ls, rs) = (l.stderr_bounded(bl), rr.stderr_bounded(br));
            rep.push(Comparison::mc(
                &format!("{name} {part}: reversed side vs forward side"),
                l.mean(),
                ls,
                rr.mean(),
                rs,
            ));
            rep.push(Comparison::mc(&format!("{name} {part}: reversed side vs λ Tr heat block"), l.mean(), ls, e, 0.0));
        }
    }
    Ok(())
}

/// Series and Monte Carlo forms of the log-determinant identities.
pub fn log_det(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let pot = &ctx.pot;
    let r = h.rank();
    let tol = ctx.tol(1e-6);
    if pot.min_eigenvalue() < 0.0 {
        return Err(Error::NonPsdPotential("log-det test potential".into()));
    }
    let zero = Potential::zero(g, b);
    let op0 = LaplacianOperator::new(g, h, &zero);
    let op = LaplacianOperator::new(g, h, pot);

    // Loop traces of the plain holonomy: Σ_n Tr(Q_hⁿ)/n = −log det Δ_h.
    let n_loop = measures::choose_n_max(|m| measures::loop_skeleton_masses(g, m), SKELETON_TAIL, 5000);
    let q_h = linalg::identity(op0.dim()) - op0.matrix();
    let mut pw = linalg::identity(op0.dim());
    let mut series = 0.0;
    for k in 1..=n_loop {
        pw = &pw * &q_h;
        series += pw.trace().re / k as f64;
    }
    let tail = r as f64 * measures::loop_skeleton_masses(g, n_loop).tail_bound;
    rep.push(Comparison::exact_budget(
        &format!("Σ_(n≤{n_loop}) Tr(Q_hⁿ)/n vs −logdet Δ_h"),
        series,
        -op0.logdet()?,
        tol,
        tail,
    ));

    // Traced form: loops with and without the potential.
    let const_part: f64 = (0..g.n_proper()).map(|x| pot.eig(x).values.iter().map(|m| m.ln_1p()).sum::<f64>()).sum();
    let target = op0.logdet()? - op.logdet()? + const_part;
    let est = measures::mu_integral_mc(
        g,
        &[(h, pot, 1.0), (h, &zero, -1.0)],
        SkeletonKind::Loops,
        n_loop,
        ctx.samples(),
        ctx.seed(),
        "log-det/trace",
    )?;
    let acc = est.trace.expect("loop estimate");
    rep.push(Comparison::mc_budget(
        "∫ Tr(hol_(h,H) − hol_h) dμ* vs logdet Δ_h − logdet Δ_(h,H) + Σ Tr log(I + H)",
        acc.mean(),
        acc.stderr(),
        target,
        0.0,
        tol * target.abs().max(1.0) + est.tail_bound,
    ));

    // Matrix form over all non-constant paths.
    let n_path = measures::choose_n_max(|m| measures::path_skeleton_masses(g, m), SKELETON_TAIL, 5000);
    let log_ih = linalg::block_diag(&(0..g.n_proper()).map(|x| pot.eig(x).map_real(f64::ln_1p)).collect::<Vec<_>>());
    let target = &log_ih - op.log()?;
    let est = measures::mu_integral_mc(
        g,
        &[(h, pot, 1.0)],
        SkeletonKind::Paths,
        n_path,
        ctx.samples(),
        ctx.seed(),
        "log-det/paths",
    )?;
    let acc = est.matrix.expect("path estimate");
    rep.push(Comparison::mc_mat_budget(
        "∫ hol_(h,H)(γ⁻¹) dμ over non-constant paths vs log(I + H) − log Δ_(h,H)",
        &acc.mean(),
        &acc.stderr(),
        &target,
        tol + est.tail_bound,
    ));

    // Difference of two pairs.
    let mut rng = mc::rng(super::FIXED_SEED, "log-det/second-pair", 0);
    let h2 = Connection::random(g, b, &mut rng);
    let pot2 = Potential::random(g, b, 0.0, 1.0, &mut rng);
    let op2 = LaplacianOperator::new(g, &h2, &pot2);
    let log_ih2 = linalg::block_diag(&(0..g.n_proper()).map(|x| pot2.eig(x).map_real(f64::ln_1p)).collect::<Vec<_>>());
    let target = op2.log()? - op.log()? - (&log_ih2 - &log_ih);
    let est = measures::mu_integral_mc(
        g,
        &[(h, pot, 1.0), (&h2, &pot2, -1.0)],
        SkeletonKind::Paths,
        n_path,
        ctx.samples(),
        ctx.seed(),
        "log-det/difference",
    )?;
    let acc = est.matrix.expect("path estimate");
    rep.push(Comparison::mc_mat_budget(
        "∫ (hol_(h,H) − hol_(h',H'))(γ⁻¹) dμ vs log Δ' − log Δ − log(I + H') + log(I + H)",
        &acc.mean(),
        &acc.stderr(),
        &target,
        tol + est.tail_bound,
    ));
    rep.note(format!("loop cutoff {n_loop}, path cutoff {n_path} jumps"));
    Ok(())
}

/// `σ_h ≥ σ` for Haar connections on random graphs.
pub fn kato(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let mut rng = mc::rng(ctx.seed(), "kato", 0);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for gi in 0..5 {
        let g = Graph::build(&fixtures::random_graph_spec(3 + gi, 1 + gi, &mut rng))?;
        let sigma = calculus::smallest_eigenvalue(&g, &Connection::trivial(&g, &Bundle::real(1)));
        for k in 0..40 {
            let r = 1 + k % 3;
            let b = if k % 2 == 0 { Bundle::complex(r) } else { Bundle::real(r) };
            let h = Connection::random(&g, &b, &mut rng);
            worst = worst.min(calculus::smallest_eigenvalue(&g, &h) - sigma);
            count += 1;
        }
    }
    rep.push(Comparison::bound(
        &format!("min σ_h − σ over {count} Haar connections on 5 random graphs"),
        worst,
        -1e-12,
    ));
    let (g, h) = (&ctx.fx.graph, &ctx.fx.connection);
    let sigma = calculus::smallest_eigenvalue(g, &Connection::trivial(g, &Bundle::real(1)));
    rep.push(Comparison::bound("fixture connection: σ_h − σ", calculus::smallest_eigenvalue(g, h) - sigma, -1e-12));
    Ok(())
}

fn rel_c(a: C64, b: C64) -> f64 {
    let d = (a - b).norm();
    let s = a.norm().max(b.norm());
    if s < super::ABS_FLOOR {
        d / super::ABS_FLOOR
    } else {
        d / s
    }
}

/// Adjointness of `d` and `d*`, and invariance of every checked quantity
/// under random gauge transformations.
pub fn gauge(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let pot = &ctx.pot;
    let r = b.rank;
    let n = g.n_proper();
    let complex = b.field.is_complex();
    let tol = ctx.tol(1e-10);
    let draws = 1000;
    let mut rng = mc::rng(ctx.seed(), "gauge", 0);
    let walker = WalkSampler::new(g, &g.transition());
    let loops = SkeletonSampler::new(g, SkeletonKind::Loops, 12);

    let op = LaplacianOperator::new(g, h, pot);
    let green = op.green()?;
    let logdet = op.logdet()?;
    let mut worst = [0.0f64; 10];
    for _ in 0..draws {
        // Adjointness on the whole graph.
        let f_full = random_vec(r * g.n_vertices(), complex, &mut rng);
        let raw = (0..g.n_edges()).map(|_| random_vec(r, complex, &mut rng)).collect();
        let w = OneForm::antisymmetrize(g, h, raw);
        let df = calculus::differential(g, h, &Section::full(f_full.clone()))?;
        let lhs = calculus::one_form_inner(g, &df, &w);
        let rhs = calculus::inner_full(g, r, &f_full, &calculus::codifferential(g, h, &w).data);
        worst[0] = worst[0].max(rel_c(lhs, rhs));

        let j = GaugeTransform::random(g, b, &mut rng);
        let jm = j.proper_block_diag(g);
        let (jh, jpot) = (j.connection(g, h), j.potential(g, pot));
        let jop = LaplacianOperator::new(g, &jh, &jpot);
        worst[1] = worst[1].max(super::rel_mat(jop.matrix(), &(&jm * op.matrix() * jm.adjoint())));
        worst[2] = worst[2].max(super::rel_mat(&jop.green()?, &(&jm * &green * jm.adjoint())));

        let f = random_vec(r * n, complex, &mut rng);
        let jf = j.section(g, &f);
        worst[3] = worst[3]
            .max(super::rel(calculus::dirichlet_energy(g, &jh, &jpot, &jf), calculus::dirichlet_energy(g, h, pot, &f)));

        let path = walker.sample(g, g.proper_vertex(rng.random_range(0..n)), &mut rng)?.restrict(1.0);
        let t = twisted_holonomy(g, h, pot, &path)?;
        let jt = twisted_holonomy(g, &jh, &jpot, &path)?;
        worst[4] = worst[4].max(super::rel_mat(&jt, &(j.at(path.end()) * t * j.at(path.start()).adjoint())));
        if loops.total_mass() > 0.0 {
            let sk = loops.sample(&mut rng);
            let lp = sk.with_holding(g, mu_holding(sk.len(), &mut rng));
            worst[5] = worst[5]
                .max(rel_c(twisted_holonomy(g, &jh, &jpot, &lp)?.trace(), twisted_holonomy(g, h, pot, &lp)?.trace()));
        }

        worst[6] = worst[6].max(super::rel(jop.logdet()?, logdet));
        let fs = f.unscale(calculus::inner(g, r, &f, &f).re.sqrt() * 2.0);
        let jfs = j.section(g, &fs);
        worst[7] = worst[7].max(super::rel(laplace_exact(g, b, &jop, &jfs)?, laplace_exact(g, b, &op, &fs)?));
        worst[8] = worst[8].max(super::rel(
            shifted_square_exact(g, b, &jh, &jpot, &jfs)?.value,
            shifted_square_exact(g, b, h, pot, &fs)?.value,
        ));
        let secs: Vec<_> = (0..4).map(|_| random_vec(r * n, complex, &mut rng)).collect();
        let jsecs: Vec<_> = secs.iter().map(|s| j.section(g, s)).collect();
        worst[9] = worst[9].max(rel_c(
            wick_moment(g, b, &jop, &jsecs[..2], &jsecs[2..])?,
            wick_moment(g, b, &op, &secs[..2], &secs[2..])?,
        ));
    }
    let labels = [
        "(df, ω) = (f, d*ω)",
        "Δ_(j·h, j·H) = J Δ_(h,H) J*",
        "G_(j·h, j·H) = J G_(h,H) J*",
        "energy of j·f under (j·h, j·H)",
        "twisted holonomy conjugation along walks",
        "trace of twisted holonomy along loops",
        "logdet Δ",
        "Laplace transform of the field",
        "shifted-square expectation",
        "Wick moment of order (2, 2)",
    ];
    for (l, w) in labels.iter().zip(worst) {
        rep.push(Comparison::worst(l, w, draws, tol));
    }
    Ok(())
}

//! Checks relating the covariant free field to walks: covariance, Laplace
//! transform, the Dynkin and Eisenbaum isomorphisms and the annealed
//! moment formula.

use super::{CheckReport, Comparison, Ctx};
use crate::bundle::{Bundle, Connection, Potential};
use crate::calculus::{self, LaplacianOperator};
use crate::fields::{self, annealed_moments, pairing, pairings_sum, permanent, AnnealedSpec, GffSampler};
use crate::graph::Graph;
use crate::linalg;
use crate::mc;
use crate::measures::{self, phi_scalar};
use crate::paths::{ContinuousPath, WalkSampler};
use crate::stats::{MatAcc, RatioAcc};
use crate::{CMat, CVec, Error, Result, C64};

/// `Λ` in standard coordinates.
fn lambda_mat(g: &Graph, r: usize) -> CMat {
    let lam = g.lambda_proper();
    CMat::from_diagonal(&CVec::from_fn(r * lam.len(), |i, _| C64::new(lam[i / r], 0.0)))
}

fn scalar_mat(z: C64) -> CMat {
    CMat::from_element(1, 1, z)
}

fn column(v: &CVec) -> CMat {
    CMat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `e^{−(β/2)(φ, Hφ)}`.
fn tilt(g: &Graph, b: &Bundle, hm: &CMat, phi: &CVec) -> f64 {
    (-0.5 * b.beta() * pairing(g, b.rank, phi, &(hm * phi)).re).exp()
}

/// Field covariance, Laplace transform and shifted-square expectation.
pub fn gff(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let pot = &ctx.pot;
    let op = LaplacianOperator::new(g, h, pot);
    let sampler = GffSampler::new(g, b, h, pot)?;
    let acc = fields::covariance_mc(&sampler, ctx.samples(), ctx.seed(), "gff/covariance")?;
    rep.push(Comparison::mc_mat("E[Φ Φ*] vs G_(h,H), all entries", &acc.mean(), &acc.stderr(), &op.green()?, None));
    for k in 0..3 {
        let f = ctx.section(k);
        let q = pairing(g, b.rank, &f, &op.solve(&f)?).re;
        let f = f.scale((0.25 / (0.5 * b.beta() * q)).sqrt());
        let exact = fields::laplace_exact(g, b, &op, &f)?;
        let mc = fields::laplace_mc(g, b, &sampler, &f, ctx.samples(), ctx.seed().wrapping_add(k))?;
        rep.push(Comparison::mc(
            &format!("section {k}: E|e^((β/2)(f,Φ))|² vs e^((β/2)(f,Δ⁻¹f))"),
            mc.mean(),
            mc.stderr(),
            exact,
            0.0,
        ));
    }
    let f = ctx.section(3);
    let exact = fields::shifted_square_exact(g, b, h, pot, &f)?;
    let mc = fields::shifted_square_mc(g, b, h, pot, &f, ctx.samples(), ctx.seed())?;
    rep.push(Comparison::mc(
        "E^h[e^(−(β/2)(Φ+f, H(Φ+f)))] vs determinant ratio and completed square",
        mc.mean(),
        mc.stderr(),
        exact.value,
        0.0,
    ));
    Ok(())
}

/// `det(I + CA)^{−β/2} (C⁻¹ + A)⁻¹` with `C = G_h` and `A = ΛH`: the tilted
/// second moment by Gaussian completion.
fn tilted_second_moment(g: &Graph, b: &Bundle, h: &Connection, pot: &Potential) -> Result<CMat> {
    let c = LaplacianOperator::new(g, h, &Potential::zero(g, b)).green()?;
    let a = lambda_mat(g, b.rank) * pot.block_diag();
    let d = c.nrows();
    let det = (linalg::identity(d) + &c * &a).determinant();
    let c_inv = c.try_inverse().ok_or(Error::SingularOperator(f64::INFINITY))?;
    let m = (c_inv + a).try_inverse().ok_or(Error::SingularOperator(f64::INFINITY))?;
    Ok(m.scale(det.re.powf(-0.5 * b.beta())))
}

/// `∫ e^{−Σ λ_z H_z ℓ_z(γ)} dν_{x,·}` for a scalar potential on a trivial
/// line bundle, written with the local times of the walk.
fn classical_nu_row(g: &Graph, c: &[f64], path: &ContinuousPath) -> Vec<f64> {
    let lam = g.lambda_proper();
    let mut local = vec![0.0; g.n_proper()];
    let mut row = vec![0.0; g.n_proper()];
    for k in 0..path.edges.len() {
        let y = g.pindex(path.vertices[k]).expect("proper until absorbed");
        let tau = path.holding[k];
        let exponent: f64 = (0..lam.len()).map(|z| lam[z] * c[z] * local[z]).sum();
        row[y] += (-exponent).exp() * phi_scalar(c[y], tau) / lam[y];
        local[y] += tau / lam[y];
    }
    row
}

/// Tilted `ν`-walk estimate against the tilted field moment, exactly, by
/// joint Monte Carlo, and in the classical local-time form.
pub fn dynkin(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let pot = &ctx.pot;
    let r = b.rank;
    let n = g.n_proper();
    let zero = Potential::zero(g, b);
    let op0 = LaplacianOperator::new(g, h, &zero);
    let op = LaplacianOperator::new(g, h, pot);
    op.check_positive()?;
    let z = (0.5 * b.beta() * (op0.logdet()? - op.logdet()?)).exp();
    let lhs = op.green()?.scale(z);
    let rhs = tilted_second_moment(g, b, h, pot)?;
    rep.push(Comparison::exact_mat(
        "E^h[e^(−(β/2)(Φ,HΦ))] G_(h,H) vs tilted second moment, closed forms",
        &lhs,
        &rhs,
        ctx.tol(1e-10),
    ));

    let sampler = GffSampler::new(g, b, h, &zero)?;
    let hm = pot.block_diag();
    let walker = WalkSampler::new(g, &g.transition());
    let mut means = [CMat::zeros(r * n, r * n), CMat::zeros(r * n, r * n)];
    let mut ses = means.clone();
    for x in 0..n {
        let init = || (MatAcc::new(r, r * n), MatAcc::new(r, r * n));
        let (l, rr) = mc::run_batches(ctx.seed(), &format!("dynkin/{x}"), ctx.samples(), init, |rng, count, acc| {
            for _ in 0..count {
                let phi = sampler.sample(rng);
                let path = walker.sample(g, g.proper_vertex(x), rng)?;
                acc.0.push(&measures::nu_row_sample(g, h, pot, &path).scale(tilt(g, b, &hm, &phi)));
                let psi = sampler.sample(rng);
                let outer = linalg::block(&psi, x, r) * psi.adjoint();
                acc.1.push(&outer.scale(tilt(g, b, &hm, &psi)));
            }
            Ok(())
        })?;
        for (k, a) in [l, rr].iter().enumerate() {
            means[k].rows_mut(x * r, r).copy_from(&a.mean());
            ses[k].rows_mut(x * r, r).copy_from(&a.stderr());
        }
    }
    rep.push(Comparison::mc_mat(
        "joint field ⊗ ν-walk side vs tilted field side",
        &means[0],
        &ses[0],
        &means[1],
        Some(&ses[1]),
    ));
    rep.push(Comparison::mc_mat("joint field ⊗ ν-walk side vs exact", &means[0], &ses[0], &rhs, None));
    rep.push(Comparison::mc_mat("tilted field side vs exact", &means[1], &ses[1], &rhs, None));

    // Trivial real line bundle with a scalar potential, local-time form.
    let b1 = Bundle::real(1);
    let h1 = Connection::trivial(g, &b1);
    let c: Vec<f64> = (0..n).map(|x| 0.2 + 0.15 * (x % 4) as f64).collect();
    let pot1 = Potential::scalar(g, &b1, &c)?;
    let rhs1 = tilted_second_moment(g, &b1, &h1, &pot1)?;
    let s1 = GffSampler::new(g, &b1, &h1, &Potential::zero(g, &b1))?;
    let lam = g.lambda_proper();
    let weight = |phi: &CVec| (-0.5 * (0..n).map(|z| lam[z] * c[z] * phi[z].re * phi[z].re).sum::<f64>()).exp();
    let mut cl = [CMat::zeros(n, n), CMat::zeros(n, n)];
    let mut cs = cl.clone();
    for x in 0..n {
        let init = || (MatAcc::new(1, n), MatAcc::new(1, n));
        let (l, rr) =
            mc::run_batches(ctx.seed(), &format!("dynkin/classical/{x}"), ctx.samples(), init, |rng, count, acc| {
                for _ in 0..count {
                    let phi = s1.sample(rng);
                    let path = walker.sample(g, g.proper_vertex(x), rng)?;
                    let w = weight(&phi);
                    let row = classical_nu_row(g, &c, &path);
                    acc.0.push(&CMat::from_fn(1, n, |_, y| C64::new(w * row[y], 0.0)));
                    let psi = s1.sample(rng);
                    let w = weight(&psi);
                    acc.1.push(&CMat::from_fn(1, n, |_, y| C64::new(w * psi[x].re * psi[y].re, 0.0)));
                }
                Ok(())
            })?;
        for (k, a) in [l, rr].iter().enumerate() {
            cl[k].rows_mut(x, 1).copy_from(&a.mean());
            cs[k].rows_mut(x, 1).copy_from(&a.stderr());
        }
    }
    rep.push(Comparison::mc_mat(
        "trivial line bundle: local-time side vs field side",
        &cl[0],
        &cs[0],
        &cl[1],
        Some(&cs[1]),
    ));
    rep.push(Comparison::mc_mat("trivial line bundle: local-time side vs exact", &cl[0], &cs[0], &rhs1, None));
    rep.note("local-time form uses e^(−½Σλ_xH_x|Φ_x|² − Σλ_xH_xℓ_x(γ))");
    Ok(())
}

/// Per-vertex walk estimate of `Σ_y λ_y ∫ hol_{h,H}(γ⁻¹) v(y) dν_{x,y}`.
fn nu_apply_mc(ctx: &Ctx, h: &Connection, pot: &Potential, v: &CVec, tag: &str) -> Result<(CMat, CMat)> {
    let g = &ctx.fx.graph;
    let r = h.rank();
    let n = g.n_proper();
    let lv = lambda_mat(g, r) * v;
    let walker = WalkSampler::new(g, &g.transition());
    let mut mean = CMat::zeros(r * n, 1);
    let mut se = mean.clone();
    for x in 0..n {
        let acc = mc::run_batches(
            ctx.seed(),
            &format!("{tag}/{x}"),
            ctx.samples(),
            || MatAcc::new(r, 1),
            |rng, count, acc| {
                for _ in 0..count {
                    let path = walker.sample(g, g.proper_vertex(x), rng)?;
                    acc.push(&column(&(measures::nu_row_sample(g, h, pot, &path) * &lv)));
                }
                Ok(())
            },
        )?;
        mean.rows_mut(x * r, r).copy_from(&acc.mean());
        se.rows_mut(x * r, r).copy_from(&acc.stderr());
    }
    Ok((mean, se))
}

/// `E[e^{−(β/2)(Φ+f, H(Φ+f))}(Φ + f)] / E[e^{…}]` under `P^h`.
fn tilted_mean_mc(ctx: &Ctx, pot: &Potential, f: &CVec, tag: &str) -> Result<(CMat, CMat)> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let sampler = GffSampler::new(g, b, h, &Potential::zero(g, b))?;
    let hm = pot.block_diag();
    let d = f.len();
    let acc = mc::run_batches(
        ctx.seed(),
        tag,
        ctx.samples(),
        || RatioAcc::new(d),
        |rng, count, acc| {
            for _ in 0..count {
                let v = sampler.sample(rng) + f;
                let w = tilt(g, b, &hm, &v);
                let y: Vec<C64> = v.iter().map(|z| z * w).collect();
                acc.push(w, &y);
            }
            Ok(())
        },
    )?;
    let mean = CMat::from_column_slice(d, 1, &acc.ratio());
    let se = CMat::from_column_slice(d, 1, &acc.stderr());
    Ok((mean, se))
}

/// Walk and field sides of the Eisenbaum identity and of its stopped-walk
/// form, with the classical constant-boundary reduction.
pub fn eisenbaum(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let pot = &ctx.pot;
    let r = b.rank;
    let n = g.n_proper();
    let tol = ctx.tol(1e-8);
    let zero = Potential::zero(g, b);
    let op0 = LaplacianOperator::new(g, h, &zero);
    let op = LaplacianOperator::new(g, h, pot);
    op.check_positive()?;
    let c = op0.green()?;
    let c_inv = c.clone().try_inverse().ok_or(Error::SingularOperator(f64::INFINITY))?;
    let lam = lambda_mat(g, r);

    // Potential-theoretic form by Gaussian completion of the tilted mean.
    let f = ctx.section(0);
    let gsec = op0.solve(&f)?;
    let a = &lam * pot.block_diag();
    let completion = -((&c_inv + &a).try_inverse().ok_or(Error::SingularOperator(f64::INFINITY))? * &a * &gsec);
    let lhs = op.solve(&f)? - &gsec;
    rep.push(Comparison::exact_mat(
        "Δ_(h,H)⁻¹f − Δ_h⁻¹f vs tilted mean by completion",
        &column(&lhs),
        &column(&completion),
        tol,
    ));
    let a0 = CMat::zeros(a.nrows(), a.ncols());
    let completion0 = -((&c_inv + &a0).try_inverse().ok_or(Error::SingularOperator(f64::INFINITY))? * &a0 * &gsec);
    rep.push(Comparison::exact_mat(
        "H = 0: tilted mean of the centred field vanishes",
        &column(&completion0),
        &CMat::zeros(r * n, 1),
        tol,
    ));

    // Walk side and field side at every vertex.
    let df = op0.apply(&f);
    let exact = column(&op.solve(&df)?);
    let (wm, ws) = nu_apply_mc(ctx, h, pot, &df, "eisenbaum/walk")?;
    let (fm, fs) = tilted_mean_mc(ctx, pot, &f, "eisenbaum/field")?;
    rep.push(Comparison::mc_mat("Σ λ_y ∫ hol(γ⁻¹)Δf(y) dν_(x,y) vs tilted mean of Φ + f", &wm, &ws, &fm, Some(&fs)));
    rep.push(Comparison::mc_mat("walk side vs Δ_(h,H)⁻¹Δ_h f", &wm, &ws, &exact, None));
    rep.push(Comparison::mc_mat("field side vs Δ_(h,H)⁻¹Δ_h f", &fm, &fs, &exact, None));

    // Stopped walks with a boundary section on the rim.
    let rim = g.rim();
    let mut brng = mc::rng(super::FIXED_SEED, "eisenbaum/boundary", 0);
    let mut bsec = CVec::zeros(r * n);
    for &x in &rim {
        linalg::set_block(&mut bsec, x, r, &super::random_vec(r, b.field.is_complex(), &mut brng));
    }
    let kappa = CMat::from_diagonal(&CVec::from_fn(r * n, |i, _| C64::new(g.kappa(g.proper_vertex(i / r)), 0.0)));
    // Both sides are linear in b. Keep the spread of the field-side log
    // weight, whose cross term (G_h K b, ΛHΦ) has variance (Af, C Af),
    // at most 1 so that the reweighted average does not degenerate.
    let af = &a * (&c * &kappa * &bsec);
    let spread = af.dotc(&(&c * &af)).re.max(0.0).sqrt();
    if spread > 1.0 {
        bsec /= C64::new(spread, 0.0);
        rep.note(format!("boundary section scaled by 1/{spread:.3} to bound the field-side weight spread"));
    }
    let fb = c.clone() * &kappa * &bsec;
    let exact_b = column(&(op.green()? * &kappa * &bsec));
    rep.push(Comparison::exact_mat(
        "Δ_(h,H)⁻¹Δ_h(G_h K b) vs G_(h,H) K b",
        &column(&op.solve(&op0.apply(&fb))?),
        &exact_b,
        tol,
    ));
    let mut hm = CMat::zeros(r * n, 1);
    let mut hs = hm.clone();
    for x in 0..n {
        let acc =
            measures::hitting_mc(g, h, pot, x, &bsec, ctx.samples(), ctx.seed(), &format!("eisenbaum/hitting/{x}"))?;
        hm.rows_mut(x * r, r).copy_from(&acc.mean());
        hs.rows_mut(x * r, r).copy_from(&acc.stderr());
    }
    let (bm, bs) = tilted_mean_mc(ctx, pot, &fb, "eisenbaum/field-boundary")?;
    rep.push(Comparison::mc_mat("stopped walks E_x[hol(γ|[0,T]⁻¹) b] vs G_(h,H) K b", &hm, &hs, &exact_b, None));
    rep.push(Comparison::mc_mat("stopped walks vs tilted mean of Φ + G_h K b", &hm, &hs, &bm, Some(&bs)));

    // Trivial real line bundle, b ≡ s on the rim.
    let s = 0.7;
    let b1 = Bundle::real(1);
    let h1 = Connection::trivial(g, &b1);
    let zero1 = Potential::zero(g, &b1);
    let op01 = LaplacianOperator::new(g, &h1, &zero1);
    let k1 = CMat::from_diagonal(&CVec::from_fn(n, |i, _| C64::new(g.kappa(g.proper_vertex(i)), 0.0)));
    let b_s = CVec::from_fn(n, |i, _| C64::new(if g.kappa(g.proper_vertex(i)) > 0.0 { s } else { 0.0 }, 0.0));
    let f_s = op01.green()? * &k1 * &b_s;
    rep.push(Comparison::exact_mat(
        "b ≡ s on the rim: G K b = s·1",
        &column(&f_s),
        &CMat::from_element(n, 1, C64::new(s, 0.0)),
        tol,
    ));
    let cvals: Vec<f64> = (0..n).map(|x| 0.2 + 0.15 * (x % 4) as f64).collect();
    let lamv = g.lambda_proper();
    let s1 = GffSampler::new(g, &b1, &h1, &zero1)?;
    let weight = |phi: &CVec| (-0.5 * (0..n).map(|z| lamv[z] * cvals[z] * (phi[z].re + s).powi(2)).sum::<f64>()).exp();
    let walker = WalkSampler::new(g, &g.transition());
    let init = || (MatAcc::new(n, 1), MatAcc::new(n, 1));
    let (l, rr) = mc::run_batches(ctx.seed(), "eisenbaum/classical", ctx.samples(), init, |rng, count, acc| {
        for _ in 0..count {
            let phi = s1.sample(rng);
            let w = weight(&phi);
            let mut col = CMat::zeros(n, 1);
            for x in 0..n {
                let path = walker.sample(g, g.proper_vertex(x), rng)?;
                let local = path.stopped(g).local_time(g);
                let e: f64 = (0..n).map(|z| lamv[z] * cvals[z] * local[g.proper_vertex(z)]).sum();
                col[x] = C64::new(w * (-e).exp() * s, 0.0);
            }
            acc.0.push(&col);
            let psi = s1.sample(rng);
            let w = weight(&psi);
            acc.1.push(&CMat::from_fn(n, 1, |x, _| C64::new(w * (psi[x].re + s), 0.0)));
        }
        Ok(())
    })?;
    rep.push(Comparison::mc_mat(
        "b ≡ s: E⊗E_x[e^(−½Σλ_xH_x(Φ_x+s)² − Σλ_xH_xℓ_x(X))] s vs E[e^(−½Σλ_xH_x(Φ_x+s)²)(Φ_x+s)]",
        &l.mean(),
        &l.stderr(),
        &rr.mean(),
        Some(&rr.stderr()),
    ));
    let pot1 = Potential::scalar(g, &b1, &cvals)?;
    let z1 = fields::shifted_square_exact(g, &b1, &h1, &pot1, &CVec::from_element(n, C64::new(s, 0.0)))?.value;
    let op1 = LaplacianOperator::new(g, &h1, &pot1);
    let exact1 = (op1.green()? * &k1 * &b_s).scale(z1);
    rep.push(Comparison::mc_mat("b ≡ s: walk side vs exact", &l.mean(), &l.stderr(), &column(&exact1), None));
    Ok(())
}

/// `Σ_pairings Π (s_i, Δ⁻¹ s_j)` computed from a Green section given in
/// standard coordinates.
fn wick_from_green(b: &Bundle, lam: &CMat, green: &CMat, holo: &[CVec], anti: &[CVec]) -> C64 {
    let kernel = lam * green * lam;
    let pair = |f: &CVec, fp: &CVec| (f.adjoint() * &kernel * fp)[(0, 0)];
    if b.field.is_complex() {
        if holo.len() != anti.len() {
            return C64::new(0.0, 0.0);
        }
        let k = holo.len();
        permanent(&CMat::from_fn(k, k, |i, j| pair(&holo[i], &anti[j])))
    } else {
        let mut slots: Vec<CVec> = holo.to_vec();
        slots.extend(anti.iter().map(|f| f.map(|z| z.conj())));
        if slots.len() % 2 == 1 {
            return C64::new(0.0, 0.0);
        }
        let k = slots.len();
        pairings_sum(&CMat::from_fn(k, k, |i, j| pair(&slots[i], &slots[j].map(|z| z.conj()))))
    }
}

/// Annealed moments against loop-factor-weighted Wick sums of `ν`-integrals.
pub fn symanzik(ctx: &Ctx, rep: &mut CheckReport) -> Result<()> {
    let (g, b, h) = (&ctx.fx.graph, &ctx.fx.bundle, &ctx.fx.connection);
    let pot = &ctx.pot;
    let r = b.rank;
    let mut rng = mc::rng(super::FIXED_SEED, "symanzik/components", 0);
    let h2 = Connection::random(g, b, &mut rng);
    let pot2 = Potential::random(g, b, 0.0, 1.0, &mut rng);
    let spec = AnnealedSpec::new(vec![
        (h.clone(), Potential::zero(g, b), 0.5),
        (h2, pot2, 0.3),
        (h.clone(), pot.clone(), 0.2),
    ])?;
    let lam = lambda_mat(g, r);
    let b1 = Bundle::real(1);
    let scalar = LaplacianOperator::new(g, &Connection::trivial(g, &b1), &Potential::zero(g, &b1));
    let log_det_scalar = scalar.matrix().clone().determinant().re.ln();
    let mut factors = Vec::new();
    for (hj, pj, p) in &spec.components {
        let op = LaplacianOperator::new(g, hj, pj);
        op.check_positive()?;
        let log_det = op.matrix().clone().determinant().re.ln();
        let loop_factor = (0.5 * b.beta() * (r as f64 * log_det_scalar - log_det)).exp();
        let nu = calculus::integrated_heat(&op) * lam.clone().try_inverse().expect("positive λ");
        factors.push((p * loop_factor, nu));
    }
    let norm: f64 = factors.iter().map(|f| f.0).sum();
    let holo: Vec<CVec> = (0..3).map(|k| ctx.section(k)).collect();
    let anti: Vec<CVec> = (0..3).map(|k| ctx.section(10 + k)).collect();
    let tol = ctx.tol(1e-8);
    for k in 1..=3 {
        let lhs = annealed_moments(g, b, &spec, &holo[..k], &anti[..k])?.value;
        let rhs: C64 =
            factors.iter().map(|(w, nu)| wick_from_green(b, &lam, nu, &holo[..k], &anti[..k]) * *w).sum::<C64>() / norm;
        rep.push(Comparison::exact_mat(
            &format!("k = l = {k}: annealed moment vs loop-weighted Wick sum"),
            &scalar_mat(lhs),
            &scalar_mat(rhs),
            tol,
        ));
    }
    let single = AnnealedSpec::singleton(h.clone(), pot.clone());
    let op = LaplacianOperator::new(g, h, pot);
    let stol = ctx.tol(1e-10);
    for k in 1..=3 {
        let lhs = annealed_moments(g, b, &single, &holo[..k], &anti[..k])?.value;
        let rhs = fields::wick_moment(g, b, &op, &holo[..k], &anti[..k])?;
        rep.push(Comparison::exact_mat(
            &format!("singleton, k = l = {k}: annealed moment vs Wick moment"),
            &scalar_mat(lhs),
            &scalar_mat(rhs),
            stol,
        ));
    }
    Ok(())
}

use holonomy_fields::bundle::{gauge_apply, Bundle, Connection, GaugeTransform, Potential, Splitting};
use holonomy_fields::calculus::{green_section, laplacian, LaplacianOperator};
use holonomy_fields::fields::{
    annealed_moments, covariance_mc, laplace_exact, laplace_mc, normalized_weights, pairing, pairings_sum, permanent,
    sample_gff, shifted_square_exact, shifted_square_mc, split_field, wick_moment, AnnealedSpec, GffSampler,
};
use holonomy_fields::fixtures::{self, fig6_connection, fig6_graph, fig6_trivial, p2_graph};
use holonomy_fields::graph::Graph;
use holonomy_fields::linalg::{self, c, frob, haar_unitary};
use holonomy_fields::stats::{matrix_z, MatAcc, ScalarAcc, ZSummary};
use holonomy_fields::{mc, CMat, CVec, C64};
use nalgebra::{dvector, DMatrix, DVector};
use rand::Rng;

const Z: f64 = 4.0;

fn assert_z(acc: &ScalarAcc, target: f64) {
    let z = (acc.mean() - target) / acc.stderr();
    assert!(z.abs() <= Z, "mean {} ± {} vs {target} (z = {z})", acc.mean(), acc.stderr());
}

fn assert_family(acc: &MatAcc, target: &CMat) {
    let s = ZSummary::new(&matrix_z(&acc.mean(), &acc.stderr(), target, None));
    assert!(s.passes_family(), "{s:?}\nmean {}\ntarget {target}", acc.mean());
}

fn random_vec<R: Rng>(n: usize, complex: bool, rng: &mut R) -> CVec {
    let im = if complex { 1.0 } else { 0.0 };
    CVec::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, im * (rng.random::<f64>() - 0.5)))
}

fn op(g: &Graph, h: &Connection, pot: &Potential) -> LaplacianOperator {
    laplacian(g, h, pot)
}

#[test]
fn fig6_field_has_unit_variance() {
    let fx = fig6_trivial();
    let samples = sample_gff(&fx.graph, &fx.bundle, &fx.connection, &fx.potential, 40_000, 1).unwrap();
    let mut acc = ScalarAcc::default();
    for phi in &samples {
        assert_eq!(phi[0].im, 0.0);
        acc.push(phi[0].re * phi[0].re);
    }
    assert_z(&acc, 1.0);
}

#[test]
fn samples_are_reproducible() {
    let fx = fixtures::five_vertex_r2(7);
    let a = sample_gff(&fx.graph, &fx.bundle, &fx.connection, &fx.potential, 100, 3).unwrap();
    let b = sample_gff(&fx.graph, &fx.bundle, &fx.connection, &fx.potential, 100, 3).unwrap();
    assert_eq!(a, b);
    let c = sample_gff(&fx.graph, &fx.bundle, &fx.connection, &fx.potential, 100, 4).unwrap();
    assert_ne!(a, c);
}

#[test]
fn covariance_is_the_green_section() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, b, h) = (&fx.graph, &fx.bundle, &fx.connection);
    let mut rng = mc::rng(2, "test/fields/pot", 0);
    let pot = Potential::random(g, b, 0.0, 1.0, &mut rng);
    let sampler = GffSampler::new(g, b, h, &pot).unwrap();
    let gm = green_section(g, h, &pot).unwrap();
    assert!(frob(&(sampler.factor() * sampler.factor().adjoint() - &gm)) < 1e-12);
    let acc = covariance_mc(&sampler, 40_000, 2, "test/fields/cov").unwrap();
    assert_family(&acc, &gm);
}

#[test]
fn complex_fields_are_circular() {
    let fx = fixtures::five_vertex_r2(7);
    let sampler = GffSampler::new(&fx.graph, &fx.bundle, &fx.connection, &fx.potential).unwrap();
    let d = sampler.dim();
    let acc = mc::run_batches(
        3,
        "test/fields/circular",
        40_000,
        || MatAcc::new(d, d),
        |rng, n, acc| {
            for _ in 0..n {
                let phi = sampler.sample(rng);
                acc.push(&(&phi * phi.transpose()));
            }
            Ok(())
        },
    )
    .unwrap();
    assert_family(&acc, &CMat::zeros(d, d));
}

#[test]
fn gauged_sampler_covariance() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, b) = (&fx.graph, &fx.bundle);
    let mut rng = mc::rng(4, "test/fields/gauge", 0);
    let pot = Potential::random(g, b, 0.0, 1.0, &mut rng);
    let j = GaugeTransform::random(g, b, &mut rng);
    let sampler = GffSampler::new(g, b, &fx.connection, &pot).unwrap().gauged(g, &j);
    let (hj, potj, _) = gauge_apply(g, &j, &fx.connection, &pot, &CVec::zeros(2 * g.n_proper()));
    let want = green_section(g, &hj, &potj).unwrap();
    assert!(frob(&(sampler.factor() * sampler.factor().adjoint() - want)) < 1e-12);
}

#[test]
fn laplace_transform() {
    let g = p2_graph();
    let b = Bundle::real(1);
    let h = Connection::trivial(&g, &b);
    let pot = Potential::zero(&g, &b);
    let o = op(&g, &h, &pot);
    assert_eq!(laplace_exact(&g, &b, &o, &CVec::zeros(2)).unwrap(), 1.0);
    let f = dvector![c(1.0), c(0.0)];
    let exact = laplace_exact(&g, &b, &o, &f).unwrap();
    assert!((exact - (4.0f64 / 3.0).exp()).abs() < 1e-12);
    let sampler = GffSampler::new(&g, &b, &h, &pot).unwrap();
    assert_z(&laplace_mc(&g, &b, &sampler, &f, 100_000, 5).unwrap(), exact);
}

#[test]
fn real_wick_moments() {
    let fx = fixtures::five_vertex_r2(7);
    let g = &fx.graph;
    let b = Bundle::real(1);
    let h = Connection::trivial(g, &b);
    let pot = Potential::zero(g, &b);
    let o = op(g, &h, &pot);
    let mut rng = mc::rng(6, "test/fields/wick", 0);
    let n = g.n_proper();
    let f1 = random_vec(n, false, &mut rng);
    let f2 = random_vec(n, false, &mut rng);
    // Independent oracle: f1ᵀ Λ Δ⁻¹ f2 with real matrices.
    let lam = DMatrix::from_diagonal(&DVector::from_vec(g.lambda_proper()));
    let delta = o.matrix().map(|z| z.re);
    let re = |v: &CVec| v.map(|z| z.re);
    let want = (re(&f1).transpose() * &lam * delta.try_inverse().unwrap() * re(&f2))[(0, 0)];
    let got = wick_moment(g, &b, &o, &[f1.clone(), f2.clone()], &[]).unwrap();
    assert!((got - c(want)).norm() < 1e-12);
    let got = wick_moment(g, &b, &o, std::slice::from_ref(&f1), std::slice::from_ref(&f2)).unwrap();
    assert!((got - c(want)).norm() < 1e-12);
    assert_eq!(wick_moment(g, &b, &o, &[f1.clone(), f2.clone(), f1.clone()], &[]).unwrap(), c(0.0));

    // Four slots against Monte Carlo.
    let sampler = GffSampler::new(g, &b, &h, &pot).unwrap();
    let slots = [f1.clone(), f2.clone(), f1.clone(), f2.clone()];
    let exact = wick_moment(g, &b, &o, &slots, &[]).unwrap();
    let acc = mc::run_batches(6, "test/fields/wick4", 100_000, ScalarAcc::default, |rng, k, acc| {
        for _ in 0..k {
            let phi = sampler.sample(rng);
            acc.push(slots.iter().map(|f| pairing(g, 1, f, &phi).re).product());
        }
        Ok(())
    })
    .unwrap();
    assert_z(&acc, exact.re);
}

#[test]
fn complex_wick_moments() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, b, h) = (&fx.graph, &fx.bundle, &fx.connection);
    let o = op(g, h, &fx.potential);
    let mut rng = mc::rng(7, "test/fields/cwick", 0);
    let d = 2 * g.n_proper();
    let f: Vec<CVec> = (0..4).map(|_| random_vec(d, true, &mut rng)).collect();
    assert_eq!(wick_moment(g, b, &o, &f[..2], &f[2..3]).unwrap(), c(0.0));
    let one = wick_moment(g, b, &o, &f[..1], &f[1..2]).unwrap();
    assert!((one - pairing(g, 2, &f[0], &o.solve(&f[1]).unwrap())).norm() < 1e-14);

    let sampler = GffSampler::new(g, b, h, &fx.potential).unwrap();
    let exact = wick_moment(g, b, &o, &f[..2], &f[2..]).unwrap();
    let acc = mc::run_batches(
        7,
        "test/fields/cwick2",
        100_000,
        || MatAcc::new(1, 1),
        |rng, k, acc| {
            for _ in 0..k {
                let phi = sampler.sample(rng);
                let p = |v: &CVec| pairing(g, 2, v, &phi);
                let x = p(&f[0]) * p(&f[1]) * p(&f[2]).conj() * p(&f[3]).conj();
                acc.push(&CMat::from_element(1, 1, x));
            }
            Ok(())
        },
    )
    .unwrap();
    assert_family(&acc, &CMat::from_element(1, 1, exact));
}

#[test]
fn permanents_and_pairings() {
    let mut rng = mc::rng(8, "test/fields/perm", 0);
    let m = CMat::from_fn(3, 3, |_, _| C64::new(rng.random(), rng.random()));
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let brute: C64 = perms.iter().map(|p| (0..3).map(|i| m[(i, p[i])]).product::<C64>()).sum();
    assert!((permanent(&m) - brute).norm() < 1e-12);
    assert_eq!(permanent(&CMat::zeros(0, 0)), c(1.0));

    let m = CMat::from_fn(4, 4, |_, _| C64::new(rng.random(), 0.0));
    let brute = m[(0, 1)] * m[(2, 3)] + m[(0, 2)] * m[(1, 3)] + m[(0, 3)] * m[(1, 2)];
    assert!((pairings_sum(&m) - brute).norm() < 1e-12);
}

#[test]
fn shifted_square_trivial_cases() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, b, h) = (&fx.graph, &fx.bundle, &fx.connection);
    let mut rng = mc::rng(9, "test/fields/ss", 0);
    let f = random_vec(2 * g.n_proper(), true, &mut rng);
    let s = shifted_square_exact(g, b, h, &Potential::zero(g, b), &f).unwrap();
    assert!((s.value - 1.0).abs() < 1e-12);

    let pot = Potential::random(g, b, 0.0, 0.5, &mut rng);
    let s = shifted_square_exact(g, b, h, &pot, &CVec::zeros(2 * g.n_proper())).unwrap();
    assert_eq!(s.quadratic, 0.0);
    assert!(s.det_ratio < 1.0);
    assert_z(&shifted_square_mc(g, b, h, &pot, &CVec::zeros(2 * g.n_proper()), 40_000, 9).unwrap(), s.value);

    let s = shifted_square_exact(g, b, h, &pot, &f).unwrap();
    assert_z(&shifted_square_mc(g, b, h, &pot, &f, 40_000, 10).unwrap(), s.value);
}

#[test]
fn shifted_square_on_p2_against_real_gaussian_integral() {
    let g = p2_graph();
    let b = Bundle::real(1);
    let h = Connection::trivial(&g, &b);
    let pot = Potential::scalar(&g, &b, &[1.0, 1.0]).unwrap();
    let f = dvector![c(1.0), c(1.0)];
    let got = shifted_square_exact(&g, &b, &h, &pot, &f).unwrap();

    // Φ ~ N(0, A⁻¹) with A = ΛΔ and B = ΛH:
    // det(I + A⁻¹B)^{-1/2} exp(−½ fᵀ(B − B(A+B)⁻¹B) f).
    let a = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
    let bm = DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
    let fv = DVector::<f64>::from_vec(vec![1.0, 1.0]);
    let ainv = a.clone().try_inverse().unwrap();
    let det = (DMatrix::identity(2, 2) + &ainv * &bm).determinant();
    let inner = &bm - &bm * (&a + &bm).try_inverse().unwrap() * &bm;
    let want = det.powf(-0.5) * (-0.5 * (fv.transpose() * inner * &fv)[(0, 0)]).exp();
    assert!((got.value - want).abs() < 1e-12, "{} vs {want}", got.value);
    assert_z(&shifted_square_mc(&g, &b, &h, &pot, &f, 40_000, 11).unwrap(), want);
}

#[test]
fn split_fields() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, b) = (&fx.graph, &fx.bundle);
    let mut rng = mc::rng(12, "test/fields/split", 0);
    let phi = random_vec(2 * g.n_proper(), true, &mut rng);
    let trivial = split_field(&Splitting::trivial(g, b), 2, &phi);
    for x in 0..g.n_proper() {
        assert_eq!(trivial.components[x][0], linalg::block(&phi, x, 2));
    }
    let bases: Vec<CMat> = (0..g.n_proper()).map(|_| haar_unitary(2, true, &mut rng)).collect();
    let complete = split_field(&Splitting::complete(g, b, &bases).unwrap(), 2, &phi);
    for x in 0..g.n_proper() {
        let total: f64 = complete.norms[x].iter().sum();
        assert!((total - linalg::block(&phi, x, 2).norm_squared()).abs() < 1e-13);
    }
    assert_eq!(complete.flat_norms().len(), 2 * g.n_proper());
}

#[test]
fn split_component_covariance() {
    let g = fig6_graph(1.0, 1.0);
    let b = Bundle::complex(3);
    let mut rng = mc::rng(13, "test/fields/split-cov", 0);
    let h = fig6_connection(&g, &b, haar_unitary(3, true, &mut rng)).unwrap();
    let u = haar_unitary(3, true, &mut rng);
    let p0 = {
        let (c0, c1) = (u.column(0).into_owned(), u.column(1).into_owned());
        &c0 * c0.adjoint() + &c1 * c1.adjoint()
    };
    let p1 = linalg::identity(3) - &p0;
    let s = Splitting::new(&g, &b, vec![vec![p0.clone(), p1.clone()]]).unwrap();
    let pot = Potential::zero(&g, &b);
    let gm = green_section(&g, &h, &pot).unwrap();
    let sampler = GffSampler::new(&g, &b, &h, &pot).unwrap();
    let acc = mc::run_batches(
        13,
        "test/fields/split-cov",
        40_000,
        || MatAcc::new(3, 6),
        |rng, n, acc| {
            for _ in 0..n {
                let sf = split_field(&s, 3, &sampler.sample(rng));
                let (a, bb) = (&sf.components[0][0], &sf.components[0][1]);
                let mut m = CMat::zeros(3, 6);
                m.view_mut((0, 0), (3, 3)).copy_from(&(a * a.adjoint()));
                m.view_mut((0, 3), (3, 3)).copy_from(&(bb * bb.adjoint()));
                acc.push(&m);
            }
            Ok(())
        },
    )
    .unwrap();
    let mut want = CMat::zeros(3, 6);
    want.view_mut((0, 0), (3, 3)).copy_from(&(&p0 * &gm * &p0));
    want.view_mut((0, 3), (3, 3)).copy_from(&(&p1 * &gm * &p1));
    assert_family(&acc, &want);
}

#[test]
fn singleton_annealing_is_the_quenched_moment() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, b, h) = (&fx.graph, &fx.bundle, &fx.connection);
    let mut rng = mc::rng(14, "test/fields/anneal", 0);
    let f: Vec<CVec> = (0..2).map(|_| random_vec(2 * g.n_proper(), true, &mut rng)).collect();
    let spec = AnnealedSpec::singleton(h.clone(), fx.potential.clone());
    let m = annealed_moments(g, b, &spec, &f[..1], &f[1..]).unwrap();
    let w = wick_moment(g, b, &op(g, h, &fx.potential), &f[..1], &f[1..]).unwrap();
    assert!((m.value - w).norm() < 1e-14);
    assert!((m.weights[0] - 1.0).abs() < 1e-14);
}

#[test]
fn two_component_annealing_on_fig6() {
    let fx = fig6_trivial();
    let (g, b, h) = (&fx.graph, &fx.bundle, &fx.connection);
    let cs = [0.5, 2.0];
    let ps = [0.3, 0.7];
    let comps = cs.iter().zip(&ps).map(|(&cj, &pj)| (h.clone(), Potential::scalar(g, b, &[cj]).unwrap(), pj)).collect();
    let spec = AnnealedSpec::new(comps).unwrap();
    let f = dvector![c(1.0)];
    let m = annealed_moments(g, b, &spec, std::slice::from_ref(&f), std::slice::from_ref(&f)).unwrap();
    let z: Vec<f64> = cs.iter().map(|cj| (1.0 / 3.0 + cj).powf(-0.5)).collect();
    let zp: f64 = z.iter().zip(&ps).map(|(z, p)| z * p).sum();
    let moments: Vec<f64> = cs.iter().map(|cj| 9.0 / (1.0 + 3.0 * cj)).collect();
    let want: f64 = (0..2).map(|j| ps[j] * z[j] * moments[j]).sum::<f64>() / zp;
    assert!((m.value.re - want).abs() < 1e-12);
    for (w, zj) in m.weights.iter().zip(&z) {
        assert!((w - zj / zp).abs() < 1e-12);
    }
    let norm: f64 = m.weights.iter().zip(&ps).map(|(w, p)| w * p).sum();
    assert!((norm - 1.0).abs() < 1e-14);
}

#[test]
fn annealing_weights_are_validated() {
    let fx = fig6_trivial();
    let comp = |p: f64| (fx.connection.clone(), fx.potential.clone(), p);
    assert!(AnnealedSpec::new(vec![]).is_err());
    assert!(AnnealedSpec::new(vec![comp(0.5), comp(0.4)]).is_err());
    assert!(AnnealedSpec::new(vec![comp(1.5), comp(-0.5)]).is_err());
    let w = normalized_weights(&[0.5, 0.5], &[-1000.0, -1001.0]);
    assert!(w.iter().all(|x| x.is_finite()));
    assert!((0.5 * w[0] + 0.5 * w[1] - 1.0).abs() < 1e-14);
}

use holonomy_fields::bundle::{Bundle, Connection, Potential};
use holonomy_fields::calculus::{green_section, heat_operator, laplacian};
use holonomy_fields::fixtures::{self, fig6_diag, fig6_trivial, p2_graph, single_vertex};
use holonomy_fields::graph::Graph;
use holonomy_fields::linalg::{self, c};
use holonomy_fields::measures::{
    choose_n_max, enumerate_skeletons, hitting_mc, loop_skeleton_masses, mu_holding, mu_integral_mc, nu_row_mc,
    path_skeleton_masses, reversibility_mc, SkeletonKind, SkeletonSampler,
};
use holonomy_fields::paths::{ContinuousPath, WalkSampler};
use holonomy_fields::stats::{matrix_z, MatAcc, ScalarAcc, ZSummary};
use holonomy_fields::{mc, CMat, CVec, C64};

/// Scalar Monte Carlo tolerance in standard errors.
const Z: f64 = 4.0;

fn assert_z(acc: &ScalarAcc, target: f64) {
    let z = (acc.mean() - target) / acc.stderr();
    assert!(z.abs() <= Z, "mean {} ± {} vs {target} (z = {z})", acc.mean(), acc.stderr());
}

fn assert_family(acc: &MatAcc, target: &CMat) {
    let s = ZSummary::new(&matrix_z(&acc.mean(), &acc.stderr(), target, None));
    assert!(s.passes_family(), "{s:?}\nmean {}\ntarget {target}", acc.mean());
}

fn walks(g: &Graph, x: usize, n: usize, seed: u64) -> Vec<ContinuousPath> {
    let w = WalkSampler::new(g, &g.transition());
    let mut rng = mc::rng(seed, "test/paths/walks", 0);
    (0..n).map(|_| w.sample(g, g.proper_vertex(x), &mut rng).unwrap()).collect()
}

#[test]
fn walks_are_absorbed_in_the_well() {
    let fx = fixtures::five_vertex_r2(7);
    let g = &fx.graph;
    for p in walks(g, 0, 2000, 1) {
        assert!(g.is_well(p.end()));
        assert!(p.holding.last().unwrap().is_infinite());
        assert!(p.vertices[..p.vertices.len() - 1].iter().all(|&v| !g.is_well(v)));
        let rebuilt = ContinuousPath::new(g, p.vertices.clone(), p.edges.clone(), p.holding.clone()).unwrap();
        assert_eq!(rebuilt, p);
    }
}

#[test]
fn fig6_jump_statistics() {
    let fx = fig6_trivial();
    let g = &fx.graph;
    let k = g.edge_by_id("k").unwrap();
    let mut first = ScalarAcc::default();
    let mut loops = ScalarAcc::default();
    for p in walks(g, 0, 40_000, 2) {
        first.push(f64::from(u8::from(p.edges[0] == k)));
        loops.push((p.n_jumps() - 1) as f64);
    }
    assert_z(&first, 1.0 / 3.0);
    assert_z(&loops, 2.0);
}

#[test]
fn single_vertex_walks_jump_once() {
    let fx = single_vertex();
    for p in walks(&fx.graph, 0, 100, 3) {
        assert_eq!(p.n_jumps(), 1);
    }
}

#[test]
fn malformed_paths_are_rejected() {
    let g = p2_graph();
    let (a, b) = (g.vertex_by_id("a").unwrap(), g.vertex_by_id("b").unwrap());
    let ab = g.edge_by_id("ab").unwrap();
    assert!(ContinuousPath::new(&g, vec![b, a], vec![ab], vec![1.0, 1.0]).is_err());
    assert!(ContinuousPath::new(&g, vec![a, b], vec![ab], vec![f64::INFINITY, 1.0]).is_err());
    assert!(ContinuousPath::new(&g, vec![a, b], vec![ab], vec![0.0, 1.0]).is_err());
    assert!(ContinuousPath::new(&g, vec![a, b], vec![ab], vec![1.0]).is_err());
    assert!(ContinuousPath::new(&g, vec![a, b], vec![ab], vec![1.0, 2.0]).is_ok());
}

#[test]
fn path_operations() {
    let g = p2_graph();
    let (a, b) = (g.vertex_by_id("a").unwrap(), g.vertex_by_id("b").unwrap());
    let ab = g.edge_by_id("ab").unwrap();
    let p = ContinuousPath::new(&g, vec![a, b], vec![ab], vec![1.0, 2.0]).unwrap();
    assert_eq!(p.position(0.5), a);
    assert_eq!(p.position(1.5), b);
    assert_eq!(p.restrict(0.5), ContinuousPath::constant(a, 0.5));
    let r = p.reverse(&g).unwrap();
    assert_eq!(r.vertices, vec![b, a]);
    assert_eq!(r.holding, vec![2.0, 1.0]);
    assert_eq!(r.reverse(&g).unwrap(), p);
    assert_eq!(p.occupation(&g)[b], 2.0);
    assert_eq!(p.local_time(&g)[b], 1.0);
}

#[test]
fn reversibility_on_p2() {
    let g = p2_graph();
    let b = Bundle::real(1);
    let t = 1.0;
    let heat = heat_operator(&g, &Connection::trivial(&g, &b), &Potential::zero(&g, &b), t).unwrap();
    for (x, y) in [(0, 1), (0, 0)] {
        let est = reversibility_mc(&g, x, y, t, |_| c(1.0), 40_000, 4, "test/paths/rev").unwrap();
        let want = g.lambda(g.proper_vertex(x)) * heat[(x, y)].re;
        assert_z(&est.lhs.0, want);
        assert_z(&est.rhs.0, want);
        assert_eq!(est.lhs.1.mean(), 0.0);
    }
}

#[test]
fn green_rows_from_walks() {
    let fx = fig6_trivial();
    let acc = nu_row_mc(&fx.graph, &fx.connection, &fx.potential, 0, 40_000, 5, "test/paths/nu").unwrap();
    assert_family(&acc, &CMat::from_element(1, 1, c(1.0)));

    let fx = fig6_diag();
    let acc = nu_row_mc(&fx.graph, &fx.connection, &fx.potential, 0, 40_000, 6, "test/paths/nu").unwrap();
    assert_family(&acc, &CMat::from_diagonal(&nalgebra::dvector![c(1.0 / 3.0), c(1.0 / 5.0)]));

    // Vertex 0 of the random fixture is interior.
    let fx = fixtures::five_vertex_r2(7);
    let g = &fx.graph;
    assert!(g.out_edges(g.proper_vertex(0)).iter().all(|&e| !g.is_well(g.edge(e).dst)));
    let mut rng = mc::rng(7, "test/paths/pot", 0);
    let pot = Potential::random(g, &fx.bundle, 0.0, 1.0, &mut rng);
    let gm = green_section(g, &fx.connection, &pot).unwrap();
    let acc = nu_row_mc(g, &fx.connection, &pot, 0, 40_000, 7, "test/paths/nu").unwrap();
    assert_family(&acc, &gm.rows(0, 2).into_owned());
}

#[test]
fn hitting_expectations() {
    let fx = fixtures::five_vertex_r2(7);
    let (g, h, r) = (&fx.graph, &fx.connection, 2);
    let n = g.n_proper();
    let zero = CVec::zeros(r * n);
    let acc = hitting_mc(g, h, &fx.potential, 0, &zero, 1000, 8, "test/paths/hit").unwrap();
    assert!(acc.mean().iter().all(|z| *z == c(0.0)));

    let triv = Connection::trivial(g, &fx.bundle);
    let ones = CVec::from_element(r * n, c(1.0));
    let acc = hitting_mc(g, &triv, &fx.potential, 0, &ones, 1000, 9, "test/paths/hit").unwrap();
    assert!(acc.mean().iter().all(|z| (z - c(1.0)).norm() < 1e-12));

    // First-step oracle: Δ_{h,H} u = (κ/λ) b.
    let mut rng = mc::rng(10, "test/paths/hit-data", 0);
    let pot = Potential::random(g, &fx.bundle, 0.0, 1.0, &mut rng);
    let b = CVec::from_fn(r * n, |_, _| C64::new(rand::Rng::random::<f64>(&mut rng), 0.3));
    let rhs = CVec::from_fn(r * n, |i, _| {
        let v = g.proper_vertex(i / r);
        b[i] * (g.kappa(v) / g.lambda(v))
    });
    let u = laplacian(g, h, &pot).solve(&rhs).unwrap();
    for x in 0..n {
        let acc = hitting_mc(g, h, &pot, x, &b, 40_000, 11, &format!("test/paths/hit/{x}")).unwrap();
        assert_family(&acc, &CMat::from_column_slice(r, 1, linalg::block(&u, x, r).as_slice()));
    }
}

#[test]
fn loop_skeleton_masses_in_closed_form() {
    let fx = fig6_trivial();
    let m = loop_skeleton_masses(&fx.graph, 80);
    assert!((m.exact_total.unwrap() - 3f64.ln()).abs() < 1e-14);
    assert!((m.total - 3f64.ln()).abs() < 1e-12);
    for n in 1..=10 {
        assert!((m.per_length[n] - (2.0f64 / 3.0).powi(n as i32) / n as f64).abs() < 1e-15);
    }

    let m = loop_skeleton_masses(&p2_graph(), 60);
    assert!((m.per_length[2] - 0.25).abs() < 1e-15);
    assert!(m.per_length.iter().skip(1).step_by(2).all(|&x| x == 0.0));
    assert!((m.exact_total.unwrap() + 0.75f64.ln()).abs() < 1e-14);
    assert!(m.tail_bound < 1e-15);

    let m = loop_skeleton_masses(&single_vertex().graph, 5);
    assert_eq!(m.total, 0.0);
    assert!(m.exact_total.unwrap().abs() < 1e-15);
}

#[test]
fn tail_bounds_dominate_the_remainder() {
    let g = fixtures::five_vertex_r2(7).graph;
    let full = loop_skeleton_masses(&g, 400).total;
    for n in [2, 5, 10, 20] {
        let m = loop_skeleton_masses(&g, n);
        assert!(full - m.total <= m.tail_bound + 1e-14);
    }
    let n = choose_n_max(|n| path_skeleton_masses(&g, n), 1e-6, 500);
    assert!(path_skeleton_masses(&g, n).tail_bound <= 1e-6);
}

#[test]
fn enumerated_skeleton_weights_match_masses() {
    let g = fixtures::five_vertex_r2(7).graph;
    let ts = g.transition();
    let m = loop_skeleton_masses(&g, 4);
    for n in 1..=4 {
        let sum: f64 = enumerate_skeletons(&g, &ts, n, n, true).iter().map(|s| s.weight / n as f64).sum();
        assert!((sum - m.per_length[n]).abs() < 1e-14);
    }
    let m = path_skeleton_masses(&g, 3);
    let sum: f64 = enumerate_skeletons(&g, &ts, 3, 3, false).iter().map(|s| s.weight / 3.0).sum();
    assert!((sum - m.per_length[3]).abs() < 1e-14);
}

#[test]
fn skeleton_sampler_frequencies() {
    let g = p2_graph();
    let s = SkeletonSampler::new(&g, SkeletonKind::Paths, 30);
    let m = path_skeleton_masses(&g, 30);
    let mut rng = mc::rng(12, "test/paths/skeleton", 0);
    let mut len1 = ScalarAcc::default();
    for _ in 0..40_000 {
        let sk = s.sample(&mut rng);
        assert_eq!(sk.vertices.len(), sk.len() + 1);
        len1.push(f64::from(u8::from(sk.len() == 1)));
    }
    assert_z(&len1, m.per_length[1] / m.total);
}

#[test]
fn mu_holding_times_sum_to_gamma() {
    let mut rng = mc::rng(13, "test/paths/holding", 0);
    let mut acc = ScalarAcc::default();
    for _ in 0..20_000 {
        let h = mu_holding(3, &mut rng);
        assert_eq!(h.len(), 4);
        acc.push(h.iter().sum());
    }
    assert_z(&acc, 3.0);
}

#[test]
fn mu_integrals() {
    let fx = fig6_trivial();
    let (g, h) = (&fx.graph, &fx.connection);
    let zero = &fx.potential;
    let est = mu_integral_mc(g, &[(h, zero, 1.0), (h, zero, -1.0)], SkeletonKind::Loops, 60, 1000, 14, "t").unwrap();
    assert!(est.trace.unwrap().mean().abs() < 1e-15);

    for cst in [0.5, 2.0] {
        let pot = Potential::scalar(g, &fx.bundle, &[cst]).unwrap();
        let est = mu_integral_mc(g, &[(h, &pot, 1.0)], SkeletonKind::Loops, 80, 40_000, 15, "test/paths/mu").unwrap();
        // Σ_n (2/3)ⁿ (1+c)⁻ⁿ / n.
        let want = -(1.0 - 2.0 / (3.0 * (1.0 + cst))).ln();
        assert_z(est.trace.as_ref().unwrap(), want);
        assert!(est.tail_bound < 1e-10);
        let diff = mu_integral_mc(
            g,
            &[(h, &pot, 1.0), (h, zero, -1.0)],
            SkeletonKind::Loops,
            80,
            40_000,
            16,
            "test/paths/mu-diff",
        )
        .unwrap();
        assert_z(diff.trace.as_ref().unwrap(), ((1.0 / 3.0) / (1.0 / 3.0 + cst)).ln() + (1.0 + cst).ln());
    }

    let g = p2_graph();
    let b = Bundle::real(1);
    let h = Connection::trivial(&g, &b);
    let pot = Potential::scalar(&g, &b, &[1.0, 1.0]).unwrap();
    let n_max = choose_n_max(|n| path_skeleton_masses(&g, n), 1e-9, 200);
    let est =
        mu_integral_mc(&g, &[(&h, &pot, 1.0)], SkeletonKind::Paths, n_max, 40_000, 17, "test/paths/mu-p2").unwrap();
    let want = linalg::identity(2).scale(2f64.ln()) - laplacian(&g, &h, &pot).log().unwrap();
    assert_family(est.matrix.as_ref().unwrap(), &want);
}

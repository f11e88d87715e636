use holonomy_fields::bundle::{gauge_apply, Bundle, Connection, GaugeTransform, Potential};
use holonomy_fields::calculus::{dirichlet_energy, dirichlet_energy_edges, laplacian, logdet};
use holonomy_fields::fixtures::random_graph_spec;
use holonomy_fields::graph::Graph;
use holonomy_fields::linalg::{frob, identity};
use holonomy_fields::mc::{self, McRng};
use holonomy_fields::{CVec, C64};
use proptest::prelude::*;
use rand::Rng;

struct Case {
    g: Graph,
    b: Bundle,
    h: Connection,
    pot: Potential,
    f: CVec,
    rng: McRng,
}

fn case(seed: u64, n: usize, extra: usize, rank: usize, complex: bool) -> Case {
    let mut rng = mc::rng(seed, "test/properties", 0);
    let g = Graph::build(&random_graph_spec(n, extra, &mut rng)).unwrap();
    let b = if complex { Bundle::complex(rank) } else { Bundle::real(rank) };
    let h = Connection::random(&g, &b, &mut rng);
    let pot = Potential::random(&g, &b, 0.0, 1.0, &mut rng);
    let im = if complex { 1.0 } else { 0.0 };
    let f = CVec::from_fn(rank * g.n_proper(), |_, _| {
        C64::new(rng.random::<f64>() - 0.5, im * (rng.random::<f64>() - 0.5))
    });
    Case { g, b, h, pot, f, rng }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_forms_agree_and_are_positive(
        seed in any::<u64>(), n in 1usize..7, extra in 0usize..4, rank in 1usize..4, complex: bool,
    ) {
        let cs = case(seed, n, extra, rank, complex);
        let e0 = dirichlet_energy(&cs.g, &cs.h, &cs.pot, &cs.f);
        let e1 = dirichlet_energy_edges(&cs.g, &cs.h, &cs.pot, &cs.f);
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1.0));
        prop_assert!(e0 > 0.0);
    }

    #[test]
    fn gauge_leaves_energy_and_determinant_alone(
        seed in any::<u64>(), n in 1usize..7, extra in 0usize..4, rank in 1usize..4, complex: bool,
    ) {
        let mut cs = case(seed, n, extra, rank, complex);
        let j = GaugeTransform::random(&cs.g, &cs.b, &mut cs.rng);
        let (hj, potj, fj) = gauge_apply(&cs.g, &j, &cs.h, &cs.pot, &cs.f);
        let e0 = dirichlet_energy(&cs.g, &cs.h, &cs.pot, &cs.f);
        let e1 = dirichlet_energy(&cs.g, &hj, &potj, &fj);
        prop_assert!((e0 - e1).abs() <= 1e-11 * e0.max(1.0));
        let l0 = logdet(&cs.g, &cs.h, &cs.pot).unwrap();
        let l1 = logdet(&cs.g, &hj, &potj).unwrap();
        prop_assert!((l0 - l1).abs() <= 1e-10 * l0.abs().max(1.0));
    }

    #[test]
    fn green_inverts_the_weighted_laplacian(
        seed in any::<u64>(), n in 1usize..7, extra in 0usize..4, rank in 1usize..4, complex: bool,
    ) {
        let cs = case(seed, n, extra, rank, complex);
        let op = laplacian(&cs.g, &cs.h, &cs.pot);
        let gm = op.green().unwrap();
        prop_assert!(frob(&(op.lambda_weighted() * &gm - identity(op.dim()))) < 1e-9);
        prop_assert!(frob(&(&gm - gm.adjoint())) < 1e-9 * frob(&gm).max(1.0));
        prop_assert!(op.smallest_eigenvalue() > 0.0);
    }
}

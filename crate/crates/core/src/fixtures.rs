//! Small reference graphs and bundles used by the tests, the harness and the
//! shipped example configurations.

use crate::bundle::{Bundle, Connection, Potential, ScalarField, Splitting};
use crate::graph::{Graph, GraphSpec};
use crate::linalg;
use crate::mc;
use crate::{CMat, Result, C64};
use rand::Rng;

/// A graph with a bundle, connection, potential and splitting.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub graph: Graph,
    pub bundle: Bundle,
    pub connection: Connection,
    pub potential: Potential,
    pub splitting: Splitting,
}

impl Fixture {
    /// Trivial connection, zero potential, trivial splitting.
    pub fn trivial(name: &str, graph: Graph, bundle: Bundle) -> Fixture {
        Fixture {
            name: name.into(),
            connection: Connection::trivial(&graph, &bundle),
            potential: Potential::zero(&graph, &bundle),
            splitting: Splitting::trivial(&graph, &bundle),
            graph,
            bundle,
        }
    }

    pub fn with_connection(mut self, h: Connection) -> Fixture {
        self.connection = h;
        self
    }

    pub fn with_potential(mut self, pot: Potential) -> Fixture {
        self.potential = pot;
        self
    }

    pub fn with_splitting(mut self, s: Splitting) -> Fixture {
        self.splitting = s;
        self
    }
}

/// One proper vertex `x` with a self-loop pair `e, e~` of conductance `chi`
/// and an edge `k` of conductance `kappa` into the well `w`.
pub fn fig6_spec(chi: f64, kappa: f64) -> GraphSpec {
    GraphSpec::new().vertex("x", false).vertex("w", true).pair("e", "x", "x", chi).edge("k", "x", "w", kappa)
}

pub fn fig6_graph(chi: f64, kappa: f64) -> Graph {
    Graph::build(&fig6_spec(chi, kappa)).expect("valid fixture")
}

/// FIG6 with `χ = κ = 1` and the trivial real line bundle.
pub fn fig6_trivial() -> Fixture {
    Fixture::trivial("fig6", fig6_graph(1.0, 1.0), Bundle::real(1))
}

/// FIG6 with `χ = κ = 1`, complex rank 2 and `hol_e = diag(i, −1)`.
pub fn fig6_diag() -> Fixture {
    let g = fig6_graph(1.0, 1.0);
    let b = Bundle::complex(2);
    let m = CMat::from_diagonal(&nalgebra::dvector![C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]);
    let h = fig6_connection(&g, &b, m).expect("unitary");
    Fixture::trivial("fig6-diag", g, b).with_connection(h)
}

/// Connection on a FIG6 graph with the given loop holonomy; the well edge
/// carries the identity.
pub fn fig6_connection(g: &Graph, b: &Bundle, loop_hol: CMat) -> Result<Connection> {
    let e = g.edge_by_id("e").expect("fig6 loop edge");
    Connection::from_geometric(g, b, |k| if k == e { loop_hol.clone() } else { linalg::identity(b.rank) })
}

/// Two proper vertices `a, b` joined by a pair of conductance `chi`, each
/// with an edge of conductance `kappa` into the well `w`.
pub fn p2_spec(chi: f64, kappa: f64) -> GraphSpec {
    GraphSpec::new()
        .vertex("a", false)
        .vertex("b", false)
        .vertex("w", true)
        .pair("ab", "a", "b", chi)
        .edge("ka", "a", "w", kappa)
        .edge("kb", "b", "w", kappa)
}

pub fn p2_graph() -> Graph {
    Graph::build(&p2_spec(1.0, 1.0)).expect("valid fixture")
}

pub fn p2_trivial() -> Fixture {
    Fixture::trivial("p2", p2_graph(), Bundle::real(1))
}

/// One proper vertex joined to the well only.
pub fn single_vertex_spec(kappa: f64) -> GraphSpec {
    GraphSpec::new().vertex("x", false).vertex("w", true).edge("k", "x", "w", kappa)
}

pub fn single_vertex() -> Fixture {
    Fixture::trivial("single", Graph::build(&single_vertex_spec(1.0)).expect("valid fixture"), Bundle::real(1))
}

/// Triangle `a, b, c` with unit conductances and killing `kappa` at every
/// vertex; strong killing keeps coloured enumerations short.
pub fn triangle_spec(chi: f64, kappa: f64) -> GraphSpec {
    GraphSpec::new()
        .vertex("a", false)
        .vertex("b", false)
        .vertex("c", false)
        .vertex("w", true)
        .pair("ab", "a", "b", chi)
        .pair("bc", "b", "c", chi)
        .pair("ca", "c", "a", chi)
        .edge("ka", "a", "w", kappa)
        .edge("kb", "b", "w", kappa)
        .edge("kc", "c", "w", kappa)
}

/// Connected random graph on `n` proper vertices: a random spanning tree,
/// `extra` additional pairs, conductances in `[0.5, 2]`, and well edges from
/// a random non-empty proper subset that leaves vertex `v0` interior when
/// `n > 1`.
pub fn random_graph_spec<R: Rng + ?Sized>(n: usize, extra: usize, rng: &mut R) -> GraphSpec {
    let mut spec = GraphSpec::new();
    for k in 0..n {
        spec = spec.vertex(&format!("v{k}"), false);
    }
    spec = spec.vertex("w", true);
    let chi = |rng: &mut R| 0.5 + 1.5 * rng.random::<f64>();
    let mut m = 0;
    for k in 1..n {
        let parent = rng.random_range(0..k);
        spec = spec.pair(&format!("t{m}"), &format!("v{parent}"), &format!("v{k}"), chi(rng));
        m += 1;
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        spec = spec.pair(&format!("t{m}"), &format!("v{a}"), &format!("v{b}"), chi(rng));
        m += 1;
    }
    let mut any = false;
    for k in 0..n {
        if (n == 1 || k > 0) && (rng.random::<f64>() < 0.5 || (!any && k == n - 1)) {
            spec = spec.edge(&format!("k{k}"), &format!("v{k}"), "w", chi(rng));
            any = true;
        }
    }
    spec
}

/// The five-vertex complex rank-2 fixture with a Haar connection.
pub fn five_vertex_r2(seed: u64) -> Fixture {
    let mut rng = mc::rng(seed, "fixture/five", 0);
    let g = Graph::build(&random_graph_spec(5, 3, &mut rng)).expect("random graphs are valid");
    let b = Bundle::complex(2);
    let h = Connection::random(&g, &b, &mut rng);
    Fixture::trivial("five-r2", g, b).with_connection(h)
}

/// Strongly killed triangle (`χ = 1`, `κ = 8`) with a complex rank-2 Haar
/// connection and a complete splitting in random orthonormal bases.
pub fn triangle_r2(seed: u64) -> Fixture {
    let mut rng = mc::rng(seed, "fixture/triangle", 0);
    let g = Graph::build(&triangle_spec(1.0, 8.0)).expect("valid fixture");
    let b = Bundle::complex(2);
    let h = Connection::random(&g, &b, &mut rng);
    let bases: Vec<CMat> = (0..g.n_proper()).map(|_| linalg::haar_unitary(2, true, &mut rng)).collect();
    let s = Splitting::complete(&g, &b, &bases).expect("Haar bases are orthonormal");
    Fixture::trivial("triangle-r2", g, b).with_connection(h).with_splitting(s)
}

/// Bundle of the given mode.
pub fn bundle(rank: usize, field: ScalarField) -> Bundle {
    Bundle { rank, field }
}

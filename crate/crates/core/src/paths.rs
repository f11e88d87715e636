//! Continuous paths, coloured paths and the killed continuous-time walk.

use crate::graph::{Graph, TransitionStructure};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::Exp1;

/// Cap on jumps per sampled walk.
pub const MAX_JUMPS: u64 = 10_000_000;

/// Jump skeleton `x_0, e_1, x_1, …, e_n, x_n` (vertex indices of the full
/// graph) with holding times `τ_0 … τ_n`; only `τ_n` may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPath {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub holding: Vec<f64>,
}

impl ContinuousPath {
    pub fn new(g: &Graph, vertices: Vec<usize>, edges: Vec<usize>, holding: Vec<f64>) -> Result<Self> {
        if vertices.is_empty() || vertices.len() != edges.len() + 1 || holding.len() != vertices.len() {
            return Err(Error::ShapeMismatch("path".into()));
        }
        for (k, &e) in edges.iter().enumerate() {
            let ed = g.edge(e);
            if ed.src != vertices[k] || ed.dst != vertices[k + 1] {
                return Err(Error::ShapeMismatch(format!("path edge {}", ed.id)));
            }
        }
        let n = holding.len();
        let bad = holding.iter().enumerate().any(|(k, &t)| t.is_nan() || t <= 0.0 || (t.is_infinite() && k + 1 != n));
        if bad {
            return Err(Error::ShapeMismatch("holding times".into()));
        }
        Ok(ContinuousPath { vertices, edges, holding })
    }

    pub fn constant(v: usize, tau: f64) -> Self {
        ContinuousPath { vertices: vec![v], edges: vec![], holding: vec![tau] }
    }

    pub fn n_jumps(&self) -> usize {
        self.edges.len()
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().expect("non-empty")
    }

    pub fn lifetime(&self) -> f64 {
        self.holding.iter().sum()
    }

    pub fn is_loop(&self) -> bool {
        self.start() == self.end()
    }

    /// Time of the first visit to the well, infinite if there is none.
    pub fn hitting_time(&self, g: &Graph) -> f64 {
        let mut t = 0.0;
        for (k, &v) in self.vertices.iter().enumerate() {
            if g.is_well(v) {
                return t;
            }
            t += self.holding[k];
        }
        f64::INFINITY
    }

    /// Time reversal; needs finite lifetime and invertible edges.
    pub fn reverse(&self, g: &Graph) -> Option<ContinuousPath> {
        if !self.lifetime().is_finite() {
            return None;
        }
        let edges = self.edges.iter().rev().map(|&e| g.edge(e).inv).collect::<Option<Vec<_>>>()?;
        Some(ContinuousPath {
            vertices: self.vertices.iter().rev().copied().collect(),
            edges,
            holding: self.holding.iter().rev().copied().collect(),
        })
    }

    /// `γ|[0,t]`: the path up to time `t`, with the final holding cut at `t`.
    /// Returns the whole path when `t` is at least its lifetime.
    pub fn restrict(&self, t: f64) -> ContinuousPath {
        let mut acc = 0.0;
        for k in 0..self.holding.len() {
            let end = acc + self.holding[k];
            if t < end {
                let mut holding = self.holding[..k].to_vec();
                holding.push(t - acc);
                return ContinuousPath {
                    vertices: self.vertices[..=k].to_vec(),
                    edges: self.edges[..k].to_vec(),
                    holding,
                };
            }
            acc = end;
        }
        self.clone()
    }

    /// Vertex occupied at time `t`.
    pub fn position(&self, t: f64) -> usize {
        let mut acc = 0.0;
        for (k, &h) in self.holding.iter().enumerate() {
            acc += h;
            if t < acc {
                return self.vertices[k];
            }
        }
        self.end()
    }

    /// The path stopped when it first enters the well, `γ|[0,T_γ]`.
    pub fn stopped(&self, g: &Graph) -> ContinuousPath {
        match self.vertices.iter().position(|&v| g.is_well(v)) {
            None | Some(0) => self.clone(),
            Some(k) => ContinuousPath {
                vertices: self.vertices[..k].to_vec(),
                edges: self.edges[..k - 1].to_vec(),
                holding: self.holding[..k].to_vec(),
            },
        }
    }

    /// Occupation measure `θ_x` on every vertex of the graph.
    pub fn occupation(&self, g: &Graph) -> Vec<f64> {
        let mut th = vec![0.0; g.n_vertices()];
        for (&v, &t) in self.vertices.iter().zip(&self.holding) {
            th[v] += t;
        }
        th
    }

    /// Local time `ℓ_x = θ_x / λ_x`.
    pub fn local_time(&self, g: &Graph) -> Vec<f64> {
        self.occupation(g).iter().enumerate().map(|(v, t)| t / g.lambda(v)).collect()
    }
}

/// A path carrying a colour index at each visit.
#[derive(Debug, Clone, PartialEq)]
pub struct ColouredPath {
    pub path: ContinuousPath,
    pub colours: Vec<usize>,
}

impl ColouredPath {
    pub fn is_loop(&self) -> bool {
        self.path.is_loop() && self.colours.first() == self.colours.last()
    }

    /// Forgets the colours.
    pub fn bleach(&self) -> ContinuousPath {
        self.path.clone()
    }

    /// Recolours through `map[x][i]`, the coarser colour containing `i` at
    /// proper vertex `x`.
    pub fn bleach_to(&self, g: &Graph, map: &[Vec<usize>]) -> ColouredPath {
        let colours =
            self.path.vertices.iter().zip(&self.colours).map(|(&v, &i)| map[g.pindex(v).expect("proper")][i]).collect();
        ColouredPath { path: self.path.clone(), colours }
    }

    pub fn reverse(&self, g: &Graph) -> Option<ColouredPath> {
        Some(ColouredPath { path: self.path.reverse(g)?, colours: self.colours.iter().rev().copied().collect() })
    }
}

/// Samples walks with per-vertex cumulative jump tables.
#[derive(Debug, Clone)]
pub struct WalkSampler {
    cum: Vec<Vec<(f64, usize)>>,
}

impl WalkSampler {
    pub fn new(g: &Graph, ts: &TransitionStructure) -> Self {
        let cum = (0..g.n_vertices())
            .map(|v| {
                let mut acc = 0.0;
                g.out_edges(v)
                    .iter()
                    .map(|&e| {
                        acc += ts.p[e];
                        (acc, e)
                    })
                    .collect()
            })
            .collect();
        WalkSampler { cum }
    }

    pub fn jump<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let table = &self.cum[v];
        let u = rng.random::<f64>() * table.last().expect("proper vertex has edges").0;
        let k = table.partition_point(|&(c, _)| c <= u);
        table[k.min(table.len() - 1)].1
    }

    /// Walk from `v` until absorption; the final well holding time is `+∞`.
    pub fn sample<R: Rng + ?Sized>(&self, g: &Graph, v: usize, rng: &mut R) -> Result<ContinuousPath> {
        let mut vertices = vec![v];
        let mut edges = Vec::new();
        let mut holding = Vec::new();
        let mut cur = v;
        while !g.is_well(cur) {
            if edges.len() as u64 >= MAX_JUMPS {
                return Err(Error::SamplerOverrun(MAX_JUMPS));
            }
            holding.push(rng.sample::<f64, _>(Exp1));
            let e = self.jump(cur, rng);
            edges.push(e);
            cur = g.edge(e).dst;
            vertices.push(cur);
        }
        holding.push(f64::INFINITY);
        Ok(ContinuousPath { vertices, edges, holding })
    }
}

/// One walk from `v`; builds the jump tables on every call.
pub fn sample_walk<R: Rng + ?Sized>(g: &Graph, v: usize, rng: &mut R) -> Result<ContinuousPath> {
    WalkSampler::new(g, &g.transition()).sample(g, v, rng)
}

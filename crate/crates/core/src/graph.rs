//! Weighted graphs with a well and the transition structure of their walk.

use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub id: String,
    #[serde(default)]
    pub well: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub chi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
}

impl GraphSpec {
    pub fn vertex(mut self, id: &str, well: bool) -> Self {
        self.vertices.push(VertexSpec { id: id.into(), well, lambda: None });
        self
    }

    /// Adds the pair `id: a -> b` and `id~: b -> a`.
    pub fn pair(mut self, id: &str, a: &str, b: &str, chi: f64) -> Self {
        let back = format!("{id}~");
        self.edges.push(EdgeSpec { id: id.into(), src: a.into(), dst: b.into(), chi, inv: Some(back.clone()) });
        self.edges.push(EdgeSpec { id: back, src: b.into(), dst: a.into(), chi, inv: Some(id.into()) });
        self
    }

    /// Adds a one-way edge, meant to point into the well.
    pub fn edge(mut self, id: &str, a: &str, b: &str, chi: f64) -> Self {
        self.edges.push(EdgeSpec { id: id.into(), src: a.into(), dst: b.into(), chi, inv: None });
        self
    }

    pub fn new() -> Self {
        GraphSpec { vertices: vec![], edges: vec![] }
    }
}

impl Default for GraphSpec {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub id: String,
    pub src: usize,
    pub dst: usize,
    pub inv: Option<usize>,
    pub chi: f64,
}

/// A validated graph with a well. Vertices keep their specification order;
/// proper vertices are additionally numbered `0..n_proper()` in that order.
#[derive(Debug, Clone)]
pub struct Graph {
    ids: Vec<String>,
    well: Vec<bool>,
    proper: Vec<usize>,
    pindex: Vec<Option<usize>>,
    edges: Vec<Edge>,
    lambda: Vec<f64>,
    kappa: Vec<f64>,
    out: Vec<Vec<usize>>,
    spec: GraphSpec,
}

impl Graph {
    pub fn build(spec: &GraphSpec) -> Result<Graph> {
        let mut vindex = HashMap::new();
        for (i, v) in spec.vertices.iter().enumerate() {
            if vindex.insert(v.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(v.id.clone()));
            }
        }
        let mut eindex = HashMap::new();
        for (i, e) in spec.edges.iter().enumerate() {
            if eindex.insert(e.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        let well: Vec<bool> = spec.vertices.iter().map(|v| v.well).collect();
        let mut edges = Vec::with_capacity(spec.edges.len());
        for e in &spec.edges {
            if !(e.chi > 0.0 && e.chi.is_finite()) {
                return Err(Error::NonpositiveConductance(e.id.clone()));
            }
            let src = *vindex.get(&e.src).ok_or_else(|| Error::UnknownVertex(e.src.clone()))?;
            let dst = *vindex.get(&e.dst).ok_or_else(|| Error::UnknownVertex(e.dst.clone()))?;
            if well[src] {
                return Err(Error::EdgeFromWell(e.id.clone()));
            }
            let inv = match &e.inv {
                None => None,
                Some(name) => Some(*eindex.get(name).ok_or_else(|| Error::BadInvolution(e.id.clone()))?),
            };
            edges.push(Edge { id: e.id.clone(), src, dst, inv, chi: e.chi });
        }
        if !well.iter().any(|&w| w) {
            return Err(Error::EmptyWell);
        }
        for (v, &w) in well.iter().enumerate() {
            if w && !edges.iter().any(|e| e.dst == v) {
                return Err(Error::IsolatedWellVertex(spec.vertices[v].id.clone()));
            }
        }
        for (i, e) in edges.iter().enumerate() {
            match e.inv {
                Some(j) => {
                    let f = &edges[j];
                    let ok = j != i
                        && f.inv == Some(i)
                        && f.src == e.dst
                        && f.dst == e.src
                        && (f.chi - e.chi).abs() <= 1e-12 * e.chi.max(f.chi);
                    if !ok {
                        return Err(Error::BadInvolution(e.id.clone()));
                    }
                }
                None if !well[e.dst] => return Err(Error::NonSymmetricProperSubgraph(e.id.clone())),
                None => {}
            }
        }

        let n_u = spec.vertices.len();
        let mut out = vec![Vec::new(); n_u];
        for (i, e) in edges.iter().enumerate() {
            out[e.src].push(i);
        }
        let mut lambda = vec![0.0; n_u];
        let mut kappa = vec![0.0; n_u];
        for (v, vs) in spec.vertices.iter().enumerate() {
            if well[v] {
                let l = vs.lambda.unwrap_or(1.0);
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::Eq1Violation(vs.id.clone()));
                }
                lambda[v] = l;
                continue;
            }
            let sum: f64 = out[v].iter().map(|&e| edges[e].chi).sum();
            kappa[v] = out[v].iter().filter(|&&e| well[edges[e].dst]).map(|&e| edges[e].chi).sum();
            if let Some(given) = vs.lambda {
                if (given - sum).abs() > 1e-9 * sum.max(1.0) {
                    return Err(Error::Eq1Violation(vs.id.clone()));
                }
            }
            lambda[v] = sum;
        }

        let proper: Vec<usize> = (0..n_u).filter(|&v| !well[v]).collect();
        let mut pindex = vec![None; n_u];
        for (k, &v) in proper.iter().enumerate() {
            pindex[v] = Some(k);
        }
        if let Some(&start) = proper.first() {
            let mut seen = vec![false; n_u];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &e in &out[v] {
                    let d = edges[e].dst;
                    if !well[d] && !seen[d] {
                        seen[d] = true;
                        queue.push_back(d);
                    }
                }
            }
            if let Some(&v) = proper.iter().find(|&&v| !seen[v]) {
                return Err(Error::DisconnectedProperSubgraph(spec.vertices[v].id.clone()));
            }
        }
        // A lone proper vertex still needs a way out.
        for &v in &proper {
            if lambda[v] <= 0.0 {
                return Err(Error::DisconnectedProperSubgraph(spec.vertices[v].id.clone()));
            }
        }

        Ok(Graph {
            ids: spec.vertices.iter().map(|v| v.id.clone()).collect(),
            well,
            proper,
            pindex,
            edges,
            lambda,
            kappa,
            out,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    pub fn n_vertices(&self) -> usize {
        self.ids.len()
    }

    pub fn n_proper(&self) -> usize {
        self.proper.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.ids[v]
    }

    pub fn vertex_by_id(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    pub fn edge_by_id(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn is_well(&self, v: usize) -> bool {
        self.well[v]
    }

    /// Vertex index of the `k`-th proper vertex.
    pub fn proper_vertex(&self, k: usize) -> usize {
        self.proper[k]
    }

    /// Proper numbering of vertex `v`, `None` on the well.
    pub fn pindex(&self, v: usize) -> Option<usize> {
        self.pindex[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn lambda(&self, v: usize) -> f64 {
        self.lambda[v]
    }

    pub fn kappa(&self, v: usize) -> f64 {
        self.kappa[v]
    }

    /// λ on proper vertices, in proper order.
    pub fn lambda_proper(&self) -> Vec<f64> {
        self.proper.iter().map(|&v| self.lambda[v]).collect()
    }

    pub fn kappa_proper(&self) -> Vec<f64> {
        self.proper.iter().map(|&v| self.kappa[v]).collect()
    }

    /// Symmetry factor: 1/2 on edges with an inverse, 1 on edges into the well.
    pub fn symmetry(&self, e: usize) -> f64 {
        if self.edges[e].inv.is_some() {
            0.5
        } else {
            1.0
        }
    }

    /// Proper vertices with an edge into the well.
    pub fn rim(&self) -> Vec<usize> {
        (0..self.n_proper()).filter(|&k| self.kappa[self.proper[k]] > 0.0).collect()
    }

    /// Geometric edges: one representative per inverse pair plus every edge
    /// into the well.
    pub fn geometric_edges(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].inv.is_none_or(|j| e < j)).collect()
    }

    pub fn transition(&self) -> TransitionStructure {
        TransitionStructure::new(self)
    }
}

/// Jump probabilities of the discrete walk and its restriction to `V`.
#[derive(Debug, Clone)]
pub struct TransitionStructure {
    /// `P_{src(e), e}` per edge.
    pub p: Vec<f64>,
    /// Proper-vertex matrix `Q_{x,y} = Σ_{e: x→y} P_{x,e}`.
    pub q: DMatrix<f64>,
    pub rho: f64,
}

impl TransitionStructure {
    fn new(g: &Graph) -> Self {
        let n = g.n_proper();
        let p: Vec<f64> = g.edges.iter().map(|e| e.chi / g.lambda[e.src]).collect();
        let mut q = DMatrix::zeros(n, n);
        for (i, e) in g.edges.iter().enumerate() {
            if let (Some(x), Some(y)) = (g.pindex[e.src], g.pindex[e.dst]) {
                q[(x, y)] += p[i];
            }
        }
        // Q is λ-reversible, so Λ^{1/2} Q Λ^{-1/2} is symmetric.
        let sl: Vec<f64> = g.lambda_proper().iter().map(|l| l.sqrt()).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (sl[i] * q[(i, j)] / sl[j] + sl[j] * q[(j, i)] / sl[i]));
        let rho = if n == 0 {
            0.0
        } else {
            SymmetricEigen::new(sym).eigenvalues.iter().fold(0.0f64, |m: f64, v: &f64| m.max(v.abs()))
        };
        TransitionStructure { p, q, rho }
    }

    /// `Qⁿ` for `n = 0..=n_max`.
    pub fn powers(&self, n_max: usize) -> Vec<DMatrix<f64>> {
        let n = self.q.nrows();
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(DMatrix::identity(n, n));
        for k in 1..=n_max {
            let next = &out[k - 1] * &self.q;
            out.push(next);
        }
        out
    }
}

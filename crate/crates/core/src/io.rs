//! Configuration files and data export.
//!
//! A configuration names a graph, a bundle and optionally a connection, a
//! potential and a splitting, each in its own JSON file with paths relative
//! to the configuration. Matrices are arrays of rows whose entries are
//! `[re, im]` pairs. Connections list one matrix per geometric edge, keyed by
//! edge id; the inverse orientation is derived. Potentials and splittings
//! are keyed by vertex id; omitted vertices get a zero potential or the
//! trivial splitting.

use crate::bundle::{Bundle, Connection, Potential, Splitting};
use crate::coloured::{OccupationField, SignedEnsemble, StateSpace};
use crate::fixtures::Fixture;
use crate::graph::{Graph, GraphSpec};
use crate::linalg;
use crate::paths::{ColouredPath, ContinuousPath};
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Matrix as rows of `[re, im]` entries.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub graph: PathBuf,
    pub bundle: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitting: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionFile {
    pub edges: BTreeMap<String, JsonMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub vertices: BTreeMap<String, JsonMatrix>,
}

/// Orthogonal projectors per vertex, one per colour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingFile {
    pub vertices: BTreeMap<String, Vec<JsonMatrix>>,
}

pub fn matrix_from_json(m: &JsonMatrix, what: &str) -> Result<CMat> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch(what.into()));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| C64::new(m[i][j][0], m[i][j][1])))
}

pub fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    read_json(path)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn connection_from_file(g: &Graph, b: &Bundle, file: &ConnectionFile) -> Result<Connection> {
    let mut hol: Vec<Option<CMat>> = vec![None; g.n_edges()];
    for (id, m) in &file.edges {
        let e = g.edge_by_id(id).ok_or_else(|| Error::UnknownEdge(id.clone()))?;
        let m = matrix_from_json(m, id)?;
        if m.nrows() != b.rank || m.ncols() != b.rank {
            return Err(Error::ShapeMismatch(id.clone()));
        }
        if hol[e].is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
        if let Some(j) = g.edge(e).inv {
            if hol[j].is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
            hol[j] = Some(m.adjoint());
        }
        hol[e] = Some(m);
    }
    let hol = hol
        .into_iter()
        .enumerate()
        .map(|(e, m)| m.ok_or_else(|| Error::ConnectionIncomplete(g.edge(e).id.clone())))
        .collect::<Result<Vec<_>>>()?;
    Connection::new(g, b, hol)
}

pub fn connection_to_file(g: &Graph, h: &Connection) -> ConnectionFile {
    let edges = g.geometric_edges().into_iter().map(|e| (g.edge(e).id.clone(), matrix_to_json(h.hol(e)))).collect();
    ConnectionFile { edges }
}

fn proper_index(g: &Graph, id: &str) -> Result<usize> {
    let v = g.vertex_by_id(id).ok_or_else(|| Error::UnknownVertex(id.into()))?;
    g.pindex(v).ok_or_else(|| Error::InvalidArgument(format!("{id} is in the well")))
}

pub fn potential_from_file(g: &Graph, b: &Bundle, file: &PotentialFile) -> Result<Potential> {
    let mut h = vec![CMat::zeros(b.rank, b.rank); g.n_proper()];
    for (id, m) in &file.vertices {
        h[proper_index(g, id)?] = matrix_from_json(m, id)?;
    }
    Potential::new(g, b, h)
}

pub fn potential_to_file(g: &Graph, pot: &Potential) -> PotentialFile {
    let vertices = (0..g.n_proper())
        .filter(|&x| !pot.is_zero_at(x))
        .map(|x| (g.vertex_id(g.proper_vertex(x)).to_string(), matrix_to_json(pot.h(x))))
        .collect();
    PotentialFile { vertices }
}

pub fn splitting_from_file(g: &Graph, b: &Bundle, file: &SplittingFile) -> Result<Splitting> {
    let mut proj = vec![vec![linalg::identity(b.rank)]; g.n_proper()];
    for (id, ps) in &file.vertices {
        proj[proper_index(g, id)?] = ps.iter().map(|m| matrix_from_json(m, id)).collect::<Result<_>>()?;
    }
    Splitting::new(g, b, proj)
}

pub fn splitting_to_file(g: &Graph, s: &Splitting) -> SplittingFile {
    let vertices = (0..g.n_proper())
        .filter(|&x| s.n_colours(x) > 1)
        .map(|x| {
            let ps = (0..s.n_colours(x)).map(|i| matrix_to_json(s.proj(x, i))).collect();
            (g.vertex_id(g.proper_vertex(x)).to_string(), ps)
        })
        .collect();
    SplittingFile { vertices }
}

/// Outcome of one structural validator.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub invariant: &'static str,
    pub result: Result<()>,
}

/// A fixture loaded from a configuration together with the per-invariant
/// validation log; loading stops at the first failure.
pub struct Loaded {
    pub config: RunConfig,
    pub fixture: Option<Fixture>,
    pub log: Vec<Validation>,
}

impl Loaded {
    pub fn first_failure(&self) -> Option<&Error> {
        self.log.iter().find_map(|v| v.result.as_ref().err())
    }

    pub fn into_fixture(self) -> Result<Fixture> {
        if let Some(e) = self.first_failure() {
            return Err(e.clone());
        }
        self.fixture.ok_or_else(|| Error::InvalidArgument("nothing loaded".into()))
    }
}

/// Reads a configuration and validates graph, bundle, connection, potential
/// and splitting in that order.
pub fn load(config_path: &Path) -> Result<Loaded> {
    let config = read_config(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut log = Vec::new();
    macro_rules! stage {
        ($name:literal, $e:expr) => {
            match $e {
                Ok(v) => {
                    log.push(Validation { invariant: $name, result: Ok(()) });
                    v
                }
                Err(err) => {
                    log.push(Validation { invariant: $name, result: Err(err) });
                    return Ok(Loaded { config, fixture: None, log });
                }
            }
        };
    }
    let graph = stage!("graph", read_json::<GraphSpec>(&resolve(base, &config.graph)).and_then(|s| Graph::build(&s)));
    let bundle = stage!(
        "bundle",
        read_json::<Bundle>(&resolve(base, &config.bundle)).and_then(|b| Bundle::new(b.rank, b.field))
    );
    let connection = stage!(
        "connection",
        match &config.connection {
            Some(p) => read_json(&resolve(base, p)).and_then(|f| connection_from_file(&graph, &bundle, &f)),
            None => Ok(Connection::trivial(&graph, &bundle)),
        }
    );
    let potential = stage!(
        "potential",
        match &config.potential {
            Some(p) => read_json(&resolve(base, p)).and_then(|f| potential_from_file(&graph, &bundle, &f)),
            None => Ok(Potential::zero(&graph, &bundle)),
        }
    );
    let splitting = stage!(
        "splitting",
        match &config.splitting {
            Some(p) => read_json(&resolve(base, p)).and_then(|f| splitting_from_file(&graph, &bundle, &f)),
            None => Ok(Splitting::trivial(&graph, &bundle)),
        }
    );
    let name = config
        .name
        .clone()
        .unwrap_or_else(|| config_path.file_stem().map_or("config".into(), |s| s.to_string_lossy().into_owned()));
    let fixture = Fixture { name, graph, bundle, connection, potential, splitting };
    Ok(Loaded { config, fixture: Some(fixture), log })
}

/// Loads and validates a configuration, failing on the first invariant.
pub fn load_fixture(config_path: &Path) -> Result<(RunConfig, Fixture)> {
    let loaded = load(config_path)?;
    let config = loaded.config.clone();
    Ok((config, loaded.into_fixture()?))
}

/// Writes a fixture as `<stem>.config.json` plus one file per component.
pub fn save_fixture(fx: &Fixture, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let g = &fx.graph;
    let file = |kind: &str| PathBuf::from(format!("{stem}.{kind}.json"));
    write_json(&dir.join(file("graph")), g.spec())?;
    write_json(&dir.join(file("bundle")), &fx.bundle)?;
    write_json(&dir.join(file("connection")), &connection_to_file(g, &fx.connection))?;
    let potential = (!fx.potential.is_zero()).then(|| file("potential"));
    if let Some(p) = &potential {
        write_json(&dir.join(p), &potential_to_file(g, &fx.potential))?;
    }
    let split = splitting_to_file(g, &fx.splitting);
    let splitting = (!split.vertices.is_empty()).then(|| file("splitting"));
    if let Some(p) = &splitting {
        write_json(&dir.join(p), &split)?;
    }
    let config = RunConfig {
        name: Some(fx.name.clone()),
        graph: file("graph"),
        bundle: file("bundle"),
        connection: Some(file("connection")),
        potential,
        splitting,
        seed: None,
        samples: None,
        tol: None,
        out: None,
    };
    let path = dir.join(format!("{stem}.config.json"));
    write_json(&path, &config)?;
    Ok(path)
}

#[derive(Serialize)]
struct WalkRecord<'a> {
    start: &'a str,
    vertices: Vec<&'a str>,
    edges: Vec<&'a str>,
    /// `null` for the infinite holding time in the well.
    holding: Vec<Option<f64>>,
}

/// One JSON object per walk.
pub fn walks_jsonl(g: &Graph, walks: &[ContinuousPath]) -> Result<String> {
    let mut out = String::new();
    for w in walks {
        let rec = WalkRecord {
            start: g.vertex_id(w.start()),
            vertices: w.vertices.iter().map(|&v| g.vertex_id(v)).collect(),
            edges: w.edges.iter().map(|&e| g.edge(e).id.as_str()).collect(),
            holding: w.holding.iter().map(|&t| t.is_finite().then_some(t)).collect(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct LoopRecord<'a> {
    soup: usize,
    sign: i8,
    vertices: Vec<&'a str>,
    edges: Vec<&'a str>,
    colours: &'a [usize],
    holding: &'a [f64],
}

/// One JSON object per non-constant loop, tagged with its soup index and
/// the sign of its weight.
pub fn loops_jsonl(g: &Graph, soups: &[SignedEnsemble]) -> Result<String> {
    let mut out = String::new();
    for (k, soup) in soups.iter().enumerate() {
        for (sign, loops) in [(1i8, &soup.positive), (-1, &soup.negative)] {
            for l in loops.iter() {
                out.push_str(&serde_json::to_string(&loop_record(g, k, sign, l))?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

fn loop_record<'a>(g: &'a Graph, soup: usize, sign: i8, l: &'a ColouredPath) -> LoopRecord<'a> {
    LoopRecord {
        soup,
        sign,
        vertices: l.path.vertices.iter().map(|&v| g.vertex_id(v)).collect(),
        edges: l.path.edges.iter().map(|&e| g.edge(e).id.as_str()).collect(),
        colours: &l.colours,
        holding: &l.path.holding,
    }
}

/// Dense row-major CSV with `re,im` column pairs.
pub fn matrix_csv(m: &CMat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e},{:e}", m[(i, j)].re, m[(i, j)].im)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Field samples as `sample,vertex,component,re,im`.
pub fn field_csv(g: &Graph, r: usize, samples: &[CVec]) -> String {
    let mut out = String::from("sample,vertex,component,re,im\n");
    for (k, phi) in samples.iter().enumerate() {
        for (i, z) in phi.iter().enumerate() {
            let v = g.vertex_id(g.proper_vertex(i / r));
            let _ = writeln!(out, "{k},{v},{},{:e},{:e}", i % r, z.re, z.im);
        }
    }
    out
}

/// Occupation fields as `sample,vertex,colour,value`.
pub fn occupation_csv(g: &Graph, st: &StateSpace, fields: &[OccupationField]) -> String {
    let mut out = String::from("sample,vertex,colour,value\n");
    for (k, occ) in fields.iter().enumerate() {
        for (s, t) in occ.theta.iter().enumerate() {
            let v = g.vertex_id(g.proper_vertex(st.vertex(s)));
            let _ = writeln!(out, "{k},{v},{},{:e}", st.colour(s), t);
        }
    }
    out
}

/// Pretty JSON array of serializable reports.
pub fn report_json<T: Serialize>(reports: &[T]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(reports)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

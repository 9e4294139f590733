//! Exchange graph, budgets, plans and feasibility checking.
//!
//! The exchange graph is an undirected r-partite graph: each vertex is an
//! observation owned by one robot, each edge a potential inter-robot loop
//! closure carrying the probability that it is a true match. Vertices and
//! edges keep the integer ids they were given on input (`key`), but the graph
//! assigns dense indices ([`VertexId`], [`EdgeId`]) ordered by ascending key.
//! Every set-valued output is sorted by dense index.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymTerm, SymTermRecord};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Translational and rotational measurement precisions of a candidate edge.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Precisions {
    pub translational: f64,
    pub rotational: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub key: u64,
    pub robot: usize,
    /// Size of the full observation in bytes.
    pub weight: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub key: u64,
    /// Endpoints with `u < v`.
    pub u: VertexId,
    pub v: VertexId,
    pub probability: f64,
    pub info: Option<SymTerm>,
    pub precisions: Option<Precisions>,
}

impl Edge {
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Raw vertex description accepted by [`ExchangeGraph::build`].
#[derive(Clone, Debug, PartialEq)]
pub struct VertexSpec {
    pub key: u64,
    pub robot: usize,
    pub weight: u64,
}

/// Raw edge description accepted by [`ExchangeGraph::build`]; endpoints are vertex keys.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSpec {
    pub key: u64,
    pub u: u64,
    pub v: u64,
    pub probability: f64,
    pub info: Option<SymTerm>,
    pub precisions: Option<Precisions>,
}

impl EdgeSpec {
    pub fn new(key: u64, u: u64, v: u64, probability: f64) -> Self {
        EdgeSpec {
            key,
            u,
            v,
            probability,
            info: None,
            precisions: None,
        }
    }
}

/// Index of the unordered robot pair `{i, j}` in lexicographic order of `(min, max)`.
pub fn pair_index(robots: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(b < robots && a != b);
    a * (2 * robots - a - 1) / 2 + (b - a - 1)
}

pub fn pair_count(robots: usize) -> usize {
    robots * robots.saturating_sub(1) / 2
}

/// All unordered robot pairs in [`pair_index`] order.
pub fn robot_pairs(robots: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(robots));
    for i in 0..robots {
        for j in i + 1..robots {
            out.push((i, j));
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct ExchangeGraph {
    robots: usize,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
    by_robot: Vec<Vec<VertexId>>,
    vertex_keys: HashMap<u64, VertexId>,
    edge_keys: HashMap<u64, EdgeId>,
}

impl ExchangeGraph {
    /// Validates the raw lists and builds the adjacency index.
    pub fn build(robots: usize, vertices: Vec<VertexSpec>, edges: Vec<EdgeSpec>) -> Result<Self> {
        let mut vs = vertices;
        vs.sort_by_key(|v| v.key);
        let mut vertex_keys = HashMap::with_capacity(vs.len());
        let mut out_vertices = Vec::with_capacity(vs.len());
        for (i, v) in vs.into_iter().enumerate() {
            if vertex_keys.insert(v.key, VertexId(i)).is_some() {
                return Err(Error::DuplicateVertex(v.key));
            }
            if v.robot >= robots {
                return Err(Error::RobotOutOfRange {
                    vertex: v.key,
                    robot: v.robot,
                    robots,
                });
            }
            if v.weight == 0 {
                return Err(Error::NonPositiveWeight(v.key));
            }
            out_vertices.push(Vertex {
                id: VertexId(i),
                key: v.key,
                robot: v.robot,
                weight: v.weight,
            });
        }

        let mut es = edges;
        es.sort_by_key(|e| e.key);
        let mut edge_keys = HashMap::with_capacity(es.len());
        let mut seen_pairs = HashSet::with_capacity(es.len());
        let mut out_edges = Vec::with_capacity(es.len());
        for (i, e) in es.into_iter().enumerate() {
            if edge_keys.insert(e.key, EdgeId(i)).is_some() {
                return Err(Error::DuplicateEdgeId(e.key));
            }
            let u = *vertex_keys.get(&e.u).ok_or(Error::UnknownVertex(e.u))?;
            let v = *vertex_keys.get(&e.v).ok_or(Error::UnknownVertex(e.v))?;
            if u == v {
                return Err(Error::SelfLoop {
                    edge: e.key,
                    vertex: e.u,
                });
            }
            let ru = out_vertices[u.0].robot;
            if ru == out_vertices[v.0].robot {
                return Err(Error::IntraBlockEdge {
                    edge: e.key,
                    robot: ru,
                });
            }
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            if !seen_pairs.insert((u, v)) {
                return Err(Error::DuplicateEdge {
                    edge: e.key,
                    u: out_vertices[u.0].key,
                    v: out_vertices[v.0].key,
                });
            }
            if !(0.0..=1.0).contains(&e.probability) {
                return Err(Error::ProbabilityOutOfRange {
                    edge: e.key,
                    p: e.probability,
                });
            }
            if let Some(pr) = e.precisions {
                let ok = |x: f64| x.is_finite() && x > 0.0;
                if !ok(pr.translational) || !ok(pr.rotational) {
                    return Err(Error::InvalidPrecision { edge: e.key });
                }
            }
            if let Some(info) = &e.info {
                info.check_psd(&format!("information matrix of edge {}", e.key))?;
            }
            out_edges.push(Edge {
                id: EdgeId(i),
                key: e.key,
                u,
                v,
                probability: e.probability,
                info: e.info,
                precisions: e.precisions,
            });
        }

        let mut incident = vec![Vec::new(); out_vertices.len()];
        for e in &out_edges {
            incident[e.u.0].push(e.id);
            incident[e.v.0].push(e.id);
        }
        let mut by_robot = vec![Vec::new(); robots];
        for v in &out_vertices {
            by_robot[v.robot].push(v.id);
        }
        Ok(ExchangeGraph {
            robots,
            vertices: out_vertices,
            edges: out_edges,
            incident,
            by_robot,
            vertex_keys,
            edge_keys,
        })
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn vertex_by_key(&self, key: u64) -> Result<VertexId> {
        self.vertex_keys.get(&key).copied().ok_or(Error::UnknownVertex(key))
    }

    pub fn edge_by_key(&self, key: u64) -> Result<EdgeId> {
        self.edge_keys.get(&key).copied().ok_or(Error::UnknownEdge(key))
    }

    /// Edges incident to `v`, ascending.
    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v.0]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident[v.0].len()
    }

    pub fn robot_vertices(&self, robot: usize) -> &[VertexId] {
        &self.by_robot[robot]
    }

    pub fn probability(&self, e: EdgeId) -> f64 {
        self.edges[e.0].probability
    }

    /// Robot pair `(i, j)`, `i < j`, joined by edge `e`.
    pub fn edge_robots(&self, e: EdgeId) -> (usize, usize) {
        let ed = &self.edges[e.0];
        let a = self.vertices[ed.u.0].robot;
        let b = self.vertices[ed.v.0].robot;
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn edge_pair_index(&self, e: EdgeId) -> usize {
        let (a, b) = self.edge_robots(e);
        pair_index(self.robots, a, b)
    }

    /// Edges with at least one endpoint in `vs`, ascending.
    pub fn edges_of(&self, vs: &[VertexId]) -> Result<Vec<EdgeId>> {
        let mut mark = vec![false; self.edges.len()];
        for &v in vs {
            if v.0 >= self.vertices.len() {
                return Err(Error::UnknownVertex(v.0 as u64));
            }
            for &e in &self.incident[v.0] {
                mark[e.0] = true;
            }
        }
        Ok(mark_to_ids(&mark))
    }

    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of candidate edges between each robot pair, in [`pair_index`] order.
    pub fn pair_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; pair_count(self.robots)];
        for e in &self.edges {
            out[self.edge_pair_index(e.id)] += 1;
        }
        out
    }

    /// Sum of probabilities over each robot pair's candidate edges.
    pub fn pair_probability_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; pair_count(self.robots)];
        for e in &self.edges {
            out[self.edge_pair_index(e.id)] += e.probability;
        }
        out
    }

    pub fn all_edge_ids(&self) -> Vec<EdgeId> {
        (0..self.edges.len()).map(EdgeId).collect()
    }

    pub fn all_vertex_ids(&self) -> Vec<VertexId> {
        (0..self.vertices.len()).map(VertexId).collect()
    }

    pub fn to_file(&self) -> GraphFile {
        let dim = self
            .edges
            .iter()
            .filter_map(|e| e.info.as_ref())
            .flat_map(|t| t.indices.iter().copied())
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        GraphFile {
            robots: self.robots,
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.key,
                    robot: v.robot,
                    weight_bytes: v.weight,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.key,
                    u: self.vertices[e.u.0].key,
                    v: self.vertices[e.v.0].key,
                    p: e.probability,
                    precision_t: e.precisions.map(|p| p.translational),
                    precision_r: e.precisions.map(|p| p.rotational),
                    info: e.info.as_ref().map(|t| {
                        let rec = t.to_record(dim);
                        InfoRecord {
                            dim,
                            indices: rec.indices,
                            lower_triangle: rec.lower_triangle,
                        }
                    }),
                })
                .collect(),
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        let vertices = file
            .vertices
            .into_iter()
            .map(|v| VertexSpec {
                key: v.id,
                robot: v.robot,
                weight: v.weight_bytes,
            })
            .collect();
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in file.edges {
            let precisions = match (e.precision_t, e.precision_r) {
                (Some(t), Some(r)) => Some(Precisions {
                    translational: t,
                    rotational: r,
                }),
                (None, None) => None,
                _ => return Err(Error::InvalidPrecision { edge: e.id }),
            };
            let info = match &e.info {
                Some(rec) => Some(SymTerm::from_record(
                    rec.dim,
                    &SymTermRecord {
                        indices: rec.indices.clone(),
                        lower_triangle: rec.lower_triangle.clone(),
                    },
                )?),
                None => None,
            };
            edges.push(EdgeSpec {
                key: e.id,
                u: e.u,
                v: e.v,
                probability: e.p,
                info,
                precisions,
            });
        }
        ExchangeGraph::build(file.robots, vertices, edges)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(parse_json_document(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("graph serializes")
    }
}

pub(crate) fn mark_to_ids(mark: &[bool]) -> Vec<EdgeId> {
    mark.iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| EdgeId(i))
        .collect()
}

/// Parses a UTF-8 JSON document, rejecting a byte-order mark.
pub fn parse_json_document<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    if text.starts_with('\u{feff}') {
        return Err(Error::Parse("byte-order mark is not allowed".into()));
    }
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub robots: usize,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: u64,
    pub robot: usize,
    pub weight_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: u64,
    pub u: u64,
    pub v: u64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<InfoRecord>,
}

/// Edge information matrix: `dim` is the ambient state dimension; when
/// `indices` is present the lower triangle describes only that sub-block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoRecord {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    pub lower_triangle: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Budgets

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommBudget {
    /// At most `b` broadcast observations.
    Tu { b: usize },
    /// At most `bytes` broadcast bytes.
    Tn { bytes: u64 },
    /// At most `limits[i]` observations from block `i`. Blocks default to the
    /// robot partition; `blocks[v]` overrides the block of dense vertex `v`.
    Iu {
        limits: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompBudget {
    /// At most `k` verified edges in total.
    Total { k: usize },
    /// Robot `i` verifies at most `per_robot[i]` edges in the worst case.
    Individual { per_robot: Vec<usize> },
    /// At most `limits[pair_index(i, j)]` verified edges between robots `i` and `j`.
    Pairwise(PairwiseBudgets),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseBudgets {
    pub robots: usize,
    pub limits: Vec<usize>,
}

impl PairwiseBudgets {
    pub fn new(robots: usize, limits: Vec<usize>) -> Result<Self> {
        if limits.len() != pair_count(robots) {
            return Err(Error::BlockMismatch {
                expected: pair_count(robots),
                given: limits.len(),
            });
        }
        Ok(PairwiseBudgets { robots, limits })
    }

    pub fn uniform(robots: usize, k: usize) -> Self {
        PairwiseBudgets {
            robots,
            limits: vec![k; pair_count(robots)],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.limits[pair_index(self.robots, i, j)]
    }

    /// Worst-case number of verifications charged to each robot.
    pub fn robot_load(&self) -> Vec<usize> {
        let mut load = vec![0; self.robots];
        for (idx, (i, j)) in robot_pairs(self.robots).into_iter().enumerate() {
            load[i] += self.limits[idx];
            load[j] += self.limits[idx];
        }
        load
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub comm: CommBudget,
    pub comp: CompBudget,
}

impl Budget {
    pub fn tu(b: usize, k: usize) -> Self {
        Budget {
            comm: CommBudget::Tu { b },
            comp: CompBudget::Total { k },
        }
    }

    pub fn tn(bytes: u64, k: usize) -> Self {
        Budget {
            comm: CommBudget::Tn { bytes },
            comp: CompBudget::Total { k },
        }
    }

    pub fn iu(limits: Vec<usize>, k: usize) -> Self {
        Budget {
            comm: CommBudget::Iu {
                limits,
                blocks: None,
            },
            comp: CompBudget::Total { k },
        }
    }

    /// Checks block counts against the graph.
    pub fn validate(&self, graph: &ExchangeGraph) -> Result<()> {
        if let CommBudget::Iu { limits, blocks } = &self.comm {
            match blocks {
                None => {
                    if limits.len() != graph.robots() {
                        return Err(Error::BlockMismatch {
                            expected: graph.robots(),
                            given: limits.len(),
                        });
                    }
                }
                Some(bl) => {
                    if bl.len() != graph.num_vertices() {
                        return Err(Error::BlockMismatch {
                            expected: graph.num_vertices(),
                            given: bl.len(),
                        });
                    }
                    if let Some(&bad) = bl.iter().find(|&&x| x >= limits.len()) {
                        return Err(Error::InvalidBudget(format!(
                            "block {bad} has no limit ({} limits given)",
                            limits.len()
                        )));
                    }
                }
            }
        }
        match &self.comp {
            CompBudget::Total { .. } => {}
            CompBudget::Individual { per_robot } => {
                if per_robot.len() != graph.robots() {
                    return Err(Error::BlockMismatch {
                        expected: graph.robots(),
                        given: per_robot.len(),
                    });
                }
            }
            CompBudget::Pairwise(pw) => {
                if pw.robots != graph.robots() || pw.limits.len() != pair_count(graph.robots()) {
                    return Err(Error::BlockMismatch {
                        expected: pair_count(graph.robots()),
                        given: pw.limits.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Block of each vertex under an IU budget.
pub(crate) fn iu_blocks(graph: &ExchangeGraph, blocks: &Option<Vec<usize>>) -> Vec<usize> {
    match blocks {
        Some(b) => b.clone(),
        None => graph.vertices().iter().map(|v| v.robot).collect(),
    }
}

// ---------------------------------------------------------------------------
// Plans

/// A selection of broadcast vertices and verified edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    pub objective: f64,
    pub comm_bytes: u64,
    pub comm_count: usize,
    /// Verified edges per robot pair, in [`pair_index`] order.
    pub per_pair: Vec<usize>,
}

impl Plan {
    pub fn empty(graph: &ExchangeGraph) -> Self {
        Plan::new(graph, Vec::new(), Vec::new(), 0.0)
    }

    /// Builds a plan, sorting the id sets and filling the usage counters.
    pub fn new(graph: &ExchangeGraph, mut vertices: Vec<VertexId>, mut edges: Vec<EdgeId>, objective: f64) -> Self {
        vertices.sort_unstable();
        vertices.dedup();
        edges.sort_unstable();
        edges.dedup();
        let comm_bytes = vertices.iter().map(|&v| graph.vertex(v).weight).sum();
        let mut per_pair = vec![0; pair_count(graph.robots())];
        for &e in &edges {
            per_pair[graph.edge_pair_index(e)] += 1;
        }
        Plan {
            comm_count: vertices.len(),
            vertices,
            edges,
            objective,
            comm_bytes,
            per_pair,
        }
    }

    pub fn verifications(&self) -> usize {
        self.edges.len()
    }

    pub fn to_record(&self, graph: &ExchangeGraph) -> PlanRecord {
        let pairs = robot_pairs(graph.robots());
        let per_pair_verifications = pairs
            .iter()
            .zip(&self.per_pair)
            .filter(|(_, &n)| n > 0)
            .map(|((i, j), &n)| (format!("{i}-{j}"), n))
            .collect();
        PlanRecord {
            vertices: self.vertices.iter().map(|&v| graph.vertex(v).key).collect(),
            edges: self.edges.iter().map(|&e| graph.edge(e).key).collect(),
            objective: self.objective,
            comm_bytes: self.comm_bytes,
            per_pair_verifications,
        }
    }

    /// Rebuilds a plan from its record; the objective is taken as recorded.
    pub fn from_record(graph: &ExchangeGraph, rec: &PlanRecord) -> Result<Self> {
        let vs = rec
            .vertices
            .iter()
            .map(|&k| graph.vertex_by_key(k))
            .collect::<Result<Vec<_>>>()?;
        let es = rec
            .edges
            .iter()
            .map(|&k| graph.edge_by_key(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Plan::new(graph, vs, es, rec.objective))
    }
}

/// Serialized plan: ids are the original vertex and edge ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRecord {
    pub vertices: Vec<u64>,
    pub edges: Vec<u64>,
    pub objective: f64,
    pub comm_bytes: u64,
    pub per_pair_verifications: BTreeMap<String, usize>,
}

// ---------------------------------------------------------------------------
// Feasibility

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    UnknownVertex(VertexId),
    UnknownEdge(EdgeId),
    Uncovered(EdgeId),
    CommCount { used: usize, limit: usize },
    CommBytes { used: u64, limit: u64 },
    CommBlock { block: usize, used: usize, limit: usize },
    CompTotal { used: usize, limit: usize },
    CompRobot { robot: usize, used: usize, limit: usize },
    CompPair { robots: (usize, usize), used: usize, limit: usize },
    BudgetShape(String),
}

impl Violation {
    fn family(&self) -> Family {
        match self {
            Violation::UnknownVertex(_) | Violation::UnknownEdge(_) | Violation::Uncovered(_) => Family::Covering,
            Violation::CommCount { .. } | Violation::CommBytes { .. } | Violation::CommBlock { .. } => Family::Comm,
            Violation::CompTotal { .. } | Violation::CompRobot { .. } | Violation::CompPair { .. } => Family::Comp,
            Violation::BudgetShape(_) => Family::Comm,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownVertex(v) => write!(f, "unknown vertex index {}", v.0),
            Violation::UnknownEdge(e) => write!(f, "unknown edge index {}", e.0),
            Violation::Uncovered(e) => write!(f, "edge index {} is not covered", e.0),
            Violation::CommCount { used, limit } => write!(f, "{used} broadcasts exceed {limit}"),
            Violation::CommBytes { used, limit } => write!(f, "{used} bytes exceed {limit}"),
            Violation::CommBlock { block, used, limit } => {
                write!(f, "block {block}: {used} broadcasts exceed {limit}")
            }
            Violation::CompTotal { used, limit } => write!(f, "{used} verifications exceed {limit}"),
            Violation::CompRobot { robot, used, limit } => {
                write!(f, "robot {robot}: worst-case {used} verifications exceed {limit}")
            }
            Violation::CompPair { robots, used, limit } => {
                write!(f, "pair {}-{}: {used} verifications exceed {limit}", robots.0, robots.1)
            }
            Violation::BudgetShape(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum Family {
    Covering,
    Comm,
    Comp,
}

/// Per-constraint verdict of [`check_feasible`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    fn family_ok(&self, fam: Family) -> bool {
        !self.violations.iter().any(|v| v.family() == fam)
    }

    pub fn covering_ok(&self) -> bool {
        self.family_ok(Family::Covering)
    }

    pub fn comm_ok(&self) -> bool {
        self.family_ok(Family::Comm)
    }

    pub fn comp_ok(&self) -> bool {
        self.family_ok(Family::Comp)
    }
}

/// Checks covering, communication and computation constraints of a selection.
pub fn check_feasible(graph: &ExchangeGraph, vertices: &[VertexId], edges: &[EdgeId], budget: &Budget) -> Feasibility {
    let mut out = Vec::new();
    let n = graph.num_vertices();
    let m = graph.num_edges();
    let mut selected = vec![false; n];
    let mut vs: Vec<VertexId> = Vec::with_capacity(vertices.len());
    for &v in vertices {
        if v.0 >= n {
            out.push(Violation::UnknownVertex(v));
        } else if !selected[v.0] {
            selected[v.0] = true;
            vs.push(v);
        }
    }
    let mut es: Vec<EdgeId> = Vec::with_capacity(edges.len());
    let mut seen = vec![false; m];
    for &e in edges {
        if e.0 >= m {
            out.push(Violation::UnknownEdge(e));
        } else if !seen[e.0] {
            seen[e.0] = true;
            es.push(e);
        }
    }
    for &e in &es {
        let ed = graph.edge(e);
        if !selected[ed.u.0] && !selected[ed.v.0] {
            out.push(Violation::Uncovered(e));
        }
    }

    match &budget.comm {
        CommBudget::Tu { b } => {
            if vs.len() > *b {
                out.push(Violation::CommCount { used: vs.len(), limit: *b });
            }
        }
        CommBudget::Tn { bytes } => {
            let used: u64 = vs.iter().map(|&v| graph.vertex(v).weight).sum();
            if used > *bytes {
                out.push(Violation::CommBytes { used, limit: *bytes });
            }
        }
        CommBudget::Iu { limits, blocks } => match budget.validate(graph) {
            Err(e) => out.push(Violation::BudgetShape(e.to_string())),
            Ok(()) => {
                let block_of = iu_blocks(graph, blocks);
                let mut used = vec![0usize; limits.len()];
                for &v in &vs {
                    used[block_of[v.0]] += 1;
                }
                for (block, (&u, &l)) in used.iter().zip(limits).enumerate() {
                    if u > l {
                        out.push(Violation::CommBlock { block, used: u, limit: l });
                    }
                }
            }
        },
    }

    match &budget.comp {
        CompBudget::Total { k } => {
            if es.len() > *k {
                out.push(Violation::CompTotal { used: es.len(), limit: *k });
            }
        }
        CompBudget::Individual { per_robot } => {
            if per_robot.len() != graph.robots() {
                out.push(Violation::BudgetShape(format!(
                    "{} individual budgets for {} robots",
                    per_robot.len(),
                    graph.robots()
                )));
            } else {
                let mut load = vec![0usize; graph.robots()];
                for &e in &es {
                    let (a, b) = graph.edge_robots(e);
                    load[a] += 1;
                    load[b] += 1;
                }
                for (robot, (&u, &l)) in load.iter().zip(per_robot).enumerate() {
                    if u > l {
                        out.push(Violation::CompRobot { robot, used: u, limit: l });
                    }
                }
            }
        }
        CompBudget::Pairwise(pw) => {
            if pw.limits.len() != pair_count(graph.robots()) {
                out.push(Violation::BudgetShape(format!(
                    "{} pairwise budgets for {} robots",
                    pw.limits.len(),
                    graph.robots()
                )));
            } else {
                let mut used = vec![0usize; pw.limits.len()];
                for &e in &es {
                    used[graph.edge_pair_index(e)] += 1;
                }
                for (idx, (i, j)) in robot_pairs(graph.robots()).into_iter().enumerate() {
                    if used[idx] > pw.limits[idx] {
                        out.push(Violation::CompPair {
                            robots: (i, j),
                            used: used[idx],
                            limit: pw.limits[idx],
                        });
                    }
                }
            }
        }
    }
    Feasibility { violations: out }
}

pub fn check_plan(graph: &ExchangeGraph, plan: &Plan, budget: &Budget) -> Feasibility {
    check_feasible(graph, &plan.vertices, &plan.edges, budget)
}

//! Performance metrics over sets of verified edges.
//!
//! * NLC: expected number of true loop closures, `sum p(e)`.
//! * FIM: expected D-criterion gain, `logdet(H_init + sum p(e) H_e) - logdet(H_init)`.
//! * WST: expected weighted tree connectivity of the planar pose graph,
//!   `2 log t_p + log t_theta` relative to the prior graph.
//!
//! FIM and WST share one implementation: a weighted sum of log-determinants of
//! base matrices updated by per-edge symmetric terms.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, ExchangeGraph};
use crate::linalg::{cholesky, logdet_from_cholesky, logdet_spd, SymTerm, SymTermRecord};

/// A set function over edge subsets with a stateful marginal-gain interface.
pub trait Objective {
    fn name(&self) -> &'static str;

    fn num_edges(&self) -> usize;

    /// `f(E)`; the sum is formed in ascending edge order.
    fn value(&self, edges: &[EdgeId]) -> Result<f64>;

    /// Starts an empty selection.
    fn session(&self) -> Box<dyn GainSession + '_>;

    /// Modular objectives expose per-edge values.
    fn edge_value(&self, _e: EdgeId) -> Option<f64> {
        None
    }

    fn is_modular(&self) -> bool {
        false
    }
}

/// Incremental evaluator holding a current edge set `E`.
pub trait GainSession {
    /// Current `f(E)` as accumulated by the session.
    fn value(&self) -> f64;

    fn contains(&self, e: EdgeId) -> bool;

    /// `f(E u extra) - f(E)`, clamped at zero.
    fn gain(&mut self, extra: &[EdgeId]) -> f64;

    /// `E <- E u extra`.
    fn commit(&mut self, extra: &[EdgeId]);

    /// Number of `gain` calls so far.
    fn evaluations(&self) -> u64;
}

fn check_ids(m: usize, edges: &[EdgeId]) -> Result<()> {
    match edges.iter().find(|e| e.0 >= m) {
        Some(e) => Err(Error::UnknownEdge(e.0 as u64)),
        None => Ok(()),
    }
}

fn sorted_unique(edges: &[EdgeId]) -> Vec<EdgeId> {
    let mut v = edges.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn clamp_gain(g: f64) -> f64 {
    if g < 0.0 {
        log::debug!("clamped negative marginal gain {g:e} to 0");
        0.0
    } else {
        g
    }
}

/// `f(E u {e}) - f(E)` computed from two full evaluations.
pub fn marginal_gain(obj: &dyn Objective, edges: &[EdgeId], e: EdgeId) -> Result<f64> {
    check_ids(obj.num_edges(), &[e])?;
    let base = obj.value(edges)?;
    let mut with = edges.to_vec();
    with.push(e);
    Ok(clamp_gain(obj.value(&with)? - base))
}

// ---------------------------------------------------------------------------
// NLC

#[derive(Clone, Debug)]
pub struct NlcObjective {
    probabilities: Vec<f64>,
}

impl NlcObjective {
    pub fn new(graph: &ExchangeGraph) -> Self {
        NlcObjective {
            probabilities: graph.edges().iter().map(|e| e.probability).collect(),
        }
    }
}

pub fn nlc_eval(graph: &ExchangeGraph, edges: &[EdgeId]) -> Result<f64> {
    NlcObjective::new(graph).value(edges)
}

impl Objective for NlcObjective {
    fn name(&self) -> &'static str {
        "nlc"
    }

    fn num_edges(&self) -> usize {
        self.probabilities.len()
    }

    fn value(&self, edges: &[EdgeId]) -> Result<f64> {
        check_ids(self.probabilities.len(), edges)?;
        Ok(sorted_unique(edges).iter().map(|e| self.probabilities[e.0]).sum())
    }

    fn session(&self) -> Box<dyn GainSession + '_> {
        Box::new(NlcSession {
            p: &self.probabilities,
            in_set: vec![false; self.probabilities.len()],
            value: 0.0,
            evals: 0,
        })
    }

    fn edge_value(&self, e: EdgeId) -> Option<f64> {
        self.probabilities.get(e.0).copied()
    }

    fn is_modular(&self) -> bool {
        true
    }
}

struct NlcSession<'a> {
    p: &'a [f64],
    in_set: Vec<bool>,
    value: f64,
    evals: u64,
}

impl NlcSession<'_> {
    fn fresh(&self, extra: &[EdgeId]) -> Vec<EdgeId> {
        sorted_unique(extra).into_iter().filter(|e| !self.in_set[e.0]).collect()
    }
}

impl GainSession for NlcSession<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn contains(&self, e: EdgeId) -> bool {
        self.in_set[e.0]
    }

    fn gain(&mut self, extra: &[EdgeId]) -> f64 {
        self.evals += 1;
        self.fresh(extra).iter().map(|e| self.p[e.0]).sum()
    }

    fn commit(&mut self, extra: &[EdgeId]) {
        for e in self.fresh(extra) {
            self.in_set[e.0] = true;
            self.value += self.p[e.0];
        }
    }

    fn evaluations(&self) -> u64 {
        self.evals
    }
}

// ---------------------------------------------------------------------------
// Log-det family

/// One weighted `logdet(base + sum_e term_e)` component.
#[derive(Clone, Debug)]
pub struct LogDetBlock {
    pub coef: f64,
    pub base: DMatrix<f64>,
    /// Per-edge contribution, already scaled by the edge probability.
    pub terms: Vec<Option<SymTerm>>,
}

#[derive(Clone, Debug)]
pub struct LogDetObjective {
    name: &'static str,
    blocks: Vec<LogDetBlock>,
    offset: f64,
    incremental: bool,
}

impl LogDetObjective {
    pub fn new(name: &'static str, blocks: Vec<LogDetBlock>) -> Result<Self> {
        let mut offset = 0.0;
        for b in &blocks {
            let ld = logdet_spd(&b.base).ok_or_else(|| Error::NotPositiveDefinite(format!("{name} base matrix")))?;
            offset += b.coef * ld;
        }
        Ok(LogDetObjective {
            name,
            blocks,
            offset,
            incremental: true,
        })
    }

    /// Gains via the determinant lemma on a cached inverse (the default), or
    /// by refactoring the updated matrix when off.
    pub fn with_incremental(mut self, on: bool) -> Self {
        self.incremental = on;
        self
    }

    pub fn blocks(&self) -> &[LogDetBlock] {
        &self.blocks
    }

    /// `sum coef * logdet(base)`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Matrices `base + sum_e x_e term_e` for fractional weights `x`.
    pub fn matrices_at(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut m = b.base.clone();
                for (t, &w) in b.terms.iter().zip(x) {
                    if let Some(t) = t {
                        if w != 0.0 {
                            t.add_to(&mut m, w);
                        }
                    }
                }
                m
            })
            .collect()
    }

    /// `sum coef * logdet(M_b(x)) - offset`; `None` if some matrix is not PD.
    pub fn fractional_value(&self, x: &[f64]) -> Option<f64> {
        let mut v = 0.0;
        for (b, m) in self.blocks.iter().zip(self.matrices_at(x)) {
            v += b.coef * logdet_spd(&m)?;
        }
        Some(v - self.offset)
    }

    fn weights_of(&self, edges: &[EdgeId]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_edges()];
        for e in edges {
            x[e.0] = 1.0;
        }
        x
    }
}

impl Objective for LogDetObjective {
    fn name(&self) -> &'static str {
        self.name
    }

    fn num_edges(&self) -> usize {
        self.blocks.first().map(|b| b.terms.len()).unwrap_or(0)
    }

    fn value(&self, edges: &[EdgeId]) -> Result<f64> {
        check_ids(self.num_edges(), edges)?;
        if edges.is_empty() {
            return Ok(0.0);
        }
        let x = self.weights_of(edges);
        let v = self
            .fractional_value(&x)
            .ok_or_else(|| Error::NotPositiveDefinite(format!("{} information matrix", self.name)))?;
        Ok(v.max(0.0))
    }

    fn session(&self) -> Box<dyn GainSession + '_> {
        let mats: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| b.base.clone()).collect();
        let chols = mats
            .iter()
            .map(|m| cholesky(m).expect("base matrix checked positive definite"))
            .collect::<Vec<_>>();
        let logdets = chols.iter().map(logdet_from_cholesky).collect();
        let inverses = if self.incremental {
            chols.iter().map(|c| c.inverse()).collect()
        } else {
            Vec::new()
        };
        Box::new(LogDetSession {
            obj: self,
            in_set: vec![false; self.num_edges()],
            mats,
            chols,
            logdets,
            inverses,
            value: 0.0,
            evals: 0,
        })
    }
}

struct LogDetSession<'a> {
    obj: &'a LogDetObjective,
    in_set: Vec<bool>,
    mats: Vec<DMatrix<f64>>,
    chols: Vec<Cholesky<f64, Dyn>>,
    logdets: Vec<f64>,
    /// Inverse of each block matrix; empty unless the lemma path is on.
    inverses: Vec<DMatrix<f64>>,
    value: f64,
    evals: u64,
}

impl LogDetSession<'_> {
    fn fresh(&self, extra: &[EdgeId]) -> Vec<EdgeId> {
        sorted_unique(extra).into_iter().filter(|e| !self.in_set[e.0]).collect()
    }

    fn updated(&self, block: usize, fresh: &[EdgeId]) -> Option<DMatrix<f64>> {
        let b = &self.obj.blocks[block];
        let mut m = None::<DMatrix<f64>>;
        for e in fresh {
            if let Some(t) = &b.terms[e.0] {
                let mm = m.get_or_insert_with(|| self.mats[block].clone());
                t.add_to(mm, 1.0);
            }
        }
        m
    }

    /// `logdet(M + U) - logdet(M)` through `det(I + B_S (M^-1)_SS)` on the
    /// union support `S` of the added terms.
    fn lemma_delta(&self, block: usize, fresh: &[EdgeId]) -> Option<f64> {
        let b = &self.obj.blocks[block];
        let mut support: Vec<usize> = fresh
            .iter()
            .filter_map(|e| b.terms[e.0].as_ref())
            .flat_map(|t| t.indices.iter().copied())
            .collect();
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Some(0.0);
        }
        let s = support.len();
        let pos = |i: usize| support.binary_search(&i).unwrap();
        let mut bs = DMatrix::<f64>::zeros(s, s);
        for e in fresh {
            if let Some(t) = &b.terms[e.0] {
                for (a, &i) in t.indices.iter().enumerate() {
                    for (c, &j) in t.indices.iter().enumerate() {
                        bs[(pos(i), pos(j))] += t.block[(a, c)];
                    }
                }
            }
        }
        let inv = &self.inverses[block];
        let minv_ss = DMatrix::from_fn(s, s, |a, c| inv[(support[a], support[c])]);
        // Symmetric form: I + L_B^T Minv L_B is SPD when B is PSD, but B may be
        // only semidefinite, so use a general LU determinant.
        let k: DMatrix<f64> = DMatrix::identity(s, s) + &bs * minv_ss;
        let det = k.determinant();
        if det > 0.0 {
            Some(det.ln())
        } else {
            None
        }
    }

    fn block_delta(&self, block: usize, fresh: &[EdgeId]) -> Option<(f64, Option<(DMatrix<f64>, Cholesky<f64, Dyn>, f64)>)> {
        if self.obj.incremental {
            return self.lemma_delta(block, fresh).map(|d| (d, None));
        }
        match self.updated(block, fresh) {
            None => Some((0.0, None)),
            Some(m) => {
                let ch = cholesky(&m)?;
                let ld = logdet_from_cholesky(&ch);
                Some((ld - self.logdets[block], Some((m, ch, ld))))
            }
        }
    }
}

impl GainSession for LogDetSession<'_> {
    fn value(&self) -> f64 {
        self.value
    }

    fn contains(&self, e: EdgeId) -> bool {
        self.in_set[e.0]
    }

    fn gain(&mut self, extra: &[EdgeId]) -> f64 {
        self.evals += 1;
        let fresh = self.fresh(extra);
        if fresh.is_empty() {
            return 0.0;
        }
        let mut g = 0.0;
        for i in 0..self.obj.blocks.len() {
            match self.block_delta(i, &fresh) {
                Some((d, _)) => g += self.obj.blocks[i].coef * d,
                None => {
                    log::warn!("{}: factorization failed while evaluating a gain", self.obj.name);
                    return 0.0;
                }
            }
        }
        clamp_gain(g)
    }

    fn commit(&mut self, extra: &[EdgeId]) {
        let fresh = self.fresh(extra);
        if fresh.is_empty() {
            return;
        }
        for i in 0..self.obj.blocks.len() {
            let Some(m) = self.updated(i, &fresh) else { continue };
            let ch = cholesky(&m).expect("PSD update of a PD matrix stays PD");
            let ld = logdet_from_cholesky(&ch);
            self.value += self.obj.blocks[i].coef * (ld - self.logdets[i]);
            if self.obj.incremental {
                self.inverses[i] = ch.inverse();
            }
            self.mats[i] = m;
            self.chols[i] = ch;
            self.logdets[i] = ld;
        }
        for e in fresh {
            self.in_set[e.0] = true;
        }
        self.value = self.value.max(0.0);
    }

    fn evaluations(&self) -> u64 {
        self.evals
    }
}

// ---------------------------------------------------------------------------
// Contexts

/// Joint information before the rendezvous plus per-edge information matrices.
#[derive(Clone, Debug)]
pub struct InfoContext {
    pub h_init: DMatrix<f64>,
    /// Indexed by dense edge id.
    pub terms: Vec<SymTerm>,
}

impl InfoContext {
    pub fn new(h_init: DMatrix<f64>, terms: Vec<SymTerm>) -> Result<Self> {
        let dim = h_init.nrows();
        if h_init.ncols() != dim {
            return Err(Error::MalformedMatrix("H_init is not square".into()));
        }
        if cholesky(&h_init).is_none() {
            return Err(Error::NotPositiveDefinite("H_init".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if let Some(&bad) = t.indices.iter().find(|&&x| x >= dim) {
                return Err(Error::MalformedMatrix(format!("edge index {i}: coordinate {bad} outside dimension {dim}")));
            }
            t.check_psd(&format!("H_e of edge index {i}"))?;
        }
        Ok(InfoContext { h_init, terms })
    }

    pub fn dim(&self) -> usize {
        self.h_init.nrows()
    }

    /// Per-edge matrices come from `file`, falling back to the graph's edge info.
    pub fn from_file(graph: &ExchangeGraph, file: &InfoContextFile) -> Result<Self> {
        let h = SymTerm::from_record(file.dim, &file.h_init)?;
        let mut h_init = DMatrix::zeros(file.dim, file.dim);
        h.add_to(&mut h_init, 1.0);
        let mut terms: Vec<Option<SymTerm>> = graph.edges().iter().map(|e| e.info.clone()).collect();
        for rec in &file.edges {
            let id = graph.edge_by_key(rec.edge)?;
            let term = SymTerm::from_record(
                file.dim,
                &SymTermRecord {
                    indices: rec.indices.clone(),
                    lower_triangle: rec.lower_triangle.clone(),
                },
            )?;
            terms[id.0] = Some(term);
        }
        let terms = terms
            .into_iter()
            .zip(graph.edges())
            .map(|(t, e)| t.ok_or(Error::MissingInfo(e.key)))
            .collect::<Result<Vec<_>>>()?;
        InfoContext::new(h_init, terms)
    }

    pub fn to_file(&self, graph: &ExchangeGraph) -> InfoContextFile {
        let dim = self.dim();
        InfoContextFile {
            dim,
            h_init: SymTerm::dense(self.h_init.clone()).to_record(dim),
            edges: self
                .terms
                .iter()
                .zip(graph.edges())
                .map(|(t, e)| {
                    let r = t.to_record(dim);
                    InfoEdgeRecord {
                        edge: e.key,
                        indices: r.indices,
                        lower_triangle: r.lower_triangle,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoContextFile {
    pub dim: usize,
    pub h_init: SymTermRecord,
    #[serde(default)]
    pub edges: Vec<InfoEdgeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoEdgeRecord {
    pub edge: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    pub lower_triangle: Vec<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorEdge {
    pub u: usize,
    pub v: usize,
    pub precision_t: f64,
    pub precision_r: f64,
}

/// Planar pose graph before the rendezvous and the pose pair of every candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseGraphContext {
    pub poses: usize,
    pub prior: Vec<PriorEdge>,
    /// Pose endpoints of each candidate edge, indexed by dense edge id.
    pub candidates: Vec<(usize, usize)>,
}

impl PoseGraphContext {
    pub fn new(poses: usize, prior: Vec<PriorEdge>, candidates: Vec<(usize, usize)>) -> Result<Self> {
        for e in &prior {
            if e.u >= poses || e.v >= poses {
                return Err(Error::MalformedMatrix(format!("prior edge {}-{} outside {poses} poses", e.u, e.v)));
            }
            let ok = |x: f64| x.is_finite() && x > 0.0;
            if !ok(e.precision_t) || !ok(e.precision_r) {
                return Err(Error::MalformedMatrix(format!("prior edge {}-{} has invalid precision", e.u, e.v)));
            }
        }
        for &(u, v) in &candidates {
            if u >= poses || v >= poses || u == v {
                return Err(Error::MalformedMatrix(format!("candidate pose pair {u}-{v} invalid for {poses} poses")));
            }
        }
        let pairs: Vec<(usize, usize)> = prior.iter().map(|e| (e.u, e.v)).collect();
        if !connected(poses, &pairs) {
            return Err(Error::Disconnected);
        }
        Ok(PoseGraphContext {
            poses,
            prior,
            candidates,
        })
    }

    pub fn from_file(graph: &ExchangeGraph, file: &PoseGraphFile) -> Result<Self> {
        let mut cand: Vec<Option<(usize, usize)>> = vec![None; graph.num_edges()];
        for c in &file.candidates {
            let id = graph.edge_by_key(c.edge)?;
            cand[id.0] = Some((c.u, c.v));
        }
        let cand = cand
            .into_iter()
            .zip(graph.edges())
            .map(|(c, e)| c.ok_or(Error::MissingPoseData(e.key)))
            .collect::<Result<Vec<_>>>()?;
        PoseGraphContext::new(file.poses, file.prior_edges.clone(), cand)
    }

    pub fn to_file(&self, graph: &ExchangeGraph) -> PoseGraphFile {
        PoseGraphFile {
            poses: self.poses,
            prior_edges: self.prior.clone(),
            candidates: self
                .candidates
                .iter()
                .zip(graph.edges())
                .map(|(&(u, v), e)| CandidateRecord { edge: e.key, u, v })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseGraphFile {
    pub poses: usize,
    pub prior_edges: Vec<PriorEdge>,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub edge: u64,
    pub u: usize,
    pub v: usize,
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut comps = n;
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a != b {
            parent[a] = b;
            comps -= 1;
        }
    }
    comps == 1
}

/// Laplacian term of an edge with weight `w`, with pose 0 grounded.
fn laplacian_term(u: usize, v: usize, w: f64) -> SymTerm {
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    if a == 0 {
        SymTerm {
            indices: vec![b - 1],
            block: DMatrix::from_element(1, 1, w),
        }
    } else {
        SymTerm {
            indices: vec![a - 1, b - 1],
            block: DMatrix::from_row_slice(2, 2, &[w, -w, -w, w]),
        }
    }
}

fn reduced_laplacian(poses: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(poses.saturating_sub(1), poses.saturating_sub(1));
    for &(u, v, w) in edges {
        laplacian_term(u, v, w).add_to(&mut l, 1.0);
    }
    l
}

/// Log of the weighted spanning-tree count, as the log-determinant of the
/// Laplacian with pose 0 removed.
pub fn expected_log_tree_count(poses: usize, edges: &[(usize, usize, f64)]) -> Result<f64> {
    if poses <= 1 {
        return Ok(0.0);
    }
    for &(u, v, w) in edges {
        if u >= poses || v >= poses || u == v || !(w > 0.0) || !w.is_finite() {
            return Err(Error::MalformedMatrix(format!("invalid weighted edge {u}-{v} ({w})")));
        }
    }
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
    if !connected(poses, &pairs) {
        return Err(Error::Disconnected);
    }
    logdet_spd(&reduced_laplacian(poses, edges)).ok_or(Error::Disconnected)
}

// ---------------------------------------------------------------------------
// Handles

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Nlc,
    Fim,
    Wst,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nlc" => Ok(ObjectiveKind::Nlc),
            "fim" => Ok(ObjectiveKind::Fim),
            "wst" => Ok(ObjectiveKind::Wst),
            other => Err(Error::Parse(format!("unknown objective '{other}'"))),
        }
    }
}

/// An objective bound to its graph and context.
#[derive(Clone, Debug)]
pub enum ObjectiveHandle {
    Nlc(NlcObjective),
    Fim(LogDetObjective),
    Wst(LogDetObjective),
}

impl ObjectiveHandle {
    pub fn nlc(graph: &ExchangeGraph) -> Self {
        ObjectiveHandle::Nlc(NlcObjective::new(graph))
    }

    pub fn fim(graph: &ExchangeGraph, ctx: &InfoContext) -> Result<Self> {
        if ctx.terms.len() != graph.num_edges() {
            return Err(Error::BlockMismatch {
                expected: graph.num_edges(),
                given: ctx.terms.len(),
            });
        }
        let terms = ctx
            .terms
            .iter()
            .zip(graph.edges())
            .map(|(t, e)| Some(t.scaled(e.probability)))
            .collect();
        let block = LogDetBlock {
            coef: 1.0,
            base: ctx.h_init.clone(),
            terms,
        };
        Ok(ObjectiveHandle::Fim(LogDetObjective::new("fim", vec![block])?))
    }

    pub fn wst(graph: &ExchangeGraph, ctx: &PoseGraphContext) -> Result<Self> {
        if ctx.candidates.len() != graph.num_edges() {
            return Err(Error::BlockMismatch {
                expected: graph.num_edges(),
                given: ctx.candidates.len(),
            });
        }
        let mut blocks = Vec::with_capacity(2);
        for (coef, rotational) in [(2.0, false), (1.0, true)] {
            let tau = |pt: f64, pr: f64| if rotational { pr } else { pt };
            let prior: Vec<(usize, usize, f64)> = ctx
                .prior
                .iter()
                .map(|e| (e.u, e.v, tau(e.precision_t, e.precision_r)))
                .collect();
            let base = reduced_laplacian(ctx.poses, &prior);
            let mut terms = Vec::with_capacity(graph.num_edges());
            for (e, &(u, v)) in graph.edges().iter().zip(&ctx.candidates) {
                let pr = e.precisions.ok_or(Error::MissingPoseData(e.key))?;
                let w = e.probability * tau(pr.translational, pr.rotational);
                terms.push((w > 0.0).then(|| laplacian_term(u, v, w)));
            }
            blocks.push(LogDetBlock { coef, base, terms });
        }
        LogDetObjective::new("wst", blocks)
            .map(ObjectiveHandle::Wst)
            .map_err(|e| match e {
                Error::NotPositiveDefinite(_) => Error::Disconnected,
                other => other,
            })
    }

    pub fn kind(&self) -> ObjectiveKind {
        match self {
            ObjectiveHandle::Nlc(_) => ObjectiveKind::Nlc,
            ObjectiveHandle::Fim(_) => ObjectiveKind::Fim,
            ObjectiveHandle::Wst(_) => ObjectiveKind::Wst,
        }
    }

    pub fn with_incremental(self, on: bool) -> Self {
        match self {
            ObjectiveHandle::Fim(o) => ObjectiveHandle::Fim(o.with_incremental(on)),
            ObjectiveHandle::Wst(o) => ObjectiveHandle::Wst(o.with_incremental(on)),
            other => other,
        }
    }

    pub fn log_det(&self) -> Option<&LogDetObjective> {
        match self {
            ObjectiveHandle::Nlc(_) => None,
            ObjectiveHandle::Fim(o) | ObjectiveHandle::Wst(o) => Some(o),
        }
    }

    fn inner(&self) -> &dyn Objective {
        match self {
            ObjectiveHandle::Nlc(o) => o,
            ObjectiveHandle::Fim(o) | ObjectiveHandle::Wst(o) => o,
        }
    }
}

impl Objective for ObjectiveHandle {
    fn name(&self) -> &'static str {
        self.inner().name()
    }

    fn num_edges(&self) -> usize {
        self.inner().num_edges()
    }

    fn value(&self, edges: &[EdgeId]) -> Result<f64> {
        self.inner().value(edges)
    }

    fn session(&self) -> Box<dyn GainSession + '_> {
        self.inner().session()
    }

    fn edge_value(&self, e: EdgeId) -> Option<f64> {
        self.inner().edge_value(e)
    }

    fn is_modular(&self) -> bool {
        self.inner().is_modular()
    }
}

pub fn fim_eval(graph: &ExchangeGraph, ctx: &InfoContext, edges: &[EdgeId]) -> Result<f64> {
    ObjectiveHandle::fim(graph, ctx)?.value(edges)
}

pub fn wst_eval(graph: &ExchangeGraph, ctx: &PoseGraphContext, edges: &[EdgeId]) -> Result<f64> {
    ObjectiveHandle::wst(graph, ctx)?.value(edges)
}

//! Optimality certificates: exact optimum by enumeration on small instances,
//! and upper bounds from the LP relaxation (modular objectives) or a
//! Frank-Wolfe bound on the log-det relaxation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    iu_blocks, pair_count, Budget, CommBudget, CompBudget, EdgeId, ExchangeGraph, Plan, PlanRecord, VertexId,
};
use crate::linalg::cholesky;
use crate::objectives::{LogDetObjective, Objective};
use crate::simplex::LinearProgram;

pub const MAX_BRUTE_FORCE_VERTICES: usize = 16;
pub const MAX_BRUTE_FORCE_EDGES: usize = 20;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    OptBruteforce,
    UptLp,
    UptFrankwolfe,
}

/// Relaxed vertex and edge indicators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub pi: Vec<f64>,
    pub ell: Vec<f64>,
    pub value: f64,
    /// Certified distance to the relaxation optimum; zero for an exact LP.
    pub bound_gap: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FwStep {
    pub value: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// OPT, or an upper bound on it.
    pub value: f64,
    /// False when a solver hit its iteration cap before certifying.
    pub valid: bool,
    pub converged: bool,
    pub iterations: usize,
    pub fractional: Option<FractionalSolution>,
    /// Optimal plan (brute force) or rounded plan (relaxations).
    pub plan: Option<Plan>,
    pub trace: Vec<FwStep>,
}

impl Certificate {
    pub fn to_record(&self, graph: &ExchangeGraph) -> CertificateRecord {
        CertificateRecord {
            kind: self.kind,
            value: self.value,
            gap: self.fractional.as_ref().map_or(0.0, |f| f.bound_gap),
            valid: self.valid,
            converged: self.converged,
            iterations: self.iterations,
            fractional: self.fractional.clone(),
            plan: self.plan.as_ref().map(|p| p.to_record(graph)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateRecord {
    pub kind: CertificateKind,
    pub value: f64,
    pub gap: f64,
    pub valid: bool,
    pub converged: bool,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractional: Option<FractionalSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRecord>,
}

// ---------------------------------------------------------------------------
// Brute force

struct CommState<'a> {
    graph: &'a ExchangeGraph,
    budget: &'a CommBudget,
    block_of: Vec<usize>,
    count: usize,
    bytes: u64,
    block_used: Vec<usize>,
    over: usize,
}

impl<'a> CommState<'a> {
    fn new(graph: &'a ExchangeGraph, budget: &'a CommBudget) -> Self {
        let (block_of, nb) = match budget {
            CommBudget::Iu { limits, blocks } => (iu_blocks(graph, blocks), limits.len()),
            _ => (Vec::new(), 0),
        };
        CommState {
            graph,
            budget,
            block_of,
            count: 0,
            bytes: 0,
            block_used: vec![0; nb],
            over: 0,
        }
    }

    fn toggle(&mut self, v: usize, add: bool) {
        let w = self.graph.vertex(VertexId(v)).weight;
        if add {
            self.count += 1;
            self.bytes += w;
        } else {
            self.count -= 1;
            self.bytes -= w;
        }
        if let CommBudget::Iu { limits, .. } = self.budget {
            let b = self.block_of[v];
            let before = self.block_used[b] > limits[b];
            if add {
                self.block_used[b] += 1;
            } else {
                self.block_used[b] -= 1;
            }
            let after = self.block_used[b] > limits[b];
            match (before, after) {
                (false, true) => self.over += 1,
                (true, false) => self.over -= 1,
                _ => {}
            }
        }
    }

    fn feasible(&self) -> bool {
        match self.budget {
            CommBudget::Tu { b } => self.count <= *b,
            CommBudget::Tn { bytes } => self.bytes <= *bytes,
            CommBudget::Iu { .. } => self.over == 0,
        }
    }
}

struct CompCheck {
    comp: CompBudget,
    pair_of: Vec<usize>,
    robots_of: Vec<(usize, usize)>,
}

impl CompCheck {
    fn new(graph: &ExchangeGraph, comp: &CompBudget) -> Self {
        CompCheck {
            comp: comp.clone(),
            pair_of: graph.edges().iter().map(|e| graph.edge_pair_index(e.id)).collect(),
            robots_of: graph.edges().iter().map(|e| graph.edge_robots(e.id)).collect(),
        }
    }

    fn feasible(&self, mask: u32, scratch: &mut Vec<usize>) -> bool {
        match &self.comp {
            CompBudget::Total { k } => (mask.count_ones() as usize) <= *k,
            CompBudget::Pairwise(pw) => {
                scratch.clear();
                scratch.resize(pw.limits.len(), 0);
                for e in bits(mask) {
                    let p = self.pair_of[e];
                    scratch[p] += 1;
                    if scratch[p] > pw.limits[p] {
                        return false;
                    }
                }
                true
            }
            CompBudget::Individual { per_robot } => {
                scratch.clear();
                scratch.resize(per_robot.len(), 0);
                for e in bits(mask) {
                    let (a, b) = self.robots_of[e];
                    scratch[a] += 1;
                    scratch[b] += 1;
                    if scratch[a] > per_robot[a] || scratch[b] > per_robot[b] {
                        return false;
                    }
                }
                true
            }
        }
    }
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

fn mask_edges(mask: u32) -> Vec<EdgeId> {
    bits(mask).map(EdgeId).collect()
}

const NO_WITNESS: u64 = u64::MAX;

/// Exact optimum by enumerating every communication-feasible vertex set and
/// the best computation-feasible edge set it covers.
pub fn brute_force_opt(graph: &ExchangeGraph, obj: &dyn Objective, budget: &Budget) -> Result<Certificate> {
    let n = graph.num_vertices();
    let m = graph.num_edges();
    if n > MAX_BRUTE_FORCE_VERTICES || m > MAX_BRUTE_FORCE_EDGES {
        return Err(Error::InstanceTooLarge { vertices: n, edges: m });
    }
    budget.validate(graph)?;

    // witness[cover] = smallest (|S|, S) among feasible S with that exact cover
    let mut witness = vec![NO_WITNESS; 1usize << m];
    let mut cnt = vec![0u8; m];
    let mut cover: u32 = 0;
    let mut comm = CommState::new(graph, &budget.comm);
    let mut gray: u32 = 0;
    for i in 0u32..(1u32 << n) {
        if i > 0 {
            let v = i.trailing_zeros() as usize;
            gray ^= 1 << v;
            let add = gray & (1 << v) != 0;
            comm.toggle(v, add);
            for e in graph.incident(VertexId(v)) {
                if add {
                    cnt[e.0] += 1;
                    if cnt[e.0] == 1 {
                        cover |= 1 << e.0;
                    }
                } else {
                    cnt[e.0] -= 1;
                    if cnt[e.0] == 0 {
                        cover &= !(1 << e.0);
                    }
                }
            }
        }
        if comm.feasible() {
            let key = ((gray.count_ones() as u64) << 32) | gray as u64;
            let slot = &mut witness[cover as usize];
            *slot = (*slot).min(key);
        }
    }

    let comp = CompCheck::new(graph, &budget.comp);
    let mut scratch = Vec::new();
    let modular_fast = obj.is_modular() && matches!(budget.comp, CompBudget::Total { .. } | CompBudget::Pairwise(_));
    let mut best: Option<(f64, u32)> = None;

    if modular_fast {
        let mut order: Vec<usize> = (0..m).collect();
        let val = |e: usize| obj.edge_value(EdgeId(e)).unwrap_or(0.0);
        order.sort_by(|&a, &b| val(b).total_cmp(&val(a)).then(a.cmp(&b)));
        let caps: Vec<usize> = match &budget.comp {
            CompBudget::Total { k } => vec![*k],
            CompBudget::Pairwise(pw) => pw.limits.clone(),
            CompBudget::Individual { .. } => unreachable!(),
        };
        let block = |e: usize| match &budget.comp {
            CompBudget::Total { .. } => 0,
            _ => comp.pair_of[e],
        };
        for c in 0..witness.len() {
            if witness[c] == NO_WITNESS {
                continue;
            }
            let mut used = vec![0usize; caps.len()];
            let mut chosen: u32 = 0;
            for &e in &order {
                if c & (1 << e) != 0 && used[block(e)] < caps[block(e)] {
                    used[block(e)] += 1;
                    chosen |= 1 << e;
                }
            }
            let v = obj.value(&mask_edges(chosen))?;
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, chosen));
            }
        }
    } else {
        let mut allowed: Vec<bool> = witness.iter().map(|&w| w != NO_WITNESS).collect();
        for bit in 0..m {
            let b = 1usize << bit;
            for mask in 0..allowed.len() {
                if mask & b == 0 && allowed[mask | b] {
                    allowed[mask] = true;
                }
            }
        }
        for mask in 0..(1u32 << m) {
            if !allowed[mask as usize] || !comp.feasible(mask, &mut scratch) {
                continue;
            }
            let maximal = (0..m).all(|e| {
                let bigger = mask | (1 << e);
                bigger == mask || !allowed[bigger as usize] || !comp.feasible(bigger, &mut scratch)
            });
            if !maximal {
                continue;
            }
            let v = obj.value(&mask_edges(mask))?;
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, mask));
            }
        }
    }

    let (value, emask) = best.unwrap_or((0.0, 0));
    let mut key = NO_WITNESS;
    for (c, &w) in witness.iter().enumerate() {
        if w != NO_WITNESS && (c as u32) & emask == emask {
            key = key.min(w);
        }
    }
    let smask = (key & 0xffff_ffff) as u32;
    let vs = bits(smask).map(VertexId).collect();
    let plan = Plan::new(graph, vs, mask_edges(emask), value);
    Ok(Certificate {
        kind: CertificateKind::OptBruteforce,
        value,
        valid: true,
        converged: true,
        iterations: 0,
        fractional: None,
        plan: Some(plan),
        trace: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Relaxation polytope over (pi, ell)

/// Rows `A [pi; ell] <= b` of the relaxed planning polytope; all variables in `[0, 1]`.
pub fn relaxation_rows(graph: &ExchangeGraph, budget: &Budget) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    budget.validate(graph)?;
    let n = graph.num_vertices();
    let m = graph.num_edges();
    let width = n + m;
    let mut a = Vec::new();
    let mut b = Vec::new();
    match &budget.comm {
        CommBudget::Tu { b: limit } => {
            let mut row = vec![0.0; width];
            row[..n].fill(1.0);
            a.push(row);
            b.push(*limit as f64);
        }
        CommBudget::Tn { bytes } => {
            let mut row = vec![0.0; width];
            for v in graph.vertices() {
                row[v.id.0] = v.weight as f64;
            }
            a.push(row);
            b.push(*bytes as f64);
        }
        CommBudget::Iu { limits, blocks } => {
            let block_of = iu_blocks(graph, blocks);
            for (blk, &limit) in limits.iter().enumerate() {
                let mut row = vec![0.0; width];
                for (v, &bv) in block_of.iter().enumerate() {
                    if bv == blk {
                        row[v] = 1.0;
                    }
                }
                a.push(row);
                b.push(limit as f64);
            }
        }
    }
    match &budget.comp {
        CompBudget::Total { k } => {
            let mut row = vec![0.0; width];
            row[n..].fill(1.0);
            a.push(row);
            b.push(*k as f64);
        }
        CompBudget::Pairwise(pw) => {
            let mut rows = vec![vec![0.0; width]; pair_count(graph.robots())];
            for e in graph.edges() {
                rows[graph.edge_pair_index(e.id)][n + e.id.0] = 1.0;
            }
            for (row, &limit) in rows.into_iter().zip(&pw.limits) {
                a.push(row);
                b.push(limit as f64);
            }
        }
        CompBudget::Individual { per_robot } => {
            let mut rows = vec![vec![0.0; width]; graph.robots()];
            for e in graph.edges() {
                let (i, j) = graph.edge_robots(e.id);
                rows[i][n + e.id.0] = 1.0;
                rows[j][n + e.id.0] = 1.0;
            }
            for (row, &limit) in rows.into_iter().zip(per_robot) {
                a.push(row);
                b.push(limit as f64);
            }
        }
    }
    for e in graph.edges() {
        let mut row = vec![0.0; width];
        row[n + e.id.0] = 1.0;
        row[e.u.0] = -1.0;
        row[e.v.0] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    Ok((a, b))
}

fn split(graph: &ExchangeGraph, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = graph.num_vertices();
    (x[..n].to_vec(), x[n..].to_vec())
}

/// LP relaxation of the modular problem; its optimum bounds OPT from above.
pub fn lp_relax_modular(graph: &ExchangeGraph, obj: &dyn Objective, budget: &Budget) -> Result<Certificate> {
    if !obj.is_modular() {
        return Err(Error::InvalidLp("the LP relaxation needs a modular objective".into()));
    }
    let (a, b) = relaxation_rows(graph, budget)?;
    let n = graph.num_vertices();
    let m = graph.num_edges();
    let mut c = vec![0.0; n + m];
    for e in 0..m {
        c[n + e] = obj.edge_value(EdgeId(e)).unwrap_or(0.0);
    }
    let lp = LinearProgram::new(c, a, b, vec![1.0; n + m])?;
    let sol = lp.solve()?;
    let valid = sol.is_optimal();
    let value = if valid {
        sol.objective
    } else {
        log::warn!("LP relaxation hit the iteration cap; bound is not certified");
        sol.objective.max(sol.dual_objective(&lp))
    };
    let (pi, ell) = split(graph, &sol.x);
    let frac = FractionalSolution {
        pi,
        ell,
        value,
        bound_gap: 0.0,
    };
    let plan = round_fractional(graph, &frac, budget, obj)?;
    Ok(Certificate {
        kind: CertificateKind::UptLp,
        value,
        valid,
        converged: valid,
        iterations: sol.iterations,
        fractional: Some(frac),
        plan: Some(plan),
        trace: Vec::new(),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    pub iterations: usize,
    pub tol: f64,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig {
            iterations: 500,
            tol: 1e-6,
        }
    }
}

struct Relaxed<'a> {
    obj: &'a LogDetObjective,
    n: usize,
}

impl Relaxed<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.obj
            .fractional_value(&x[self.n..])
            .ok_or_else(|| Error::NotPositiveDefinite("relaxed information matrix".into()))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for (blk, mat) in self.obj.blocks().iter().zip(self.obj.matrices_at(&x[self.n..])) {
            let ch = cholesky(&mat).ok_or_else(|| Error::NotPositiveDefinite("relaxed information matrix".into()))?;
            let inv = ch.inverse();
            for (e, t) in blk.terms.iter().enumerate() {
                if let Some(t) = t {
                    g[self.n + e] += blk.coef * t.trace_with(&inv);
                }
            }
        }
        Ok(g)
    }

    /// Maximizes `t -> F(x + t d)` on `[0, t_max]`.
    fn line_search(&self, x: &[f64], d: &[f64], t_max: f64) -> Result<f64> {
        let mats = self.obj.matrices_at(&x[self.n..]);
        let dirs: Vec<DMatrix<f64>> = self
            .obj
            .blocks()
            .iter()
            .map(|blk| {
                let dim = blk.base.nrows();
                let mut dm = DMatrix::zeros(dim, dim);
                for (t, &w) in blk.terms.iter().zip(&d[self.n..]) {
                    if let (Some(t), true) = (t, w != 0.0) {
                        t.add_to(&mut dm, w);
                    }
                }
                dm
            })
            .collect();
        // first and second derivative of the concave phi
        let derivs = |t: f64| -> Option<(f64, f64)> {
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for ((blk, m), dm) in self.obj.blocks().iter().zip(&mats).zip(&dirs) {
                let mt = m + dm * t;
                let ch = cholesky(&mt)?;
                let s = ch.solve(dm);
                d1 += blk.coef * s.trace();
                d2 -= blk.coef * (&s * &s).trace();
            }
            Some((d1, d2))
        };
        let fail = || Error::NotPositiveDefinite("relaxed information matrix".into());
        let (g0, _) = derivs(0.0).ok_or_else(fail)?;
        if g0 <= 0.0 {
            return Ok(0.0);
        }
        let (gmax, _) = derivs(t_max).ok_or_else(fail)?;
        if gmax >= 0.0 {
            return Ok(t_max);
        }
        let (mut lo, mut hi) = (0.0, t_max);
        let mut t = 0.0;
        for _ in 0..100 {
            let (g1, g2) = derivs(t).ok_or_else(fail)?;
            if g1 > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if g1.abs() <= 1e-14 * (1.0 + g0.abs()) || hi - lo <= 1e-15 * t_max {
                break;
            }
            let newton = if g2 < 0.0 { t - g1 / g2 } else { f64::NAN };
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(t.clamp(0.0, t_max))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Upper bound on the log-det relaxation optimum by away-step Frank-Wolfe.
/// Every iterate gives `F(x_t) + gap_t >= F*`; the smallest such value is returned.
pub fn fw_relax_logdet(graph: &ExchangeGraph, obj: &LogDetObjective, budget: &Budget, cfg: FwConfig) -> Result<Certificate> {
    let (a, b) = relaxation_rows(graph, budget)?;
    let n = graph.num_vertices();
    let width = n + graph.num_edges();
    let relaxed = Relaxed { obj, n };

    let mut active: Vec<(Vec<f64>, f64)> = vec![(vec![0.0; width], 1.0)];
    let mut x = vec![0.0; width];
    let mut fx = relaxed.value(&x)?;
    let mut upt = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut last_gap = f64::INFINITY;

    for it in 0..cfg.iterations {
        iterations = it + 1;
        let g = relaxed.gradient(&x)?;
        let lp = LinearProgram::new(g.clone(), a.clone(), b.clone(), vec![1.0; width])?;
        let sol = lp.solve()?;
        let s = sol.x;
        let gap = (dot(&g, &s) - dot(&g, &x)).max(0.0);
        last_gap = gap;
        trace.push(FwStep { value: fx, gap });
        upt = upt.min(fx + gap);
        if gap <= cfg.tol {
            converged = true;
            break;
        }

        let (away_idx, away_score) = active
            .iter()
            .enumerate()
            .map(|(i, (v, _))| (i, dot(&g, v)))
            .min_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)))
            .unwrap();
        let away_gain = dot(&g, &x) - away_score;
        let use_fw = gap >= away_gain || active.len() == 1;

        if use_fw {
            let d: Vec<f64> = s.iter().zip(&x).map(|(s, x)| s - x).collect();
            let t = relaxed.line_search(&x, &d, 1.0)?;
            for (_, w) in active.iter_mut() {
                *w *= 1.0 - t;
            }
            match active.iter().position(|(v, _)| v.iter().zip(&s).all(|(p, q)| (p - q).abs() <= 1e-12)) {
                Some(i) => active[i].1 += t,
                None => active.push((s, t)),
            }
        } else {
            let lam = active[away_idx].1;
            let t_max = lam / (1.0 - lam);
            let d: Vec<f64> = x.iter().zip(&active[away_idx].0).map(|(x, a)| x - a).collect();
            let t = relaxed.line_search(&x, &d, t_max)?;
            for (_, w) in active.iter_mut() {
                *w *= 1.0 + t;
            }
            active[away_idx].1 -= t;
            if t >= t_max {
                active[away_idx].1 = 0.0;
            }
        }
        active.retain(|(_, w)| *w > 1e-15);
        let total: f64 = active.iter().map(|(_, w)| w).sum();
        x = vec![0.0; width];
        for (v, w) in active.iter_mut() {
            *w /= total;
            for (xi, vi) in x.iter_mut().zip(v.iter()) {
                *xi += *w * vi;
            }
        }
        let fnew = relaxed.value(&x)?;
        // the line search never moves downhill; guard against rounding
        fx = fnew.max(fx.min(fnew + 1e-12));
    }

    if !converged {
        log::warn!("Frank-Wolfe stopped after {iterations} iterations with gap {last_gap:e}");
    }
    let (pi, ell) = split(graph, &x);
    let frac = FractionalSolution {
        pi,
        ell,
        value: fx,
        bound_gap: (upt - fx).max(0.0),
    };
    let plan = round_fractional(graph, &frac, budget, obj)?;
    Ok(Certificate {
        kind: CertificateKind::UptFrankwolfe,
        value: upt.max(0.0),
        valid: true,
        converged,
        iterations,
        fractional: Some(frac),
        plan: Some(plan),
        trace,
    })
}

/// Picks vertices by descending `pi` and then covered edges by descending
/// `ell` (ties by id), skipping anything that would break a budget. Only
/// positive entries are considered.
pub fn round_fractional(graph: &ExchangeGraph, frac: &FractionalSolution, budget: &Budget, obj: &dyn Objective) -> Result<Plan> {
    budget.validate(graph)?;
    let n = graph.num_vertices();
    let m = graph.num_edges();
    if frac.pi.len() != n || frac.ell.len() != m {
        return Err(Error::DimensionMismatch {
            expected: n + m,
            got: frac.pi.len() + frac.ell.len(),
        });
    }
    let mut order: Vec<usize> = (0..n).filter(|&v| frac.pi[v] > 0.0).collect();
    order.sort_by(|&p, &q| frac.pi[q].total_cmp(&frac.pi[p]).then(p.cmp(&q)));
    let mut tracker = crate::modular::CommTracker::new(graph, &budget.comm);
    let mut vs = Vec::new();
    for v in order {
        let v = VertexId(v);
        if tracker.can_add(graph, v) {
            tracker.add(graph, v);
            vs.push(v);
        }
    }
    let covered = graph.edges_of(&vs)?;
    let mut eorder: Vec<EdgeId> = covered.into_iter().filter(|e| frac.ell[e.0] > 0.0).collect();
    eorder.sort_by(|p, q| frac.ell[q.0].total_cmp(&frac.ell[p.0]).then(p.cmp(q)));
    let mut es = Vec::new();
    let mut pair_used = vec![0usize; pair_count(graph.robots())];
    let mut robot_used = vec![0usize; graph.robots()];
    for e in eorder {
        let ok = match &budget.comp {
            CompBudget::Total { k } => es.len() < *k,
            CompBudget::Pairwise(pw) => pair_used[graph.edge_pair_index(e)] < pw.limits[graph.edge_pair_index(e)],
            CompBudget::Individual { per_robot } => {
                let (i, j) = graph.edge_robots(e);
                robot_used[i] < per_robot[i] && robot_used[j] < per_robot[j]
            }
        };
        if ok {
            pair_used[graph.edge_pair_index(e)] += 1;
            let (i, j) = graph.edge_robots(e);
            robot_used[i] += 1;
            robot_used[j] += 1;
            es.push(e);
        }
    }
    es.sort_unstable();
    let value = obj.value(&es)?;
    Ok(Plan::new(graph, vs, es, value))
}

/// Exact minimum vertex cover of all candidate edges by branch and bound.
pub fn min_vertex_cover(graph: &ExchangeGraph) -> Vec<VertexId> {
    let n = graph.num_vertices();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|v| graph.incident(VertexId(v)).iter().map(|&e| graph.edge(e).other(VertexId(v)).0).collect())
        .collect();
    let mut best: Vec<usize> = greedy_cover(&adj);
    let mut state = vec![0u8; n]; // 0 undecided, 1 in cover, 2 excluded
    let mut chosen = Vec::new();
    branch(&adj, &mut state, &mut chosen, &mut best);
    best.sort_unstable();
    best.into_iter().map(VertexId).collect()
}

fn live_degree(adj: &[Vec<usize>], state: &[u8], v: usize) -> usize {
    adj[v].iter().filter(|&&u| state[u] == 0).count()
}

fn greedy_cover(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut state = vec![0u8; n];
    let mut out = Vec::new();
    loop {
        let pick = (0..n)
            .filter(|&v| state[v] == 0)
            .map(|v| (live_degree(adj, &state, v), v))
            .filter(|&(d, _)| d > 0)
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        match pick {
            Some((_, v)) => {
                state[v] = 1;
                out.push(v);
            }
            None => return out,
        }
    }
}

/// Size of a maximal matching among undecided vertices: a lower bound on the
/// remaining cover size.
fn matching_bound(adj: &[Vec<usize>], state: &[u8]) -> usize {
    let mut used = vec![false; adj.len()];
    let mut size = 0;
    for v in 0..adj.len() {
        if state[v] != 0 || used[v] {
            continue;
        }
        if let Some(&u) = adj[v].iter().find(|&&u| state[u] == 0 && !used[u]) {
            used[v] = true;
            used[u] = true;
            size += 1;
        }
    }
    size
}

fn branch(adj: &[Vec<usize>], state: &mut Vec<u8>, chosen: &mut Vec<usize>, best: &mut Vec<usize>) {
    // Forced moves: a vertex with one live neighbor can be replaced by that neighbor.
    let mark = chosen.len();
    let mut trail: Vec<usize> = Vec::new();
    loop {
        let mut changed = false;
        for v in 0..adj.len() {
            if state[v] != 0 {
                continue;
            }
            match live_degree(adj, state, v) {
                0 => {
                    state[v] = 2;
                    trail.push(v);
                    changed = true;
                }
                1 => {
                    let u = *adj[v].iter().find(|&&u| state[u] == 0).unwrap();
                    state[u] = 1;
                    chosen.push(u);
                    trail.push(u);
                    state[v] = 2;
                    trail.push(v);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    if chosen.len() + matching_bound(adj, state) < best.len() {
        let pick = (0..adj.len())
            .filter(|&v| state[v] == 0)
            .map(|v| (live_degree(adj, state, v), v))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        match pick {
            None => {
                if chosen.len() < best.len() {
                    *best = chosen.clone();
                }
            }
            Some((_, v)) => {
                state[v] = 1;
                chosen.push(v);
                branch(adj, state, chosen, best);
                chosen.pop();
                let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| state[u] == 0).collect();
                state[v] = 2;
                for &u in &nbrs {
                    state[u] = 1;
                    chosen.push(u);
                }
                branch(adj, state, chosen, best);
                for &u in &nbrs {
                    state[u] = 0;
                    chosen.pop();
                }
                state[v] = 0;
            }
        }
    }

    for v in trail {
        state[v] = 0;
    }
    chosen.truncate(mark);
}

//! Edge-Greedy, Vertex-Greedy and their combination for monotone submodular
//! objectives under a total broadcast count `b` and verification count `k`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{EdgeId, ExchangeGraph, Plan, VertexId};
use crate::objectives::Objective;
use crate::selector::Selector;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmodularOptions {
    pub lazy: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    EdgeGreedy,
    VertexGreedy,
}

/// Outcome of one greedy solver.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyRun {
    pub plan: Plan,
    /// Length of the prefix that coincides with the unconstrained classic
    /// greedy (edges for Edge-Greedy, vertices for Vertex-Greedy).
    pub free_rounds: usize,
    /// Whether the loop ran out of candidates rather than budget.
    pub exhausted: bool,
    pub evaluations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub alpha_e: f64,
    pub alpha_v: f64,
    pub alpha: f64,
    /// `max(b / k, floor(k / delta) / b)`; `None` when unbounded.
    pub gamma: Option<f64>,
    /// `b / k`; `None` when `k = 0`.
    pub kappa: Option<f64>,
    pub delta_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posthoc_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<Winner>,
}

fn one_minus_exp(ratio: f64) -> f64 {
    1.0 - (-ratio.min(1.0)).exp()
}

/// A-priori guarantee of Submodular-Greedy for budgets `b`, `k` and maximum degree `delta`.
pub fn guarantee_alpha(b: usize, k: usize, delta: usize) -> GuaranteeReport {
    let ratio_e = (k > 0).then(|| b as f64 / k as f64);
    let ratio_v = (b > 0).then(|| if delta == 0 { f64::INFINITY } else { (k / delta) as f64 / b as f64 });
    let alpha_e = ratio_e.map_or(0.0, one_minus_exp);
    let alpha_v = ratio_v.map_or(0.0, one_minus_exp);
    let gamma = ratio_e.unwrap_or(0.0).max(ratio_v.unwrap_or(0.0));
    let delta_bound = if b == 0 || k == 0 { 0.0 } else { 1.0 - (-1.0 / (delta as f64 + 1.0)).exp() };
    GuaranteeReport {
        alpha_e,
        alpha_v,
        alpha: alpha_e.max(alpha_v),
        gamma: gamma.is_finite().then_some(gamma),
        kappa: ratio_e,
        delta_bound,
        posthoc_alpha: None,
        winner: None,
    }
}

/// Instance-specific guarantee from the greedy prefixes actually observed.
pub fn posthoc_alpha(b: usize, k: usize, edge_run: &GreedyRun, vertex_run: &GreedyRun) -> f64 {
    let e = if k == 0 {
        0.0
    } else {
        let t = if edge_run.exhausted { k } else { edge_run.free_rounds };
        one_minus_exp(t as f64 / k as f64)
    };
    let v = if b == 0 {
        0.0
    } else {
        let t = if vertex_run.exhausted { b } else { vertex_run.free_rounds };
        one_minus_exp(t as f64 / b as f64)
    };
    e.max(v)
}

fn finish(graph: &ExchangeGraph, obj: &dyn Objective, vs: Vec<VertexId>, es: Vec<EdgeId>) -> Result<Plan> {
    let mut sorted = es.clone();
    sorted.sort_unstable();
    let value = obj.value(&sorted)?;
    Ok(Plan::new(graph, vs, es, value))
}

/// Greedy over edges with an incrementally maintained vertex cover, followed by
/// a pass over edges already covered for free.
pub fn edge_greedy(graph: &ExchangeGraph, obj: &dyn Objective, b: usize, k: usize, opts: SubmodularOptions) -> Result<GreedyRun> {
    let m = graph.num_edges();
    let mut session = obj.session();
    let mut in_v = vec![false; graph.num_vertices()];
    let mut covered = vec![false; m];
    let mut vs: Vec<VertexId> = Vec::new();
    let mut es: Vec<EdgeId> = Vec::new();
    let mut sel = Selector::new(m, opts.lazy);
    let mut exhausted = false;

    while vs.len() < b && es.len() < k {
        let Some((i, _)) = sel.select(|_| true, |i| session.gain(&[EdgeId(i)])) else {
            exhausted = true;
            break;
        };
        let e = EdgeId(i);
        sel.remove(i);
        session.commit(&[e]);
        es.push(e);
        let edge = graph.edge(e);
        if !in_v[edge.u.0] && !in_v[edge.v.0] {
            let fresh = |x: VertexId| graph.incident(x).iter().filter(|f| !covered[f.0]).count();
            let pick = if fresh(edge.v) > fresh(edge.u) { edge.v } else { edge.u };
            in_v[pick.0] = true;
            vs.push(pick);
            for f in graph.incident(pick) {
                covered[f.0] = true;
            }
        }
    }
    let free_rounds = es.len();
    let mut evaluations = sel.evaluations();

    let mut taken = vec![false; m];
    for e in &es {
        taken[e.0] = true;
    }
    let mut sel = Selector::new(m, opts.lazy);
    while es.len() < k {
        let pick = sel.select(|i| covered[i] && !taken[i], |i| session.gain(&[EdgeId(i)]));
        match pick {
            Some((i, g)) if g > 0.0 => {
                sel.remove(i);
                taken[i] = true;
                session.commit(&[EdgeId(i)]);
                es.push(EdgeId(i));
            }
            _ => break,
        }
    }
    evaluations += sel.evaluations();
    Ok(GreedyRun {
        plan: finish(graph, obj, vs, es)?,
        free_rounds,
        exhausted,
        evaluations,
    })
}

/// Greedy over vertices by the gain of verifying every edge they cover.
pub fn vertex_greedy(graph: &ExchangeGraph, obj: &dyn Objective, b: usize, k: usize, opts: SubmodularOptions) -> Result<GreedyRun> {
    let n = graph.num_vertices();
    let mut session = obj.session();
    let mut in_e = vec![false; graph.num_edges()];
    let mut n_e = 0usize;
    let mut in_v = vec![false; n];
    let mut vs: Vec<VertexId> = Vec::new();
    let mut sel = Selector::new(n, opts.lazy);
    let mut free_rounds = 0;
    let mut unconstrained = true;
    let mut exhausted = false;

    while vs.len() < b {
        let added = |v: usize| graph.incident(VertexId(v)).iter().filter(|e| !in_e[e.0]).count();
        if unconstrained && (0..n).any(|v| !in_v[v] && n_e + added(v) > k) {
            unconstrained = false;
        }
        let pick = sel.select(|v| n_e + added(v) <= k, |v| session.gain(graph.incident(VertexId(v))));
        let Some((v, _)) = pick else {
            exhausted = unconstrained;
            break;
        };
        if unconstrained {
            free_rounds += 1;
        }
        sel.remove(v);
        let inc = graph.incident(VertexId(v));
        for e in inc {
            if !in_e[e.0] {
                in_e[e.0] = true;
                n_e += 1;
            }
        }
        session.commit(inc);
        in_v[v] = true;
        vs.push(VertexId(v));
    }
    let es = graph.edges_of(&vs)?;
    Ok(GreedyRun {
        plan: finish(graph, obj, vs, es)?,
        free_rounds,
        exhausted,
        evaluations: sel.evaluations(),
    })
}

/// Runs both solvers and keeps the better plan (ties favor Edge-Greedy).
pub fn submodular_greedy(
    graph: &ExchangeGraph,
    obj: &dyn Objective,
    b: usize,
    k: usize,
    opts: SubmodularOptions,
) -> Result<(Plan, GuaranteeReport)> {
    let er = edge_greedy(graph, obj, b, k, opts)?;
    let vr = vertex_greedy(graph, obj, b, k, opts)?;
    let mut report = guarantee_alpha(b, k, graph.max_degree());
    report.posthoc_alpha = Some(posthoc_alpha(b, k, &er, &vr).max(report.alpha));
    let (plan, winner) = if vr.plan.objective > er.plan.objective {
        (vr.plan, Winner::VertexGreedy)
    } else {
        (er.plan, Winner::EdgeGreedy)
    };
    report.winner = Some(winner);
    Ok((plan, report))
}

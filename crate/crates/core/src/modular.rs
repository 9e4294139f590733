//! Modular-Greedy for the expected number of loop closures.
//!
//! Vertices are chosen greedily by the marginal gain of `g(V)`, the best
//! achievable objective among edges covered by `V` under the computation
//! budget; the final edges are the optimal inner solution for the chosen `V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    iu_blocks, pair_count, robot_pairs, Budget, CommBudget, CompBudget, EdgeId, ExchangeGraph, PairwiseBudgets, Plan,
    VertexId,
};
use crate::objectives::nlc_eval;
use crate::selector::Selector;
use crate::simplex::LinearProgram;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub value: f64,
    pub edges: Vec<EdgeId>,
}

/// Top-`cap` edges by probability within each block of an edge partition.
/// Ordering inside a block is `(p desc, id asc)`.
#[derive(Clone, Debug)]
pub(crate) struct PartitionTopK<'g> {
    graph: &'g ExchangeGraph,
    block_of: Vec<usize>,
    caps: Vec<usize>,
    tops: Vec<Vec<EdgeId>>,
    covered: Vec<bool>,
}

impl<'g> PartitionTopK<'g> {
    pub(crate) fn total(graph: &'g ExchangeGraph, k: usize) -> Self {
        PartitionTopK {
            graph,
            block_of: vec![0; graph.num_edges()],
            caps: vec![k],
            tops: vec![Vec::new()],
            covered: vec![false; graph.num_edges()],
        }
    }

    pub(crate) fn pairwise(graph: &'g ExchangeGraph, pw: &PairwiseBudgets) -> Self {
        PartitionTopK {
            graph,
            block_of: graph.edges().iter().map(|e| graph.edge_pair_index(e.id)).collect(),
            caps: pw.limits.clone(),
            tops: vec![Vec::new(); pw.limits.len()],
            covered: vec![false; graph.num_edges()],
        }
    }

    fn key(&self, e: EdgeId) -> (f64, EdgeId) {
        (self.graph.probability(e), e)
    }

    fn before(&self, a: EdgeId, b: EdgeId) -> bool {
        let (pa, pb) = (self.graph.probability(a), self.graph.probability(b));
        pa > pb || (pa == pb && a < b)
    }

    fn sort(&self, es: &mut [EdgeId]) {
        es.sort_by(|&a, &b| {
            let (pa, ea) = self.key(a);
            let (pb, eb) = self.key(b);
            pb.total_cmp(&pa).then(ea.cmp(&eb))
        });
    }

    fn new_edges(&self, v: VertexId) -> Vec<EdgeId> {
        self.graph
            .incident(v)
            .iter()
            .copied()
            .filter(|e| !self.covered[e.0])
            .collect()
    }

    /// `g(V u {v}) - g(V)`.
    pub(crate) fn gain(&self, v: VertexId) -> f64 {
        let mut fresh = self.new_edges(v);
        self.sort(&mut fresh);
        let mut g = 0.0;
        let mut used = vec![0usize; self.caps.len()];
        for e in fresh {
            let b = self.block_of[e.0];
            let t = used[b];
            let cap = self.caps[b];
            if t >= cap {
                continue;
            }
            let top = &self.tops[b];
            let free = cap - top.len().min(cap);
            // t-th smallest slot of the block, empty slots counting as zero
            let slot = if t < free { 0.0 } else { self.graph.probability(top[top.len() - 1 - (t - free)]) };
            let a = self.graph.probability(e);
            if a > slot {
                g += a - slot;
                used[b] += 1;
            } else {
                used[b] = cap;
            }
        }
        g
    }

    pub(crate) fn commit(&mut self, v: VertexId) {
        for e in self.new_edges(v) {
            self.covered[e.0] = true;
            let b = self.block_of[e.0];
            let cap = self.caps[b];
            let pos = self.tops[b].partition_point(|&x| self.before(x, e));
            if pos < cap {
                self.tops[b].insert(pos, e);
                self.tops[b].truncate(cap);
            }
        }
    }

    pub(crate) fn solution(&self) -> InnerSolution {
        let mut edges: Vec<EdgeId> = self.tops.iter().flatten().copied().collect();
        edges.sort_unstable();
        let value = edges.iter().map(|&e| self.graph.probability(e)).sum();
        InnerSolution { value, edges }
    }
}

/// `g(V)`: the `k` most probable edges covered by `V`, ties by ascending id.
pub fn inner_top_k(graph: &ExchangeGraph, vs: &[VertexId], k: usize) -> Result<InnerSolution> {
    let mut covered = graph.edges_of(vs)?;
    let mut st = PartitionTopK::total(graph, k);
    st.sort(&mut covered);
    covered.truncate(k);
    covered.sort_unstable();
    st.tops[0] = covered;
    Ok(st.solution())
}

/// `g_pair(V)`: per robot pair, the `k_ij` most probable covered edges.
pub fn g_pair_eval(graph: &ExchangeGraph, vs: &[VertexId], pw: &PairwiseBudgets) -> Result<InnerSolution> {
    if pw.limits.len() != pair_count(graph.robots()) {
        return Err(Error::BlockMismatch {
            expected: pair_count(graph.robots()),
            given: pw.limits.len(),
        });
    }
    let covered = graph.edges_of(vs)?;
    let mut st = PartitionTopK::pairwise(graph, pw);
    let mut by_block: Vec<Vec<EdgeId>> = vec![Vec::new(); pw.limits.len()];
    for e in covered {
        by_block[st.block_of[e.0]].push(e);
    }
    for (b, mut es) in by_block.into_iter().enumerate() {
        st.sort(&mut es);
        es.truncate(st.caps[b]);
        st.tops[b] = es;
    }
    Ok(st.solution())
}

/// Communication constraint state for vertex-greedy loops.
#[derive(Clone, Debug)]
pub(crate) enum CommTracker {
    Count { used: usize, limit: usize },
    Bytes { used: u64, limit: u64 },
    Blocks { block_of: Vec<usize>, used: Vec<usize>, limits: Vec<usize> },
}

impl CommTracker {
    pub(crate) fn new(graph: &ExchangeGraph, comm: &CommBudget) -> Self {
        match comm {
            CommBudget::Tu { b } => CommTracker::Count { used: 0, limit: *b },
            CommBudget::Tn { bytes } => CommTracker::Bytes { used: 0, limit: *bytes },
            CommBudget::Iu { limits, blocks } => CommTracker::Blocks {
                block_of: iu_blocks(graph, blocks),
                used: vec![0; limits.len()],
                limits: limits.clone(),
            },
        }
    }

    pub(crate) fn can_add(&self, graph: &ExchangeGraph, v: VertexId) -> bool {
        match self {
            CommTracker::Count { used, limit } => used < limit,
            CommTracker::Bytes { used, limit } => used + graph.vertex(v).weight <= *limit,
            CommTracker::Blocks { block_of, used, limits } => {
                let b = block_of[v.0];
                used[b] < limits[b]
            }
        }
    }

    pub(crate) fn add(&mut self, graph: &ExchangeGraph, v: VertexId) {
        match self {
            CommTracker::Count { used, .. } => *used += 1,
            CommTracker::Bytes { used, .. } => *used += graph.vertex(v).weight,
            CommTracker::Blocks { block_of, used, .. } => used[block_of[v.0]] += 1,
        }
    }

    pub(crate) fn exhausted(&self) -> bool {
        match self {
            CommTracker::Count { used, limit } => used >= limit,
            CommTracker::Bytes { .. } => false,
            CommTracker::Blocks { used, limits, .. } => used.iter().zip(limits).all(|(u, l)| u >= l),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Score {
    Gain,
    GainPerByte,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct GreedyOptions {
    pub lazy: bool,
}

fn greedy_run(graph: &ExchangeGraph, comm: &CommBudget, inner: PartitionTopK<'_>, score: Score, opts: GreedyOptions) -> Plan {
    let mut inner = inner;
    let mut tracker = CommTracker::new(graph, comm);
    let mut selected = Vec::new();
    let mut sel = Selector::new(graph.num_vertices(), opts.lazy);
    while !tracker.exhausted() {
        let pick = sel.select(
            |i| tracker.can_add(graph, VertexId(i)),
            |i| {
                let g = inner.gain(VertexId(i));
                match score {
                    Score::Gain => g,
                    Score::GainPerByte => g / graph.vertex(VertexId(i)).weight as f64,
                }
            },
        );
        let Some((i, _)) = pick else { break };
        let v = VertexId(i);
        sel.remove(i);
        inner.commit(v);
        tracker.add(graph, v);
        selected.push(v);
    }
    let sol = inner.solution();
    let value = nlc_eval(graph, &sol.edges).expect("edge ids come from the graph");
    Plan::new(graph, selected, sol.edges, value)
}

/// `c_ij`: expected fraction of true loop closures between each robot pair.
pub fn pair_match_rates(graph: &ExchangeGraph) -> Vec<f64> {
    graph
        .pair_probability_mass()
        .into_iter()
        .zip(graph.pair_sizes())
        .map(|(mass, n)| if n == 0 { 0.0 } else { mass / n as f64 })
        .collect()
}

/// Allocates pairwise budgets maximizing `sum c_ij k_ij` subject to each
/// robot's worst-case load `sum_j k_ij <= k_i` and `k_ij <= |E_ij|`, then
/// rounds down.
pub fn allocate_pairwise_budgets(per_robot: &[usize], pair_sizes: &[usize], rates: &[f64]) -> Result<PairwiseBudgets> {
    let r = per_robot.len();
    let pairs = robot_pairs(r);
    if pair_sizes.len() != pairs.len() || rates.len() != pairs.len() {
        return Err(Error::BlockMismatch {
            expected: pairs.len(),
            given: pair_sizes.len().min(rates.len()),
        });
    }
    if let Some(&c) = rates.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidBudget(format!("pair rate {c} outside [0, 1]")));
    }
    let a = (0..r)
        .map(|robot| pairs.iter().map(|&(i, j)| if i == robot || j == robot { 1.0 } else { 0.0 }).collect())
        .collect();
    let lp = LinearProgram::new(
        rates.to_vec(),
        a,
        per_robot.iter().map(|&k| k as f64).collect(),
        pair_sizes.iter().map(|&n| n as f64).collect(),
    )?;
    let sol = lp.solve()?;
    if !sol.is_optimal() {
        log::warn!("pairwise allocation stopped at the iteration cap; using the last feasible basis");
    }
    let limits = sol.x.iter().map(|&x| (x + 1e-9).floor().max(0.0) as usize).collect();
    PairwiseBudgets::new(r, limits)
}

/// Modular-Greedy under any communication model with a total or pairwise
/// computation budget; individual budgets are first converted to pairwise ones.
/// Under TN both the plain and the weight-normalized greedy run and the better
/// plan is returned (ties favor the plain run).
pub fn modular_greedy(graph: &ExchangeGraph, budget: &Budget, opts: GreedyOptions) -> Result<Plan> {
    budget.validate(graph)?;
    let inner = match &budget.comp {
        CompBudget::Total { k } => PartitionTopK::total(graph, *k),
        CompBudget::Pairwise(pw) => PartitionTopK::pairwise(graph, pw),
        CompBudget::Individual { per_robot } => {
            let pw = allocate_pairwise_budgets(per_robot, &graph.pair_sizes(), &pair_match_rates(graph))?;
            PartitionTopK::pairwise(graph, &pw)
        }
    };
    match &budget.comm {
        CommBudget::Tn { .. } => {
            let plain = greedy_run(graph, &budget.comm, inner.clone(), Score::Gain, opts);
            let scaled = greedy_run(graph, &budget.comm, inner, Score::GainPerByte, opts);
            Ok(if scaled.objective > plain.objective { scaled } else { plain })
        }
        _ => Ok(greedy_run(graph, &budget.comm, inner, Score::Gain, opts)),
    }
}

pub fn modular_greedy_tu(graph: &ExchangeGraph, b: usize, k: usize) -> Plan {
    modular_greedy(graph, &Budget::tu(b, k), GreedyOptions::default()).expect("TU budgets always validate")
}

pub fn modular_greedy_tn(graph: &ExchangeGraph, bytes: u64, k: usize) -> Plan {
    modular_greedy(graph, &Budget::tn(bytes, k), GreedyOptions::default()).expect("TN budgets always validate")
}

pub fn modular_greedy_iu(graph: &ExchangeGraph, limits: &[usize], k: usize) -> Result<Plan> {
    modular_greedy(graph, &Budget::iu(limits.to_vec(), k), GreedyOptions::default())
}

pub fn modular_greedy_pairwise(graph: &ExchangeGraph, b: usize, pw: &PairwiseBudgets) -> Result<Plan> {
    let budget = Budget {
        comm: CommBudget::Tu { b },
        comp: CompBudget::Pairwise(pw.clone()),
    };
    modular_greedy(graph, &budget, GreedyOptions::default())
}

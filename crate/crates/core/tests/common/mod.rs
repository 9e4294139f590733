#![allow(dead_code)]

use lcplan::graph::{EdgeSpec, ExchangeGraph, Precisions, VertexSpec};
use lcplan::linalg::SymTerm;
use lcplan::objectives::{InfoContext, PoseGraphContext, PriorEdge};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random r-partite instance with contexts for every objective.
pub struct Instance {
    pub graph: ExchangeGraph,
    pub info: InfoContext,
    pub pose: PoseGraphContext,
}

pub fn g1() -> ExchangeGraph {
    ExchangeGraph::build(
        2,
        vec![
            VertexSpec { key: 0, robot: 0, weight: 1 },
            VertexSpec { key: 1, robot: 0, weight: 1 },
            VertexSpec { key: 2, robot: 1, weight: 1 },
            VertexSpec { key: 3, robot: 1, weight: 1 },
        ],
        vec![
            EdgeSpec::new(0, 0, 2, 0.9),
            EdgeSpec::new(1, 0, 3, 0.5),
            EdgeSpec::new(2, 1, 2, 0.4),
        ],
    )
    .unwrap()
}

/// Random graph with at most `max_n` vertices and `max_m` edges.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> Instance {
    loop {
        let robots = rng.random_range(2..=3usize);
        let n = rng.random_range(robots.max(3)..=max_n);
        let vertices: Vec<VertexSpec> = (0..n)
            .map(|i| VertexSpec {
                key: i as u64,
                robot: if i < robots { i } else { rng.random_range(0..robots) },
                weight: rng.random_range(1..=5),
            })
            .collect();
        let mut cross: Vec<(usize, usize)> = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if vertices[u].robot != vertices[v].robot {
                    cross.push((u, v));
                }
            }
        }
        if cross.is_empty() {
            continue;
        }
        let want = rng.random_range(1..=max_m.min(cross.len()));
        // partial Fisher-Yates
        for i in 0..want {
            let j = rng.random_range(i..cross.len());
            cross.swap(i, j);
        }
        cross.truncate(want);
        cross.sort_unstable();
        let mut edges = Vec::new();
        let mut terms = Vec::new();
        for (key, &(u, v)) in cross.iter().enumerate() {
            let mut e = EdgeSpec::new(key as u64, u as u64, v as u64, rng.random_range(0.01..1.0));
            e.precisions = Some(Precisions {
                translational: rng.random_range(0.5..3.0),
                rotational: rng.random_range(0.5..3.0),
            });
            edges.push(e);
            let a: f64 = rng.random_range(0.2..2.0);
            let c: f64 = rng.random_range(-1.0..1.0);
            let block = DMatrix::from_row_slice(2, 2, &[a * a + 0.1, -a * c, -a * c, c * c + 0.1]);
            terms.push(SymTerm::new(vec![u, v], block).unwrap());
        }
        let graph = ExchangeGraph::build(robots, vertices, edges).unwrap();
        let info = InfoContext::new(DMatrix::identity(n, n) * rng.random_range(0.3..1.5), terms).unwrap();
        // pose 0 is grounded; a weak chain keeps the prior connected
        let prior = (0..n)
            .map(|i| PriorEdge {
                u: i,
                v: i + 1,
                precision_t: rng.random_range(0.2..1.0),
                precision_r: rng.random_range(0.2..1.0),
            })
            .collect();
        let cands = graph.edges().iter().map(|e| (e.u.0 + 1, e.v.0 + 1)).collect();
        let pose = PoseGraphContext::new(n + 1, prior, cands).unwrap();
        return Instance { graph, info, pose };
    }
}

/// Sum over spanning trees of the product of edge weights.
pub fn spanning_tree_weight(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
    let m = edges.len();
    let mut total = 0.0;
    for mask in 0u64..1 << m {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut x = x;
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut acyclic = true;
        let mut w = 1.0;
        for (i, &(u, v, wt)) in edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a == b {
                    acyclic = false;
                    break;
                }
                parent[a] = b;
                w *= wt;
            }
        }
        if acyclic {
            total += w;
        }
    }
    total
}

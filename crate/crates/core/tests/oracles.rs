//! Values checked against independent reference computations.

mod common;

use approx::assert_abs_diff_eq;
use lcplan::certify::{brute_force_opt, fw_relax_logdet, lp_relax_modular, FwConfig};
use lcplan::graph::{pair_index, Budget, EdgeId, EdgeSpec, ExchangeGraph, PairwiseBudgets, Plan, VertexId, VertexSpec};
use lcplan::linalg::SymTerm;
use lcplan::modular::{allocate_pairwise_budgets, g_pair_eval, modular_greedy_pairwise, modular_greedy_tu};
use lcplan::objectives::{
    expected_log_tree_count, fim_eval, wst_eval, InfoContext, Objective, ObjectiveHandle, PoseGraphContext, PriorEdge,
};
use lcplan::place_recognition::{
    build_exchange_graph, fit_logistic, precision_recall, Descriptor, FitConfig, LabeledPair, LogisticModel,
};
use lcplan::sim::{gen_world, realize, realize_and_evaluate, GridPose, WorldConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn logistic_fit_recovers_generating_model() {
    let truth = LogisticModel::new(4.0, -5.0);
    let mut rng = common::rng(11);
    let pairs: Vec<LabeledPair> = (0..2000)
        .map(|_| {
            let distance = rng.random_range(0.0..2.0);
            let label = rng.random::<f64>() < truth.predict(distance);
            LabeledPair { distance, label }
        })
        .collect();
    let fit = fit_logistic(&pairs, FitConfig::default()).unwrap();
    assert!(fit.converged);
    assert!((fit.model.beta0 - 4.0).abs() <= 0.3, "beta0 = {}", fit.model.beta0);
    assert!((fit.model.beta1 + 5.0).abs() <= 0.3, "beta1 = {}", fit.model.beta1);
}

#[test]
fn logistic_fit_on_label_independent_data_is_flat() {
    // every distance carries one positive and one negative label
    let mut rng = common::rng(12);
    let mut pairs = Vec::new();
    for _ in 0..1000 {
        let distance = rng.random_range(0.0..2.0);
        pairs.push(LabeledPair { distance, label: true });
        pairs.push(LabeledPair { distance, label: false });
    }
    let fit = fit_logistic(&pairs, FitConfig::default()).unwrap();
    assert!(fit.model.beta1.abs() < 0.1);
    assert!(fit.model.beta0.abs() < 0.1);
}

/// Point at distance `ra` from `a` and `rb` from `b` (upper intersection).
fn circle_intersection(a: (f64, f64), ra: f64, b: (f64, f64), rb: f64) -> (f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let d = (dx * dx + dy * dy).sqrt();
    let along = (ra * ra - rb * rb + d * d) / (2.0 * d);
    let h = (ra * ra - along * along).sqrt();
    let (mx, my) = (a.0 + along * dx / d, a.1 + along * dy / d);
    (mx - h * dy / d, my + h * dx / d)
}

#[test]
fn descriptors_reproduce_g1() {
    let model = LogisticModel::new(4.0, -5.0);
    let dist = |p: f64| model.distance_threshold(p).unwrap();
    let a1 = (0.0, 0.0);
    let b1 = (dist(0.9), 0.0);
    let b2 = (0.0, dist(0.5));
    let a2 = circle_intersection(b1, dist(0.4), b2, dist(0.1));
    let desc = |robot, observation, p: (f64, f64)| Descriptor {
        robot,
        observation,
        weight: 1,
        vector: vec![p.0, p.1],
    };
    let ds = vec![desc(0, 0, a1), desc(0, 1, a2), desc(1, 2, b1), desc(1, 3, b2)];
    let g = build_exchange_graph(&ds, &model, 0.2).unwrap();
    let g1 = common::g1();
    assert_eq!(g.num_edges(), 3);
    for (got, want) in g.edges().iter().zip(g1.edges()) {
        assert_eq!(g.vertex(got.u).key, g1.vertex(want.u).key);
        assert_eq!(g.vertex(got.v).key, g1.vertex(want.v).key);
        assert_abs_diff_eq!(got.probability, want.probability, epsilon = 1e-9);
    }
}

#[test]
fn precision_recall_matches_sorted_counting() {
    let mut rng = common::rng(13);
    let pairs: Vec<LabeledPair> = (0..1000)
        .map(|_| LabeledPair {
            distance: rng.random_range(0.0..3.0),
            label: rng.random::<bool>(),
        })
        .collect();
    let model = LogisticModel::new(1.5, -2.0);
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let curve = precision_recall(&model, &pairs, &thresholds).unwrap();

    // descending scores, then a running count of positives
    let mut scored: Vec<(f64, bool)> = pairs.iter().map(|p| (model.predict(p.distance), p.label)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positives = scored.iter().filter(|s| s.1).count();
    for pt in &curve {
        let taken = scored.partition_point(|s| s.0 >= pt.threshold);
        let tp = scored[..taken].iter().filter(|s| s.1).count();
        let precision = if taken == 0 { 1.0 } else { tp as f64 / taken as f64 };
        assert_abs_diff_eq!(pt.precision, precision, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.recall.unwrap(), tp as f64 / positives as f64, epsilon = 1e-12);
    }
    let base_rate = positives as f64 / pairs.len() as f64;
    assert_abs_diff_eq!(curve[0].precision, base_rate, epsilon = 1e-12);
    assert_eq!(curve[0].recall, Some(1.0));
}

/// Independent walk generator following the documented stream layout.
fn resimulate(robots: usize, steps: usize, seed: u64) -> Vec<Vec<(i64, i64)>> {
    (0..robots)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((1u64 << 32) | r as u64);
            let mut x: i64 = rng.random_range(0..10);
            let mut y: i64 = rng.random_range(0..10);
            let mut h: u8 = rng.random_range(0..4);
            let mut cells = vec![(x, y)];
            for _ in 1..steps {
                h = (h + 3 + rng.random_range(0..3u8)) % 4;
                let (dx, dy) = [(1, 0), (0, 1), (-1, 0), (0, -1)][h as usize];
                x += dx;
                y += dy;
                cells.push((x, y));
            }
            cells
        })
        .collect()
}

#[test]
fn candidate_count_matches_resimulation() {
    let world = gen_world(&WorldConfig::new(2, 100, 1.0, 7)).unwrap();
    let cells = resimulate(2, 100, 7);
    let walked: Vec<Vec<(i64, i64)>> = world
        .trajectories
        .iter()
        .map(|t| t.iter().map(|p: &GridPose| (p.x, p.y)).collect())
        .collect();
    assert_eq!(walked, cells);
    let mut count = 0;
    for a in &cells[0] {
        for b in &cells[1] {
            if (a.0 - b.0).abs() + (a.1 - b.1).abs() <= 1 {
                count += 1;
            }
        }
    }
    assert!(count > 0);
    assert_eq!(world.graph.num_edges(), count);
}

#[test]
fn execution_outcome_matches_hand_count() {
    let world = gen_world(&WorldConfig::new(3, 40, 1.0, 7)).unwrap();
    let g = &world.graph;
    let mut rng = common::rng(14);
    let vs: Vec<VertexId> = g.all_vertex_ids().into_iter().filter(|_| rng.random_bool(0.3)).collect();
    let es: Vec<EdgeId> = g.edges_of(&vs).unwrap().into_iter().filter(|_| rng.random_bool(0.6)).collect();
    let plan = Plan::new(g, vs.clone(), es.clone(), 0.0);
    let out = realize_and_evaluate(g, &world.ground_truth, &plan).unwrap();

    let mut bytes = vec![0u64; 3];
    for v in &vs {
        bytes[g.vertex(*v).robot] += g.vertex(*v).weight;
    }
    let mut per_robot = vec![0usize; 3];
    let mut per_pair = vec![0usize; 3];
    let mut found = 0;
    for e in &es {
        let edge = g.edge(*e);
        let (u, v) = (edge.u, edge.v);
        let (ru, rv) = (g.vertex(u).robot, g.vertex(v).robot);
        let verifier = if vs.contains(&u) && vs.contains(&v) {
            ru.min(rv)
        } else if vs.contains(&u) {
            rv
        } else {
            ru
        };
        per_robot[verifier] += 1;
        per_pair[pair_index(3, ru.min(rv), ru.max(rv))] += 1;
        found += world.ground_truth[e.0] as usize;
    }
    assert_eq!(out.comm_bytes_per_robot, bytes);
    assert_eq!(out.comm_bytes, bytes.iter().sum::<u64>());
    assert_eq!(out.verifications, es.len());
    assert_eq!(out.verifications_per_robot, per_robot);
    assert_eq!(out.verifications_per_pair, per_pair);
    assert_eq!(out.discovered_true_loops, found);
}

#[test]
fn ground_truth_is_unbiased_across_seeds() {
    let (mut positives, mut mass) = (0.0, 0.0);
    for seed in 0..2000 {
        let world = gen_world(&WorldConfig::new(2, 12, 1.0, seed)).or_else(|_| gen_world(&WorldConfig::new(2, 12, 1.0, seed + 100_000)));
        let Ok(world) = world else { continue };
        positives += world.true_loops() as f64;
        mass += world.expected_loops();
    }
    assert!((positives - mass).abs() / mass < 0.05, "{positives} vs {mass}");
}

#[test]
fn plan_value_is_expected_discoveries() {
    let world = gen_world(&WorldConfig::new(3, 30, 1.0, 7)).unwrap();
    let g = &world.graph;
    let plan = modular_greedy_tu(g, 10, 15);
    let trials = 2000;
    let total: usize = (0..trials)
        .map(|s| realize_and_evaluate(g, &realize(g, s), &plan).unwrap().discovered_true_loops)
        .sum();
    let mean = total as f64 / trials as f64;
    assert!((mean - plan.objective).abs() / plan.objective < 0.03, "{mean} vs {}", plan.objective);
}

#[test]
fn allocation_examples_match_integer_search() {
    let pw = allocate_pairwise_budgets(&[3, 5], &[10], &[0.7]).unwrap();
    assert_eq!(pw.limits, vec![3]);

    let rates = [0.9, 0.5, 0.1];
    let pw = allocate_pairwise_budgets(&[2, 2, 2], &[5, 5, 5], &rates).unwrap();
    assert_eq!(pw.limits, vec![2, 0, 0]);
    // every integer allocation in 0..=2 per pair that respects each robot's load
    let mut best = 0.0f64;
    for k12 in 0..=2usize {
        for k13 in 0..=2usize {
            for k23 in 0..=2usize {
                if k12 + k13 <= 2 && k12 + k23 <= 2 && k13 + k23 <= 2 {
                    best = best.max(0.9 * k12 as f64 + 0.5 * k13 as f64 + 0.1 * k23 as f64);
                }
            }
        }
    }
    let got: f64 = pw.limits.iter().zip(rates).map(|(&k, c)| k as f64 * c).sum();
    assert_abs_diff_eq!(got, best, epsilon = 1e-12);
    assert_abs_diff_eq!(got, 1.8, epsilon = 1e-12);
}

fn three_robot_graph() -> ExchangeGraph {
    let vertices = (0..6)
        .map(|i| VertexSpec {
            key: i,
            robot: (i / 2) as usize,
            weight: 1,
        })
        .collect();
    let edges = vec![
        EdgeSpec::new(0, 0, 2, 0.3),
        EdgeSpec::new(1, 1, 3, 0.8),
        EdgeSpec::new(2, 0, 4, 0.6),
        EdgeSpec::new(3, 1, 5, 0.2),
        EdgeSpec::new(4, 2, 4, 0.9),
        EdgeSpec::new(5, 3, 5, 0.7),
    ];
    ExchangeGraph::build(3, vertices, edges).unwrap()
}

#[test]
fn g_pair_takes_top_edge_of_each_open_pair() {
    let g = three_robot_graph();
    let pw = PairwiseBudgets::new(3, vec![1, 1, 0]).unwrap();
    let sol = g_pair_eval(&g, &g.all_vertex_ids(), &pw).unwrap();
    // best feasible subset by exhaustion over all edge sets
    let mut best = 0.0f64;
    for mask in 0u32..1 << g.num_edges() {
        let mut used = [0usize; 3];
        let mut value = 0.0;
        for e in g.edges().iter().filter(|e| mask >> e.id.0 & 1 == 1) {
            used[g.edge_pair_index(e.id)] += 1;
            value += e.probability;
        }
        if used.iter().zip(&pw.limits).all(|(u, l)| u <= l) {
            best = best.max(value);
        }
    }
    assert_eq!(sol.edges, vec![EdgeId(1), EdgeId(2)]);
    assert_abs_diff_eq!(sol.value, best, epsilon = 1e-12);
}

#[test]
fn pairwise_greedy_meets_ratio_on_three_robots() {
    let g = three_robot_graph();
    let pw = PairwiseBudgets::new(3, vec![1, 2, 1]).unwrap();
    let plan = modular_greedy_pairwise(&g, 2, &pw).unwrap();
    // exhaustive (V, E) search under the same budgets
    let mut opt = 0.0f64;
    for vmask in 0u32..1 << 6 {
        if vmask.count_ones() > 2 {
            continue;
        }
        let vs: Vec<VertexId> = (0..6).filter(|i| vmask >> i & 1 == 1).map(VertexId).collect();
        opt = opt.max(g_pair_eval(&g, &vs, &pw).unwrap().value);
    }
    assert!(plan.objective >= (1.0 - (-1.0f64).exp()) * opt - 1e-12);
}

#[test]
fn tree_count_examples() {
    let tri = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)];
    assert_abs_diff_eq!(expected_log_tree_count(3, &tri).unwrap(), 3f64.ln(), epsilon = 1e-12);
    let tri = [(0, 1, 2.0), (1, 2, 3.0), (0, 2, 4.0)];
    assert_abs_diff_eq!(expected_log_tree_count(3, &tri).unwrap(), 26f64.ln(), epsilon = 1e-12);
}

fn prec(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.random_range(0.5..3.0), rng.random_range(0.5..3.0))
}

#[test]
fn wst_on_four_pose_cycle_matches_tree_enumeration() {
    let mut rng = common::rng(15);
    for _ in 0..20 {
        let prior: Vec<PriorEdge> = [(0, 1), (1, 2), (2, 3), (3, 0)]
            .iter()
            .map(|&(u, v)| {
                let (t, r) = prec(&mut rng);
                PriorEdge {
                    u,
                    v,
                    precision_t: t,
                    precision_r: r,
                }
            })
            .collect();
        let cands = [(0usize, 2usize), (1, 3)];
        let mut edges = Vec::new();
        let vertices = vec![
            VertexSpec { key: 0, robot: 0, weight: 1 },
            VertexSpec { key: 1, robot: 0, weight: 1 },
            VertexSpec { key: 2, robot: 1, weight: 1 },
            VertexSpec { key: 3, robot: 1, weight: 1 },
        ];
        let mut cand_w = Vec::new();
        for (i, _) in cands.iter().enumerate() {
            let (t, r) = prec(&mut rng);
            let p = rng.random_range(0.05..1.0);
            let mut e = EdgeSpec::new(i as u64, i as u64, 2 + i as u64, p);
            e.precisions = Some(lcplan::graph::Precisions {
                translational: t,
                rotational: r,
            });
            edges.push(e);
            cand_w.push((p * t, p * r));
        }
        let g = ExchangeGraph::build(2, vertices, edges).unwrap();
        let ctx = PoseGraphContext::new(4, prior.clone(), cands.to_vec()).unwrap();

        let log_count = |rot: bool, with: bool| {
            let mut es: Vec<(usize, usize, f64)> =
                prior.iter().map(|e| (e.u, e.v, if rot { e.precision_r } else { e.precision_t })).collect();
            if with {
                for (&(u, v), &(wt, wr)) in cands.iter().zip(&cand_w) {
                    es.push((u, v, if rot { wr } else { wt }));
                }
            }
            common::spanning_tree_weight(4, &es).ln()
        };
        let want = 2.0 * (log_count(false, true) - log_count(false, false)) + (log_count(true, true) - log_count(true, false));
        let got = wst_eval(&g, &ctx, &g.all_edge_ids()).unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-9);
    }
}

#[test]
fn fim_matches_eigen_decomposition() {
    let mut rng = common::rng(16);
    for _ in 0..50 {
        let inst = common::random_instance(&mut rng, 8, 10);
        let es: Vec<EdgeId> = inst.graph.all_edge_ids().into_iter().filter(|_| rng.random_bool(0.5)).collect();
        let mut m = inst.info.h_init.clone();
        for e in &es {
            inst.info.terms[e.0].add_to(&mut m, inst.graph.probability(*e));
        }
        let logdet = |m: &DMatrix<f64>| m.clone().symmetric_eigenvalues().iter().map(|l| l.ln()).sum::<f64>();
        let want = logdet(&m) - logdet(&inst.info.h_init);
        assert_abs_diff_eq!(fim_eval(&inst.graph, &inst.info, &es).unwrap(), want, epsilon = 1e-8);
    }
}

#[test]
fn fim_small_examples() {
    let vertices = vec![VertexSpec { key: 0, robot: 0, weight: 1 }, VertexSpec { key: 1, robot: 1, weight: 1 }];
    let g = ExchangeGraph::build(2, vertices.clone(), vec![EdgeSpec::new(0, 0, 1, 0.5)]).unwrap();
    let ctx = InfoContext::new(
        DMatrix::identity(2, 2),
        vec![SymTerm::dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0])))],
    )
    .unwrap();
    assert_abs_diff_eq!(fim_eval(&g, &ctx, &[EdgeId(0)]).unwrap(), 2f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(fim_eval(&g, &ctx, &[]).unwrap(), 0.0);

    // a single edge: the relaxation optimum is the corner, so the bound is tight
    let fim = ObjectiveHandle::fim(&g, &ctx).unwrap();
    let cert = fw_relax_logdet(&g, fim.log_det().unwrap(), &Budget::tu(1, 1), FwConfig::default()).unwrap();
    assert!(cert.value >= 2f64.ln() - 1e-12);
    assert!(cert.value - 2f64.ln() <= 1e-6);
}

/// LP bound for G1 by grid search over vertex weights with sum at most one;
/// for fixed weights the best edge weights come from a fractional knapsack.
fn g1_lp_grid(k: f64) -> f64 {
    let g = common::g1();
    let steps = 100;
    let mut best = 0.0f64;
    let mut edges: Vec<(f64, usize, usize)> = g.edges().iter().map(|e| (e.probability, e.u.0, e.v.0)).collect();
    edges.sort_by(|a, b| b.0.total_cmp(&a.0));
    for a in 0..=steps {
        for b in 0..=steps - a {
            for c in 0..=steps - a - b {
                for d in 0..=steps - a - b - c {
                    let pi = [a, b, c, d].map(|x| x as f64 / steps as f64);
                    let mut left = k;
                    let mut value = 0.0;
                    for &(p, u, v) in &edges {
                        let take = (pi[u] + pi[v]).min(1.0).min(left);
                        value += p * take;
                        left -= take;
                    }
                    best = best.max(value);
                }
            }
        }
    }
    best
}

#[test]
fn g1_certificates_match_oracles() {
    let g = common::g1();
    let nlc = ObjectiveHandle::nlc(&g);
    let budget = Budget::tu(1, 2);
    let opt = brute_force_opt(&g, &nlc, &budget).unwrap();
    assert_abs_diff_eq!(opt.value, 1.4, epsilon = 1e-12);
    // the four single-vertex plans by hand: a1 {0.9, 0.5}, a2 {0.4}, b1 {0.9, 0.4}, b2 {0.5}
    assert_abs_diff_eq!(opt.value, [1.4f64, 0.4, 1.3, 0.5].into_iter().fold(0.0, f64::max), epsilon = 1e-12);

    let lp = lp_relax_modular(&g, &nlc, &budget).unwrap();
    assert!(lp.valid);
    assert!(lp.value >= 1.4 - 1e-9 && lp.value <= 1.8 + 1e-9);
    assert_abs_diff_eq!(lp.value, g1_lp_grid(2.0), epsilon = 1e-9);
}

#[test]
fn fw_bound_dominates_opt_on_random_eight_edge_instances() {
    let mut rng = common::rng(17);
    let mut seen = 0;
    while seen < 10 {
        let inst = common::random_instance(&mut rng, 8, 8);
        if inst.graph.num_edges() != 8 {
            continue;
        }
        seen += 1;
        let fim = ObjectiveHandle::fim(&inst.graph, &inst.info).unwrap();
        let budget = Budget::tu(2, 3);
        let opt = brute_force_opt(&inst.graph, &fim, &budget).unwrap();
        let upt = fw_relax_logdet(&inst.graph, fim.log_det().unwrap(), &budget, FwConfig::default()).unwrap();
        assert!(upt.value - opt.value >= -1e-9, "{} < {}", upt.value, opt.value);
        assert!(fim.value(&opt.plan.as_ref().unwrap().edges).unwrap() <= upt.value + 1e-9);
    }
}

mod common;

use lcplan::certify::{fw_relax_logdet, lp_relax_modular, relaxation_rows, round_fractional, FwConfig};
use lcplan::graph::{check_plan, pair_count, Budget, EdgeId, PairwiseBudgets, VertexId};
use lcplan::modular::{g_pair_eval, inner_top_k, modular_greedy, GreedyOptions};
use lcplan::objectives::{expected_log_tree_count, Objective, ObjectiveHandle};
use lcplan::place_recognition::{
    build_exchange_graph, fit_logistic, penalized_nll, precision_recall, Descriptor, FitConfig, LabeledPair,
    LogisticModel,
};
use lcplan::sim::{attribute_plan, fractions};
use lcplan::simplex::LinearProgram;
use lcplan::submodular::{edge_greedy, guarantee_alpha, submodular_greedy, vertex_greedy, SubmodularOptions};
use proptest::prelude::*;
use rand::Rng;

fn objectives(inst: &common::Instance) -> Vec<ObjectiveHandle> {
    vec![
        ObjectiveHandle::nlc(&inst.graph),
        ObjectiveHandle::fim(&inst.graph, &inst.info).unwrap(),
        ObjectiveHandle::wst(&inst.graph, &inst.pose).unwrap(),
    ]
}

/// Random nested pair `A ⊆ B` of index sets and an element outside `B`.
fn nested(rng: &mut impl Rng, n: usize) -> Option<(Vec<usize>, Vec<usize>, usize)> {
    let outside = rng.random_range(0..n);
    let b: Vec<usize> = (0..n).filter(|&i| i != outside && rng.random_bool(0.5)).collect();
    let a: Vec<usize> = b.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    Some((a, b, outside))
}

fn with(xs: &[usize], x: usize) -> Vec<usize> {
    let mut v = xs.to_vec();
    v.push(x);
    v
}

fn vids(xs: &[usize]) -> Vec<VertexId> {
    xs.iter().map(|&i| VertexId(i)).collect()
}

fn eids(xs: &[usize]) -> Vec<EdgeId> {
    xs.iter().map(|&i| EdgeId(i)).collect()
}

/// Normalized, monotone and diminishing returns at `A ⊆ B`, `x ∉ B`.
fn check_nms(f: impl Fn(&[usize]) -> f64, a: &[usize], b: &[usize], x: usize) -> Result<(), TestCaseError> {
    let tol = 1e-9;
    prop_assert!(f(&[]).abs() <= tol);
    let (fa, fb) = (f(a), f(b));
    prop_assert!(fa <= fb + tol, "monotone: {fa} > {fb}");
    let (ga, gb) = (f(&with(a, x)) - fa, f(&with(b, x)) - fb);
    prop_assert!(ga >= gb - tol, "diminishing returns: {ga} < {gb}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objectives_are_nms(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let (a, b, x) = nested(&mut rng, inst.graph.num_edges()).unwrap();
        for obj in objectives(&inst) {
            check_nms(|s| obj.value(&eids(s)).unwrap(), &a, &b, x)?;
        }
    }

    #[test]
    fn nlc_is_modular(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let m = inst.graph.num_edges();
        let a: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
        let b: Vec<usize> = (0..m).filter(|_| rng.random_bool(0.5)).collect();
        let union: Vec<usize> = (0..m).filter(|i| a.contains(i) || b.contains(i)).collect();
        let inter: Vec<usize> = (0..m).filter(|i| a.contains(i) && b.contains(i)).collect();
        let f = ObjectiveHandle::nlc(&inst.graph);
        let v = |s: &[usize]| f.value(&eids(s)).unwrap();
        prop_assert!((v(&a) + v(&b) - v(&union) - v(&inter)).abs() < 1e-12);
    }

    #[test]
    fn induced_vertex_functions_are_nms(seed in any::<u64>(), k in 0usize..6) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let g = &inst.graph;
        let (a, b, x) = nested(&mut rng, g.num_vertices()).unwrap();
        check_nms(|s| inner_top_k(g, &vids(s), k).unwrap().value, &a, &b, x)?;
        let limits = (0..pair_count(g.robots())).map(|_| rng.random_range(0..4)).collect();
        let pw = PairwiseBudgets::new(g.robots(), limits).unwrap();
        check_nms(|s| g_pair_eval(g, &vids(s), &pw).unwrap().value, &a, &b, x)?;
        for obj in objectives(&inst) {
            check_nms(|s| obj.value(&g.edges_of(&vids(s)).unwrap()).unwrap(), &a, &b, x)?;
        }
    }

    #[test]
    fn single_block_g_pair_equals_g(seed in any::<u64>(), k in 0usize..8) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let g = &inst.graph;
        prop_assume!(g.robots() == 2);
        let vs: Vec<usize> = (0..g.num_vertices()).filter(|_| rng.random_bool(0.5)).collect();
        let pw = PairwiseBudgets::uniform(2, k);
        let a = inner_top_k(g, &vids(&vs), k).unwrap();
        let b = g_pair_eval(g, &vids(&vs), &pw).unwrap();
        prop_assert_eq!(a.edges, b.edges);
        prop_assert_eq!(a.value, b.value);
    }

    #[test]
    fn tree_count_matches_enumeration(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.random_range(2..=5usize);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if v == u + 1 || rng.random_bool(0.5) {
                    edges.push((u, v, rng.random_range(0.1..3.0)));
                }
            }
        }
        let want = common::spanning_tree_weight(n, &edges).ln();
        prop_assert!((expected_log_tree_count(n, &edges).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn solver_plans_are_feasible_and_lazy_matches_eager(seed in any::<u64>(), b in 0usize..5, k in 0usize..8) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let g = &inst.graph;
        let bytes = rng.random_range(0..12u64);
        let limits: Vec<usize> = (0..g.robots()).map(|_| rng.random_range(0..3)).collect();
        for budget in [Budget::tu(b, k), Budget::tn(bytes, k), Budget::iu(limits, k)] {
            let eager = modular_greedy(g, &budget, GreedyOptions { lazy: false }).unwrap();
            let lazy = modular_greedy(g, &budget, GreedyOptions { lazy: true }).unwrap();
            prop_assert!(check_plan(g, &eager, &budget).is_feasible());
            prop_assert_eq!(&eager, &lazy);
        }
        let budget = Budget::tu(b, k);
        for obj in objectives(&inst) {
            let e = edge_greedy(g, &obj, b, k, SubmodularOptions { lazy: false }).unwrap();
            let l = edge_greedy(g, &obj, b, k, SubmodularOptions { lazy: true }).unwrap();
            prop_assert!(check_plan(g, &e.plan, &budget).is_feasible());
            prop_assert_eq!(&e.plan, &l.plan);
            let e = vertex_greedy(g, &obj, b, k, SubmodularOptions { lazy: false }).unwrap();
            let l = vertex_greedy(g, &obj, b, k, SubmodularOptions { lazy: true }).unwrap();
            prop_assert!(check_plan(g, &e.plan, &budget).is_feasible());
            prop_assert!(e.plan.vertices.len() >= b.min(k / g.max_degree().max(1)).min(g.num_vertices()));
            prop_assert_eq!(&e.plan, &l.plan);
            let (plan, report) = submodular_greedy(g, &obj, b, k, SubmodularOptions::default()).unwrap();
            let again = submodular_greedy(g, &obj, b, k, SubmodularOptions::default()).unwrap();
            prop_assert_eq!(&plan, &again.0);
            prop_assert!(report.alpha >= report.delta_bound - 1e-12);
            prop_assert!(report.alpha <= 1.0 - (-1.0f64).exp() + 1e-12);
        }
    }

    #[test]
    fn relaxations_bound_rounded_plans(seed in any::<u64>(), b in 0usize..5, k in 0usize..8) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let g = &inst.graph;
        let budget = Budget::tu(b, k);
        let nlc = ObjectiveHandle::nlc(g);
        let lp = lp_relax_modular(g, &nlc, &budget).unwrap();
        let frac = lp.fractional.as_ref().unwrap();
        let (rows, rhs) = relaxation_rows(g, &budget).unwrap();
        let x: Vec<f64> = frac.pi.iter().chain(&frac.ell).copied().collect();
        for (row, r) in rows.iter().zip(&rhs) {
            let lhs: f64 = row.iter().zip(&x).map(|(a, x)| a * x).sum();
            prop_assert!(lhs <= r + 1e-9);
        }
        let rounded = round_fractional(g, frac, &budget, &nlc).unwrap();
        prop_assert!(check_plan(g, &rounded, &budget).is_feasible());
        prop_assert!(rounded.objective <= lp.value + 1e-9);

        let fim = ObjectiveHandle::fim(g, &inst.info).unwrap();
        let fw = fw_relax_logdet(g, fim.log_det().unwrap(), &budget, FwConfig::default()).unwrap();
        for w in fw.trace.windows(2) {
            prop_assert!(w[1].value >= w[0].value - 1e-12);
        }
        prop_assert!(fw.trace.iter().all(|s| s.gap >= 0.0));
        let rounded = round_fractional(g, fw.fractional.as_ref().unwrap(), &budget, &fim).unwrap();
        prop_assert!(check_plan(g, &rounded, &budget).is_feasible());
        prop_assert!(rounded.objective <= fw.value + 1e-9);
    }

    #[test]
    fn simplex_solutions_are_feasible(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (n, rows) = (rng.random_range(1..8usize), rng.random_range(1..6usize));
        let c = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        let a = (0..rows).map(|_| (0..n).map(|_| rng.random_range(-1.0..2.0)).collect()).collect();
        let b = (0..rows).map(|_| rng.random_range(0.0..3.0)).collect();
        let upper = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let lp = LinearProgram::new(c, a, b, upper).unwrap();
        let sol = lp.solve().unwrap();
        prop_assert!(sol.is_optimal());
        prop_assert!(lp.max_violation(&sol.x) <= 1e-9);
        prop_assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-7);
    }

    #[test]
    fn threshold_on_probability_equals_threshold_on_distance(seed in any::<u64>(), px in 0.05f64..0.95) {
        let mut rng = common::rng(seed);
        let model = LogisticModel::new(rng.random_range(0.0..5.0), -rng.random_range(0.5..6.0));
        let ds: Vec<Descriptor> = (0..12)
            .map(|i| Descriptor {
                robot: i % 3,
                observation: i as u64,
                weight: 1,
                vector: (0..3).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect();
        let dx = model.distance_threshold(px).unwrap();
        let g = build_exchange_graph(&ds, &model, px).unwrap();
        let mut expect = Vec::new();
        for a in &ds {
            for b in ds.iter().filter(|b| b.observation > a.observation && b.robot != a.robot) {
                let d: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                prop_assume!((d - dx).abs() > 1e-9);
                if d <= dx {
                    expect.push((a.observation, b.observation));
                }
            }
        }
        let got: Vec<(u64, u64)> = g.edges().iter().map(|e| (g.vertex(e.u).key, g.vertex(e.v).key)).collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn fitted_model_beats_flat_model(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let pairs: Vec<LabeledPair> = (0..60)
            .map(|_| LabeledPair { distance: rng.random_range(0.0..2.0), label: rng.random_bool(0.4) })
            .collect();
        prop_assume!(pairs.iter().any(|p| p.label) && pairs.iter().any(|p| !p.label));
        let cfg = FitConfig::default();
        let fit = fit_logistic(&pairs, cfg).unwrap();
        let flat = LogisticModel::new(0.0, 0.0);
        prop_assert!(penalized_nll(&fit.model, &pairs, cfg.lambda) <= penalized_nll(&flat, &pairs, cfg.lambda) + 1e-12);
        let again = fit_logistic(&pairs, cfg).unwrap();
        prop_assert_eq!(fit, again);
    }

    #[test]
    fn recall_falls_with_threshold(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let pairs: Vec<LabeledPair> = (0..100)
            .map(|_| LabeledPair { distance: rng.random_range(0.0..2.0), label: rng.random_bool(0.5) })
            .collect();
        let model = LogisticModel::new(2.0, -3.0);
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let curve = precision_recall(&model, &pairs, &ts).unwrap();
        for p in &curve {
            prop_assert!((0.0..=1.0).contains(&p.precision));
        }
        for w in curve.windows(2) {
            if let (Some(a), Some(b)) = (w[0].recall, w[1].recall) {
                prop_assert!(b <= a);
            }
        }
    }

    #[test]
    fn comm_fractions_sum_to_one(seed in any::<u64>(), b in 1usize..6, k in 0usize..8) {
        let mut rng = common::rng(seed);
        let inst = common::random_instance(&mut rng, 10, 12);
        let plan = modular_greedy(&inst.graph, &Budget::tu(b, k), GreedyOptions::default()).unwrap();
        let out = attribute_plan(&inst.graph, &plan).unwrap();
        prop_assume!(out.comm_bytes > 0);
        prop_assert!((fractions(&out.comm_bytes_per_robot.iter().map(|&b| b as u32).collect::<Vec<_>>()).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn alpha_stays_between_degree_floor_and_one_minus_inverse_e() {
    let top = 1.0 - (-1.0f64).exp();
    for delta in [1, 3, 5, 41] {
        for b in 1..=50 {
            for k in 1..=50 {
                let r = guarantee_alpha(b, k, delta);
                assert!(r.alpha <= top + 1e-12);
                assert!(r.alpha >= r.delta_bound - 1e-12);
                assert_eq!(r.alpha, r.alpha_e.max(r.alpha_v));
            }
        }
    }
}

#[test]
fn alpha_has_a_valley_in_b() {
    // the edge term rises with b while the vertex term falls
    let a = |b| guarantee_alpha(b, 10, 5).alpha;
    assert!(a(2) > a(4));
    assert!(a(4) < a(10));
    assert!((a(10) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
}

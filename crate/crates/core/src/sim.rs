//! Synthetic Manhattan-grid rendezvous worlds, plan execution against ground
//! truth, and the random exchange baseline.
//!
//! Randomness comes from ChaCha8 seeded with the world seed; each purpose
//! draws from its own stream so changing one never shifts another.

use std::io::Write;

use nalgebra::{DMatrix, Matrix3x6, Matrix3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    pair_count, EdgeId, EdgeRecord, EdgeSpec, ExchangeGraph, GraphFile, Plan, Precisions, VertexId, VertexRecord,
    VertexSpec,
};
use crate::linalg::SymTerm;
use crate::objectives::{InfoContext, InfoContextFile, Objective, PoseGraphContext, PoseGraphFile, PriorEdge};

const STREAM_TRAJECTORY: u64 = 1;
const STREAM_THINNING: u64 = 2;
const STREAM_ATTRIBUTES: u64 = 3;
const STREAM_REALIZATION: u64 = 4;
const STREAM_BASELINE: u64 = 5;

fn rng_for(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | index);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub robots: usize,
    pub steps: usize,
    pub candidate_rate: f64,
    pub seed: u64,
    /// Side of the square of start cells.
    pub start_extent: i64,
    pub odometry: Precisions,
    pub candidate_translational: (f64, f64),
    pub candidate_rotational: (f64, f64),
    pub weight_bytes: u64,
}

impl WorldConfig {
    pub fn new(robots: usize, steps: usize, candidate_rate: f64, seed: u64) -> Self {
        WorldConfig {
            robots,
            steps,
            candidate_rate,
            seed,
            start_extent: 10,
            odometry: Precisions {
                translational: 10.0,
                rotational: 50.0,
            },
            candidate_translational: (5.0, 15.0),
            candidate_rotational: (25.0, 75.0),
            weight_bytes: 1000,
        }
    }
}

/// Grid pose; heading is a multiple of a quarter turn.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPose {
    pub x: i64,
    pub y: i64,
    pub heading: u8,
}

impl GridPose {
    pub fn theta(&self) -> f64 {
        f64::from(self.heading) * std::f64::consts::FRAC_PI_2
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub graph: ExchangeGraph,
    /// Indexed by dense edge id.
    pub ground_truth: Vec<bool>,
    pub trajectories: Vec<Vec<GridPose>>,
    pub pose_graph: PoseGraphContext,
    pub info: InfoContext,
}

/// Pose index in the joint pose graph; pose 0 is a virtual anchor tied to
/// every robot's first pose.
pub fn pose_index(steps: usize, robot: usize, t: usize) -> usize {
    1 + robot * steps + t
}

fn walk(rng: &mut ChaCha8Rng, extent: i64, steps: usize) -> Vec<GridPose> {
    let mut pose = GridPose {
        x: rng.random_range(0..extent),
        y: rng.random_range(0..extent),
        heading: rng.random_range(0..4u8),
    };
    let mut out = Vec::with_capacity(steps);
    out.push(pose);
    for _ in 1..steps {
        // left, straight or right, then one cell forward
        let turn = rng.random_range(0..3u8);
        pose.heading = (pose.heading + 3 + turn) % 4;
        match pose.heading {
            0 => pose.x += 1,
            1 => pose.y += 1,
            2 => pose.x -= 1,
            _ => pose.y -= 1,
        }
        out.push(pose);
    }
    out
}

/// Information block of a planar relative-pose measurement between poses
/// `a` and `b`, ordered `[x_a, y_a, th_a, x_b, y_b, th_b]`.
pub fn relative_pose_information(a: (f64, f64, f64), b: (f64, f64, f64), prec: Precisions) -> DMatrix<f64> {
    let (c, s) = (a.2.cos(), a.2.sin());
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let j = Matrix3x6::new(
        -c, -s, -s * dx + c * dy, c, s, 0.0,
        s, -c, -c * dx - s * dy, -s, c, 0.0,
        0.0, 0.0, -1.0, 0.0, 0.0, 1.0,
    );
    let w = Matrix3::from_diagonal(&nalgebra::Vector3::new(prec.translational, prec.translational, prec.rotational));
    let h = j.transpose() * w * j;
    DMatrix::from_iterator(6, 6, h.iter().copied())
}

fn pair_term(pa: usize, a: (f64, f64, f64), pb: usize, b: (f64, f64, f64), prec: Precisions) -> Result<SymTerm> {
    let h = relative_pose_information(a, b, prec);
    let idx = vec![3 * pa, 3 * pa + 1, 3 * pa + 2, 3 * pb, 3 * pb + 1, 3 * pb + 2];
    SymTerm::new(idx, h)
}

pub fn gen_world(cfg: &WorldConfig) -> Result<SyntheticWorld> {
    if cfg.robots < 2 {
        return Err(Error::TooFewRobots(cfg.robots));
    }
    if cfg.steps < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 steps, got {}", cfg.steps)));
    }
    if !(0.0..=1.0).contains(&cfg.candidate_rate) {
        return Err(Error::InvalidConfig(format!("candidate rate {} outside [0, 1]", cfg.candidate_rate)));
    }
    if cfg.start_extent < 1 || cfg.weight_bytes == 0 {
        return Err(Error::InvalidConfig("start extent and weight must be positive".into()));
    }
    let (t_lo, t_hi) = cfg.candidate_translational;
    let (r_lo, r_hi) = cfg.candidate_rotational;
    if !(t_lo > 0.0 && t_lo <= t_hi && r_lo > 0.0 && r_lo <= r_hi) {
        return Err(Error::InvalidConfig("candidate precision ranges must be positive and ordered".into()));
    }

    let trajectories: Vec<Vec<GridPose>> = (0..cfg.robots)
        .map(|r| walk(&mut rng_for(cfg.seed, STREAM_TRAJECTORY, r as u64), cfg.start_extent, cfg.steps))
        .collect();

    let mut thin = rng_for(cfg.seed, STREAM_THINNING, 0);
    let mut pairs = Vec::new();
    for ri in 0..cfg.robots {
        for (ti, a) in trajectories[ri].iter().enumerate() {
            for (rj, traj) in trajectories.iter().enumerate().skip(ri + 1) {
                for (tj, b) in traj.iter().enumerate() {
                    if (a.x - b.x).abs() + (a.y - b.y).abs() <= 1 {
                        let keep: f64 = thin.random();
                        if keep < cfg.candidate_rate {
                            pairs.push(((ri, ti), (rj, tj)));
                        }
                    }
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateWorld);
    }

    let coords = |r: usize, t: usize| {
        let p = trajectories[r][t];
        (p.x as f64, p.y as f64, p.theta())
    };
    let mut attr = rng_for(cfg.seed, STREAM_ATTRIBUTES, 0);
    let mut real = rng_for(cfg.seed, STREAM_REALIZATION, 0);
    let mut edges = Vec::with_capacity(pairs.len());
    let mut ground_truth = Vec::with_capacity(pairs.len());
    let mut terms = Vec::with_capacity(pairs.len());
    let mut cand_poses = Vec::with_capacity(pairs.len());
    for (key, &((ri, ti), (rj, tj))) in pairs.iter().enumerate() {
        let p: f64 = attr.random();
        let prec = Precisions {
            translational: attr.random_range(t_lo..=t_hi),
            rotational: attr.random_range(r_lo..=r_hi),
        };
        let draw: f64 = real.random();
        ground_truth.push(draw < p);
        let (pa, pb) = (pose_index(cfg.steps, ri, ti), pose_index(cfg.steps, rj, tj));
        terms.push(pair_term(pa, coords(ri, ti), pb, coords(rj, tj), prec)?);
        cand_poses.push((pa, pb));
        let mut spec = EdgeSpec::new(key as u64, pa as u64, pb as u64, p);
        spec.precisions = Some(prec);
        edges.push(spec);
    }

    let poses = 1 + cfg.robots * cfg.steps;
    let mut prior = Vec::new();
    let odo = cfg.odometry;
    let edge = |u, v| PriorEdge {
        u,
        v,
        precision_t: odo.translational,
        precision_r: odo.rotational,
    };
    let anchor = (0.0, 0.0, 0.0);
    let mut h_init = DMatrix::zeros(3 * poses, 3 * poses);
    for i in 0..3 {
        h_init[(i, i)] = if i == 2 { odo.rotational } else { odo.translational };
    }
    for r in 0..cfg.robots {
        prior.push(edge(0, pose_index(cfg.steps, r, 0)));
        pair_term(0, anchor, pose_index(cfg.steps, r, 0), coords(r, 0), odo)?.add_to(&mut h_init, 1.0);
        for t in 1..cfg.steps {
            let (pa, pb) = (pose_index(cfg.steps, r, t - 1), pose_index(cfg.steps, r, t));
            prior.push(edge(pa, pb));
            pair_term(pa, coords(r, t - 1), pb, coords(r, t), odo)?.add_to(&mut h_init, 1.0);
        }
    }

    let vertices = (0..cfg.robots)
        .flat_map(|r| {
            (0..cfg.steps).map(move |t| VertexSpec {
                key: pose_index(cfg.steps, r, t) as u64,
                robot: r,
                weight: cfg.weight_bytes,
            })
        })
        .collect();
    let graph = ExchangeGraph::build(cfg.robots, vertices, edges)?;
    let pose_graph = PoseGraphContext::new(poses, prior, cand_poses)?;
    let info = InfoContext::new(h_init, terms)?;
    Ok(SyntheticWorld {
        config: cfg.clone(),
        graph,
        ground_truth,
        trajectories,
        pose_graph,
        info,
    })
}

/// Fresh Bernoulli(p) outcomes for every edge, independent of the world's own.
pub fn realize(graph: &ExchangeGraph, seed: u64) -> Vec<bool> {
    let mut rng = rng_for(seed, STREAM_REALIZATION, 1);
    graph
        .edges()
        .iter()
        .map(|e| {
            let u: f64 = rng.random();
            u < e.probability
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub discovered_true_loops: usize,
    pub comm_bytes: u64,
    pub comm_bytes_per_robot: Vec<u64>,
    pub verifications: usize,
    pub verifications_per_robot: Vec<usize>,
    pub verifications_per_pair: Vec<usize>,
}

/// Shares of a per-robot total; all zero when the total is zero.
pub fn fractions<T: Copy + Into<f64>>(values: &[T]) -> Vec<f64> {
    let total: f64 = values.iter().map(|&v| v.into()).sum();
    values
        .iter()
        .map(|&v| if total > 0.0 { v.into() / total } else { 0.0 })
        .collect()
}

/// Executes a plan against ground truth. Each broadcast is charged to the
/// vertex's robot; each verification to the robot of the endpoint that did
/// not broadcast, or to the lower robot index when both did.
pub fn realize_and_evaluate(graph: &ExchangeGraph, ground_truth: &[bool], plan: &Plan) -> Result<ExecutionOutcome> {
    if ground_truth.len() != graph.num_edges() {
        return Err(Error::BlockMismatch {
            expected: graph.num_edges(),
            given: ground_truth.len(),
        });
    }
    let n = graph.num_vertices();
    let mut sent = vec![false; n];
    let mut out = ExecutionOutcome {
        comm_bytes_per_robot: vec![0; graph.robots()],
        verifications_per_robot: vec![0; graph.robots()],
        verifications_per_pair: vec![0; pair_count(graph.robots())],
        ..Default::default()
    };
    for &v in &plan.vertices {
        if v.0 >= n {
            return Err(Error::InfeasiblePlan(format!("unknown vertex index {}", v.0)));
        }
        if !sent[v.0] {
            sent[v.0] = true;
            let vx = graph.vertex(v);
            out.comm_bytes += vx.weight;
            out.comm_bytes_per_robot[vx.robot] += vx.weight;
        }
    }
    let mut seen = vec![false; graph.num_edges()];
    for &e in &plan.edges {
        if e.0 >= graph.num_edges() {
            return Err(Error::InfeasiblePlan(format!("unknown edge index {}", e.0)));
        }
        if std::mem::replace(&mut seen[e.0], true) {
            continue;
        }
        let edge = graph.edge(e);
        let (ru, rv) = (graph.vertex(edge.u).robot, graph.vertex(edge.v).robot);
        let verifier = match (sent[edge.u.0], sent[edge.v.0]) {
            (false, false) => return Err(Error::InfeasiblePlan(format!("edge {} is not covered", edge.key))),
            (true, false) => rv,
            (false, true) => ru,
            (true, true) => ru.min(rv),
        };
        out.verifications += 1;
        out.verifications_per_robot[verifier] += 1;
        out.verifications_per_pair[graph.edge_pair_index(e)] += 1;
        if ground_truth[e.0] {
            out.discovered_true_loops += 1;
        }
    }
    Ok(out)
}

/// Communication and verification attribution of a plan, without ground truth.
pub fn attribute_plan(graph: &ExchangeGraph, plan: &Plan) -> Result<ExecutionOutcome> {
    realize_and_evaluate(graph, &vec![false; graph.num_edges()], plan)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrial {
    pub trial: usize,
    pub objective: f64,
    pub discovered: Option<usize>,
    pub comm_bytes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub trials: Vec<BaselineTrial>,
    pub mean_objective: f64,
    pub mean_discovered: Option<f64>,
    pub mean_comm_bytes: f64,
    pub plans: Vec<Plan>,
}

/// Uniformly random `b` vertices, then uniformly random `k` covered edges
/// (all of them if fewer), averaged over `trials`.
pub fn random_baseline(
    graph: &ExchangeGraph,
    obj: &dyn Objective,
    b: usize,
    k: usize,
    trials: usize,
    seed: u64,
    ground_truth: Option<&[bool]>,
) -> Result<BaselineReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let mut rows = Vec::with_capacity(trials);
    let mut plans = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = rng_for(seed, STREAM_BASELINE, trial as u64);
        let n = graph.num_vertices();
        let vs: Vec<VertexId> = sample(&mut rng, n, b.min(n)).into_iter().map(VertexId).collect();
        let covered = graph.edges_of(&vs)?;
        let es: Vec<EdgeId> = sample(&mut rng, covered.len(), k.min(covered.len()))
            .into_iter()
            .map(|i| covered[i])
            .collect();
        let mut plan = Plan::new(graph, vs, es, 0.0);
        plan.objective = obj.value(&plan.edges)?;
        let discovered = match ground_truth {
            Some(gt) => Some(realize_and_evaluate(graph, gt, &plan)?.discovered_true_loops),
            None => None,
        };
        rows.push(BaselineTrial {
            trial,
            objective: plan.objective,
            discovered,
            comm_bytes: plan.comm_bytes,
        });
        plans.push(plan);
    }
    let t = trials as f64;
    let mean_objective = rows.iter().map(|r| r.objective).sum::<f64>() / t;
    let mean_discovered = ground_truth.map(|_| rows.iter().map(|r| r.discovered.unwrap_or(0) as f64).sum::<f64>() / t);
    let mean_comm_bytes = rows.iter().map(|r| r.comm_bytes as f64).sum::<f64>() / t;
    Ok(BaselineReport {
        trials: rows,
        mean_objective,
        mean_discovered,
        mean_comm_bytes,
        plans,
    })
}

pub fn write_baseline_csv(report: &BaselineReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trial", "objective", "discovered", "comm_bytes"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in &report.trials {
        w.write_record([
            r.trial.to_string(),
            r.objective.to_string(),
            r.discovered.map(|d| d.to_string()).unwrap_or_default(),
            r.comm_bytes.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// On-disk world: the graph document plus ground truth and both contexts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub robots: usize,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
    pub ground_truth: Vec<bool>,
    pub seed: u64,
    pub config: WorldConfig,
    pub trajectories: Vec<Vec<GridPose>>,
    pub pose_graph: PoseGraphFile,
    pub info_context: InfoContextFile,
}

impl WorldFile {
    pub fn graph_file(&self) -> GraphFile {
        GraphFile {
            robots: self.robots,
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
        }
    }
}

impl SyntheticWorld {
    pub fn to_file(&self) -> WorldFile {
        let g = self.graph.to_file();
        WorldFile {
            robots: g.robots,
            vertices: g.vertices,
            edges: g.edges,
            ground_truth: self.ground_truth.clone(),
            seed: self.config.seed,
            config: self.config.clone(),
            trajectories: self.trajectories.clone(),
            pose_graph: self.pose_graph.to_file(&self.graph),
            info_context: self.info.to_file(&self.graph),
        }
    }

    pub fn from_file(file: &WorldFile) -> Result<Self> {
        let graph = ExchangeGraph::from_file(file.graph_file())?;
        if file.ground_truth.len() != graph.num_edges() {
            return Err(Error::BlockMismatch {
                expected: graph.num_edges(),
                given: file.ground_truth.len(),
            });
        }
        // ground truth follows file edge order; map it onto dense ids
        let mut gt = vec![false; graph.num_edges()];
        for (rec, &t) in file.edges.iter().zip(&file.ground_truth) {
            gt[graph.edge_by_key(rec.id)?.0] = t;
        }
        let pose_graph = PoseGraphContext::from_file(&graph, &file.pose_graph)?;
        let info = InfoContext::from_file(&graph, &file.info_context)?;
        Ok(SyntheticWorld {
            config: file.config.clone(),
            graph,
            ground_truth: gt,
            trajectories: file.trajectories.clone(),
            pose_graph,
            info,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn expected_loops(&self) -> f64 {
        self.graph.edges().iter().map(|e| e.probability).sum()
    }

    pub fn true_loops(&self) -> usize {
        self.ground_truth.iter().filter(|&&t| t).count()
    }
}

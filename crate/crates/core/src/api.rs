//! Request/response layer shared by the command-line tool and the C ABI.

use serde::{Deserialize, Serialize};

use crate::certify::{brute_force_opt, fw_relax_logdet, lp_relax_modular, Certificate, CertificateRecord, FwConfig};
use crate::error::{Error, Result};
use crate::graph::{
    parse_json_document, Budget, CommBudget, CompBudget, ExchangeGraph, GraphFile, PairwiseBudgets, Plan, PlanRecord,
};
use crate::modular::{modular_greedy, GreedyOptions};
use crate::objectives::{
    InfoContext, InfoContextFile, Objective, ObjectiveHandle, ObjectiveKind, PoseGraphContext, PoseGraphFile,
};
use crate::sim::{random_baseline, SyntheticWorld, WorldFile};
use crate::submodular::{edge_greedy, guarantee_alpha, submodular_greedy, vertex_greedy, GuaranteeReport, SubmodularOptions, Winner};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ModularGreedy,
    SubmodularGreedy,
    EdgeGreedy,
    VertexGreedy,
    Random,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ModularGreedy => "modular-greedy",
            Algorithm::SubmodularGreedy => "submodular-greedy",
            Algorithm::EdgeGreedy => "edge-greedy",
            Algorithm::VertexGreedy => "vertex-greedy",
            Algorithm::Random => "random",
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommModel {
    #[default]
    Tu,
    Tn,
    Iu,
}

impl std::str::FromStr for CommModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tu" => Ok(CommModel::Tu),
            "tn" => Ok(CommModel::Tn),
            "iu" => Ok(CommModel::Iu),
            _ => Err(Error::InvalidConfig(format!("unknown communication model '{s}'"))),
        }
    }
}

/// Context documents for the log-det objectives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextFiles {
    #[serde(default)]
    pub info_context: Option<InfoContextFile>,
    #[serde(default)]
    pub pose_graph: Option<PoseGraphFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    #[serde(default = "default_objective")]
    pub objective: ObjectiveKind,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub comm: CommModel,
    /// Vertex count (TU) or bytes (TN).
    #[serde(default)]
    pub b: Option<u64>,
    #[serde(default)]
    pub bi: Option<Vec<usize>>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub ki: Option<Vec<usize>>,
    #[serde(default)]
    pub kij: Option<Vec<usize>>,
    #[serde(default)]
    pub lazy: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SolveRequest {
    /// Exactly one computation form is used: `ki`, then `kij`, then `k`.
    pub fn to_budget(&self, graph: &ExchangeGraph) -> Result<Budget> {
        let comm = match self.comm {
            CommModel::Tu => CommBudget::Tu {
                b: self.b.ok_or_else(|| Error::InvalidConfig("missing communication budget b".into()))? as usize,
            },
            CommModel::Tn => CommBudget::Tn {
                bytes: self.b.ok_or_else(|| Error::InvalidConfig("missing byte budget b".into()))?,
            },
            CommModel::Iu => CommBudget::Iu {
                limits: self
                    .bi
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig("missing per-robot budgets bi".into()))?,
                blocks: None,
            },
        };
        let comp = if let Some(ki) = &self.ki {
            CompBudget::Individual { per_robot: ki.clone() }
        } else if let Some(kij) = &self.kij {
            CompBudget::Pairwise(PairwiseBudgets::new(graph.robots(), kij.clone())?)
        } else {
            CompBudget::Total {
                k: self.k.ok_or_else(|| Error::InvalidConfig("missing computation budget k".into()))?,
            }
        };
        let budget = Budget { comm, comp };
        budget.validate(graph)?;
        Ok(budget)
    }
}

fn default_objective() -> ObjectiveKind {
    ObjectiveKind::Nlc
}

fn default_algorithm() -> Algorithm {
    Algorithm::ModularGreedy
}

/// A graph plus whatever contexts came with it.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: ExchangeGraph,
    pub info: Option<InfoContext>,
    pub pose_graph: Option<PoseGraphContext>,
    pub ground_truth: Option<Vec<bool>>,
}

impl Instance {
    pub fn new(graph: ExchangeGraph) -> Self {
        Instance {
            graph,
            info: None,
            pose_graph: None,
            ground_truth: None,
        }
    }

    /// Accepts a graph document or a simulated world document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = parse_json_document(text)?;
        if value.get("ground_truth").is_some() {
            let file: WorldFile = serde_json::from_value(value)?;
            let world = SyntheticWorld::from_file(&file)?;
            Ok(Instance::from(world))
        } else {
            let file: GraphFile = serde_json::from_value(value)?;
            Ok(Instance::new(ExchangeGraph::from_file(file)?))
        }
    }

    pub fn with_contexts(mut self, files: &ContextFiles) -> Result<Self> {
        if let Some(f) = &files.info_context {
            self.info = Some(InfoContext::from_file(&self.graph, f)?);
        }
        if let Some(f) = &files.pose_graph {
            self.pose_graph = Some(PoseGraphContext::from_file(&self.graph, f)?);
        }
        Ok(self)
    }

    pub fn objective(&self, kind: ObjectiveKind) -> Result<ObjectiveHandle> {
        match kind {
            ObjectiveKind::Nlc => Ok(ObjectiveHandle::nlc(&self.graph)),
            ObjectiveKind::Fim => ObjectiveHandle::fim(&self.graph, self.info.as_ref().ok_or(Error::MissingContext("fim"))?),
            ObjectiveKind::Wst => {
                ObjectiveHandle::wst(&self.graph, self.pose_graph.as_ref().ok_or(Error::MissingContext("wst"))?)
            }
        }
    }
}

impl From<SyntheticWorld> for Instance {
    fn from(w: SyntheticWorld) -> Self {
        Instance {
            graph: w.graph,
            info: Some(w.info),
            pose_graph: Some(w.pose_graph),
            ground_truth: Some(w.ground_truth),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Guarantee {
    Submodular(GuaranteeReport),
    Modular { alpha: f64 },
}

impl Guarantee {
    pub fn alpha(&self) -> f64 {
        match self {
            Guarantee::Submodular(r) => r.alpha,
            Guarantee::Modular { alpha } => *alpha,
        }
    }
}

/// Approximation ratio of Modular-Greedy under each communication model.
pub fn modular_alpha(comm: &CommBudget) -> f64 {
    let e = 1.0 - (-1.0f64).exp();
    match comm {
        CommBudget::Tu { .. } => e,
        CommBudget::Tn { .. } => 0.5 * e,
        CommBudget::Iu { .. } => 0.5,
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub algorithm: Algorithm,
    pub objective: ObjectiveKind,
    pub plan: Plan,
    pub guarantee: Option<Guarantee>,
    pub evaluations: Option<u64>,
    /// `f(E_x)`: the objective with every candidate verified.
    pub max_objective: f64,
}

fn tu_total(budget: &Budget, alg: Algorithm) -> Result<(usize, usize)> {
    match (&budget.comm, &budget.comp) {
        (CommBudget::Tu { b }, CompBudget::Total { k }) => Ok((*b, *k)),
        _ => Err(Error::InvalidConfig(format!(
            "{} supports only a vertex-count budget with a total computation budget",
            alg.as_str()
        ))),
    }
}

pub fn solve(inst: &Instance, req: &SolveRequest) -> Result<Solved> {
    let graph = &inst.graph;
    let budget = req.to_budget(graph)?;
    let obj = inst.objective(req.objective)?;
    let max_objective = obj.value(&graph.all_edge_ids())?;
    let sub_opts = SubmodularOptions { lazy: req.lazy };
    let (plan, guarantee, evaluations) = match req.algorithm {
        Algorithm::ModularGreedy => {
            if req.objective != ObjectiveKind::Nlc {
                return Err(Error::InvalidConfig("modular-greedy requires the nlc objective".into()));
            }
            let plan = modular_greedy(graph, &budget, GreedyOptions { lazy: req.lazy })?;
            let alpha = modular_alpha(&budget.comm);
            (plan, Some(Guarantee::Modular { alpha }), None)
        }
        Algorithm::SubmodularGreedy => {
            let (b, k) = tu_total(&budget, req.algorithm)?;
            let (plan, report) = submodular_greedy(graph, &obj, b, k, sub_opts)?;
            (plan, Some(Guarantee::Submodular(report)), None)
        }
        Algorithm::EdgeGreedy | Algorithm::VertexGreedy => {
            let (b, k) = tu_total(&budget, req.algorithm)?;
            let mut report = guarantee_alpha(b, k, graph.max_degree());
            let run = if req.algorithm == Algorithm::EdgeGreedy {
                report.alpha = report.alpha_e;
                report.winner = Some(Winner::EdgeGreedy);
                edge_greedy(graph, &obj, b, k, sub_opts)?
            } else {
                report.alpha = report.alpha_v;
                report.winner = Some(Winner::VertexGreedy);
                vertex_greedy(graph, &obj, b, k, sub_opts)?
            };
            (run.plan, Some(Guarantee::Submodular(report)), Some(run.evaluations))
        }
        Algorithm::Random => {
            let (b, k) = tu_total(&budget, req.algorithm)?;
            let mut rep = random_baseline(graph, &obj, b, k, 1, req.seed, None)?;
            (rep.plans.remove(0), None, None)
        }
    };
    Ok(Solved {
        algorithm: req.algorithm,
        objective: req.objective,
        plan,
        guarantee,
        evaluations,
        max_objective,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub objective_kind: ObjectiveKind,
    #[serde(flatten)]
    pub plan: PlanRecord,
    pub max_objective: f64,
    pub normalized: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guarantee: Option<Guarantee>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluations: Option<u64>,
}

impl Solved {
    pub fn normalized(&self) -> f64 {
        if self.max_objective > 0.0 {
            self.plan.objective / self.max_objective
        } else {
            1.0
        }
    }

    pub fn to_output(&self, graph: &ExchangeGraph) -> SolveOutput {
        SolveOutput {
            schema_version: SCHEMA_VERSION,
            algorithm: self.algorithm,
            objective_kind: self.objective,
            plan: self.plan.to_record(graph),
            max_objective: self.max_objective,
            normalized: self.normalized(),
            guarantee: self.guarantee.clone(),
            evaluations: self.evaluations,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertifyMethod {
    Bruteforce,
    Lp,
    FrankWolfe,
}

impl std::str::FromStr for CertifyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bruteforce" => Ok(CertifyMethod::Bruteforce),
            "lp" => Ok(CertifyMethod::Lp),
            "frank-wolfe" | "frankwolfe" | "fw" => Ok(CertifyMethod::FrankWolfe),
            _ => Err(Error::InvalidConfig(format!("unknown certification method '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyRequest {
    pub method: CertifyMethod,
    pub solve: SolveRequest,
    pub fw: FwConfig,
    /// The spanning-tree objective is only relaxed when asked for explicitly.
    pub allow_wst_relaxation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    pub schema_version: u32,
    pub certificate: CertificateRecord,
    pub algorithm: Algorithm,
    pub plan_value: f64,
    /// `plan_value / certificate.value`, or 1 when the bound is zero.
    pub ratio: f64,
}

pub fn certify(inst: &Instance, req: &CertifyRequest) -> Result<(Certificate, Solved)> {
    let graph = &inst.graph;
    let budget = req.solve.to_budget(graph)?;
    let obj = inst.objective(req.solve.objective)?;
    let cert = match req.method {
        CertifyMethod::Bruteforce => brute_force_opt(graph, &obj, &budget)?,
        CertifyMethod::Lp => {
            if !obj.is_modular() {
                return Err(Error::InvalidConfig("the LP bound applies to the nlc objective only".into()));
            }
            lp_relax_modular(graph, &obj, &budget)?
        }
        CertifyMethod::FrankWolfe => {
            if req.solve.objective == ObjectiveKind::Wst && !req.allow_wst_relaxation {
                return Err(Error::InvalidConfig(
                    "relaxing the spanning-tree objective must be requested explicitly".into(),
                ));
            }
            let ld = obj
                .log_det()
                .ok_or_else(|| Error::InvalidConfig("frank-wolfe needs the fim or wst objective".into()))?;
            fw_relax_logdet(graph, ld, &budget, req.fw)?
        }
    };
    let solved = solve(inst, &req.solve)?;
    Ok((cert, solved))
}

pub fn certify_output(graph: &ExchangeGraph, cert: &Certificate, solved: &Solved) -> CertifyOutput {
    let plan_value = solved.plan.objective;
    CertifyOutput {
        schema_version: SCHEMA_VERSION,
        certificate: cert.to_record(graph),
        algorithm: solved.algorithm,
        plan_value,
        ratio: if cert.value > 0.0 { plan_value / cert.value } else { 1.0 },
    }
}

/// Parses `12`, `30MB`, `512KiB` and similar into bytes (SI and binary units).
pub fn parse_bytes(s: &str) -> Result<u64> {
    let t = s.trim();
    let split = t.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let scale: u64 = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "kb" => 1_000,
        "mb" => 1_000_000,
        "gb" => 1_000_000_000,
        "kib" => 1 << 10,
        "mib" => 1 << 20,
        "gib" => 1 << 30,
        _ => return Err(Error::InvalidConfig(format!("bad size '{s}'"))),
    };
    let value: f64 = num.parse().map_err(|_| Error::InvalidConfig(format!("bad size '{s}'")))?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidConfig(format!("bad size '{s}'")));
    }
    Ok((value * scale as f64).round() as u64)
}

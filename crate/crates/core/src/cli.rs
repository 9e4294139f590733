//! The `lcplan` command-line tool.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::api::{
    certify, certify_output, parse_bytes, solve, Algorithm, CertifyMethod, CertifyOutput, CertifyRequest, CommModel,
    ContextFiles, Instance, SolveOutput, SolveRequest,
};
use crate::certify::{brute_force_opt, fw_relax_logdet, lp_relax_modular, FwConfig};
use crate::error::{Error, Result};
use crate::graph::{parse_json_document, Budget, GraphFile};
use crate::objectives::{Objective, ObjectiveKind};
use crate::place_recognition::{build_exchange_graph, fit_logistic, read_labeled_pairs, DescriptorFile, FitConfig, LogisticModel};
use crate::sim::{attribute_plan, fractions, gen_world, random_baseline, write_baseline_csv, WorldConfig, WorldFile};

pub const SEED_ENV: &str = "LCPLAN_SEED";

pub const SWEEP_COLUMNS: [&str; 13] = [
    "algorithm",
    "b",
    "k",
    "seed",
    "objective_value",
    "normalized_value",
    "upt",
    "opt",
    "alpha",
    "runtime_ms",
    "comm_fractions",
    "verification_fractions",
    "status",
];

#[derive(Parser, Debug)]
#[command(name = "lcplan", version, about = "Budgeted planning of inter-robot loop-closure exchange and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Select vertices to broadcast and edges to verify.
    Solve(SolveArgs),
    /// Compute an optimum or an upper bound and compare a plan against it.
    Certify(CertifyArgs),
    /// Generate a synthetic multi-robot world.
    Simulate(SimulateArgs),
    /// Run a grid of budgets and algorithms and write CSV rows.
    Sweep(SweepArgs),
    /// Random exchange baseline over several trials.
    Baseline(BaselineArgs),
    /// Fit the distance-to-probability model from labeled pairs.
    Fit(FitArgs),
    /// Build an exchange graph from descriptor files.
    BuildGraph(BuildGraphArgs),
    /// Validate an output file against its schema.
    SchemaCheck(SchemaCheckArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Graph or world JSON.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value = "nlc")]
    pub objective: ObjectiveKind,
    #[arg(long = "alg", default_value = "modular-greedy")]
    pub algorithm: Algorithm,
    #[arg(long, default_value = "tu")]
    pub comm: CommModel,
    /// Vertex count (tu) or size such as 30MB (tn).
    #[arg(long)]
    pub b: Option<String>,
    /// Per-robot vertex counts for iu, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub bi: Option<Vec<usize>>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Per-robot verification budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ki: Option<Vec<usize>>,
    /// Per-pair verification budgets in pair order, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub kij: Option<Vec<usize>>,
    #[arg(long)]
    pub pose_graph: Option<PathBuf>,
    #[arg(long)]
    pub info: Option<PathBuf>,
    #[arg(long)]
    pub lazy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "bruteforce")]
    pub method: CertifyMethod,
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub allow_wst_relaxation: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 5)]
    pub robots: usize,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub weight_bytes: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// World JSON (ground truth enables discovered counts) or graph JSON.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV with `distance,label` header.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BuildGraphArgs {
    #[arg(long)]
    pub descriptors: PathBuf,
    /// JSON `{"beta0": .., "beta1": ..}`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemaKind {
    Graph,
    World,
    Plan,
    Certificate,
    Sweep,
}

#[derive(Args, Debug)]
pub struct SchemaCheckArgs {
    #[arg(long)]
    pub kind: SchemaKind,
    pub file: PathBuf,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidBudget(_)
        | Error::BlockMismatch { .. }
        | Error::InvalidConfig(_)
        | Error::TooFewRobots(_)
        | Error::MissingContext(_)
        | Error::InvalidThreshold(_)
        | Error::InfeasiblePlan(_) => 3,
        Error::InstanceTooLarge { .. } => 4,
        Error::DegenerateWorld => 5,
        Error::SolverStall(_) | Error::InvalidLp(_) | Error::DegenerateData(_) => 1,
        _ => 2,
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV} must be an unsigned integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

impl ProblemArgs {
    fn instance(&self) -> Result<Instance> {
        let inst = Instance::from_json(&read(&self.graph)?)?;
        let ctx = ContextFiles {
            info_context: self.info.as_deref().map(read).transpose()?.map(|t| parse_json_document(&t)).transpose()?,
            pose_graph: self
                .pose_graph
                .as_deref()
                .map(read)
                .transpose()?
                .map(|t| parse_json_document(&t))
                .transpose()?,
        };
        inst.with_contexts(&ctx)
    }

    fn request(&self) -> Result<SolveRequest> {
        let b = match (&self.b, self.comm) {
            (None, _) => None,
            (Some(s), CommModel::Tn) => Some(parse_bytes(s)?),
            (Some(s), _) => Some(
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("--b must be a vertex count for {:?}, got '{s}'", self.comm)))?,
            ),
        };
        Ok(SolveRequest {
            objective: self.objective,
            algorithm: self.algorithm,
            comm: self.comm,
            b,
            bi: self.bi.clone(),
            k: self.k,
            ki: self.ki.clone(),
            kij: self.kij.clone(),
            lazy: self.lazy,
            seed: seed_override()?.unwrap_or(self.seed),
        })
    }
}

/// Runs the tool and returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let _ = writeln!(stderr, "error: {e}");
            if matches!(e, Error::InvalidConfig(ref m) if m.starts_with("missing")) {
                let _ = writeln!(stderr, "usage: lcplan solve --graph FILE --b N --k N [--comm tu|tn|iu] [--alg ...]");
            }
            code
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Solve(a) => {
            let inst = a.problem.instance()?;
            let solved = solve(&inst, &a.problem.request()?)?;
            emit(&a.problem.out, &to_json(&solved.to_output(&inst.graph))?, stdout)
        }
        Command::Certify(a) => {
            let inst = a.problem.instance()?;
            let req = CertifyRequest {
                method: a.method,
                solve: a.problem.request()?,
                fw: FwConfig {
                    iterations: a.iterations,
                    tol: a.tol,
                },
                allow_wst_relaxation: a.allow_wst_relaxation,
            };
            let (cert, solved) = certify(&inst, &req)?;
            emit(&a.problem.out, &to_json(&certify_output(&inst.graph, &cert, &solved))?, stdout)
        }
        Command::Simulate(a) => {
            let mut cfg = WorldConfig::new(a.robots, a.steps, a.rate, seed_override()?.unwrap_or(a.seed));
            cfg.weight_bytes = a.weight_bytes;
            let world = gen_world(&cfg)?;
            let summary = serde_json::json!({
                "candidates": world.graph.num_edges(),
                "vertices": world.graph.num_vertices(),
                "expected_loops": world.expected_loops(),
                "true_loops": world.true_loops(),
                "max_degree": world.graph.max_degree(),
            });
            let text = world.to_json()? + "\n";
            match &a.out {
                Some(_) => {
                    emit(&a.out, &text, stdout)?;
                    writeln!(stdout, "{summary}")?;
                }
                None => {
                    stdout.write_all(text.as_bytes())?;
                    writeln!(stderr, "{summary}")?;
                }
            }
            Ok(())
        }
        Command::Sweep(a) => {
            let text = read(&a.spec)?;
            let spec: SweepSpec = parse_json_document(&text)?;
            let base = a.spec.parent().map(Path::to_path_buf).unwrap_or_default();
            let mut buf = Vec::new();
            run_sweep(&spec, &base, &mut buf)?;
            emit(&a.out, &String::from_utf8_lossy(&buf), stdout)
        }
        Command::Baseline(a) => {
            let inst = Instance::from_json(&read(&a.graph)?)?;
            let obj = inst.objective(ObjectiveKind::Nlc)?;
            let seed = seed_override()?.unwrap_or(a.seed);
            let rep = random_baseline(&inst.graph, &obj, a.b, a.k, a.trials, seed, inst.ground_truth.as_deref())?;
            let mut buf = Vec::new();
            write_baseline_csv(&rep, &mut buf)?;
            emit(&a.out, &String::from_utf8_lossy(&buf), stdout)
        }
        Command::Fit(a) => {
            let file = fs::File::open(&a.pairs).map_err(|e| Error::Io(format!("{}: {e}", a.pairs.display())))?;
            let pairs = read_labeled_pairs(file)?;
            let cfg = FitConfig {
                lambda: a.lambda,
                ..FitConfig::default()
            };
            let rep = fit_logistic(&pairs, cfg)?;
            let out = serde_json::json!({
                "beta0": rep.model.beta0,
                "beta1": rep.model.beta1,
                "iterations": rep.iterations,
                "converged": rep.converged,
            });
            emit(&a.out, &to_json(&out)?, stdout)
        }
        Command::BuildGraph(a) => {
            let file: DescriptorFile = parse_json_document(&read(&a.descriptors)?)?;
            let model: ModelFile = parse_json_document(&read(&a.model)?)?;
            let g = build_exchange_graph(
                &file.descriptors()?,
                &LogisticModel::new(model.beta0, model.beta1),
                a.threshold,
            )?;
            emit(&a.out, &(g.to_json() + "\n"), stdout)
        }
        Command::SchemaCheck(a) => {
            let text = read(&a.file)?;
            schema_check(a.kind, &text)?;
            writeln!(stdout, "ok")?;
            Ok(())
        }
    }
}

#[derive(Deserialize)]
struct ModelFile {
    beta0: f64,
    beta1: f64,
    #[allow(dead_code)]
    #[serde(default)]
    iterations: Option<usize>,
    #[allow(dead_code)]
    #[serde(default)]
    converged: Option<bool>,
}

pub fn schema_check(kind: SchemaKind, text: &str) -> Result<()> {
    match kind {
        SchemaKind::Graph => {
            let f: GraphFile = parse_json_document(text)?;
            crate::graph::ExchangeGraph::from_file(f)?;
        }
        SchemaKind::World => {
            let f: WorldFile = parse_json_document(text)?;
            crate::sim::SyntheticWorld::from_file(&f)?;
        }
        SchemaKind::Plan => {
            let out: SolveOutput = parse_json_document(text)?;
            check_version(out.schema_version)?;
        }
        SchemaKind::Certificate => {
            let out: CertifyOutput = parse_json_document(text)?;
            check_version(out.schema_version)?;
        }
        SchemaKind::Sweep => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
            if header.iter().ne(SWEEP_COLUMNS.iter().copied()) {
                return Err(Error::Parse(format!("unexpected sweep header {header:?}")));
            }
            for row in rdr.records() {
                let row = row.map_err(|e| Error::Parse(e.to_string()))?;
                let status = &row[12];
                if status == "ok" {
                    let nv: f64 = row[5].parse().map_err(|_| Error::Parse(format!("bad normalized value '{}'", &row[5])))?;
                    if !(0.0..=1.0 + 1e-9).contains(&nv) {
                        return Err(Error::Parse(format!("normalized value {nv} outside [0, 1]")));
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_version(v: u32) -> Result<()> {
    if v == crate::api::SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Parse(format!("unsupported schema version {v}")))
    }
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetValue {
    Count(u64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub robots: usize,
    pub steps: usize,
    #[serde(default = "one")]
    pub candidate_rate: f64,
}

fn one() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

fn zero_seed() -> Vec<u64> {
    vec![0]
}

/// Grid description; a graph file is fixed across seeds, a world spec is
/// regenerated for every seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[serde(default)]
    pub world: Option<WorldSpec>,
    #[serde(default)]
    pub pose_graph: Option<PathBuf>,
    #[serde(default)]
    pub info: Option<PathBuf>,
    #[serde(default = "nlc")]
    pub objective: ObjectiveKind,
    #[serde(default)]
    pub comm: CommModel,
    pub budgets: Vec<BudgetValue>,
    pub k: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "zero_seed")]
    pub seeds: Vec<u64>,
    #[serde(default = "ten")]
    pub trials: usize,
    #[serde(default)]
    pub certify: Option<CertifyMethod>,
    #[serde(default)]
    pub lazy: bool,
}

fn nlc() -> ObjectiveKind {
    ObjectiveKind::Nlc
}

/// One CSV row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub b: String,
    pub k: usize,
    pub seed: u64,
    pub objective_value: Option<f64>,
    pub normalized_value: Option<f64>,
    pub upt: Option<f64>,
    pub opt: Option<f64>,
    pub alpha: Option<f64>,
    pub runtime_ms: f64,
    pub comm_fractions: String,
    pub verification_fractions: String,
    pub status: String,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(";")
}

fn load_sweep_instance(spec: &SweepSpec, base: &Path, seed: u64) -> Result<Instance> {
    let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
    let inst = match (&spec.graph, &spec.world) {
        (Some(g), None) => Instance::from_json(&read(&resolve(g))?)?,
        (None, Some(w)) => Instance::from(gen_world(&WorldConfig::new(w.robots, w.steps, w.candidate_rate, seed))?),
        _ => return Err(Error::InvalidConfig("a sweep needs exactly one of graph or world".into())),
    };
    let ctx = ContextFiles {
        info_context: spec.info.as_ref().map(|p| read(&resolve(p))).transpose()?.map(|t| parse_json_document(&t)).transpose()?,
        pose_graph: spec
            .pose_graph
            .as_ref()
            .map(|p| read(&resolve(p)))
            .transpose()?
            .map(|t| parse_json_document(&t))
            .transpose()?,
    };
    inst.with_contexts(&ctx)
}

fn budget_b(spec: &SweepSpec, v: &BudgetValue) -> Result<(u64, String)> {
    let label = match v {
        BudgetValue::Count(n) => n.to_string(),
        BudgetValue::Text(s) => s.clone(),
    };
    let b = match (v, spec.comm) {
        (BudgetValue::Count(n), _) => *n,
        (BudgetValue::Text(s), CommModel::Tn) => parse_bytes(s)?,
        (BudgetValue::Text(s), _) => s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("budget '{s}' is not a count")))?,
    };
    Ok((b, label))
}

fn sweep_request(spec: &SweepSpec, inst: &Instance, alg: Algorithm, b: u64, k: usize, seed: u64) -> SolveRequest {
    SolveRequest {
        objective: spec.objective,
        algorithm: alg,
        comm: spec.comm,
        b: (spec.comm != CommModel::Iu).then_some(b),
        bi: (spec.comm == CommModel::Iu).then(|| vec![b as usize; inst.graph.robots()]),
        k: Some(k),
        ki: None,
        kij: None,
        lazy: spec.lazy,
        seed,
    }
}

/// Upper bound and optimum for one grid point, as requested by the spec.
fn sweep_bounds(spec: &SweepSpec, inst: &Instance, budget: &Budget) -> Result<(Option<f64>, Option<f64>)> {
    let obj = inst.objective(spec.objective)?;
    match spec.certify {
        None => Ok((None, None)),
        Some(CertifyMethod::Bruteforce) => {
            let c = brute_force_opt(&inst.graph, &obj, budget)?;
            Ok((Some(c.value), Some(c.value)))
        }
        Some(CertifyMethod::Lp) => Ok((Some(lp_relax_modular(&inst.graph, &obj, budget)?.value), None)),
        Some(CertifyMethod::FrankWolfe) => {
            let ld = obj
                .log_det()
                .ok_or_else(|| Error::InvalidConfig("frank-wolfe needs a log-det objective".into()))?;
            Ok((Some(fw_relax_logdet(&inst.graph, ld, budget, FwConfig::default())?.value), None))
        }
    }
}

fn sweep_row(spec: &SweepSpec, inst: &Instance, alg: Algorithm, b: u64, k: usize, seed: u64, bounds: (Option<f64>, Option<f64>)) -> Result<ResultRow> {
    let start = Instant::now();
    let req = sweep_request(spec, inst, alg, b, k, seed);
    let graph = &inst.graph;
    let (value, normalized, alpha, plans) = if alg == Algorithm::Random {
        let budget = req.to_budget(graph)?;
        let obj = inst.objective(spec.objective)?;
        let bcount = match budget.comm {
            crate::graph::CommBudget::Tu { b } => b,
            _ => return Err(Error::InvalidConfig("the random baseline uses a vertex-count budget".into())),
        };
        let rep = random_baseline(graph, &obj, bcount, k, spec.trials, seed, None)?;
        let fmax = obj.value(&graph.all_edge_ids())?;
        let norm = if fmax > 0.0 { rep.mean_objective / fmax } else { 1.0 };
        (rep.mean_objective, norm, None, rep.plans)
    } else {
        let solved = solve(inst, &req)?;
        let alpha = solved.guarantee.as_ref().map(|g| g.alpha());
        (solved.plan.objective, solved.normalized(), alpha, vec![solved.plan])
    };
    let robots = graph.robots();
    let mut bytes = vec![0.0; robots];
    let mut verifs = vec![0.0; robots];
    for p in &plans {
        let out = attribute_plan(graph, p)?;
        for r in 0..robots {
            bytes[r] += out.comm_bytes_per_robot[r] as f64;
            verifs[r] += out.verifications_per_robot[r] as f64;
        }
    }
    let (upt, opt) = bounds;
    Ok(ResultRow {
        algorithm: alg.as_str().into(),
        b: String::new(),
        k,
        seed,
        objective_value: Some(value),
        normalized_value: Some(normalized),
        upt,
        opt,
        alpha,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        comm_fractions: join(&fractions(&bytes)),
        verification_fractions: join(&fractions(&verifs)),
        status: "ok".into(),
    })
}

/// Writes one CSV row per (seed, algorithm, b, k) in spec order.
pub fn run_sweep(spec: &SweepSpec, base: &Path, out: &mut dyn Write) -> Result<()> {
    if spec.algorithms.is_empty() || spec.budgets.is_empty() || spec.k.is_empty() || spec.seeds.is_empty() {
        return Err(Error::InvalidConfig("sweep axes (algorithms, budgets, k, seeds) must be non-empty".into()));
    }
    let seeds = match seed_override()? {
        Some(s) => vec![s],
        None => spec.seeds.clone(),
    };
    let budgets = spec.budgets.iter().map(|v| budget_b(spec, v)).collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for &seed in &seeds {
        let inst = load_sweep_instance(spec, base, seed);
        let mut bound_cache: Vec<Option<std::result::Result<(Option<f64>, Option<f64>), String>>> =
            vec![None; budgets.len() * spec.k.len()];
        for &alg in &spec.algorithms {
            for (bi, (b, label)) in budgets.iter().enumerate() {
                for (ki, &k) in spec.k.iter().enumerate() {
                    let row = match &inst {
                        Err(e) => Err(e.clone()),
                        Ok(inst) => {
                            let slot = &mut bound_cache[bi * spec.k.len() + ki];
                            if slot.is_none() {
                                let req = sweep_request(spec, inst, alg, *b, k, seed);
                                let r = req
                                    .to_budget(&inst.graph)
                                    .and_then(|budget| sweep_bounds(spec, inst, &budget))
                                    .map_err(|e| e.to_string());
                                *slot = Some(r);
                            }
                            match slot.clone().unwrap() {
                                Ok(bounds) => sweep_row(spec, inst, alg, *b, k, seed, bounds),
                                Err(msg) => Err(Error::InvalidConfig(format!("bound: {msg}"))),
                            }
                        }
                    };
                    let row = match row {
                        Ok(mut r) => {
                            r.b = label.clone();
                            r
                        }
                        Err(e) => ResultRow {
                            algorithm: alg.as_str().into(),
                            b: label.clone(),
                            k,
                            seed,
                            status: format!("error: {e}"),
                            ..Default::default()
                        },
                    };
                    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    w.write_record([
                        row.algorithm,
                        row.b,
                        row.k.to_string(),
                        row.seed.to_string(),
                        opt(row.objective_value),
                        opt(row.normalized_value),
                        opt(row.upt),
                        opt(row.opt),
                        opt(row.alpha),
                        format!("{:.3}", row.runtime_ms),
                        row.comm_fractions,
                        row.verification_fractions,
                        row.status,
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

use thiserror::Error;

/// Errors produced by graph construction, objective evaluation, solvers and I/O.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(u64),
    #[error("duplicate edge id {0}")]
    DuplicateEdgeId(u64),
    #[error("edge {edge} duplicates an existing edge between vertices {u} and {v}")]
    DuplicateEdge { edge: u64, u: u64, v: u64 },
    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: u64, vertex: u64 },
    #[error("edge {edge} joins two vertices of robot {robot}")]
    IntraBlockEdge { edge: u64, robot: usize },
    #[error("unknown vertex id {0}")]
    UnknownVertex(u64),
    #[error("unknown edge id {0}")]
    UnknownEdge(u64),
    #[error("edge {edge} has probability {p} outside [0, 1]")]
    ProbabilityOutOfRange { edge: u64, p: f64 },
    #[error("vertex {vertex} belongs to robot {robot} but the graph has {robots} robots")]
    RobotOutOfRange { vertex: u64, robot: usize, robots: usize },
    #[error("vertex {0} has zero weight")]
    NonPositiveWeight(u64),
    #[error("edge {edge} has non-positive or non-finite precision")]
    InvalidPrecision { edge: u64 },
    #[error("budget has {given} blocks but {expected} are required")]
    BlockMismatch { expected: usize, given: usize },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("descriptor dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("probability threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 robots, got {0}")]
    TooFewRobots(usize),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("matrix is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),
    #[error("pose graph is disconnected")]
    Disconnected,
    #[error("edge {0} has no information matrix")]
    MissingInfo(u64),
    #[error("edge {0} has no precisions or pose mapping")]
    MissingPoseData(u64),
    #[error("malformed matrix data: {0}")]
    MalformedMatrix(String),
    #[error("instance too large for brute force: {vertices} vertices, {edges} edges (limit 16 / 20)")]
    InstanceTooLarge { vertices: usize, edges: usize },
    #[error("linear program stalled after {0} iterations")]
    SolverStall(usize),
    #[error("invalid linear program: {0}")]
    InvalidLp(String),
    #[error("plan is infeasible: {0}")]
    InfeasiblePlan(String),
    #[error("world generation produced no candidate loop closures")]
    DegenerateWorld,
    #[error("objective {0} requires a context that was not supplied")]
    MissingContext(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

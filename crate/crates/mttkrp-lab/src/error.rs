use std::fmt;

/// Crate-wide error type. Variants mirror the failure modes of the
/// simulators and planners so the CLI can map them to exit codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Problem construction failed (dimension mismatch, bad mode, ...).
    InvalidProblem(String),
    /// Fast memory too small for the requested algorithm.
    InfeasibleMachine(String),
    /// Block size violates the capacity constraint.
    InfeasibleBlock(String),
    /// A load was issued with fast memory already full.
    CapacityViolation(String),
    /// Internal inconsistency in an instruction trace (e.g. evicting a
    /// non-resident address). Signals a bug in an algorithm driver.
    SimulatorBug(String),
    /// Data distribution could not be built or collective inputs mismatch.
    Distribution(String),
    /// No feasible processor grid / block size for the given parameters.
    InfeasiblePlan(String),
    /// Shape requirement not met (e.g. cubical-only model).
    Shape(String),
    /// Malformed file, spec string, or CLI configuration.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidProblem(m) => write!(f, "invalid problem: {m}"),
            Error::InfeasibleMachine(m) => write!(f, "infeasible machine: {m}"),
            Error::InfeasibleBlock(m) => write!(f, "infeasible block size: {m}"),
            Error::CapacityViolation(m) => write!(f, "capacity violation: {m}"),
            Error::SimulatorBug(m) => write!(f, "simulator bug: {m}"),
            Error::Distribution(m) => write!(f, "distribution error: {m}"),
            Error::InfeasiblePlan(m) => write!(f, "infeasible plan: {m}"),
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

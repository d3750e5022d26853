use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A single failed dataset or design invariant.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Violation {
    NonBinaryTreatment { unit: usize },
    DegenerateTreatment { n_treated: usize, n_units: usize },
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    BlockUnitOutOfRange { block: usize, unit: usize },
    OverlappingBlocks { unit: usize },
    EmptyBlock(usize),
    BlockTreatedCountMismatch(usize),
    PairSizeViolation(usize),
    BlocksRequired,
    CapsRequired,
    CapsLengthMismatch { expected: usize, found: usize },
    NonPositiveCap(usize),
    UnknownCovariate(String),
    TreatedCountOutOfRange(usize),
    NonFiniteValue { what: &'static str, index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonBinaryTreatment { unit } => {
                write!(f, "treatment of unit {unit} is not 0 or 1")
            }
            Violation::DegenerateTreatment { n_treated, n_units } => write!(
                f,
                "need 0 < N_T < N, got N_T = {n_treated} with N = {n_units}"
            ),
            Violation::DimensionMismatch { what, expected, found } => {
                write!(f, "{what}: expected length {expected}, found {found}")
            }
            Violation::BlockUnitOutOfRange { block, unit } => {
                write!(f, "block {block} references unit {unit} which does not exist")
            }
            Violation::OverlappingBlocks { unit } => {
                write!(f, "unit {unit} belongs to more than one block")
            }
            Violation::EmptyBlock(j) => write!(f, "block {j} is empty"),
            Violation::BlockTreatedCountMismatch(j) => {
                write!(f, "block {j}: observed treated count differs from declared N_jT")
            }
            Violation::PairSizeViolation(j) => {
                write!(f, "block {j} is not a pair with exactly one treated unit")
            }
            Violation::BlocksRequired => write!(f, "design requires block structure"),
            Violation::CapsRequired => write!(f, "constrained design requires caps"),
            Violation::CapsLengthMismatch { expected, found } => {
                write!(f, "caps vector has length {found}, expected {expected}")
            }
            Violation::NonPositiveCap(k) => write!(f, "cap for covariate {k} is not positive"),
            Violation::UnknownCovariate(name) => write!(f, "unknown covariate '{name}'"),
            Violation::TreatedCountOutOfRange(n) => {
                write!(f, "design treated count {n} is outside 1..N-1")
            }
            Violation::NonFiniteValue { what, index } => {
                write!(f, "{what} has a non-finite value at index {index}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("covariate column {0} has zero variance")]
    ConstantColumn(usize),
    #[error("need at least two units, got {0}")]
    TooFewUnits(usize),
    #[error("invalid dataset or design: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("one treatment arm is empty")]
    DegenerateArm,
    #[error("covariate covariance matrix is singular")]
    SingularCovariance,
    #[error("no draw accepted after {attempts} attempts (draw {draw_index})")]
    SupportExhausted { draw_index: usize, attempts: u64 },
    #[error("candidate assignment space of size {size} exceeds limit {limit}")]
    LimitExceeded { size: u128, limit: u128 },
    #[error("regression design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("dataset carries no outcome")]
    MissingOutcome,
    #[error("dataset is not pair-structured")]
    NotPaired,
    #[error("treated and control sets differ in size ({treated} vs {control})")]
    UnequalArms { treated: usize, control: usize },
    #[error("only {pairs} pairs survive the caps, need at least {min_pairs}")]
    Infeasible { pairs: usize, min_pairs: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join(v: &[Violation]) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push_str("; ");
        }
        let _ = write!(s, "{x}");
    }
    s
}

pub type Result<T> = core::result::Result<T, Error>;

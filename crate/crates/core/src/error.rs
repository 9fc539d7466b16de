use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("mass sum ≠ 1 in measure {measure} (sum = {sum})")]
    MassSum { measure: usize, sum: f64 },

    #[error("weight sum ≠ 1 (sum = {sum})")]
    WeightSum { sum: f64 },

    #[error("nonpositive coordinate {value} in measure {measure}, point {point}; shift the instance to the positive orthant first")]
    NonPositiveCoordinate {
        measure: usize,
        point: usize,
        value: f64,
    },

    #[error("combination {0:?} is already in the working set")]
    DuplicateColumn(Vec<usize>),

    #[error("master problem is infeasible for the working set ({columns} columns)")]
    InfeasibleMaster { columns: usize },

    #[error("every combination is excluded from pricing")]
    AllExcluded,

    #[error("dual vector has length {got}, expected {expected}")]
    DualLength { got: usize, expected: usize },

    #[error("no fractional selection variable to branch on")]
    NoFractional,

    #[error("LP failure at branch-and-bound node (depth {depth}, fixed to 0: {fixed_zero:?}, fixed to 1: {fixed_one:?}): {source}")]
    NodeLp {
        depth: usize,
        fixed_zero: Vec<(usize, usize)>,
        fixed_one: Vec<(usize, usize)>,
        #[source]
        source: LpError,
    },

    #[error("column generation iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("pricing returned combination {combination:?} with reduced cost {reduced_cost} although it is already in the working set")]
    InconsistentPricing {
        combination: Vec<usize>,
        reduced_cost: f64,
    },

    #[error("witness requires {0}")]
    WitnessTooSmall(String),

    #[error("point is infeasible for the model: {0}")]
    InfeasiblePoint(String),

    #[error("invalid generator spec: {0}")]
    Generator(String),

    #[error(transparent)]
    Lp(#[from] LpError),
}

pub type Result<T> = std::result::Result<T, Error>;

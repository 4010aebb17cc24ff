use thiserror::Error;

/// Broad failure classes. The CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input geometry, file format or parameters.
    Domain,
    /// A numerical precondition or convergence failure.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the chart domain for kappa = {kappa}")]
    OutsideChart { x: f64, y: f64, kappa: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mask is not simply connected: {0}")]
    Topology(String),

    #[error("graph is not spacelike at {count} cell(s), first at ({i}, {j}) with 1-|G|^2 = {margin:e}")]
    NotSpacelike {
        count: usize,
        i: usize,
        j: usize,
        margin: f64,
    },

    #[error("light-cone degeneracy: omega~ = {omega:e} at cell ({i}, {j})")]
    LightCone { i: usize, j: usize, omega: f64 },

    #[error("mean curvature is not constant: range [{min}, {max}], deviation {deviation:e} exceeds {tolerance:e}")]
    NotCmc {
        min: f64,
        max: f64,
        deviation: f64,
        tolerance: f64,
    },

    #[error("surface is not minimal: max |H| = {max_abs:e} exceeds {tolerance:e}")]
    NotMinimal { max_abs: f64, tolerance: f64 },

    #[error("solver did not converge after {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unknown example '{0}'")]
    UnknownExample(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NotSpacelike { .. }
            | Error::LightCone { .. }
            | Error::NotCmc { .. }
            | Error::NotMinimal { .. }
            | Error::NoConvergence { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Domain,
        }
    }

    /// Short stable identifier used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutsideChart { .. } => "outside-chart",
            Error::InvalidDomain(_) => "invalid-domain",
            Error::Topology(_) => "topology",
            Error::NotSpacelike { .. } => "not-spacelike",
            Error::LightCone { .. } => "light-cone",
            Error::NotCmc { .. } => "not-cmc",
            Error::NotMinimal { .. } => "not-minimal",
            Error::NoConvergence { .. } => "no-convergence",
            Error::Infeasible(_) => "infeasible",
            Error::Precondition(_) => "precondition",
            Error::UnknownExample(_) => "unknown-example",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

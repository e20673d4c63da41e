use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// One failed barrier condition together with how far it missed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionFailure {
    pub condition: Condition,
    /// Positive amount by which the condition is violated.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `L(P) − P ⪯ 0`
    DriftInequality,
    /// `β > η`
    LevelSeparation,
    /// `P ⪰ 0`
    PositiveSemidefinite,
}

impl fmt::Display for ConditionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.condition {
            Condition::DriftInequality => "drift inequality L(P) - P <= 0",
            Condition::LevelSeparation => "level separation beta > eta",
            Condition::PositiveSemidefinite => "P positive semidefinite",
        };
        write!(f, "{name} violated by {:.3e}", self.margin)
    }
}

/// Pipeline stage an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GainSearch,
    Lyapunov,
    Validation,
    Bound,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::GainSearch => "gain search",
            Stage::Lyapunov => "lyapunov solve",
            Stage::Validation => "certificate validation",
            Stage::Bound => "probability bound",
        })
    }
}

fn join_failures(failures: &[ConditionFailure]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, failure) in failures.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        let _ = write!(out, "{failure}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {block}: expected {expected_rows}x{expected_cols}, found {rows}x{cols}")]
    Dimension {
        block: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("{what} is not symmetric (max deviation {deviation:.3e})")]
    NotSymmetric { what: &'static str, deviation: f64 },
    #[error("{what} is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { what: &'static str, min_eig: f64 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid safety specification: {0}")]
    InvalidSpec(String),
    #[error("vertex enumeration over {dim} coordinates exceeds the limit of {limit}")]
    TooManyVertices { dim: usize, limit: usize },
    #[error("unsafe set is empty, beta is undefined")]
    EmptyUnsafeSet,
    #[error("beta = 0 makes the certificate vacuous")]
    VacuousCertificate,
    #[error("drift operator is not a contraction (spectral radius {radius:.6}); no quadratic certificate exists")]
    Infeasible { radius: f64 },
    #[error("certificate conditions failed: {}", join_failures(.0))]
    ConditionsFailed(Vec<ConditionFailure>),
    #[error("linear system is singular")]
    Singular,
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: alloc::boxed::Box::new(self),
        }
    }

    /// Strips stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

use thiserror::Error;

/// Every failure carries a `Name:detail` rendering so that diagnostics name
/// the offending vertex, edge or quantity.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("EmptyWell")]
    EmptyWell,
    #[error("EdgeFromWell:{0}")]
    EdgeFromWell(String),
    #[error("IsolatedWellVertex:{0}")]
    IsolatedWellVertex(String),
    #[error("NonSymmetricProperSubgraph:{0}")]
    NonSymmetricProperSubgraph(String),
    #[error("BadInvolution:{0}")]
    BadInvolution(String),
    #[error("DisconnectedProperSubgraph:{0}")]
    DisconnectedProperSubgraph(String),
    #[error("NonpositiveConductance:{0}")]
    NonpositiveConductance(String),
    #[error("Eq1Violation:{0}")]
    Eq1Violation(String),
    #[error("UnknownVertex:{0}")]
    UnknownVertex(String),
    #[error("UnknownEdge:{0}")]
    UnknownEdge(String),
    #[error("DuplicateId:{0}")]
    DuplicateId(String),
    #[error("ConnectionNotUnitary:{0}")]
    ConnectionNotUnitary(String),
    #[error("ConnectionIncomplete:{0}")]
    ConnectionIncomplete(String),
    #[error("NotReal:{0}")]
    NotReal(String),
    #[error("PotentialNotHermitian:{0}")]
    PotentialNotHermitian(String),
    #[error("BadSplitting:{0}")]
    BadSplitting(String),
    #[error("ShapeMismatch:{0}")]
    ShapeMismatch(String),
    #[error("InfiniteTailWithPotential")]
    InfiniteTailWithPotential,
    #[error("ColourMismatch:{0}")]
    ColourMismatch(String),
    #[error("SingularOperator:cond={0:e}")]
    SingularOperator(f64),
    #[error("SamplerOverrun:{0}")]
    SamplerOverrun(u64),
    #[error("TailBoundExceeded:bound={bound:e},budget={budget:e}")]
    TailBoundExceeded { bound: f64, budget: f64 },
    #[error("NonPSDPotential:{0}")]
    NonPsdPotential(String),
    #[error("InvalidArgument:{0}")]
    InvalidArgument(String),
    #[error("Io:{0}")]
    Io(String),
    #[error("Parse:{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

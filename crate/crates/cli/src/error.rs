use projconvex::convex::ConvexError;
use projconvex::coxeter::CoxeterError;
use projconvex::devmap::DevmapError;
use projconvex::hilbert::HilbertError;
use projconvex::kv::KvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("spec parse error: {0}")]
    SpecParse(String),
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("bad chart: {0}")]
    BadChart(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
    #[error(transparent)]
    Devmap(#[from] DevmapError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Kv(#[from] KvError),
}

impl CliError {
    /// 2 for bad input, 3 for guards and internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Coxeter(CoxeterError::ExplosionGuard(_))
            | CliError::Devmap(DevmapError::ExplosionGuard(_))
            | CliError::Devmap(DevmapError::DegeneratePlacement(_))
            | CliError::Io(_) => 3,
            _ => 2,
        }
    }
}

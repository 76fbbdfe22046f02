use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("singular matrix: pivot {pivot:e} below threshold in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("simplex stopped after {iterations} iterations without converging")]
    NumericalBreakdown { iterations: usize },

    #[error("grid is disconnected ({components} components)")]
    DisconnectedGrid { components: usize },

    #[error("all demand is zero")]
    NoDemand,

    #[error("network unstable: no feasible dispatch even with all demand shed")]
    Unstable,

    #[error("hour axes do not match: {0}")]
    MisalignedHours(String),

    #[error("end-use shares for region {region} sum to {sum}, expected 1")]
    SharesNotNormalized { region: String, sum: f64 },

    #[error("supply-use tables unbalanced: worst residual {residual} at region {region}, product {product}")]
    UnbalancedTables {
        region: String,
        product: String,
        residual: f64,
    },

    #[error("baseline solve does not reproduce output at region {region}, industry {industry}: got {got}, expected {expected}")]
    BaselineMismatch {
        region: String,
        industry: String,
        got: f64,
        expected: f64,
    },

    #[error("missing costs: {0}")]
    MissingCosts(String),

    #[error("all peak demands are equal; slope undefined")]
    DegeneratePeaks,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by input content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

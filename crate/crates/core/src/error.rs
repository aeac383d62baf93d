use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A state left the admissible region of the system (e.g. density below the floor).
    #[error("inadmissible state: {component} = {value} (admissible floor {floor})")]
    Domain {
        component: String,
        value: f64,
        floor: f64,
    },

    #[error("inversion of A failed after {iterations} Newton iterations (residual {residual:e})")]
    Inversion {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("history buffer does not cover [0, {t}] (covered up to {covered})")]
    HistoryGap { t: f64, covered: f64 },

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    /// Nonpositive relative entropy at distinct states: the entropy is not convex there.
    #[error("convexity violated: relative entropy {value:e} at |U - Ubar| = {distance:e}")]
    Convexity {
        value: f64,
        distance: f64,
        state: Vec<f64>,
        reference: Vec<f64>,
    },

    #[error("audit coverage: {0}")]
    Coverage(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("cell {cell}: {source}")]
    Cell {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("ledger: {0}")]
    Ledger(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(component: impl Into<String>, value: f64, floor: f64) -> Self {
        Error::Domain {
            component: component.into(),
            value,
            floor,
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_cell(self, cell: usize) -> Self {
        match self {
            e @ Error::Cell { .. } => e,
            e => Error::Cell {
                cell,
                source: Box::new(e),
            },
        }
    }
}

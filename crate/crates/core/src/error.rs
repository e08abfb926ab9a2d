use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{quantity} = {value:.6e} is outside [{min:.6e}, {max:.6e}]")]
    OutOfRange {
        quantity: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("quadrature did not converge (last two estimates {previous:.12e}, {last:.12e})")]
    Quadrature { previous: f64, last: f64 },

    #[error("Matsubara sum not converged after {terms} terms (last term {last_term:.3e}, sum {sum:.3e})")]
    Matsubara {
        terms: usize,
        last_term: f64,
        sum: f64,
    },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("inconsistent calibration data: {0}")]
    InconsistentData(String),

    #[error("contact at t = {time:.6e} s: {detail}")]
    Contact { time: f64, detail: String },

    #[error("numerical failure at t = {time:.6e} s: {detail}")]
    Numerical { time: f64, detail: String },

    #[error("steady state not reached: trailing-window drift {drift:.3}% on cantilever {cantilever}; try a longer run")]
    SteadyState { cantilever: usize, drift: f64 },

    #[error("unstable configuration (stability margin {margin:.4e} rad/s)")]
    Unstable { margin: f64 },

    #[error("length error: {0}")]
    Length(String),

    #[error("at sweep value {value:.6e}: {source}")]
    Sweep {
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures caused by the system going unstable rather than by the numerics.
    pub fn is_instability(&self) -> bool {
        matches!(self.root(), Error::Unstable { .. })
    }

    /// The underlying error with sweep annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sweep { source, .. } => source.root(),
            other => other,
        }
    }

    /// Wraps the error with the sweep value at which it occurred.
    pub fn at_sweep_value(self, value: f64) -> Self {
        Error::Sweep {
            value,
            source: Box::new(self),
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which of the two counting levels an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Level {
    /// Lower imaginary-part level.
    F3,
    /// Upper imaginary-part level.
    F1,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::F3 => f.write_str("F3"),
            Level::F1 => f.write_str("F1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown surface family `{0}`")]
    UnknownFamily(String),

    #[error("parameter `{param}` = {value} out of range for family `{family}`: {reason}")]
    ParamOutOfRange {
        family: String,
        param: String,
        value: f64,
        reason: String,
    },

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("quadrature did not reach tolerance {tol:e} (last error estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("degenerate torus: |a| = {a} is within {tol:e} of f_max = {f_max}")]
    DegenerateTorus { a: f64, f_max: f64, tol: f64 },

    #[error("ODE step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("rotation number {omega} is within tolerance of {p}/{q} but closed-orbit averages did not stabilize")]
    UndecidedRationality { omega: f64, p: i64, q: i64 },

    #[error(
        "transversality assumption violated: level {level} = {value} meets the torus-average curve \
         tangentially at a = {a} (d<q>/da = {derivative:e})"
    )]
    TangentCrossing {
        level: Level,
        value: f64,
        a: f64,
        derivative: f64,
    },

    #[error(
        "level {level} = {value} lies in the limit set of flow averages of the {leaf}; \
         the levels must avoid every leaf other than their boundary tori"
    )]
    LevelHitsSingularLeaf {
        level: Level,
        value: f64,
        leaf: String,
    },

    #[error("root not bracketed on [{lo}, {hi}]: {context}")]
    RootBracketFailure { lo: f64, hi: f64, context: String },

    #[error("observable depends on theta; the per-mode quantum solve needs q = q(s)")]
    NonSeparableObservable,

    #[error("eigensolver did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failure: {0}")]
    Serialization(String),
}

impl Error {
    /// Domain errors are violations of the mathematical assumptions or
    /// numerical failures; everything else is a usage or I/O problem.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            Error::Config(_)
                | Error::UnknownFamily(_)
                | Error::UnknownObservable(_)
                | Error::ParamOutOfRange { .. }
                | Error::InvalidInput(_)
                | Error::Io { .. }
                | Error::Serialization(_)
        )
    }
}

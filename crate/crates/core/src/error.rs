use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate tangent plane: induced metric eigenvalues {min:e}, {max:e}")]
    DegenerateTangent { min: f64, max: f64 },

    #[error("singular metric: smallest eigenvalue {min:e}, largest {max:e}")]
    SingularMetric { min: f64, max: f64 },

    #[error("lattice resonance: Laplacian eigenvalue {eigenvalue} at mode ({jx}, {jy}) is within {gap:e} of -12")]
    Resonance { jx: usize, jy: usize, eigenvalue: f64, gap: f64 },

    #[error("singular Jacobian: effective eigenvalue {0:e} at Newton iteration {1}")]
    SingularJacobian(f64, usize),

    #[error("Newton iteration diverged: residual {residual:e} after {iterations} iterations")]
    Divergence { iterations: usize, residual: f64 },

    #[error("energy {energy} is not above the potential minimum 6")]
    Domain { energy: f64 },

    #[error("grid period {lx} is not an integer multiple of the wave period {period}")]
    IncommensuratePeriod { lx: f64, period: f64 },

    #[error("unitarity defect {defect:e} at node ({i}, {j}) exceeds 1e-6")]
    UnitarityBlowup { i: usize, j: usize, defect: f64 },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Machine-readable name used on the last log line of a failed run.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid-grid",
            Error::DegenerateTangent { .. } => "degenerate-tangent",
            Error::SingularMetric { .. } => "singular-metric",
            Error::Resonance { .. } => "resonance",
            Error::SingularJacobian(..) => "singular-jacobian",
            Error::Divergence { .. } => "divergence",
            Error::Domain { .. } => "domain",
            Error::IncommensuratePeriod { .. } => "incommensurate-period",
            Error::UnitarityBlowup { .. } => "unitarity-blowup",
            Error::InvalidFrame(_) => "invalid-frame",
            Error::Parse(_) => "parse",
            Error::Validation(_) => "validation",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit status: 2 parse, 3 validation, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Validation(_) | Error::InvalidGrid(_) | Error::Io { .. } => 3,
            _ => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

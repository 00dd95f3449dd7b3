use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The CLI maps [`Error::is_config`] to exit code 2 and everything else that
/// originates in a model or solver to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{material}: wavelength {wavelength_nm} nm outside tabulated span [{min_nm}, {max_nm}] nm")]
    WavelengthRange {
        material: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("material data error: {0}")]
    MaterialData(String),

    #[error("configuration error at `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        message: String,
        line: Option<usize>,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("no guided mode: best n_eff {n_eff:.6} does not exceed cladding index {n_clad:.6}")]
    NoGuidedMode { n_eff: f64, n_clad: f64 },

    #[error("eigensolver did not converge after {iterations} solves (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("threshold error: {0}")]
    Threshold(String),

    #[error("sweep error: {0}")]
    Sweep(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
            line: None,
        }
    }

    /// Attaches a short description of what was being evaluated.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input files or parameters.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::UnknownMaterial(_) | Error::MaterialData(_) | Error::Geometry(_) => true,
            Error::Context { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

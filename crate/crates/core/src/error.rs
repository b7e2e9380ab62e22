use thiserror::Error;

/// Errors raised by the solver pipeline. Each variant names the stage that
/// produced it so that CLI reports can map failures back to a module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("materials: {0}")]
    Materials(String),
    #[error("forms: {0}")]
    Forms(String),
    #[error("pencil: {0}")]
    Pencil(String),
    #[error("waves: {0}")]
    Waves(String),
    #[error("spectra: {0}")]
    Spectra(String),
    #[error("modal: {0}")]
    Modal(String),
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Module/stage name of the error, used in CLI diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Geometry(_) => "geometry",
            Error::Materials(_) => "materials",
            Error::Forms(_) => "forms",
            Error::Pencil(_) => "pencil",
            Error::Waves(_) => "waves",
            Error::Spectra(_) => "spectra",
            Error::Modal(_) => "modal",
            Error::Config(_) => "config",
            Error::MissingArtifact(_) => "io",
            Error::Io { .. } => "io",
            Error::Json { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or input document failed validation at `key`.
    #[error("{key}: {msg}")]
    Config { key: String, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("monomial {k:?} has total degree {degree}, above the cap of {cap}")]
    DegreeCap { k: [u32; 3], degree: u32, cap: u32 },

    #[error("covariance is not a valid Gaussian covariance: {0}")]
    InvalidCovariance(String),

    #[error("non-realizable moments: m2 = {m2:e} is below m1^2 = {m1_sq:e}")]
    NonRealizable { m2: f64, m1_sq: f64 },

    #[error("spectrum is degenerate: {0}")]
    DegenerateSpectrum(String),

    #[error("{failed} of {total} realizations diverged (limit {limit_pct}%)")]
    EnsembleDiverged { failed: usize, total: usize, limit_pct: f64 },

    #[error("realization {index} diverged at t = {t} s")]
    RealizationDiverged { index: usize, t: f64 },

    #[error("density is not integrable: {0}")]
    NotIntegrable(String),

    #[error("quadrature did not converge (relative change {0:e})")]
    Quadrature(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("toml serialization: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

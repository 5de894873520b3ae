use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(cml_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("acceptance failed: {0}")]
    Acceptance(String),
}

impl HarnessError {
    /// 1 config, 2 numeric, 3 acceptance. I/O problems count as config
    /// errors (bad paths).
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 1,
            HarnessError::Numeric(_) => 2,
            HarnessError::Acceptance(_) => 3,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<cml_core::Error> for HarnessError {
    /// Parameter and geometry rejections from the core are configuration
    /// problems; everything else is a numeric failure.
    fn from(e: cml_core::Error) -> Self {
        if e.is_numeric() {
            HarnessError::Numeric(e)
        } else {
            HarnessError::Config(e.to_string())
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("unknown emotion label {value:?}{}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Label { value: String, line: Option<usize> },
    #[error("unknown facial expression {0:?}")]
    Expression(String),
    #[error("join error: {0}")]
    Join(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenId { id: u32, size: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Lib(dynpr::Error),
    Usage(String),
    Read(PathBuf, std::io::Error),
    Write(PathBuf, std::io::Error),
    Format(String),
}

impl CliError {
    /// 0 success, 1 usage/config, 2 input, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        use dynpr::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Read(..) | CliError::Write(..) | CliError::Format(_) => 2,
            CliError::Lib(e) => match e {
                E::Config(_) | E::Domain(_) | E::Dimension { .. } => 1,
                E::Parse { .. } | E::EmptyInput | E::Io(_) => 2,
                E::Convergence { .. } | E::Numeric { .. } | E::StepUnderflow { .. } => 3,
            },
        }
    }

    pub fn read(path: &Path, e: std::io::Error) -> Self {
        CliError::Read(path.to_path_buf(), e)
    }

    pub fn write(path: &Path, e: std::io::Error) -> Self {
        CliError::Write(path.to_path_buf(), e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Read(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            CliError::Write(p, e) => write!(f, "cannot write {}: {e}", p.display()),
            CliError::Format(m) => write!(f, "{m}"),
        }
    }
}

impl From<dynpr::Error> for CliError {
    fn from(e: dynpr::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

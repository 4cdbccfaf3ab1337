use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[cfg(test)]
    #[error("{0}")]
    Usage(String),

    #[error("unknown command `{0}`")]
    UnknownCommand(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("missing required flag --{0}")]
    Missing(String),

    #[error("--{key}: cannot read `{value}` as {expected}")]
    Type {
        key: String,
        value: String,
        expected: &'static str,
    },

    #[error("config file {path}: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Core(#[from] symspace::Error),

    #[error("truncation warnings raised: {}", .0.join("; "))]
    Truncation(Vec<String>),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for bad or inadmissible input, 1 for numerical or i/o failure.
    pub fn exit_code(&self) -> i32 {
        use symspace::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Inadmissible(_)
                | E::InvalidParameter { .. }
                | E::MissingParameter(_)
                | E::InvalidSpace(_)
                | E::OutsideChamber(_)
                | E::Precondition(_)
                | E::Unsupported(_)
                | E::EmptyRange => 2,
                _ => 1,
            },
            CliError::Truncation(_) | CliError::Io(_) | CliError::Csv(_) => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        use symspace::Error as E;
        match self {
            CliError::UnknownCommand(_) | CliError::UnknownKey(_) => "usage",
            #[cfg(test)]
            CliError::Usage(_) => "usage",
            CliError::Missing(_) => "missing_parameter",
            CliError::Type { .. } => "type_mismatch",
            CliError::Config { .. } => "config",
            CliError::Core(e) => match e {
                E::Inadmissible(_) => "inadmissible",
                E::NoContraction { .. } => "no_contraction",
                E::Precondition(_) => "precondition",
                E::InvalidParameter { .. } | E::MissingParameter(_) => "invalid_parameter",
                _ => "numerical",
            },
            CliError::Truncation(_) => "truncation",
            CliError::Io(_) | CliError::Csv(_) => "io",
        }
    }

    /// Machine-readable form written into failure reports.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Core(symspace::Error::Inadmissible(reasons)) => v["reasons"] = json!(reasons),
            CliError::Core(symspace::Error::NoContraction { step, time, increment }) => {
                v["step"] = json!(step);
                v["time"] = json!(time);
                v["increment"] = json!(increment);
            }
            CliError::Truncation(w) => v["warnings"] = json!(w),
            _ => {}
        }
        v
    }
}

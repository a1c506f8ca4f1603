use std::fmt;

use serde_json::json;

/// Failure of a CLI run, with its exit code and a machine-readable body.
#[derive(Debug, Clone)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub path: Option<String>,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: "schema",
            message: message.into(),
            path: Some(path.into()),
        }
    }

    pub fn io(path: impl Into<String>, err: std::io::Error) -> Self {
        Self {
            code: 1,
            kind: "io",
            message: err.to_string(),
            path: Some(path.into()),
        }
    }

    /// Classifies a library error raised while handling `path`.
    pub fn from_core(path: impl Into<String>, err: gaugetherm::Error) -> Self {
        let (code, kind) = if err.is_numerical() {
            (2, "numerical")
        } else if err.is_cross_check() {
            (3, "cross_check")
        } else {
            (1, "invalid_input")
        };
        Self {
            code,
            kind,
            message: err.to_string(),
            path: Some(path.into()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "exit_code": self.code,
                "kind": self.kind,
                "message": self.message,
                "path": self.path,
            }
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}: {}", p, self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for CliError {}

/// Attaches a config path to library errors.
pub trait Context<T> {
    fn at(self, path: &str) -> CliResult<T>;
}

impl<T> Context<T> for gaugetherm::Result<T> {
    fn at(self, path: &str) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gaugetherm::Error;

    #[test]
    fn exit_codes_follow_the_error_class() {
        let numerical = CliError::from_core("time", Error::NonFinite("rho".into()));
        assert_eq!((numerical.code, numerical.kind), (2, "numerical"));
        let check = CliError::from_core(
            "gauges[0]",
            Error::CrossCheck {
                what: "current".into(),
                discrepancy: 1.0,
            },
        );
        assert_eq!(check.code, 3);
        let bad = CliError::from_core("model", Error::InvalidParams("p".into()));
        assert_eq!(bad.code, 1);
        assert_eq!(bad.to_json()["error"]["path"], "model");
    }
}

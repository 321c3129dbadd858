use serde::Serialize;
use thiserror::Error;

use curved_chsh::dynamics::DynamicsError;
use curved_chsh::inverse::InverseError;
use curved_chsh::scan::ScanError;
use curved_chsh::scenario::ScenarioError;
use curved_chsh::worldviews::WorldviewError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const SCHEMA: i32 = 2;
    pub const GEOMETRY: i32 = 3;
    pub const DYNAMICS: i32 = 4;
    pub const INVERSE: i32 = 5;
    pub const SWEEP: i32 = 6;
    pub const WORLDVIEWS: i32 = 7;
    /// Outputs were written but some results failed.
    pub const PARTIAL: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] ScenarioError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
    #[error(transparent)]
    Sweep(ScanError),
    #[error(transparent)]
    Worldviews(#[from] WorldviewError),
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::InvalidSpec(m) => CliError::schema("sweep", m),
            ScanError::SeedRequired => CliError::schema("sweep.seed", e.to_string()),
            ScanError::Scenario(s) => CliError::Geometry(s),
            ScanError::Dynamics(d) => CliError::Dynamics(d),
            ScanError::Inverse(i) => CliError::Inverse(i),
            other => CliError::Sweep(other),
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: i32,
    category: &'a str,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
    message: String,
}

/// Name of the outermost variant in a `Debug` rendering.
fn variant_name(debug: &str) -> String {
    debug.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("").to_string()
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.into(), message: message.into() }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => exit::SCHEMA,
            CliError::Io { .. } => exit::IO,
            CliError::Geometry(_) => exit::GEOMETRY,
            CliError::Dynamics(_) => exit::DYNAMICS,
            CliError::Inverse(_) => exit::INVERSE,
            CliError::Sweep(_) => exit::SWEEP,
            CliError::Worldviews(_) => exit::WORLDVIEWS,
        }
    }

    fn parts(&self) -> (&'static str, String) {
        match self {
            CliError::Schema { .. } => ("schema", "Schema".into()),
            CliError::Io { .. } => ("io", "Io".into()),
            CliError::Geometry(e) => ("geometry", variant_name(&format!("{e:?}"))),
            CliError::Dynamics(e) => ("dynamics", variant_name(&format!("{e:?}"))),
            CliError::Inverse(e) => ("inverse", variant_name(&format!("{e:?}"))),
            CliError::Sweep(e) => ("sweep", variant_name(&format!("{e:?}"))),
            CliError::Worldviews(e) => ("worldviews", variant_name(&format!("{e:?}"))),
        }
    }

    /// Single-line JSON document for stderr.
    pub fn to_json(&self) -> String {
        let (category, kind) = self.parts();
        let path = match self {
            CliError::Schema { path, .. } => Some(path.as_str()),
            _ => None,
        };
        let message = match self {
            CliError::Schema { message, .. } => message.clone(),
            other => other.to_string(),
        };
        let body = ErrorBody { code: self.code(), category, kind, path, message };
        serde_json::json!({ "error": body }).to_string()
    }
}

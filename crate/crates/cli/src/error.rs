//! One error type for every subcommand, rendered as machine-readable JSON.
//!
//! All failures funnel into [`CliError`]; the binary prints
//! `{"error": {"kind", "message"}}` on stderr and exits nonzero, so scripts
//! can branch on `kind` without scraping prose.

use precsched::adversarial::FamilyError;
use precsched::random::RandomError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The experiment spec is structurally valid JSON but semantically wrong
    /// (empty seeds, incompatible noise, …).
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// A policy name is not in the registry.
    #[error("unknown policy '{0}'")]
    UnknownPolicy(String),
    /// A family name is not in the registry.
    #[error("unknown family '{0}'")]
    UnknownFamily(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Malformed JSON input or unrepresentable output.
    #[error("json: {0}")]
    Json(String),
    /// Input data rejected by the library (bad instance, oracle limits,
    /// simulation failures outside a sweep, …).
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Random(#[from] RandomError),
    /// An exact-optimum oracle reported a ratio below one — a bug, never a
    /// data point; the whole run aborts.
    #[error("sanity violation: {0}")]
    Sanity(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidSpec(_) => "invalid_spec",
            CliError::UnknownPolicy(_) => "unknown_policy",
            CliError::UnknownFamily(_) => "unknown_family",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Data(_) => "data",
            CliError::Family(_) => "family",
            CliError::Random(_) => "random",
            CliError::Sanity(_) => "sanity",
        }
    }

    /// The stderr document: `{"error": {"kind", "message"}}`.
    pub fn to_json(&self) -> String {
        json!({"error": {"kind": self.kind(), "message": self.to_string()}}).to_string()
    }
}

/// Shorthand for mapping library errors into [`CliError::Data`].
pub fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

// ───────────────────────── tests ─────────────────────────

use thiserror::Error;

/// Which POVM invariant failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmInvariant {
    /// An element has an eigenvalue below `-POVM_TOL`.
    Positivity,
    /// The elements do not sum to the identity.
    Completeness,
}

impl std::fmt::Display for PovmInvariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PovmInvariant::Positivity => f.write_str("positivity"),
            PovmInvariant::Completeness => f.write_str("completeness"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes that do not fit together (non-square matrices, mismatched
    /// local dimensions, wrong amplitude count).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("POVM {invariant} violated (element {element}, deviation {deviation:.3e})")]
    PovmViolation {
        invariant: PovmInvariant,
        element: usize,
        deviation: f64,
    },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// Arguments outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario too large to tabulate: {0}")]
    SizeGuard(String),

    #[error("tables have different index sets: {0}")]
    IndexSetMismatch(String),

    #[error("not enough samples: {0}")]
    InsufficientSamples(String),

    #[error("no firing events in {samples} samples; increase delta or the sample budget")]
    NoFiringEvents { samples: u64 },

    /// The k = 1 row of the weight system failed. Never expected; signals an
    /// arithmetic bug.
    #[error("consistency row violated for N={n}, M={m}")]
    ConsistencyViolated { n: usize, m: usize },

    #[error("malformed scenario JSON: {0}")]
    ScenarioJson(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised by grid construction, norm evaluation and the studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("grid invariant violated: {0}")]
    InvalidGrid(String),

    #[error("resolution too coarse: need m >= {required}, got {m}")]
    ResolutionTooCoarse { required: i32, m: i32 },

    #[error("memory budget exceeded: {cells} cells requested, budget is {budget}")]
    BudgetExceeded { cells: u128, budget: u64 },

    #[error("degenerate box: only {cells_per_axis} cell centers per axis fall inside")]
    DegenerateBox { cells_per_axis: i64 },

    #[error("degenerate scale: generation {k} exceeds m - guard = {limit}")]
    DegenerateScale { k: i32, limit: i32 },

    #[error("truncated tail {tail:.3e} exceeds 5% of computed value {value:.3e}")]
    TailTooLarge { tail: f64, value: f64 },

    #[error("atoms are not pairwise disjoint: {0}")]
    AtomsNotDisjoint(String),

    #[error("index sets overlap at index {0}")]
    IndexSetsOverlap(usize),

    #[error("profiles cannot be combined without a gap certificate")]
    GapCertificateMissing,

    #[error("function is not compactly supported (nonzero background {0})")]
    NotCompactlySupported(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum StbcError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank deficient: column {column} has residual norm {residual:.3e}")]
    RankDeficient { column: usize, residual: f64 },

    #[error("unsupported size a={0} (supported: 1..=5)")]
    UnsupportedSize(u32),

    #[error("generator indices must be strictly ascending within 1..={max}: {indices:?}")]
    BadIndexOrder { indices: Vec<usize>, max: usize },

    #[error("design structure error: {0}")]
    StructureError(String),

    #[error("layer {layer} is dependent on earlier layers (rank {rank}, expected {expected})")]
    DependentExtension {
        layer: usize,
        rank: usize,
        expected: usize,
    },

    #[error("search needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("value {0} is not a point of the alphabet")]
    AlphabetError(f64),

    #[error("unsupported rotation dimension {0} (supported: 1, 2, 4, 8, 16)")]
    UnsupportedDim(usize),

    #[error("exhaustive search over {candidates} candidates exceeds the oracle budget {budget}")]
    TooLarge { candidates: u128, budget: u128 },

    #[error("design is not group decodable: {0}")]
    NotGroupDecodable(String),

    #[error("decoding is intractable: {predicted} metric evaluations per codeword predicted")]
    Intractable { predicted: u128 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, StbcError>;

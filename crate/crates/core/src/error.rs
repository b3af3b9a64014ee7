//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A symbol index falls outside its configured alphabet.
    #[error("alphabet mismatch: {what} index {index} not in alphabet of size {size}")]
    AlphabetMismatch {
        what: &'static str,
        index: usize,
        size: usize,
    },

    /// A cycle index lies outside the valid range for the history.
    #[error("cycle index {index} out of range (history has {len} cycles)")]
    CycleOutOfRange { index: usize, len: usize },

    /// A conditioning history has probability zero under the model.
    #[error("history unreachable under the model at cycle {cycle}")]
    UnreachableHistory { cycle: usize },

    /// A model failed validation (row sums, parameter ranges, shapes).
    #[error("invalid model: {0}")]
    ModelInvalid(String),

    /// Sequence lengths do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A loss value cannot be represented on the configured loss grid.
    #[error("loss value {value} is not representable on a {levels}-level grid")]
    Discretization { value: f64, levels: usize },

    /// A model class must contain at least one member.
    #[error("model class is empty")]
    EmptyClass,

    /// Every class member assigns probability zero to the observed percept.
    #[error("model class exhausted: no member explains the observed percept")]
    ClassExhausted,

    /// A 2x2 loss matrix whose threshold is undefined.
    #[error("degenerate loss matrix: threshold denominator is not positive")]
    DegenerateLoss,

    /// Exhaustive policy enumeration refused to run.
    #[error("instance too large to enumerate: {0}")]
    InstanceTooLarge(String),

    /// A planning call expanded more nodes than the per-call budget.
    #[error("planning budget exhausted after {nodes} nodes; shorten the horizon or use a receding window")]
    BudgetExhausted { nodes: u64 },

    /// A check's preconditions do not hold for the given model.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A plug-in distribution turned out to depend on actions.
    #[error("plug-in distribution is action-dependent: {0}")]
    ActionDependent(String),

    /// Configuration file errors.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

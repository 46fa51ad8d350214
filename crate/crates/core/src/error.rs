use thiserror::Error;

/// Errors produced by the numerical kernels and the editing pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix data has {got} entries, expected {rows}x{cols}")]
    BadMatrixData { rows: usize, cols: usize, got: usize },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("axis dimension {0} is odd; rotary channels come in pairs")]
    OddAxisDim(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("text similarity {s_txt} at block {block} is degenerate (|s_txt| < 1e-6)")]
    DegenerateSimilarity { block: usize, s_txt: f64 },

    #[error("grid mismatch: target {tgt_h}x{tgt_w}, source {src_h}x{src_w}")]
    GridMismatch {
        tgt_h: usize,
        tgt_w: usize,
        src_h: usize,
        src_w: usize,
    },

    #[error("cell ({row}, {col}) outside {height}x{width} grid")]
    CellOutOfRange {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("block {block} is not a shared block but a source stream was supplied")]
    UnexpectedSharedSource { block: usize },

    #[error("block index {block} out of range for {n_blocks} blocks")]
    BlockOutOfRange { block: usize, n_blocks: usize },

    #[error("non-finite value in {what} at timestep {timestep}, block {block}")]
    NonFinite {
        what: &'static str,
        timestep: usize,
        block: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

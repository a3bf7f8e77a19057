//! Reversible subword segmentation with inline casing.

pub mod bpe;
pub mod casing;
pub mod model;
pub mod pretok;

use thiserror::Error;

pub use bpe::{apply_bpe, apply_bpe_unit, train_bpe, BpeTrainer};
pub use casing::{
    case_decode, case_encode, classify_piece, lowercase_aligned, split_mixed_case, CaseMarker,
    CaseToken, CasedPieceSeq, DecodeMode, Decoded, TITLE_MARKER, UPPER_MARKER,
};
pub use model::SubwordModel;
pub use pretok::{coarse_tokenize, detokenize, CoarseTokenizer, META_SYMBOL};

#[derive(Debug, Error)]
pub enum SubwordError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("target vocabulary size {target} is below the {characters} distinct characters")]
    VocabTooSmall { target: usize, characters: usize },
    #[error("piece {0:?} mixes cases; split mixed-case words first")]
    UnclassifiablePiece(String),
    #[error("case marker at position {position} has no preceding piece")]
    DanglingMarker { position: usize },
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

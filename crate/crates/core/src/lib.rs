//! Data-side toolkit for translating noisy social-media text: corpus
//! filtering, reversible subword segmentation with inline casing,
//! placeholders, noise injection, tagged epoch assembly and BLEU.

pub mod corpusbuild;
pub mod eval;
pub mod filtering;
pub mod hook;
pub mod noise;
pub mod pair;
pub mod pipeline;
pub mod placeholder;
pub mod seed;
pub mod subword;
pub mod textnorm;

pub use pair::{SentencePair, Verdict};

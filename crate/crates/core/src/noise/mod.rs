//! Natural-noise mining and injection for source sides of training data.

mod distance;
mod mining;
mod rules;

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpusbuild::TypeTag;
use crate::pair::SentencePair;

pub use distance::{collapse_repetitions, damerau_levenshtein, extended_edit_distance};
pub use mining::{max_distance_for, mine_variants, Lexicon, MiningOptions, Variant, VariantMap};
pub use rules::{apply_noise, ConfusionPair, NoiseRuleSet};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("probability `{name}` = {value} is outside [0, 1]")]
    Probability { name: String, value: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("no shipped confusion list for language `{0}`")]
    UnknownLanguage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Random-stream subsystem name for per-line noise.
pub const NOISE_SUBSYSTEM: &str = "noise";

/// One output line of [`augment_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedPair {
    pub tag: TypeTag,
    pub pair: SentencePair,
}

/// Noised copy of one pair. The stream depends only on `(seed, origin, line_no)`.
pub fn noise_pair(pair: &SentencePair, rules: &NoiseRuleSet, variants: &VariantMap, seed: u64) -> SentencePair {
    let subsystem = format!("{NOISE_SUBSYSTEM}/{}", pair.origin);
    let mut rng = crate::seed::derive_rng(seed, &subsystem, pair.line_no);
    SentencePair {
        source: rules::noise_line(&pair.source, rules, variants, &mut rng),
        target: pair.target.clone(),
        origin: pair.origin.clone(),
        line_no: pair.line_no,
    }
}

/// Noised copies of a chunk, in input order.
pub fn noise_chunk(
    pairs: &[SentencePair],
    rules: &NoiseRuleSet,
    variants: &VariantMap,
    seed: u64,
) -> Vec<SentencePair> {
    pairs
        .par_iter()
        .map(|p| noise_pair(p, rules, variants, seed))
        .collect()
}

/// Clean pairs tagged `<real>`, followed by the same pairs with noised
/// sources tagged `<noise>`.
pub fn augment_corpus(
    pairs: &[SentencePair],
    rules: &NoiseRuleSet,
    variants: &VariantMap,
    seed: u64,
) -> Vec<TaggedPair> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    out.extend(pairs.iter().cloned().map(|pair| TaggedPair {
        tag: TypeTag::Real,
        pair,
    }));
    out.extend(
        noise_chunk(pairs, rules, variants, seed)
            .into_iter()
            .map(|pair| TaggedPair {
                tag: TypeTag::Noise,
                pair,
            }),
    );
    out
}

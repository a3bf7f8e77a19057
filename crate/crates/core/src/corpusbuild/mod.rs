//! Corpus and type tags, and per-epoch training-set assembly.

mod epoch;
mod plan;

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use thiserror::Error;

use crate::hook::HookError;
use crate::pair::SentencePair;

pub use epoch::{
    build_epoch, BtHook, EpochManifest, EpochOutput, ExternalBtHook, IdentityBtHook, ManifestEntry, Pool, Pools,
    TaggedLine,
};
pub use plan::{Component, EpochPlan, Mode, DEFAULT_BT_TEMPERATURE};

#[derive(Debug, Error)]
pub enum CorpusBuildError {
    #[error("line is already tagged: `{0}`")]
    AlreadyTagged(String),
    #[error("invalid corpus tag `{0}`")]
    InvalidCorpusTag(String),
    #[error("pool is empty")]
    EmptyPool,
    #[error("rotation needs k >= 1 and epoch >= 1 (got k={k}, epoch={epoch})")]
    InvalidRotation { k: usize, epoch: usize },
    #[error("plan line {line}: {message}")]
    Plan { line: usize, message: String },
    #[error("component `{component}`: {message}")]
    Component { component: String, message: String },
    #[error("component `{component}`: back-translation hook failed: {source}")]
    Hook {
        component: String,
        #[source]
        source: HookError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Real,
    Bt,
    Noise,
    Rev,
}

impl TypeTag {
    pub const ALL: [TypeTag; 4] = [Self::Real, Self::Bt, Self::Noise, Self::Rev];

    pub fn token(self) -> &'static str {
        match self {
            Self::Real => "<real>",
            Self::Bt => "<BT>",
            Self::Noise => "<noise>",
            Self::Rev => "<rev>",
        }
    }

    /// Accepts either the token (`<BT>`) or the bare name (`BT`, `bt`).
    pub fn parse(text: &str) -> Option<Self> {
        let bare = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')).unwrap_or(text);
        match bare.to_ascii_lowercase().as_str() {
            "real" => Some(Self::Real),
            "bt" => Some(Self::Bt),
            "noise" => Some(Self::Noise),
            "rev" => Some(Self::Rev),
            _ => None,
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// `<name>` for a corpus name; names are non-empty with no whitespace or angle brackets.
pub fn corpus_tag_token(name: &str) -> Result<String, CorpusBuildError> {
    let bare = name.strip_prefix('<').and_then(|t| t.strip_suffix('>')).unwrap_or(name);
    if bare.is_empty() || bare.chars().any(|c| c.is_whitespace() || c == '<' || c == '>') {
        return Err(CorpusBuildError::InvalidCorpusTag(name.to_string()));
    }
    Ok(format!("<{bare}>"))
}

/// Prefixes `<corpus> <type> ` (or `<type> ` without a corpus tag).
pub fn tag_line(line: &str, corpus_tag: Option<&str>, type_tag: TypeTag) -> Result<String, CorpusBuildError> {
    let corpus = corpus_tag.map(corpus_tag_token).transpose()?;
    let first = line.split(' ').next().unwrap_or("");
    if TypeTag::parse(first).is_some_and(|t| t.token() == first) || corpus.as_deref() == Some(first) {
        return Err(CorpusBuildError::AlreadyTagged(line.to_string()));
    }
    Ok(match corpus {
        Some(c) => format!("{c} {type_tag} {line}"),
        None => format!("{type_tag} {line}"),
    })
}

/// Splits a tagged line into `(corpus token, type tag, text)`.
pub fn parse_tagged(line: &str) -> Option<(Option<&str>, TypeTag, &str)> {
    let (first, rest) = line.split_once(' ').unwrap_or((line, ""));
    if let Some(t) = TypeTag::parse(first).filter(|t| t.token() == first) {
        return Some((None, t, rest));
    }
    if corpus_tag_token(first).ok().as_deref() != Some(first) {
        return None;
    }
    let (second, text) = rest.split_once(' ').unwrap_or((rest, ""));
    let t = TypeTag::parse(second).filter(|t| t.token() == second)?;
    Some((Some(first), t, text))
}

pub fn reverse_pair(pair: &SentencePair) -> SentencePair {
    pair.reversed()
}

/// Slice of a pool for a 1-based epoch: epochs `1..=k` partition
/// `0..pool_size` and epoch `k + 1` repeats epoch 1.
pub fn rotation_slice(pool_size: usize, k: usize, epoch: usize) -> Result<Range<usize>, CorpusBuildError> {
    if pool_size == 0 {
        return Err(CorpusBuildError::EmptyPool);
    }
    if k == 0 || epoch == 0 {
        return Err(CorpusBuildError::InvalidRotation { k, epoch });
    }
    let j = (epoch - 1) % k;
    let bound = |i: usize| ((i as u128 * pool_size as u128) / k as u128) as usize;
    Ok(bound(j)..bound(j + 1))
}

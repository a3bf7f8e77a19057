//! Inline casing: pieces are lowercased and a `<T>` (title) or `<U>` (upper)
//! marker is inserted right after any piece whose original form was
//! capitalized.
//!
//! Only characters whose case mapping is a one-to-one round trip are treated
//! as cased. Anything else (`ß`, `İ`, titlecase digraphs, the Kelvin sign...)
//! is left untouched by both directions, which keeps lowercasing aligned
//! character for character with the original text.

use std::fmt;

use super::SubwordError;

pub const TITLE_MARKER: &str = "<T>";
pub const UPPER_MARKER: &str = "<U>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseMarker {
    Title,
    Upper,
}

impl CaseMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseMarker::Title => TITLE_MARKER,
            CaseMarker::Upper => UPPER_MARKER,
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            TITLE_MARKER => Some(CaseMarker::Title),
            UPPER_MARKER => Some(CaseMarker::Upper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CaseToken {
    Piece(String),
    Marker(CaseMarker),
}

impl CaseToken {
    pub fn as_str(&self) -> &str {
        match self {
            CaseToken::Piece(p) => p,
            CaseToken::Marker(m) => m.as_str(),
        }
    }
}

/// Lowercase pieces interleaved with case markers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CasedPieceSeq {
    tokens: Vec<CaseToken>,
}

impl CasedPieceSeq {
    /// Wraps tokens without checking the marker grammar; see [`Self::validate`].
    pub fn from_tokens(tokens: Vec<CaseToken>) -> Self {
        Self { tokens }
    }

    /// Splits a space-separated token line; `<T>` and `<U>` become markers.
    pub fn parse(line: &str) -> Self {
        let tokens = line
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| match CaseMarker::parse(t) {
                Some(m) => CaseToken::Marker(m),
                None => CaseToken::Piece(t.to_string()),
            })
            .collect();
        Self { tokens }
    }

    pub fn tokens(&self) -> &[CaseToken] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<CaseToken> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks that no marker is first and no marker follows another marker.
    pub fn validate(&self) -> Result<(), SubwordError> {
        let mut prev_is_piece = false;
        for (position, token) in self.tokens.iter().enumerate() {
            match token {
                CaseToken::Marker(_) if !prev_is_piece => {
                    return Err(SubwordError::DanglingMarker { position })
                }
                CaseToken::Marker(_) => prev_is_piece = false,
                CaseToken::Piece(_) => prev_is_piece = true,
            }
        }
        Ok(())
    }
}

impl fmt::Display for CasedPieceSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(token.as_str())?;
        }
        Ok(())
    }
}

fn single<I: Iterator<Item = char>>(mut it: I) -> Option<char> {
    let first = it.next()?;
    it.next().is_none().then_some(first)
}

fn raw_upper(c: char) -> Option<char> {
    single(c.to_uppercase())
}

fn raw_lower(c: char) -> Option<char> {
    single(c.to_lowercase())
}

/// Lowercase form of `c` if its case mapping round-trips, else `c` itself.
pub fn lower_char(c: char) -> char {
    match raw_lower(c) {
        Some(l) if l != c && raw_upper(l) == Some(c) => l,
        _ => c,
    }
}

/// Uppercase form of `c` if its case mapping round-trips, else `c` itself.
pub fn upper_char(c: char) -> char {
    match raw_upper(c) {
        Some(u) if u != c && raw_lower(u) == Some(c) => u,
        _ => c,
    }
}

fn is_upper(c: char) -> bool {
    lower_char(c) != c
}

fn is_lower(c: char) -> bool {
    upper_char(c) != c
}

/// Lowercases character by character; output has the same char count as input.
pub fn lowercase_aligned(text: &str) -> String {
    text.chars().map(lower_char).collect()
}

/// Splits a word into case-homogeneous segments.
///
/// Cuts before an uppercase letter that follows a lowercase one
/// (`MacDonalds` → `Mac`, `Donalds`) and before the last capital of an
/// uppercase run that continues in lowercase (`HTMLParser` → `HTML`,
/// `Parser`). Characters without case are ignored when looking for
/// boundaries.
pub fn split_mixed_case(word: &str) -> Vec<&str> {
    let cased: Vec<(usize, bool)> = word
        .char_indices()
        .filter_map(|(i, c)| {
            if is_upper(c) {
                Some((i, true))
            } else if is_lower(c) {
                Some((i, false))
            } else {
                None
            }
        })
        .collect();

    let mut cuts = Vec::new();
    for k in 1..cased.len() {
        let (pos, upper) = cased[k];
        if !upper {
            continue;
        }
        let prev_upper = cased[k - 1].1;
        let next_lower = cased.get(k + 1).is_some_and(|&(_, u)| !u);
        if !prev_upper || next_lower {
            cuts.push(pos);
        }
    }

    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for cut in cuts {
        out.push(&word[start..cut]);
        start = cut;
    }
    out.push(&word[start..]);
    out
}

/// Marker for one original-cased piece: `None` for lowercase or caseless,
/// `Title` when only the first cased letter is upper (including a single
/// capital), `Upper` when every cased letter is upper.
pub fn classify_piece(piece: &str) -> Result<Option<CaseMarker>, SubwordError> {
    let mut uppers = 0usize;
    let mut lowers = 0usize;
    let mut first_upper = None;
    for c in piece.chars() {
        let (u, l) = (is_upper(c), is_lower(c));
        if first_upper.is_none() && (u || l) {
            first_upper = Some(u);
        }
        uppers += usize::from(u);
        lowers += usize::from(l);
    }
    match (uppers, lowers, first_upper) {
        (0, _, _) => Ok(None),
        (1, _, Some(true)) => Ok(Some(CaseMarker::Title)),
        (_, 0, _) => Ok(Some(CaseMarker::Upper)),
        _ => Err(SubwordError::UnclassifiablePiece(piece.to_string())),
    }
}

/// Lowercases original-cased pieces and inserts markers after capitalized ones.
pub fn case_encode<S: AsRef<str>>(pieces: &[S]) -> Result<CasedPieceSeq, SubwordError> {
    let mut tokens = Vec::with_capacity(pieces.len() + pieces.len() / 4);
    for piece in pieces {
        let piece = piece.as_ref();
        let marker = classify_piece(piece)?;
        tokens.push(CaseToken::Piece(lowercase_aligned(piece)));
        if let Some(m) = marker {
            tokens.push(CaseToken::Marker(m));
        }
    }
    Ok(CasedPieceSeq { tokens })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Malformed marker sequences are an error.
    Strict,
    /// Malformed markers are dropped and counted.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decoded {
    pub pieces: Vec<String>,
    pub repaired_markers: usize,
}

fn apply_marker(piece: &mut String, marker: CaseMarker) {
    *piece = match marker {
        CaseMarker::Upper => piece.chars().map(upper_char).collect(),
        CaseMarker::Title => {
            let mut done = false;
            piece
                .chars()
                .map(|c| {
                    if !done && is_lower(c) {
                        done = true;
                        upper_char(c)
                    } else {
                        c
                    }
                })
                .collect()
        }
    };
}

/// Consumes markers, restoring the case of the piece each one follows.
pub fn case_decode(seq: &CasedPieceSeq, mode: DecodeMode) -> Result<Decoded, SubwordError> {
    let mut out = Decoded::default();
    let mut prev_is_piece = false;
    for (position, token) in seq.tokens.iter().enumerate() {
        match token {
            CaseToken::Piece(p) => {
                out.pieces.push(p.clone());
                prev_is_piece = true;
            }
            CaseToken::Marker(m) => {
                if !prev_is_piece {
                    if mode == DecodeMode::Strict {
                        return Err(SubwordError::DanglingMarker { position });
                    }
                    out.repaired_markers += 1;
                    continue;
                }
                let last = out.pieces.last_mut().expect("previous token is a piece");
                apply_marker(last, *m);
                prev_is_piece = false;
            }
        }
    }
    Ok(out)
}

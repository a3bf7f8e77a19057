//! Line-level composition of the preprocessing and postprocessing stages.
//!
//! Preprocess: character normalization, placeholders, coarse tokenization,
//! case-boundary splitting, lowercasing, BPE, inline casing markers, tags.
//! Postprocess undoes these in reverse order and repairs malformed model
//! output instead of failing.

use std::collections::HashMap;
use std::fmt;

use crate::corpusbuild::{corpus_tag_token, CorpusBuildError, TypeTag};
use crate::placeholder::{self, DecodeReport, PlaceholderKind, PlaceholderMap};
use crate::subword::{
    apply_bpe_unit, case_decode, case_encode, detokenize, lowercase_aligned, split_mixed_case, BpeTrainer,
    CaseMarker, CaseToken, CasedPieceSeq, CoarseTokenizer, DecodeMode, SubwordError, SubwordModel, TITLE_MARKER,
    UPPER_MARKER,
};
use crate::textnorm::{self, NormTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessOptions {
    /// Fullwidth forms, vulgar fractions and ideographic spaces to ASCII.
    pub normalize_chars: bool,
    pub placeholders: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            normalize_chars: true,
            placeholders: true,
        }
    }
}

/// Placeholder tokens and case markers; never split and never trained on.
pub fn reserved_tokens() -> Vec<&'static str> {
    let mut out: Vec<&str> = PlaceholderKind::ALL.iter().map(|k| k.token()).collect();
    out.extend([TITLE_MARKER, UPPER_MARKER]);
    out.extend(TypeTag::ALL.iter().map(|t| t.token()));
    out
}

fn prepare(text: &str, opts: &PreprocessOptions, table: &NormTable) -> (String, PlaceholderMap) {
    let text = if opts.normalize_chars {
        textnorm::normalize_chars(text, table)
    } else {
        text.to_string()
    };
    if opts.placeholders {
        placeholder::encode_placeholders(&text)
    } else {
        (text, PlaceholderMap::default())
    }
}

/// Coarse tokenizer that keeps reserved tokens and `extra_reserved` whole.
pub fn tokenizer_for(meta: char, extra_reserved: &[String]) -> CoarseTokenizer {
    let mut reserved: Vec<String> = reserved_tokens().into_iter().map(str::to_string).collect();
    reserved.extend(extra_reserved.iter().cloned());
    CoarseTokenizer::new(meta).with_reserved(reserved)
}

/// Lowercased units as seen by BPE, for training.
pub fn training_units(line: &str, opts: &PreprocessOptions, tokenizer: &CoarseTokenizer, table: &NormTable) -> Vec<String> {
    let (text, _) = prepare(line, opts, table);
    let mut out = Vec::new();
    for unit in tokenizer.tokenize(&text) {
        if tokenizer.is_reserved(&unit) {
            continue;
        }
        out.extend(split_mixed_case(&unit).into_iter().map(lowercase_aligned));
    }
    out
}

/// Trains a model on raw lines exactly as [`Preprocessor`] will segment them.
pub fn train_model<I, S>(
    lines: I,
    vocab_size: usize,
    vocab_threshold: u64,
    meta: char,
    opts: &PreprocessOptions,
) -> Result<SubwordModel, SubwordError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let tokenizer = tokenizer_for(meta, &[]);
    let table = NormTable::nfkc_lite();
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in lines {
        for unit in training_units(line.as_ref(), opts, &tokenizer, &table) {
            *counts.entry(unit).or_default() += 1;
        }
    }
    BpeTrainer::new(vocab_size, vocab_threshold, meta).train_counts(&counts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub pieces: CasedPieceSeq,
    pub placeholders: PlaceholderMap,
}

impl Preprocessed {
    /// Piece line with an optional tag prefix.
    pub fn to_line(&self, prefix: &str) -> String {
        let body = self.pieces.to_string();
        match (prefix.is_empty(), body.is_empty()) {
            (true, _) => body,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix} {body}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    model: SubwordModel,
    tokenizer: CoarseTokenizer,
    table: NormTable,
    opts: PreprocessOptions,
}

impl Preprocessor {
    pub fn new(model: SubwordModel, opts: PreprocessOptions) -> Self {
        let tokenizer = tokenizer_for(model.meta_symbol(), &[]);
        Self {
            model,
            tokenizer,
            table: NormTable::nfkc_lite(),
            opts,
        }
    }

    pub fn model(&self) -> &SubwordModel {
        &self.model
    }

    pub fn options(&self) -> &PreprocessOptions {
        &self.opts
    }

    /// Original-cased pieces before marker insertion.
    pub fn segment(&self, text: &str) -> Vec<String> {
        let mut pieces = Vec::new();
        for unit in self.tokenizer.tokenize(text) {
            if self.tokenizer.is_reserved(&unit) {
                pieces.push(unit);
                continue;
            }
            for seg in split_mixed_case(&unit) {
                let lower = lowercase_aligned(seg);
                let mut chars = seg.char_indices().map(|(i, _)| i).chain([seg.len()]);
                let mut start = chars.next().unwrap_or(0);
                for piece in apply_bpe_unit(&lower, &self.model) {
                    let n = piece.chars().count();
                    let end = chars.nth(n - 1).unwrap_or(seg.len());
                    pieces.push(seg[start..end].to_string());
                    start = end;
                }
            }
        }
        pieces
    }

    pub fn preprocess(&self, line: &str) -> Result<Preprocessed, SubwordError> {
        let (text, placeholders) = prepare(line, &self.opts, &self.table);
        let pieces = case_encode(&self.segment(&text))?;
        Ok(Preprocessed { pieces, placeholders })
    }
}

/// Source-line prefix `<corpus> <type>` (or just `<type>`).
pub fn tag_prefix(corpus: Option<&str>, type_tag: TypeTag) -> Result<String, CorpusBuildError> {
    Ok(match corpus {
        Some(c) => format!("{} {}", corpus_tag_token(c)?, type_tag),
        None => type_tag.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostprocessOptions {
    pub normalize_punct: bool,
    /// French typographic quotes, applied last.
    pub french_quotes: bool,
}

impl PostprocessOptions {
    pub fn for_target(lang: &str) -> Self {
        Self {
            normalize_punct: false,
            french_quotes: lang == "fr",
        }
    }
}

/// Repairs made while postprocessing; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PostprocessReport {
    pub lines: u64,
    /// Markers with no piece before them, or attached to a reserved token.
    pub repaired_markers: u64,
    /// Tag tokens found in model output and removed.
    pub stripped_tags: u64,
    pub placeholders: DecodeReport,
}

impl PostprocessReport {
    pub fn merge(&mut self, other: &PostprocessReport) {
        self.lines += other.lines;
        self.repaired_markers += other.repaired_markers;
        self.stripped_tags += other.stripped_tags;
        self.placeholders.merge(&other.placeholders);
    }

    pub fn anomalies(&self) -> u64 {
        self.repaired_markers
            + self.stripped_tags
            + self.placeholders.total_surplus() as u64
            + self.placeholders.total_unused() as u64
    }
}

impl fmt::Display for PostprocessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lines={}", self.lines)?;
        writeln!(f, "repaired_markers={}", self.repaired_markers)?;
        writeln!(f, "stripped_tags={}", self.stripped_tags)?;
        for (i, kind) in PlaceholderKind::ALL.iter().enumerate() {
            writeln!(f, "placeholder_surplus_{}={}", kind.name(), self.placeholders.surplus[i])?;
            writeln!(f, "placeholder_unused_{}={}", kind.name(), self.placeholders.unused[i])?;
        }
        write!(f, "anomalies={}", self.anomalies())
    }
}

fn is_placeholder(token: &str) -> bool {
    PlaceholderKind::ALL.iter().any(|k| k.token() == token)
}

/// Tags that can prefix a line: type tags and `<Name>` corpus tags.
fn is_tag(token: &str) -> bool {
    if TypeTag::ALL.iter().any(|t| t.token() == token) {
        return true;
    }
    token.len() > 2
        && token.starts_with('<')
        && token.ends_with('>')
        && !is_placeholder(token)
        && CaseMarker::parse(token).is_none()
}

#[derive(Debug, Clone)]
pub struct Postprocessor {
    meta: char,
    opts: PostprocessOptions,
}

impl Postprocessor {
    pub fn new(meta: char, opts: PostprocessOptions) -> Self {
        Self { meta, opts }
    }

    /// Turns one line of model output back into text.
    pub fn postprocess(&self, line: &str, source_map: &PlaceholderMap) -> (String, PostprocessReport) {
        let mut report = PostprocessReport {
            lines: 1,
            ..Default::default()
        };
        let mut tokens: Vec<CaseToken> = Vec::new();
        let mut leading = true;
        for tok in line.split(' ').filter(|t| !t.is_empty()) {
            if leading && is_tag(tok) {
                report.stripped_tags += 1;
                continue;
            }
            leading = false;
            match CaseMarker::parse(tok) {
                // placeholders are restored verbatim, so a marker on one is noise
                Some(_) if matches!(tokens.last(), Some(CaseToken::Piece(p)) if is_placeholder(p)) => {
                    report.repaired_markers += 1;
                }
                Some(m) => tokens.push(CaseToken::Marker(m)),
                None => tokens.push(CaseToken::Piece(tok.to_string())),
            }
        }
        let decoded = case_decode(&CasedPieceSeq::from_tokens(tokens), DecodeMode::Lenient)
            .expect("lenient decoding does not fail");
        report.repaired_markers += decoded.repaired_markers as u64;
        let text = detokenize(&decoded.pieces, self.meta);
        let (mut text, placeholder_report) = placeholder::decode_placeholders(&text, source_map);
        report.placeholders = placeholder_report;
        if self.opts.normalize_punct {
            text = textnorm::normalize_punct(&text);
        }
        if self.opts.french_quotes {
            text = textnorm::fix_quotes_fr(&text);
        }
        (text, report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subword::META_SYMBOL;

    fn model() -> SubwordModel {
        let corpus = [
            "they were so tasty!! bonjour tout le monde",
            "so tasty, they were. bonjour",
            "macdonalds was so tasty",
        ];
        train_model(corpus, 60, 0, META_SYMBOL, &PreprocessOptions::default()).unwrap()
    }

    #[test]
    fn round_trip_simple() {
        let pre = Preprocessor::new(model(), PreprocessOptions::default());
        let post = Postprocessor::new(META_SYMBOL, PostprocessOptions::for_target("en"));
        for line in [
            "They were SO TASTY!!",
            "MacDonalds 🙂 see /r/france",
            "  two  spaces ",
            "",
            "HTMLParser iPhone ÉCOLE Ça",
            "u / bob said hi 👍🏽",
        ] {
            let p = pre.preprocess(line).unwrap();
            let (back, report) = post.postprocess(&p.to_line(""), &p.placeholders);
            assert_eq!(back, line, "{}", p.to_line(""));
            assert_eq!(report.anomalies(), 0);
        }
    }

    #[test]
    fn placeholders_are_single_pieces() {
        let pre = Preprocessor::new(model(), PreprocessOptions::default());
        let p = pre.preprocess("so tasty 🙂").unwrap();
        assert!(p.to_line("").ends_with("▁ <emoji>"), "{}", p.to_line(""));
    }

    #[test]
    fn composed_example() {
        let post = Postprocessor::new(META_SYMBOL, PostprocessOptions::for_target("fr"));
        let mut map = PlaceholderMap::default();
        map.push(PlaceholderKind::Emoji, "🙂");
        assert_eq!(post.postprocess("▁bon <T> jour ▁ <emoji>", &map).0, "Bonjour 🙂");
        assert_eq!(post.postprocess("▁bon <T> jour <emoji>", &map).0, "Bonjour🙂");
    }

    #[test]
    fn repairs_malformed_output() {
        let post = Postprocessor::new(META_SYMBOL, PostprocessOptions::for_target("en"));
        let map = PlaceholderMap::default();
        let (text, report) = post.postprocess("<MTNT> <real> <T> ▁hello <U> <T> ▁ <emoji> <T>", &map);
        assert_eq!(text, "HELLO");
        assert_eq!(report.stripped_tags, 2);
        assert_eq!(report.repaired_markers, 3);
        assert_eq!(report.placeholders.total_surplus(), 1);
    }

    #[test]
    fn french_quotes_last() {
        let post = Postprocessor::new(META_SYMBOL, PostprocessOptions { normalize_punct: true, french_quotes: true });
        let (text, _) = post.postprocess("▁il ▁dit ▁\" oui \"", &PlaceholderMap::default());
        assert_eq!(text, "il dit «\u{a0}oui\u{a0}»");
    }

    #[test]
    fn tag_prefixes() {
        assert_eq!(tag_prefix(Some("MTNT"), TypeTag::Real).unwrap(), "<MTNT> <real>");
        assert_eq!(tag_prefix(None, TypeTag::Real).unwrap(), "<real>");
        let pre = Preprocessor::new(model(), PreprocessOptions::default());
        let p = pre.preprocess("bonjour").unwrap();
        assert_eq!(p.to_line("<MTNT> <BT>"), "<MTNT> <BT> ▁bonjour");
    }
}

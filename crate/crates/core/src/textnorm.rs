//! Character-level normalization and punctuation repair.
//!
//! Everything downstream (placeholders, segmentation, filtering) consumes the
//! output of [`normalize_chars`], so the tables here are kept small and
//! idempotent.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use thiserror::Error;

const NFKC_LITE: &str = include_str!("../data/nfkc-lite.tsv");
const MOSES_PUNCT: &str = include_str!("../data/moses-punct.tsv");

const NBSP: char = '\u{00A0}';
const RIGHT_SINGLE_QUOTE: char = '\u{2019}';

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{table}:{line}: expected `<key>\\t<replacement>`")]
    MissingTab { table: String, line: usize },
    #[error("{table}:{line}: empty key")]
    EmptyKey { table: String, line: usize },
    #[error("{table}:{line}: bad escape sequence `{escape}`")]
    BadEscape { table: String, line: usize, escape: String },
    #[error("{table}: key {key:?} maps to itself")]
    Identity { table: String, key: String },
    #[error("{table}: replacement {replacement:?} of {key:?} contains key {inner:?}")]
    NotIdempotent {
        table: String,
        key: String,
        replacement: String,
        inner: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Ordered string-to-string replacement table applied longest-match-first.
#[derive(Debug, Clone)]
pub struct NormTable {
    name: String,
    entries: BTreeMap<String, String>,
    // first char -> candidate keys, longest first
    index: HashMap<char, Vec<(String, String)>>,
}

impl NormTable {
    /// Builds a table, rejecting identity rules and rules whose replacement
    /// would itself be rewritten on a second pass.
    pub fn new(
        name: impl Into<String>,
        entries: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, TableError> {
        let name = name.into();
        let entries: BTreeMap<String, String> = entries.into_iter().collect();
        for (key, replacement) in &entries {
            if key.is_empty() {
                return Err(TableError::EmptyKey {
                    table: name,
                    line: 0,
                });
            }
            if key == replacement {
                return Err(TableError::Identity {
                    table: name,
                    key: key.clone(),
                });
            }
            if let Some(inner) = entries.keys().find(|k| replacement.contains(k.as_str())) {
                return Err(TableError::NotIdempotent {
                    table: name.clone(),
                    key: key.clone(),
                    replacement: replacement.clone(),
                    inner: inner.clone(),
                });
            }
        }
        let mut index: HashMap<char, Vec<(String, String)>> = HashMap::new();
        for (key, replacement) in &entries {
            let first = key.chars().next().expect("non-empty key");
            index
                .entry(first)
                .or_default()
                .push((key.clone(), replacement.clone()));
        }
        for candidates in index.values_mut() {
            candidates.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(Self {
            name,
            entries,
            index,
        })
    }

    /// Parses the tab-separated table format. Lines starting with `#` and
    /// blank lines are skipped; `\t`, `\\` and `\u{HEX}` escapes are decoded.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, TableError> {
        let name = name.into();
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (key, replacement) = raw.split_once('\t').ok_or(TableError::MissingTab {
                table: name.clone(),
                line: line_no,
            })?;
            let key = unescape(key).map_err(|escape| TableError::BadEscape {
                table: name.clone(),
                line: line_no,
                escape,
            })?;
            if key.is_empty() {
                return Err(TableError::EmptyKey {
                    table: name,
                    line: line_no,
                });
            }
            let replacement = unescape(replacement).map_err(|escape| TableError::BadEscape {
                table: name.clone(),
                line: line_no,
                escape,
            })?;
            entries.push((key, replacement));
        }
        Self::new(name, entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &text)
    }

    /// Compatibility folding: fullwidth ASCII, vulgar fractions, ideographic space.
    pub fn nfkc_lite() -> Self {
        Self::parse("nfkc-lite", NFKC_LITE).expect("shipped table is valid")
    }

    /// Curly quotes, dashes, ellipsis and pseudo-spaces to ASCII.
    pub fn moses_punct() -> Self {
        Self::parse("moses-punct", MOSES_PUNCT).expect("shipped table is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_key_char(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    pub fn apply(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            let hit = self.index.get(&c).and_then(|candidates| {
                candidates
                    .iter()
                    .find(|(key, _)| rest.starts_with(key.as_str()))
            });
            match hit {
                Some((key, replacement)) => {
                    out.push_str(replacement);
                    rest = &rest[key.len()..];
                }
                None => {
                    out.push(c);
                    rest = &rest[c.len_utf8()..];
                }
            }
        }
        out
    }
}

fn unescape(field: &str) -> Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some('u') => {
                if chars.next() != Some('{') {
                    return Err("\\u".into());
                }
                let mut hex = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(h) => hex.push(h),
                        None => return Err(format!("\\u{{{hex}")),
                    }
                }
                let decoded = u32::from_str_radix(&hex, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| format!("\\u{{{hex}}}"))?;
                out.push(decoded);
            }
            None => out.push('\\'),
            Some(other) => return Err(format!("\\{other}")),
        }
    }
    Ok(out)
}

/// Applies `table` left to right, longest key first.
pub fn normalize_chars(text: &str, table: &NormTable) -> String {
    table.apply(text)
}

/// Collapses runs of ASCII spaces and trims the ends.
pub fn collapse_spaces(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Moses-style punctuation normalization for detokenized output.
pub fn normalize_punct(text: &str) -> String {
    thread_local! {
        static TABLE: NormTable = NormTable::moses_punct();
    }
    TABLE.with(|table| collapse_spaces(&table.apply(text)))
}

/// Rewrites ASCII apostrophes and double quotes into French typography.
///
/// Apostrophes between two letters become U+2019. Double quotes are paired
/// greedily left to right; each pair becomes `«\u{a0}…\u{a0}»` with any
/// whitespace just inside the quotes replaced. A trailing unpaired quote is
/// left as is.
pub fn fix_quotes_fr(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let quote_positions: Vec<usize> = chars
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == '"')
        .map(|(i, _)| i)
        .collect();
    let paired = quote_positions.len() / 2 * 2;
    let mut opening = vec![false; chars.len()];
    let mut closing = vec![false; chars.len()];
    for pair in quote_positions[..paired].chunks(2) {
        opening[pair[0]] = true;
        closing[pair[1]] = true;
    }

    let mut out = String::with_capacity(text.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if opening[i] {
            out.push('«');
            out.push(NBSP);
            i += 1;
            while i < chars.len() && chars[i].is_whitespace() && !closing[i] {
                i += 1;
            }
            continue;
        }
        if closing[i] {
            while out.ends_with(|w: char| w.is_whitespace()) && !out.ends_with(NBSP) {
                out.pop();
            }
            if !out.ends_with(NBSP) {
                out.push(NBSP);
            }
            out.push('»');
            i += 1;
            continue;
        }
        if c == '\'' {
            let prev_letter = i > 0 && chars[i - 1].is_alphabetic();
            let next_letter = chars.get(i + 1).is_some_and(|n| n.is_alphabetic());
            if prev_letter && next_letter {
                out.push(RIGHT_SINGLE_QUOTE);
                i += 1;
                continue;
            }
        }
        out.push(c);
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn folds_fraction_and_fullwidth() {
        let t = NormTable::nfkc_lite();
        assert_eq!(normalize_chars("½", &t), "1/2");
        assert_eq!(normalize_chars("なぜ？", &t), "なぜ?");
        assert_eq!(normalize_chars("ＡＢＣ１２３", &t), "ABC123");
        assert_eq!(normalize_chars("a\u{3000}b", &t), "a b");
        assert_eq!(normalize_chars("＼", &t), "\\");
        assert_eq!(normalize_chars("", &t), "");
    }

    #[test]
    fn shipped_tables_cover_expected_ranges() {
        let t = NormTable::nfkc_lite();
        assert_eq!(t.len(), 94 + 19 + 1);
        assert_eq!(t.name(), "nfkc-lite");
        assert_eq!(NormTable::moses_punct().name(), "moses-punct");
    }

    #[test]
    fn longest_match_wins() {
        let t = NormTable::new(
            "t",
            [("ab".to_string(), "X".to_string()), ("a".to_string(), "Y".to_string())],
        )
        .unwrap();
        assert_eq!(t.apply("aab"), "YX");
    }

    #[test]
    fn rejects_identity_and_chained_rules() {
        assert!(matches!(
            NormTable::parse("t", "a\ta\n"),
            Err(TableError::Identity { .. })
        ));
        assert!(matches!(
            NormTable::parse("t", "a\tb\nb\tc\n"),
            Err(TableError::NotIdempotent { .. })
        ));
        assert!(matches!(
            NormTable::parse("t", "abc\n"),
            Err(TableError::MissingTab { line: 1, .. })
        ));
        assert!(matches!(
            NormTable::parse("t", "\\q\tx\n"),
            Err(TableError::BadEscape { .. })
        ));
    }

    #[test]
    fn french_quotes() {
        assert_eq!(fix_quotes_fr("l'eau"), "l’eau");
        assert_eq!(
            fix_quotes_fr("il a dit \"oui\" hier"),
            "il a dit «\u{a0}oui\u{a0}» hier"
        );
        assert_eq!(fix_quotes_fr("3\" de pluie"), "3\" de pluie");
        assert_eq!(fix_quotes_fr("\" oui \""), "«\u{a0}oui\u{a0}»");
        assert_eq!(fix_quotes_fr("\"a\" et \"b"), "«\u{a0}a\u{a0}» et \"b");
        assert_eq!(fix_quotes_fr("'tis 90'"), "'tis 90'");
    }

    #[test]
    fn moses_punct_examples() {
        assert_eq!(normalize_punct("“hello” \u{2014} ok"), "\"hello\" - ok");
        assert_eq!(normalize_punct("a…b"), "a...b");
        assert_eq!(normalize_punct("a  b"), "a b");
        assert_eq!(normalize_punct("a\u{a0}b"), "a b");
    }

    proptest! {
        #[test]
        fn nfkc_lite_is_idempotent(s in "\\PC{0,40}") {
            let t = NormTable::nfkc_lite();
            let once = normalize_chars(&s, &t);
            prop_assert_eq!(normalize_chars(&once, &t), once);
        }

        #[test]
        fn nfkc_lite_on_table_chars(s in "[！-～½¼¾⅓⅔⅛\u{3000}a-z ]{0,40}") {
            let t = NormTable::nfkc_lite();
            let once = normalize_chars(&s, &t);
            prop_assert!(once.chars().all(|c| !t.contains_key_char(c)));
            prop_assert_eq!(normalize_chars(&once, &t), once);
        }

        #[test]
        fn french_fix_keeps_alphanumerics(s in "[a-zA-Zéà0-9 '\".,!?]{0,40}") {
            let keep = |x: &str| x.chars().filter(|c| c.is_alphanumeric()).collect::<String>();
            prop_assert_eq!(keep(&fix_quotes_fr(&s)), keep(&s));
        }

        #[test]
        fn punct_output_has_no_table_keys(s in "[a-z “”‘’\u{2013}\u{2014}…\u{a0}\u{2009}]{0,40}") {
            let table = NormTable::moses_punct();
            let out = normalize_punct(&s);
            prop_assert!(out.chars().all(|c| !table.contains_key_char(c)));
        }
    }
}

//! Whitespace-escaping coarse tokenization.
//!
//! A line is cut on spaces and wherever the character class changes
//! (letters of one script, digits, everything else). Units that follow a
//! space, or start the line, carry the meta symbol in front, so
//! [`detokenize`] restores the input byte for byte. Runs of several spaces
//! produce standalone meta-symbol units.

/// Default escape for word-initial whitespace (LOWER ONE EIGHTH BLOCK).
pub const META_SYMBOL: char = '\u{2581}';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Script {
    Han,
    Hiragana,
    Katakana,
    Hangul,
    Thai,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Letter(Script),
    Digit,
    Symbol,
    /// Combining marks, joiners and selectors stick to whatever precedes them.
    Extend,
}

fn script_of(c: char) -> Script {
    match c as u32 {
        0x3040..=0x309F => Script::Hiragana,
        0x30A0..=0x30FF | 0x31F0..=0x31FF | 0xFF66..=0xFF9F => Script::Katakana,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F => Script::Han,
        0x1100..=0x11FF | 0x3130..=0x318F | 0xAC00..=0xD7AF => Script::Hangul,
        0x0E00..=0x0E7F => Script::Thai,
        _ => Script::Other,
    }
}

pub(crate) fn is_extend(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F
        | 0x0483..=0x0489
        | 0x0591..=0x05BD
        | 0x064B..=0x065F
        | 0x0E31 | 0x0E34..=0x0E3A | 0x0E47..=0x0E4E
        | 0x1AB0..=0x1AFF
        | 0x1DC0..=0x1DFF
        | 0x200C | 0x200D
        | 0x20D0..=0x20FF
        | 0x3099 | 0x309A
        | 0xFE00..=0xFE0F
        | 0xFE20..=0xFE2F
        | 0x1F3FB..=0x1F3FF
        | 0xE0020..=0xE007F
        | 0xE0100..=0xE01EF)
}

fn classify(c: char) -> CharClass {
    if is_extend(c) {
        CharClass::Extend
    } else if c.is_alphabetic() {
        CharClass::Letter(script_of(c))
    } else if c.is_numeric() {
        CharClass::Digit
    } else {
        CharClass::Symbol
    }
}

/// Coarse tokenizer with an optional set of reserved tokens that are never
/// cut (placeholders, tags). A reserved token preceded by a space is emitted
/// as a standalone meta-symbol unit followed by the token itself.
#[derive(Debug, Clone)]
pub struct CoarseTokenizer {
    meta_symbol: char,
    reserved: Vec<String>,
}

impl CoarseTokenizer {
    pub fn new(meta_symbol: char) -> Self {
        Self {
            meta_symbol,
            reserved: Vec::new(),
        }
    }

    pub fn with_reserved<I, S>(mut self, reserved: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.reserved = reserved.into_iter().map(Into::into).collect();
        self.reserved.sort_by(|a, b| b.len().cmp(&a.len()));
        self
    }

    pub fn meta_symbol(&self) -> char {
        self.meta_symbol
    }

    pub fn is_reserved(&self, unit: &str) -> bool {
        self.reserved.iter().any(|r| r == unit)
    }

    fn reserved_at<'a>(&'a self, rest: &str) -> Option<&'a str> {
        if !rest.starts_with('<') {
            return None;
        }
        self.reserved
            .iter()
            .find(|r| rest.starts_with(r.as_str()))
            .map(String::as_str)
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let meta = self.meta_symbol;
        let mut units = Vec::new();
        if text.is_empty() {
            return units;
        }
        let mut current = String::new();
        let mut current_class: Option<CharClass> = None;
        let mut pending_space = true;

        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            if let Some(token) = self.reserved_at(rest) {
                if !current.is_empty() {
                    units.push(std::mem::take(&mut current));
                }
                current_class = None;
                if pending_space {
                    units.push(meta.to_string());
                    pending_space = false;
                }
                units.push(token.to_string());
                rest = &rest[token.len()..];
                continue;
            }
            rest = &rest[c.len_utf8()..];

            if c == ' ' {
                if !current.is_empty() {
                    units.push(std::mem::take(&mut current));
                }
                current_class = None;
                if pending_space {
                    units.push(meta.to_string());
                }
                pending_space = true;
                continue;
            }

            let class = classify(c);
            if class == CharClass::Extend && current_class.is_some() {
                current.push(c);
                continue;
            }
            let class = if class == CharClass::Extend {
                CharClass::Symbol
            } else {
                class
            };
            if current_class.is_some_and(|cc| cc != class) {
                units.push(std::mem::take(&mut current));
            }
            if current.is_empty() && pending_space {
                current.push(meta);
                pending_space = false;
            }
            current.push(c);
            current_class = Some(class);
        }
        if !current.is_empty() {
            units.push(current);
        }
        if pending_space {
            units.push(meta.to_string());
        }
        units
    }
}

/// Splits `text` into word units with the meta symbol marking preceding whitespace.
pub fn coarse_tokenize(text: &str, meta_symbol: char) -> Vec<String> {
    CoarseTokenizer::new(meta_symbol).tokenize(text)
}

/// Concatenates pieces, maps the meta symbol back to a space and drops the
/// single leading space introduced for the first word.
pub fn detokenize<S: AsRef<str>>(pieces: &[S], meta_symbol: char) -> String {
    let mut out = String::new();
    for piece in pieces {
        for c in piece.as_ref().chars() {
            out.push(if c == meta_symbol { ' ' } else { c });
        }
    }
    if out.starts_with(' ') {
        out.remove(0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tok(s: &str) -> Vec<String> {
        coarse_tokenize(s, META_SYMBOL)
    }

    #[test]
    fn splits_on_space_and_class_change() {
        assert_eq!(tok("so tasty!!"), ["▁so", "▁tasty", "!!"]);
        assert_eq!(tok("a"), ["▁a"]);
        assert!(tok("").is_empty());
        assert_eq!(tok("abc123def"), ["▁abc", "123", "def"]);
        assert_eq!(tok("東京タワーへ"), ["▁東京", "タワー", "へ"]);
        assert_eq!(tok(";-)"), ["▁;-)"]);
    }

    #[test]
    fn combining_marks_stay_attached() {
        assert_eq!(tok("cafe\u{301}!"), ["▁cafe\u{301}", "!"]);
        assert_eq!(tok("\u{301}x"), ["▁\u{301}", "x"]);
    }

    #[test]
    fn irregular_spacing_is_preserved() {
        for s in ["a  b", " a", "a ", " ", "  ", "a\tb", "x   y  "] {
            assert_eq!(detokenize(&tok(s), META_SYMBOL), s, "{s:?}");
        }
        assert_eq!(tok("a  b"), ["▁a", "▁", "▁b"]);
    }

    #[test]
    fn reserved_tokens_are_atomic() {
        let t = CoarseTokenizer::new(META_SYMBOL).with_reserved(["<emoji>", "<user>"]);
        assert_eq!(
            t.tokenize("see <emoji> <user>x"),
            ["▁see", "▁", "<emoji>", "▁", "<user>", "x"]
        );
        assert_eq!(t.tokenize("<emoji>!"), ["▁", "<emoji>", "!"]);
        assert_eq!(t.tokenize("a<emoji"), ["▁a", "<", "emoji"]);
        let line = "see <emoji> <user>x <emoji>";
        assert_eq!(detokenize(&t.tokenize(line), META_SYMBOL), line);
    }

    #[test]
    fn detokenize_examples() {
        assert_eq!(detokenize(&["▁so", "▁tas", "ty"], META_SYMBOL), "so tasty");
        assert_eq!(detokenize::<&str>(&[], META_SYMBOL), "");
    }

    proptest! {
        #[test]
        fn round_trip(s in "[a-zA-Zé0-9 !?.,;:()'\"東京タワーへ\u{301}\t-]{0,60}") {
            let units = tok(&s);
            prop_assert_eq!(detokenize(&units, META_SYMBOL), s);
            prop_assert!(units.iter().all(|u| !u.is_empty()));
        }
    }
}

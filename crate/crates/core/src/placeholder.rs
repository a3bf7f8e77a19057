//! Emoji and Reddit-name placeholders.
//!
//! Emojis, `/u/user` mentions and `/r/subreddit` mentions are swapped for
//! `<emoji>`, `<user>` and `<reddit>` before segmentation. The originals are
//! kept per sentence in a [`PlaceholderMap`] and copied back into the
//! translation in source order.

use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use regex::Regex;
use thiserror::Error;

const EMOJI_RANGES: &str = include_str!("../data/emoji-ranges.txt");

pub const EMOJI_TOKEN: &str = "<emoji>";
pub const USER_TOKEN: &str = "<user>";
pub const REDDIT_TOKEN: &str = "<reddit>";

const MAX_NAME_LEN: usize = 30;

static NAME_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?P<user>(?:/[ \t]*)?\b[uU][ \t]*/[ \t]*[A-Za-z0-9_-]{1,30})|(?P<reddit>(?:/[ \t]*)?\b[rR][ \t]*/[ \t]*[A-Za-z0-9_-]{1,30})",
    )
    .expect("valid regex")
});

static DEFAULT_TABLE: LazyLock<EmojiTable> =
    LazyLock::new(|| EmojiTable::parse(EMOJI_RANGES).expect("shipped emoji table is valid"));

#[derive(Debug, Error)]
pub enum PlaceholderError {
    #[error("emoji table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("sidecar field {field:?}: {message}")]
    Sidecar { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlaceholderKind {
    Emoji,
    User,
    Reddit,
}

impl PlaceholderKind {
    pub const ALL: [PlaceholderKind; 3] = [Self::Emoji, Self::User, Self::Reddit];

    pub fn token(self) -> &'static str {
        match self {
            Self::Emoji => EMOJI_TOKEN,
            Self::User => USER_TOKEN,
            Self::Reddit => REDDIT_TOKEN,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Emoji => "emoji",
            Self::User => "user",
            Self::Reddit => "reddit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Sorted, non-overlapping codepoint ranges that start an emoji.
#[derive(Debug, Clone)]
pub struct EmojiTable {
    ranges: Vec<(u32, u32)>,
}

impl EmojiTable {
    pub fn parse(text: &str) -> Result<Self, PlaceholderError> {
        let mut ranges = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| PlaceholderError::Table {
                line: n + 1,
                message: message.to_string(),
            };
            let (start, end) = match line.split_once("..") {
                Some((s, e)) => (s, e),
                None => (line, line),
            };
            let start = u32::from_str_radix(start.trim(), 16).map_err(|_| err("bad start"))?;
            let end = u32::from_str_radix(end.trim(), 16).map_err(|_| err("bad end"))?;
            if end < start {
                return Err(err("range end before start"));
            }
            ranges.push((start, end));
        }
        ranges.sort_unstable();
        Ok(Self { ranges })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlaceholderError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> &'static EmojiTable {
        &DEFAULT_TABLE
    }

    pub fn is_emoji_start(&self, c: char) -> bool {
        let cp = c as u32;
        let idx = self.ranges.partition_point(|&(s, _)| s <= cp);
        idx > 0 && self.ranges[idx - 1].1 >= cp
    }

    /// Length in bytes of the emoji sequence at the start of `text`, if any.
    /// Modifiers, variation selectors, tag sequences and ZWJ chains count as
    /// part of one emoji; two regional indicators form one flag.
    pub fn match_len(&self, text: &str) -> Option<usize> {
        let mut chars = text.char_indices().peekable();
        let (_, first) = *chars.peek()?;
        if matches!(first, '0'..='9' | '#' | '*') {
            let mut it = text.chars().skip(1);
            let mut len = first.len_utf8();
            let mut next = it.next();
            if next == Some('\u{FE0F}') {
                len += 3;
                next = it.next();
            }
            return (next == Some('\u{20E3}')).then_some(len + 3);
        }
        if !self.is_emoji_start(first) {
            return None;
        }
        chars.next();
        let mut end = first.len_utf8();
        if is_regional_indicator(first) {
            if let Some(&(i, c)) = chars.peek() {
                if is_regional_indicator(c) {
                    chars.next();
                    end = i + c.len_utf8();
                }
            }
            return Some(end);
        }
        loop {
            match chars.peek().copied() {
                Some((i, c)) if is_emoji_modifier(c) => {
                    chars.next();
                    end = i + c.len_utf8();
                }
                Some((_, '\u{200D}')) => {
                    let mut look = chars.clone();
                    look.next();
                    match look.peek().copied() {
                        Some((j, c)) if self.is_emoji_start(c) => {
                            chars = look;
                            chars.next();
                            end = j + c.len_utf8();
                        }
                        _ => break,
                    }
                }
                _ => break,
            }
        }
        Some(end)
    }
}

fn is_regional_indicator(c: char) -> bool {
    ('\u{1F1E6}'..='\u{1F1FF}').contains(&c)
}

fn is_emoji_modifier(c: char) -> bool {
    matches!(c as u32, 0xFE0E | 0xFE0F | 0x20E3 | 0x1F3FB..=0x1F3FF | 0xE0020..=0xE007F)
}

/// Originals replaced in one sentence, per kind, in left-to-right order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlaceholderMap {
    entries: [Vec<String>; 3],
}

impl PlaceholderMap {
    pub fn get(&self, kind: PlaceholderKind) -> &[String] {
        &self.entries[kind.index()]
    }

    pub fn push(&mut self, kind: PlaceholderKind, original: impl Into<String>) {
        self.entries[kind.index()].push(original.into());
    }

    pub fn count(&self, kind: PlaceholderKind) -> usize {
        self.entries[kind.index()].len()
    }

    pub fn counts(&self) -> [usize; 3] {
        PlaceholderKind::ALL.map(|k| self.count(k))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(Vec::is_empty)
    }

    /// Sidecar line: tab-separated `kind:index:base64(original)` fields.
    pub fn to_sidecar(&self) -> String {
        let mut fields = Vec::new();
        for kind in PlaceholderKind::ALL {
            for (i, original) in self.get(kind).iter().enumerate() {
                fields.push(format!("{}:{}:{}", kind.name(), i, B64.encode(original)));
            }
        }
        fields.join("\t")
    }

    pub fn from_sidecar(line: &str) -> Result<Self, PlaceholderError> {
        let mut map = Self::default();
        for field in line.split('\t').filter(|f| !f.is_empty()) {
            let err = |message: &str| PlaceholderError::Sidecar {
                field: field.to_string(),
                message: message.to_string(),
            };
            let mut parts = field.splitn(3, ':');
            let (Some(kind), Some(index), Some(payload)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(err("expected kind:index:base64"));
            };
            let kind = PlaceholderKind::from_name(kind).ok_or_else(|| err("unknown kind"))?;
            let index: usize = index.parse().map_err(|_| err("bad index"))?;
            if index != map.count(kind) {
                return Err(err("indices must be contiguous from 0"));
            }
            let bytes = B64.decode(payload).map_err(|_| err("bad base64"))?;
            let original = String::from_utf8(bytes).map_err(|_| err("original is not UTF-8"))?;
            map.push(kind, original);
        }
        Ok(map)
    }
}

impl fmt::Display for PlaceholderMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sidecar())
    }
}

/// Anomalies seen while restoring placeholders into untrusted output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeReport {
    /// Target placeholders with no source original; deleted.
    pub surplus: [usize; 3],
    /// Source originals never referenced by the target; dropped.
    pub unused: [usize; 3],
}

impl DecodeReport {
    pub fn total_surplus(&self) -> usize {
        self.surplus.iter().sum()
    }

    pub fn total_unused(&self) -> usize {
        self.unused.iter().sum()
    }

    pub fn merge(&mut self, other: &DecodeReport) {
        for i in 0..3 {
            self.surplus[i] += other.surplus[i];
            self.unused[i] += other.unused[i];
        }
    }
}

/// Replaces emojis and Reddit names using the shipped emoji table.
pub fn encode_placeholders(text: &str) -> (String, PlaceholderMap) {
    encode_placeholders_with(text, EmojiTable::shipped())
}

pub fn encode_placeholders_with(text: &str, table: &EmojiTable) -> (String, PlaceholderMap) {
    let mut out = String::with_capacity(text.len());
    let mut map = PlaceholderMap::default();
    let mut pos = 0;
    for caps in NAME_RE.captures_iter(text) {
        let (kind, m) = match (caps.name("user"), caps.name("reddit")) {
            (Some(m), _) => (PlaceholderKind::User, m),
            (_, Some(m)) => (PlaceholderKind::Reddit, m),
            _ => continue,
        };
        // Longer than Reddit allows: not a name.
        let name_len = m.as_str().rsplit('/').next().map_or(0, |n| n.trim_start().len());
        let overflow = text[m.end()..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if name_len == MAX_NAME_LEN && overflow {
            continue;
        }
        encode_emojis(&text[pos..m.start()], table, &mut out, &mut map);
        out.push_str(kind.token());
        map.push(kind, m.as_str());
        pos = m.end();
    }
    encode_emojis(&text[pos..], table, &mut out, &mut map);
    (out, map)
}

fn encode_emojis(text: &str, table: &EmojiTable, out: &mut String, map: &mut PlaceholderMap) {
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if let Some(len) = table.match_len(rest) {
            out.push_str(EMOJI_TOKEN);
            map.push(PlaceholderKind::Emoji, &rest[..len]);
            rest = &rest[len..];
        } else {
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
}

fn token_at(text: &str) -> Option<PlaceholderKind> {
    PlaceholderKind::ALL
        .into_iter()
        .find(|k| text.starts_with(k.token()))
}

/// Puts source originals back into `target`. The i-th placeholder of a kind
/// receives the i-th original; surplus placeholders are deleted along with
/// one adjoining space.
pub fn decode_placeholders(target: &str, source_map: &PlaceholderMap) -> (String, DecodeReport) {
    let mut out = String::with_capacity(target.len() + 16);
    let mut used = [0usize; 3];
    let mut report = DecodeReport::default();
    let mut rest = target;
    let mut skip_space = false;
    while let Some(c) = rest.chars().next() {
        if let Some(kind) = token_at(rest) {
            rest = &rest[kind.token().len()..];
            let i = kind.index();
            match source_map.get(kind).get(used[i]) {
                Some(original) => {
                    out.push_str(original);
                    used[i] += 1;
                }
                None => {
                    report.surplus[i] += 1;
                    if out.ends_with(' ') {
                        out.pop();
                    } else {
                        skip_space = true;
                    }
                }
            }
            continue;
        }
        rest = &rest[c.len_utf8()..];
        if skip_space {
            skip_space = false;
            if c == ' ' {
                continue;
            }
        }
        out.push(c);
    }
    for kind in PlaceholderKind::ALL {
        let i = kind.index();
        report.unused[i] = source_map.count(kind).saturating_sub(used[i]);
    }
    (out, report)
}

/// Per-kind placeholder counts of an encoded line.
pub fn count_placeholders(encoded: &str) -> [usize; 3] {
    let mut counts = [0; 3];
    for kind in PlaceholderKind::ALL {
        counts[kind.index()] = encoded.matches(kind.token()).count();
    }
    counts
}

/// Keeps a training pair only when both sides hold the same number of
/// placeholders of every kind.
pub fn parity_filter(source: &PlaceholderMap, target: &PlaceholderMap) -> bool {
    source.counts() == target.counts()
}

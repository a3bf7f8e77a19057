use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::{NoiseError, VariantMap};

const CONFUSIONS_EN: &str = include_str!("../../data/noise/confusions.en.tsv");
const CONFUSIONS_FR: &str = include_str!("../../data/noise/confusions.fr.tsv");
const PUNCT_TABLE: &str = include_str!("../../data/noise/punct.tsv");

pub const DEFAULT_WORD_REPLACE_PROB: f64 = 0.1;
pub const DEFAULT_CHAR_OP_PROB: f64 = 0.05;
pub const DEFAULT_CONFUSION_PROB: f64 = 0.1;

/// Two interchangeable word forms; either one is swapped for the other.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionPair {
    pub form_a: String,
    pub form_b: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRuleSet {
    pub confusions: Vec<ConfusionPair>,
    /// `(from, to)` punctuation rewrites.
    pub punct_table: Vec<(String, String)>,
    pub word_replace_prob: f64,
    pub punct_substitution_prob: f64,
    pub letter_swap_prob: f64,
    pub space_around_punct_prob: f64,
    pub accent_removal_prob: f64,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn check_prob(name: &str, value: f64) -> Result<(), NoiseError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(NoiseError::Probability {
            name: name.to_string(),
            value,
        })
    }
}

fn read(path: &Path) -> Result<String, NoiseError> {
    std::fs::read_to_string(path).map_err(|source| NoiseError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ConfusionPair {
    /// Parses `form_a<TAB>form_b[<TAB>probability]` lines.
    pub fn parse_list(text: &str, default_prob: f64) -> Result<Vec<Self>, NoiseError> {
        let mut out = Vec::new();
        for (line, l) in data_lines(text) {
            let fields: Vec<&str> = l.split('\t').collect();
            let bad = |message: String| NoiseError::Parse { line, message };
            let (a, b, p) = match fields.as_slice() {
                [a, b] => (*a, *b, default_prob),
                [a, b, p] => (
                    *a,
                    *b,
                    p.trim().parse::<f64>().map_err(|e| bad(format!("bad probability: {e}")))?,
                ),
                _ => return Err(bad("expected 2 or 3 tab-separated fields".into())),
            };
            if a.is_empty() || b.is_empty() || a == b {
                return Err(bad(format!("confusion forms must be distinct and non-empty: `{a}` / `{b}`")));
            }
            check_prob(&format!("confusion {a}/{b}"), p)?;
            out.push(ConfusionPair {
                form_a: a.to_string(),
                form_b: b.to_string(),
                probability: p,
            });
        }
        Ok(out)
    }
}

/// Parses `from<TAB>to` punctuation rewrites.
pub fn parse_punct_table(text: &str) -> Result<Vec<(String, String)>, NoiseError> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        match l.split_once('\t') {
            Some((from, to)) if !from.is_empty() && from != to && !to.contains('\t') => {
                out.push((from.to_string(), to.to_string()))
            }
            _ => {
                return Err(NoiseError::Parse {
                    line,
                    message: "expected `from<TAB>to` with distinct sides".into(),
                })
            }
        }
    }
    Ok(out)
}

impl NoiseRuleSet {
    /// No rules, every probability 0: the identity transform.
    pub fn zero() -> Self {
        Self {
            confusions: Vec::new(),
            punct_table: Vec::new(),
            word_replace_prob: 0.0,
            punct_substitution_prob: 0.0,
            letter_swap_prob: 0.0,
            space_around_punct_prob: 0.0,
            accent_removal_prob: 0.0,
        }
    }

    /// Shipped confusion list and punctuation table with default rates.
    pub fn for_language(lang: &str) -> Result<Self, NoiseError> {
        let list = match lang {
            "en" => CONFUSIONS_EN,
            "fr" => CONFUSIONS_FR,
            "ja" => "",
            other => return Err(NoiseError::UnknownLanguage(other.to_string())),
        };
        Ok(Self {
            confusions: ConfusionPair::parse_list(list, DEFAULT_CONFUSION_PROB)?,
            punct_table: parse_punct_table(PUNCT_TABLE)?,
            word_replace_prob: DEFAULT_WORD_REPLACE_PROB,
            punct_substitution_prob: DEFAULT_CHAR_OP_PROB,
            letter_swap_prob: DEFAULT_CHAR_OP_PROB,
            space_around_punct_prob: DEFAULT_CHAR_OP_PROB,
            accent_removal_prob: DEFAULT_CHAR_OP_PROB,
        })
    }

    pub fn with_confusions_file(mut self, path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        self.confusions = ConfusionPair::parse_list(&read(path.as_ref())?, DEFAULT_CONFUSION_PROB)?;
        Ok(self)
    }

    pub fn with_punct_file(mut self, path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        self.punct_table = parse_punct_table(&read(path.as_ref())?)?;
        Ok(self)
    }

    /// Sets every rate, including each confusion pair's, to `p`.
    pub fn with_all_probabilities(mut self, p: f64) -> Self {
        self.word_replace_prob = p;
        self.punct_substitution_prob = p;
        self.letter_swap_prob = p;
        self.space_around_punct_prob = p;
        self.accent_removal_prob = p;
        for c in &mut self.confusions {
            c.probability = p;
        }
        self
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        check_prob("word_replace", self.word_replace_prob)?;
        check_prob("punct_substitution", self.punct_substitution_prob)?;
        check_prob("letter_swap", self.letter_swap_prob)?;
        check_prob("space_around_punct", self.space_around_punct_prob)?;
        check_prob("accent_removal", self.accent_removal_prob)?;
        for c in &self.confusions {
            check_prob(&format!("confusion {}/{}", c.form_a, c.form_b), c.probability)?;
        }
        Ok(())
    }

    fn confusion_index(&self) -> HashMap<&str, Vec<(&str, f64)>> {
        let mut index: HashMap<&str, Vec<(&str, f64)>> = HashMap::new();
        for c in &self.confusions {
            index.entry(&c.form_a).or_default().push((&c.form_b, c.probability));
            index.entry(&c.form_b).or_default().push((&c.form_a, c.probability));
        }
        index
    }
}

/// Applies the rules to one line with a stream seeded by `seed` alone.
pub fn apply_noise(line: &str, rules: &NoiseRuleSet, variants: &VariantMap, seed: u64) -> String {
    let mut rng = crate::seed::derive_rng(seed, super::NOISE_SUBSYSTEM, 0);
    noise_line(line, rules, variants, &mut rng)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Byte range of the word core: first to last alphanumeric character, so
/// inner apostrophes and hyphens stay in the core.
fn core_range(token: &str) -> Option<(usize, usize)> {
    let start = token.find(is_word_char)?;
    let (last, c) = token.char_indices().rev().find(|&(_, c)| is_word_char(c))?;
    Some((start, last + c.len_utf8()))
}

fn is_reserved(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

/// Copies the casing shape of `original` onto `replacement`.
fn match_case(original: &str, replacement: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return replacement.to_uppercase();
    }
    if letters.first().is_some_and(|c| c.is_uppercase()) {
        let mut chars = replacement.chars();
        if let Some(first) = chars.next() {
            return first.to_uppercase().chain(chars).collect();
        }
    }
    replacement.to_string()
}

fn strip_accents(text: &str) -> String {
    text.nfd().filter(|&c| !is_combining_mark(c)).nfc().collect()
}

fn swap_letters<R: Rng>(core: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = core.chars().collect();
    let positions: Vec<usize> = (0..chars.len().saturating_sub(1))
        .filter(|&i| chars[i].is_alphabetic() && chars[i + 1].is_alphabetic() && chars[i] != chars[i + 1])
        .collect();
    if !positions.is_empty() {
        let i = positions[rng.gen_range(0..positions.len())];
        chars.swap(i, i + 1);
    }
    chars.into_iter().collect()
}

fn substitute_punct<R: Rng>(token: &str, table: &[(String, String)], rng: &mut R) -> String {
    // candidate (byte offset, from, to) occurrences outside the word core
    let core = core_range(token).unwrap_or((token.len(), token.len()));
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < token.len() {
        if i >= core.0 && i < core.1 {
            i = core.1;
            continue;
        }
        let rest = &token[i..];
        let best = table
            .iter()
            .filter(|(from, _)| rest.starts_with(from.as_str()) && (i >= core.1 || i + from.len() <= core.0))
            .map(|(from, _)| from.len())
            .max();
        match best {
            Some(len) => {
                for (from, to) in table.iter().filter(|(from, _)| from.len() == len && rest.starts_with(from.as_str())) {
                    candidates.push((i, from.as_str(), to.as_str()));
                }
                i += len;
            }
            None => i += rest.chars().next().map_or(1, char::len_utf8),
        }
    }
    if candidates.is_empty() {
        return token.to_string();
    }
    let (at, from, to) = candidates[rng.gen_range(0..candidates.len())];
    format!("{}{}{}", &token[..at], to, &token[at + from.len()..])
}

fn space_around_punct<R: Rng>(token: &str, rng: &mut R) -> String {
    let chars: Vec<char> = token.chars().collect();
    let positions: Vec<usize> = (0..chars.len())
        .filter(|&i| chars[i].is_ascii_punctuation() || (!chars[i].is_alphanumeric() && !chars[i].is_whitespace()))
        .filter(|&i| chars.len() > 1 && (i > 0 || i + 1 < chars.len()))
        .collect();
    if positions.is_empty() {
        return token.to_string();
    }
    let i = positions[rng.gen_range(0..positions.len())];
    let mut out: String = chars[..i].iter().collect();
    if i > 0 {
        out.push(' ');
        out.push(chars[i]);
    } else {
        out.push(chars[i]);
        out.push(' ');
    }
    out.extend(&chars[i + 1..]);
    out
}

fn noise_token<R: Rng>(
    token: &str,
    rules: &NoiseRuleSet,
    confusions: &HashMap<&str, Vec<(&str, f64)>>,
    variants: &VariantMap,
    rng: &mut R,
) -> String {
    let mut token = token.to_string();
    if let Some((s, e)) = core_range(&token) {
        let core = &token[s..e];
        let lower = core.to_lowercase();
        let mut new_core = core.to_string();
        let mut replaced = false;
        let found = variants.get(&lower);
        if !found.is_empty() && rng.gen_bool(rules.word_replace_prob) {
            let v = &found[rng.gen_range(0..found.len())];
            new_core = match_case(core, &v.form);
            replaced = true;
        }
        if !replaced {
            if let Some(options) = confusions.get(lower.as_str()) {
                for &(other, p) in options {
                    if rng.gen_bool(p) {
                        new_core = match_case(core, other);
                        break;
                    }
                }
            }
        }
        if rng.gen_bool(rules.letter_swap_prob) {
            new_core = swap_letters(&new_core, rng);
        }
        if rng.gen_bool(rules.accent_removal_prob) {
            new_core = strip_accents(&new_core);
        }
        token = format!("{}{}{}", &token[..s], new_core, &token[e..]);
    }
    if !rules.punct_table.is_empty() && rng.gen_bool(rules.punct_substitution_prob) {
        token = substitute_punct(&token, &rules.punct_table, rng);
    }
    if rng.gen_bool(rules.space_around_punct_prob) {
        token = space_around_punct(&token, rng);
    }
    token
}

/// Space-delimited tokens are noised independently; reserved `<...>`
/// tokens and the original spacing are preserved.
pub(crate) fn noise_line<R: Rng>(line: &str, rules: &NoiseRuleSet, variants: &VariantMap, rng: &mut R) -> String {
    let confusions = rules.confusion_index();
    let mut out = String::with_capacity(line.len() + 8);
    for (i, token) in line.split(' ').enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if token.is_empty() || is_reserved(token) {
            out.push_str(token);
        } else {
            out.push_str(&noise_token(token, rules, &confusions, variants, rng));
        }
    }
    out
}

//! Language identification.
//!
//! The built-in identifier is a character n-gram (1..=3) naive Bayes model
//! trained from short seed texts shipped with the crate. It only has to tell
//! apart the languages of one corpus pair, so a few dozen sentences per
//! language are enough.

use std::collections::HashMap;

use thiserror::Error;

const SEED_EN: &str = include_str!("../../data/lid/en.txt");
const SEED_FR: &str = include_str!("../../data/lid/fr.txt");
const SEED_JA: &str = include_str!("../../data/lid/ja.txt");

const MAX_ORDER: usize = 3;

#[derive(Debug, Error)]
pub enum LidError {
    #[error("language identifier failed: {0}")]
    Classifier(String),
}

/// Pluggable language identifier. `Ok(None)` means the line carries no
/// usable evidence (empty, digits only...).
pub trait LanguageIdentifier: Sync {
    fn identify(&self, text: &str) -> Result<Option<String>, LidError>;

    fn identify_batch(&self, texts: &[&str]) -> Vec<Result<Option<String>, LidError>> {
        texts.iter().map(|t| self.identify(t)).collect()
    }
}

#[derive(Debug, Clone)]
struct LangProfile {
    code: String,
    counts: HashMap<String, u32>,
    totals: [u64; MAX_ORDER],
}

/// Character n-gram naive Bayes identifier.
#[derive(Debug, Clone)]
pub struct NgramIdentifier {
    profiles: Vec<LangProfile>,
    vocab_sizes: [usize; MAX_ORDER],
}

fn features(text: &str) -> Vec<String> {
    let mut chars: Vec<char> = vec![' '];
    for c in text.chars() {
        let c = if c.is_alphabetic() {
            c.to_lowercase().next().unwrap_or(c)
        } else if c.is_whitespace() || c.is_ascii_punctuation() || c.is_numeric() {
            ' '
        } else {
            c
        };
        if c == ' ' && chars.last() == Some(&' ') {
            continue;
        }
        chars.push(c);
    }
    if chars.last() != Some(&' ') {
        chars.push(' ');
    }
    let mut out = Vec::new();
    for order in 1..=MAX_ORDER {
        for w in chars.windows(order) {
            if order == 1 && w[0] == ' ' {
                continue;
            }
            out.push(w.iter().collect());
        }
    }
    out
}

fn has_evidence(text: &str) -> bool {
    text.chars().any(char::is_alphabetic)
}

impl NgramIdentifier {
    pub fn train<'a>(seeds: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut profiles = Vec::new();
        let mut vocab: [std::collections::HashSet<String>; MAX_ORDER] = Default::default();
        for (code, text) in seeds {
            let mut counts: HashMap<String, u32> = HashMap::new();
            let mut totals = [0u64; MAX_ORDER];
            for line in text.lines() {
                for f in features(line) {
                    let order = f.chars().count();
                    totals[order - 1] += 1;
                    vocab[order - 1].insert(f.clone());
                    *counts.entry(f).or_default() += 1;
                }
            }
            profiles.push(LangProfile {
                code: code.to_string(),
                counts,
                totals,
            });
        }
        let vocab_sizes = [vocab[0].len(), vocab[1].len(), vocab[2].len()];
        Self {
            profiles,
            vocab_sizes,
        }
    }

    /// English, French and Japanese from the shipped seed texts.
    pub fn builtin() -> Self {
        Self::train([("en", SEED_EN), ("fr", SEED_FR), ("ja", SEED_JA)])
    }

    /// Restricts the model to the given language codes.
    pub fn restricted_to(mut self, codes: &[&str]) -> Self {
        self.profiles.retain(|p| codes.contains(&p.code.as_str()));
        self
    }

    pub fn languages(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.code.as_str()).collect()
    }

    /// Log-likelihood per language, in profile order.
    pub fn scores(&self, text: &str) -> Vec<(String, f64)> {
        let feats = features(text);
        self.profiles
            .iter()
            .map(|p| {
                let mut score = 0.0;
                for f in &feats {
                    let order = f.chars().count() - 1;
                    let count = p.counts.get(f).copied().unwrap_or(0) as f64;
                    let denom = p.totals[order] as f64 + self.vocab_sizes[order] as f64 + 1.0;
                    score += ((count + 1.0) / denom).ln();
                }
                (p.code.clone(), score)
            })
            .collect()
    }
}

impl LanguageIdentifier for NgramIdentifier {
    fn identify(&self, text: &str) -> Result<Option<String>, LidError> {
        if !has_evidence(text) || self.profiles.is_empty() {
            return Ok(None);
        }
        let best = self
            .scores(text)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .map(|(code, _)| code);
        Ok(best)
    }
}

/// Identifier backed by an external line hook that prints one language code
/// per input line (an empty line means no decision).
#[derive(Debug, Clone)]
pub struct HookIdentifier {
    pub hook: crate::hook::LineHook,
}

impl LanguageIdentifier for HookIdentifier {
    fn identify(&self, text: &str) -> Result<Option<String>, LidError> {
        self.identify_batch(&[text]).pop().expect("one result per input")
    }

    fn identify_batch(&self, texts: &[&str]) -> Vec<Result<Option<String>, LidError>> {
        match self.hook.run(texts, &[]) {
            Ok(codes) => codes
                .into_iter()
                .map(|c| {
                    let c = c.trim();
                    Ok((!c.is_empty()).then(|| c.to_string()))
                })
                .collect(),
            Err(e) => {
                let msg = e.to_string();
                texts.iter().map(|_| Err(LidError::Classifier(msg.clone()))).collect()
            }
        }
    }
}

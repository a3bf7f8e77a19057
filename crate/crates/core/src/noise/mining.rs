use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use super::distance::{collapse_repetitions, damerau_levenshtein};
use super::NoiseError;

/// Known word forms, lowercased.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: HashSet<String>,
}

impl Lexicon {
    pub fn from_words<I, S>(words: I) -> Result<Self, NoiseError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(NoiseError::EmptyLexicon);
        }
        Ok(Self { words })
    }

    /// One word per line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NoiseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_words(text.lines())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub form: String,
    pub freq: u64,
}

/// Canonical word -> observed noisy variants, each list sorted by form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariantMap {
    entries: BTreeMap<String, Vec<Variant>>,
}

impl VariantMap {
    /// Adds `freq` occurrences of `variant`; a variant equal to its
    /// canonical form is ignored.
    pub fn insert(&mut self, canonical: &str, variant: &str, freq: u64) {
        if canonical == variant {
            return;
        }
        let list = self.entries.entry(canonical.to_string()).or_default();
        match list.binary_search_by(|v| v.form.as_str().cmp(variant)) {
            Ok(i) => list[i].freq += freq,
            Err(i) => list.insert(
                i,
                Variant {
                    form: variant.to_string(),
                    freq,
                },
            ),
        }
    }

    pub fn get(&self, canonical: &str) -> &[Variant] {
        self.entries.get(canonical).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Variant])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Number of canonical words with at least one variant.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn variant_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// `canonical<TAB>variant<TAB>freq` lines, sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (canonical, list) in &self.entries {
            for v in list {
                out.push_str(&format!("{canonical}\t{}\t{}\n", v.form, v.freq));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NoiseError> {
        let mut map = Self::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| NoiseError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [canonical, form, freq] = fields.as_slice() else {
                return Err(bad("expected `canonical<TAB>variant<TAB>freq`"));
            };
            if canonical == form {
                return Err(bad("variant equals its canonical form"));
            }
            let freq = freq.parse().map_err(|_| bad("bad frequency"))?;
            map.insert(canonical, form, freq);
        }
        Ok(map)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NoiseError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|source| NoiseError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NoiseError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| NoiseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningOptions {
    /// Variants seen fewer times than this are discarded.
    pub min_freq: u64,
}

impl Default for MiningOptions {
    fn default() -> Self {
        Self { min_freq: 1 }
    }
}

/// Largest accepted distance for a canonical word of `len` characters.
pub fn max_distance_for(len: usize) -> Option<usize> {
    match len {
        0..=3 => None,
        4..=7 => Some(1),
        _ => Some(2),
    }
}

/// Lowercased word tokens: outer punctuation stripped, letters required,
/// only apostrophes and hyphens allowed inside.
fn words(line: &str) -> impl Iterator<Item = String> + '_ {
    line.split_whitespace().filter_map(|tok| {
        let w = tok.trim_matches(|c: char| !c.is_alphanumeric());
        let ok = !w.is_empty()
            && w.chars().any(char::is_alphabetic)
            && w.chars().all(|c| c.is_alphabetic() || c == '\'' || c == '’' || c == '-');
        ok.then(|| w.to_lowercase())
    })
}

struct Candidate {
    word: String,
    collapsed: Vec<char>,
    max_distance: usize,
    freq: u64,
}

/// Maps every out-of-lexicon word of the monolingual text to its closest
/// lexicon word under [`super::extended_edit_distance`], with the
/// length-dependent threshold of [`max_distance_for`]. Ties go to the more
/// frequent lexicon word, then to the smaller one.
pub fn mine_variants<I, S>(monolingual: I, lexicon: &Lexicon, opts: MiningOptions) -> Result<VariantMap, NoiseError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if lexicon.is_empty() {
        return Err(NoiseError::EmptyLexicon);
    }
    let mut known: HashMap<String, u64> = HashMap::new();
    let mut unknown: HashMap<String, u64> = HashMap::new();
    for line in monolingual {
        for w in words(line.as_ref()) {
            let bucket = if lexicon.contains(&w) { &mut known } else { &mut unknown };
            *bucket.entry(w).or_default() += 1;
        }
    }

    // lexicon candidates bucketed by collapsed length
    let mut by_len: HashMap<usize, Vec<Candidate>> = HashMap::new();
    for w in &lexicon.words {
        let Some(max_distance) = max_distance_for(w.chars().count()) else {
            continue;
        };
        let collapsed: Vec<char> = collapse_repetitions(w).chars().collect();
        by_len.entry(collapsed.len()).or_default().push(Candidate {
            word: w.clone(),
            collapsed,
            max_distance,
            freq: known.get(w).copied().unwrap_or(0),
        });
    }

    let mut oov: Vec<(&String, u64)> = unknown
        .iter()
        .filter(|(_, &f)| f >= opts.min_freq)
        .map(|(w, &f)| (w, f))
        .collect();
    oov.sort();

    let matches: Vec<(String, &String, u64)> = oov
        .par_iter()
        .filter_map(|&(w, f)| {
            let collapsed: Vec<char> = collapse_repetitions(w).chars().collect();
            let n = collapsed.len();
            let mut best: Option<(usize, u64, &str)> = None;
            for len in n.saturating_sub(2)..=n + 2 {
                for c in by_len.get(&len).into_iter().flatten() {
                    if len.abs_diff(n) > c.max_distance {
                        continue;
                    }
                    let d = damerau_levenshtein(&collapsed, &c.collapsed);
                    if d > c.max_distance {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bd, bf, bw)) => (d, std::cmp::Reverse(c.freq), c.word.as_str()) < (bd, std::cmp::Reverse(bf), bw),
                    };
                    if better {
                        best = Some((d, c.freq, &c.word));
                    }
                }
            }
            best.map(|(_, _, canonical)| (canonical.to_string(), w, f))
        })
        .collect();

    let mut map = VariantMap::default();
    for (canonical, variant, freq) in matches {
        map.insert(&canonical, variant, freq);
    }
    Ok(map)
}

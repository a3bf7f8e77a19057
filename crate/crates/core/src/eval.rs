//! Corpus BLEU: mixed case, one reference, exponential smoothing, 13a
//! tokenization. Numerically identical to sacreBLEU 1.3.1 with those settings.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use thiserror::Error;

pub const MAX_ORDER: usize = 4;

pub const SIGNATURE: &str = "BLEU+case.mixed+numrefs.1+smooth.exp+tok.13a+version.1.3.1";
pub const SIGNATURE_PRETOKENIZED: &str = "BLEU+case.mixed+numrefs.1+smooth.exp+tok.none+version.1.3.1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("no segments to score")]
    EmptyCorpus,
}

/// Python's `str.isspace`, which also covers the ASCII separators 0x1C..0x1F.
fn is_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

struct Rules13a {
    symbols: Regex,
    period_comma_after: Regex,
    period_comma_before: Regex,
    digit_dash: Regex,
    spaces: Regex,
}

fn rules() -> &'static Rules13a {
    static RULES: OnceLock<Rules13a> = OnceLock::new();
    RULES.get_or_init(|| Rules13a {
        symbols: Regex::new(r"([\x20-\x26\x28-\x2B\x2F\x3A-\x40\x5B-\x60\x7B-\x7E])").unwrap(),
        period_comma_after: Regex::new(r"([^0-9])([.,])").unwrap(),
        period_comma_before: Regex::new(r"([.,])([^0-9])").unwrap(),
        digit_dash: Regex::new(r"([0-9])(-)").unwrap(),
        spaces: Regex::new(r"[\s\x1C-\x1F]+").unwrap(),
    })
}

/// mteval-v13a normalization; returns the space-joined token string.
pub fn normalize_13a(line: &str) -> String {
    let r = rules();
    let norm = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ")
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">");
    let norm = format!(" {norm} ");
    let norm = r.symbols.replace_all(&norm, " ${1} ");
    let norm = r.period_comma_after.replace_all(&norm, "${1} ${2} ");
    let norm = r.period_comma_before.replace_all(&norm, " ${1} ${2}");
    let norm = r.digit_dash.replace_all(&norm, "${1} ${2} ");
    let norm = r.spaces.replace_all(&norm, " ");
    norm.trim_matches(is_space).to_string()
}

pub fn tokenize_13a(line: &str) -> Vec<String> {
    normalize_13a(line).split(is_space).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Sufficient statistics; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn merge(mut self, other: Self) -> Self {
        for n in 0..MAX_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }
}

fn ngram_counts<'a, 'b>(tokens: &'b [&'a str]) -> HashMap<&'b [&'a str], u64> {
    let mut counts = HashMap::new();
    for n in 1..=MAX_ORDER {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Statistics for one whitespace-tokenized segment pair.
pub fn segment_stats(hyp: &[&str], reference: &[&str]) -> BleuStats {
    let mut stats = BleuStats {
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    let ref_counts = ngram_counts(reference);
    for (gram, count) in ngram_counts(hyp) {
        let n = gram.len() - 1;
        stats.correct[n] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
        stats.total[n] += count;
    }
    stats
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// Percentage in `[0, 100]`.
    pub score: f64,
    /// Smoothed modified precisions as fractions in `[0, 1]`.
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub stats: BleuStats,
    pub signature: &'static str,
}

impl BleuScore {
    pub fn hyp_len(&self) -> u64 {
        self.stats.hyp_len
    }

    pub fn ref_len(&self) -> u64 {
        self.stats.ref_len
    }

    /// Score from statistics with exponential smoothing: each order without
    /// matches doubles a running factor and gets `1 / (factor * total)`.
    pub fn from_stats(stats: BleuStats, signature: &'static str) -> Self {
        let mut percent = [0.0f64; MAX_ORDER];
        let mut smooth = 1.0f64;
        for n in 0..MAX_ORDER {
            if stats.total[n] == 0 {
                break;
            }
            if stats.correct[n] == 0 {
                smooth *= 2.0;
                percent[n] = 100.0 / (smooth * stats.total[n] as f64);
            } else {
                percent[n] = 100.0 * stats.correct[n] as f64 / stats.total[n] as f64;
            }
        }
        let brevity_penalty = if stats.hyp_len < stats.ref_len {
            if stats.hyp_len > 0 {
                (1.0 - stats.ref_len as f64 / stats.hyp_len as f64).exp()
            } else {
                0.0
            }
        } else {
            1.0
        };
        let score = if percent.contains(&0.0) {
            0.0
        } else {
            let log_sum: f64 = percent.iter().map(|p| p.ln()).sum();
            brevity_penalty * (log_sum / MAX_ORDER as f64).exp()
        };
        Self {
            score,
            precisions: percent.map(|p| p / 100.0),
            brevity_penalty,
            stats,
            signature,
        }
    }
}

impl fmt::Display for BleuScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precisions.map(|p| p * 100.0);
        let ratio = if self.stats.ref_len > 0 {
            self.stats.hyp_len as f64 / self.stats.ref_len as f64
        } else {
            0.0
        };
        write!(
            f,
            "{} = {:.2} {:.1}/{:.1}/{:.1}/{:.1} (BP = {:.3} ratio = {:.3} hyp_len = {} ref_len = {})",
            self.signature,
            self.score,
            p[0],
            p[1],
            p[2],
            p[3],
            self.brevity_penalty,
            ratio,
            self.stats.hyp_len,
            self.stats.ref_len
        )
    }
}

fn check_lengths(hyps: usize, refs: usize) -> Result<(), EvalError> {
    if hyps != refs {
        return Err(EvalError::LengthMismatch { hyps, refs });
    }
    if hyps == 0 {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(())
}

/// Corpus BLEU over detokenized text.
pub fn corpus_bleu<H: AsRef<str> + Sync, R: AsRef<str> + Sync>(hyps: &[H], refs: &[R]) -> Result<BleuScore, EvalError> {
    pretokenized_bleu(hyps, refs, false)
}

/// With `already_tokenized`, lines are split on whitespace as given
/// (e.g. after an external Japanese tokenizer); otherwise 13a applies.
pub fn pretokenized_bleu<H: AsRef<str> + Sync, R: AsRef<str> + Sync>(
    hyps: &[H],
    refs: &[R],
    already_tokenized: bool,
) -> Result<BleuScore, EvalError> {
    check_lengths(hyps.len(), refs.len())?;
    let stats = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| {
            let (h, r) = (h.as_ref().trim_end_matches(is_space), r.as_ref().trim_end_matches(is_space));
            if already_tokenized {
                let ht: Vec<&str> = h.split(is_space).filter(|t| !t.is_empty()).collect();
                let rt: Vec<&str> = r.split(is_space).filter(|t| !t.is_empty()).collect();
                segment_stats(&ht, &rt)
            } else {
                let (hn, rn) = (normalize_13a(h), normalize_13a(r));
                let ht: Vec<&str> = hn.split(is_space).filter(|t| !t.is_empty()).collect();
                let rt: Vec<&str> = rn.split(is_space).filter(|t| !t.is_empty()).collect();
                segment_stats(&ht, &rt)
            }
        })
        .reduce(BleuStats::default, BleuStats::merge);
    let signature = if already_tokenized { SIGNATURE_PRETOKENIZED } else { SIGNATURE };
    Ok(BleuScore::from_stats(stats, signature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize_13a("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(tokenize_13a("3.5"), ["3.5"]);
        assert!(tokenize_13a("").is_empty());
        assert_eq!(tokenize_13a("1,000 people-ish, 5-6"), ["1,000", "people-ish", ",", "5", "-", "6"]);
        assert_eq!(tokenize_13a("&quot;ok&quot; it's"), ["\"", "ok", "\"", "it's"]);
        assert_eq!(tokenize_13a("end."), ["end", "."]);
        assert_eq!(tokenize_13a("a<skipped>b"), ["ab"]);
    }

    #[test]
    fn perfect_match() {
        let lines = ["The cat sat on the mat.", "Another line here, with commas!"];
        let s = corpus_bleu(&lines, &lines).unwrap();
        assert!((s.score - 100.0).abs() < 1e-9);
        assert_eq!(s.brevity_penalty, 1.0);
    }

    #[test]
    fn brevity_penalty_half_length() {
        let s = corpus_bleu(&["a b c d"], &["a b c d a b c d"]).unwrap();
        assert!((s.brevity_penalty - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(s.precisions[0], 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(corpus_bleu(&["a"], &["a", "b"]).unwrap_err(), EvalError::LengthMismatch { hyps: 1, refs: 2 });
        let empty: [&str; 0] = [];
        assert_eq!(corpus_bleu(&empty, &empty).unwrap_err(), EvalError::EmptyCorpus);
    }

    #[test]
    fn short_hypothesis_scores_zero() {
        // no 4-grams at all: the order loop stops and the score is 0
        let s = corpus_bleu(&["a b"], &["a b"]).unwrap();
        assert_eq!(s.score, 0.0);
        let s = corpus_bleu(&[""], &["a b"]).unwrap();
        assert_eq!((s.score, s.brevity_penalty), (0.0, 0.0));
    }

    #[test]
    fn pretokenized_flag() {
        let s = pretokenized_bleu(&["a b c d e"], &["a b c d e"], true).unwrap();
        assert!((s.score - 100.0).abs() < 1e-9);
        assert_eq!(s.signature, SIGNATURE_PRETOKENIZED);
        let a = pretokenized_bleu(&["w x y z q"], &["w x y q z"], true).unwrap();
        let b = pretokenized_bleu(&["w x y z q"], &["w x y q z"], false).unwrap();
        assert_eq!(a.score, b.score);
    }

    #[test]
    fn display_format() {
        let s = corpus_bleu(&["a b c d"], &["a b c d"]).unwrap();
        assert_eq!(
            s.to_string(),
            format!("{SIGNATURE} = 100.00 100.0/100.0/100.0/100.0 (BP = 1.000 ratio = 1.000 hyp_len = 4 ref_len = 4)")
        );
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in proptest::collection::vec(("[a-d ]{0,12}", "[a-d ]{0,12}"), 1..8), rot in 0usize..8) {
            let (h, r): (Vec<String>, Vec<String>) = pairs.iter().cloned().unzip();
            let k = rot % h.len();
            let mut h2 = h.clone();
            let mut r2 = r.clone();
            h2.rotate_left(k);
            r2.rotate_left(k);
            prop_assert_eq!(corpus_bleu(&h, &r).unwrap().stats, corpus_bleu(&h2, &r2).unwrap().stats);
        }

        #[test]
        fn decomposition(pairs in proptest::collection::vec(("[a-d ,.]{0,16}", "[a-d ,.]{0,16}"), 1..6)) {
            let (h, r): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
            let s = corpus_bleu(&h, &r).unwrap();
            let geo = s.precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0;
            let expected = if s.precisions.contains(&0.0) { 0.0 } else { s.brevity_penalty * geo.exp() * 100.0 };
            prop_assert!((s.score - expected).abs() < 1e-9);
            prop_assert!((0.0..=100.0 + 1e-9).contains(&s.score));
            if s.stats.hyp_len >= s.stats.ref_len {
                prop_assert_eq!(s.brevity_penalty, 1.0);
            }
        }
    }
}

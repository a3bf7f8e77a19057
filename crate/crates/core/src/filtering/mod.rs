//! Parallel-corpus cleaning.
//!
//! Rules run in a fixed order: origin exclusion, copy detection, language
//! identification, length ratio, attention statistics. The first rule that
//! rejects a pair is charged with the drop, so a [`FilterReport`] always
//! satisfies `input == kept + dropped`.

pub mod attention;
pub mod lid;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

pub use attention::{
    attention_filter, attention_stats, attention_stats_at, AttentionFilterConfig, AttentionMatrix,
    AttentionReader, AttentionStats,
};
pub use lid::{HookIdentifier, LanguageIdentifier, LidError, NgramIdentifier};

use crate::pair::{SentencePair, Verdict};
use crate::subword::pretok::{coarse_tokenize, META_SYMBOL};

pub const DEFAULT_MAX_RATIO: f64 = 1.8;
pub const COMMONCRAWL_MAX_RATIO: f64 = 1.5;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("malformed attention matrix: {0}")]
    MalformedMatrix(String),
    #[error("attention stream has {attention} matrices for {corpus} pairs")]
    AlignmentError { corpus: usize, attention: usize },
    #[error("attention file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("max ratio must be >= 1, got {0}")]
    BadRatio(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn copy_key(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Drops pairs whose target is a (case/punctuation-insensitive) copy of the source.
pub fn copy_filter(pair: &SentencePair) -> Verdict {
    Verdict::keep_if(copy_key(&pair.source) != copy_key(&pair.target))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LidOutcome {
    Keep,
    Drop,
    /// The classifier errored; counted apart from ordinary LID drops.
    Failure,
}

pub fn lid_filter(
    pair: &SentencePair,
    classifier: &dyn LanguageIdentifier,
    expected: (&str, &str),
) -> LidOutcome {
    let results = classifier.identify_batch(&[&pair.source, &pair.target]);
    lid_outcome(&results[0], &results[1], expected)
}

fn lid_outcome(
    source: &Result<Option<String>, LidError>,
    target: &Result<Option<String>, LidError>,
    expected: (&str, &str),
) -> LidOutcome {
    match (source, target) {
        (Err(_), _) | (_, Err(_)) => LidOutcome::Failure,
        (Ok(Some(s)), Ok(Some(t))) if s == expected.0 && t == expected.1 => LidOutcome::Keep,
        _ => LidOutcome::Drop,
    }
}

/// Number of coarse word units, ignoring standalone whitespace units.
pub fn token_count(text: &str) -> usize {
    coarse_tokenize(text, META_SYMBOL)
        .iter()
        .filter(|u| u.chars().any(|c| c != META_SYMBOL))
        .count()
}

/// Drops when the longer side has strictly more than `max_ratio` times the
/// tokens of the shorter side, or when either side is empty.
pub fn length_ratio_filter(pair: &SentencePair, max_ratio: f64) -> Verdict {
    ratio_verdict(token_count(&pair.source), token_count(&pair.target), max_ratio)
}

fn ratio_verdict(ls: usize, lt: usize, max_ratio: f64) -> Verdict {
    let (lo, hi) = (ls.min(lt), ls.max(lt));
    if lo == 0 {
        return Verdict::Drop;
    }
    Verdict::keep_if(hi as f64 / lo as f64 <= max_ratio)
}

#[derive(Debug, Clone)]
pub struct LidConfig {
    pub source_lang: String,
    pub target_lang: String,
}

#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub copy: bool,
    pub lid: Option<LidConfig>,
    /// Length-ratio limit; `None` disables the rule.
    pub max_ratio: Option<f64>,
    /// Per-origin overrides of `max_ratio`, keyed by lowercase origin.
    pub origin_max_ratio: HashMap<String, f64>,
    pub attention: Option<AttentionFilterConfig>,
    /// Origins removed wholesale (lowercase).
    pub exclude_origins: HashSet<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            copy: true,
            lid: None,
            max_ratio: Some(DEFAULT_MAX_RATIO),
            origin_max_ratio: HashMap::from([("commoncrawl".to_string(), COMMONCRAWL_MAX_RATIO)]),
            attention: None,
            exclude_origins: HashSet::new(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        for &r in self.max_ratio.iter().chain(self.origin_max_ratio.values()) {
            if !(r >= 1.0) {
                return Err(FilterError::BadRatio(r));
            }
        }
        Ok(())
    }

    pub fn ratio_for(&self, origin: &str) -> Option<f64> {
        let max = self.max_ratio?;
        Some(
            self.origin_max_ratio
                .get(&origin.to_lowercase())
                .copied()
                .unwrap_or(max),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Excluded,
    Copy,
    Lid,
    LidFailure,
    Length,
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Drop(Rule),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RuleCounts {
    pub input: u64,
    pub dropped_excluded: u64,
    pub dropped_copy: u64,
    pub dropped_lid: u64,
    pub dropped_lid_failure: u64,
    pub dropped_length: u64,
    pub dropped_attention: u64,
    pub kept: u64,
}

impl RuleCounts {
    fn record(&mut self, d: Decision) {
        self.input += 1;
        match d {
            Decision::Keep => self.kept += 1,
            Decision::Drop(Rule::Excluded) => self.dropped_excluded += 1,
            Decision::Drop(Rule::Copy) => self.dropped_copy += 1,
            Decision::Drop(Rule::Lid) => self.dropped_lid += 1,
            Decision::Drop(Rule::LidFailure) => self.dropped_lid_failure += 1,
            Decision::Drop(Rule::Length) => self.dropped_length += 1,
            Decision::Drop(Rule::Attention) => self.dropped_attention += 1,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped_excluded
            + self.dropped_copy
            + self.dropped_lid
            + self.dropped_lid_failure
            + self.dropped_length
            + self.dropped_attention
    }

    pub fn is_conserved(&self) -> bool {
        self.input == self.kept + self.dropped()
    }

    fn merge(&mut self, o: &RuleCounts) {
        self.input += o.input;
        self.dropped_excluded += o.dropped_excluded;
        self.dropped_copy += o.dropped_copy;
        self.dropped_lid += o.dropped_lid;
        self.dropped_lid_failure += o.dropped_lid_failure;
        self.dropped_length += o.dropped_length;
        self.dropped_attention += o.dropped_attention;
        self.kept += o.kept;
    }

    fn fields(&self) -> [(&'static str, u64); 8] {
        [
            ("input", self.input),
            ("dropped_excluded", self.dropped_excluded),
            ("dropped_copy", self.dropped_copy),
            ("dropped_lid", self.dropped_lid),
            ("dropped_lid_failure", self.dropped_lid_failure),
            ("dropped_length", self.dropped_length),
            ("dropped_attention", self.dropped_attention),
            ("kept", self.kept),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub totals: RuleCounts,
    pub per_origin: BTreeMap<String, RuleCounts>,
}

impl FilterReport {
    pub fn record(&mut self, origin: &str, d: Decision) {
        self.totals.record(d);
        self.per_origin.entry(origin.to_string()).or_default().record(d);
    }

    /// Associative, commutative merge of two partial reports.
    pub fn merge(&mut self, other: &FilterReport) {
        self.totals.merge(&other.totals);
        for (origin, counts) in &other.per_origin {
            self.per_origin.entry(origin.clone()).or_default().merge(counts);
        }
    }

    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::from("entropy_definition=mean_row\n");
        for (k, v) in self.totals.fields() {
            out.push_str(&format!("{k}={v}\n"));
        }
        for (origin, counts) in &self.per_origin {
            for (k, v) in counts.fields() {
                out.push_str(&format!("{origin}.{k}={v}\n"));
            }
        }
        out
    }
}

impl fmt::Display for FilterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# attention entropy: mean of per-row entropies (nats)")?;
        write!(f, "{:<16}", "origin")?;
        for (k, _) in self.totals.fields() {
            write!(f, " {:>12}", k.trim_start_matches("dropped_"))?;
        }
        writeln!(f)?;
        let rows = self
            .per_origin
            .iter()
            .map(|(o, c)| (o.as_str(), c))
            .chain(std::iter::once(("TOTAL", &self.totals)));
        for (origin, counts) in rows {
            write!(f, "{origin:<16}")?;
            for (_, v) in counts.fields() {
                write!(f, " {v:>12}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Applies a [`FilterConfig`] to pairs, chunk by chunk.
pub struct CorpusFilter<'a> {
    cfg: FilterConfig,
    classifier: Option<&'a dyn LanguageIdentifier>,
}

impl<'a> CorpusFilter<'a> {
    pub fn new(cfg: FilterConfig, classifier: Option<&'a dyn LanguageIdentifier>) -> Result<Self, FilterError> {
        cfg.validate()?;
        Ok(Self { cfg, classifier })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.cfg
    }

    /// Decides every pair of a chunk. `attention`, when given, must be aligned
    /// with `pairs`. Per-pair work runs on the rayon pool; the result order
    /// follows the input.
    pub fn decide_chunk(
        &self,
        pairs: &[SentencePair],
        attention: Option<&[AttentionMatrix]>,
    ) -> Result<Vec<Decision>, FilterError> {
        if let Some(att) = attention {
            if att.len() != pairs.len() {
                return Err(FilterError::AlignmentError {
                    corpus: pairs.len(),
                    attention: att.len(),
                });
            }
        }
        let cfg = &self.cfg;
        let mut decisions: Vec<Option<Decision>> = pairs
            .par_iter()
            .map(|p| {
                if cfg.exclude_origins.contains(&p.origin.to_lowercase()) {
                    Some(Decision::Drop(Rule::Excluded))
                } else if cfg.copy && !copy_filter(p).is_keep() {
                    Some(Decision::Drop(Rule::Copy))
                } else {
                    None
                }
            })
            .collect();

        if let (Some(lid), Some(classifier)) = (&cfg.lid, self.classifier) {
            let pending: Vec<usize> = (0..pairs.len()).filter(|&i| decisions[i].is_none()).collect();
            let texts: Vec<&str> = pending
                .iter()
                .flat_map(|&i| [pairs[i].source.as_str(), pairs[i].target.as_str()])
                .collect();
            let results = classifier.identify_batch(&texts);
            let expected = (lid.source_lang.as_str(), lid.target_lang.as_str());
            for (k, &i) in pending.iter().enumerate() {
                match lid_outcome(&results[2 * k], &results[2 * k + 1], expected) {
                    LidOutcome::Keep => {}
                    LidOutcome::Drop => decisions[i] = Some(Decision::Drop(Rule::Lid)),
                    LidOutcome::Failure => decisions[i] = Some(Decision::Drop(Rule::LidFailure)),
                }
            }
        }

        Ok(decisions
            .into_par_iter()
            .enumerate()
            .map(|(i, d)| {
                if let Some(d) = d {
                    return d;
                }
                let p = &pairs[i];
                if let Some(max) = cfg.ratio_for(&p.origin) {
                    if !length_ratio_filter(p, max).is_keep() {
                        return Decision::Drop(Rule::Length);
                    }
                }
                if let (Some(acfg), Some(att)) = (&cfg.attention, attention) {
                    let stats = attention_stats_at(&att[i], &acfg.thresholds());
                    if !attention_filter(&stats, acfg) {
                        return Decision::Drop(Rule::Attention);
                    }
                }
                Decision::Keep
            })
            .collect())
    }

    /// Filters one chunk, returning survivors and the chunk's report.
    pub fn filter_chunk(
        &self,
        pairs: Vec<SentencePair>,
        attention: Option<&[AttentionMatrix]>,
    ) -> Result<(Vec<SentencePair>, FilterReport), FilterError> {
        let decisions = self.decide_chunk(&pairs, attention)?;
        let mut report = FilterReport::default();
        let mut kept = Vec::with_capacity(pairs.len());
        for (pair, d) in pairs.into_iter().zip(decisions) {
            report.record(&pair.origin, d);
            if d == Decision::Keep {
                kept.push(pair);
            }
        }
        Ok((kept, report))
    }
}

/// Filters a whole in-memory corpus. `attention`, when present, must have one
/// matrix per pair.
pub fn filter_corpus(
    corpus: Vec<SentencePair>,
    cfg: &FilterConfig,
    classifier: Option<&dyn LanguageIdentifier>,
    attention: Option<&[AttentionMatrix]>,
) -> Result<(Vec<SentencePair>, FilterReport), FilterError> {
    CorpusFilter::new(cfg.clone(), classifier)?.filter_chunk(corpus, attention)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: &str, t: &str) -> SentencePair {
        SentencePair::new(s, t, "test", 0)
    }

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    #[test]
    fn copy_examples() {
        assert_eq!(copy_filter(&pair("Hello!", "hello")), Verdict::Drop);
        assert_eq!(copy_filter(&pair("bonjour", "hello")), Verdict::Keep);
        assert_eq!(copy_filter(&pair("", "")), Verdict::Drop);
    }

    #[test]
    fn lid_examples() {
        let lid = NgramIdentifier::builtin();
        let fr_en = ("fr", "en");
        assert_eq!(lid_filter(&pair("le chat dort", "the cat sleeps"), &lid, fr_en), LidOutcome::Keep);
        assert_eq!(lid_filter(&pair("the cat sleeps", "the cat sleeps"), &lid, fr_en), LidOutcome::Drop);
        assert_eq!(lid_filter(&pair("", "the cat sleeps"), &lid, fr_en), LidOutcome::Drop);
    }

    struct Failing;
    impl LanguageIdentifier for Failing {
        fn identify(&self, _: &str) -> Result<Option<String>, LidError> {
            Err(LidError::Classifier("boom".into()))
        }
    }

    #[test]
    fn lid_failure_counts_separately() {
        let cfg = FilterConfig {
            lid: Some(LidConfig {
                source_lang: "fr".into(),
                target_lang: "en".into(),
            }),
            ..FilterConfig::default()
        };
        let (kept, report) =
            filter_corpus(vec![pair("a b", "c d")], &cfg, Some(&Failing), None).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.totals.dropped_lid_failure, 1);
        assert_eq!(report.totals.dropped_lid, 0);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(length_ratio_filter(&pair(&words(10), &words(10)), 1.8), Verdict::Keep);
        assert_eq!(length_ratio_filter(&pair(&words(19), &words(10)), 1.8), Verdict::Drop);
        assert_eq!(length_ratio_filter(&pair(&words(15), &words(10)), 1.5), Verdict::Keep);
        assert_eq!(length_ratio_filter(&pair("", &words(1)), 1.8), Verdict::Drop);
        assert_eq!(token_count("so tasty!!  ok"), 4);
    }

    #[test]
    fn rule_order_and_origin_thresholds() {
        let corpus = vec![
            SentencePair::new("Same text", "same text!", "europarl", 0),
            SentencePair::new(words(16), words(10), "CommonCrawl", 1),
            SentencePair::new(words(16), words(10), "europarl", 2),
            SentencePair::new(words(30), words(30), "news", 3),
        ];
        let cfg = FilterConfig {
            exclude_origins: HashSet::from(["news".to_string()]),
            ..FilterConfig::default()
        };
        let (kept, report) = filter_corpus(corpus, &cfg, None, None).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].line_no, 2);
        assert_eq!(report.totals.dropped_copy, 1);
        assert_eq!(report.totals.dropped_length, 1);
        assert_eq!(report.totals.dropped_excluded, 1);
        assert_eq!(report.per_origin["CommonCrawl"].dropped_length, 1);
        assert!(report.totals.is_conserved());
    }

    #[test]
    fn attention_stream_alignment() {
        let cfg = FilterConfig {
            attention: Some(AttentionFilterConfig::default()),
            ..FilterConfig::default()
        };
        let corpus = vec![pair("a b", "c d"), pair("e f", "g h")];
        let att = vec![AttentionMatrix::uniform(3)];
        assert!(matches!(
            filter_corpus(corpus.clone(), &cfg, None, Some(&att)),
            Err(FilterError::AlignmentError { corpus: 2, attention: 1 })
        ));
        let att = vec![AttentionMatrix::uniform(3), AttentionMatrix::eos_collapsed(3, 3)];
        let (kept, report) = filter_corpus(corpus, &cfg, None, Some(&att)).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(report.totals.dropped_attention, 1);
    }

    #[test]
    fn empty_corpus() {
        let (kept, report) = filter_corpus(vec![], &FilterConfig::default(), None, None).unwrap();
        assert!(kept.is_empty());
        assert_eq!(report.totals, RuleCounts::default());
    }

    #[test]
    fn report_renders() {
        let mut r = FilterReport::default();
        r.record("cc", Decision::Keep);
        r.record("cc", Decision::Drop(Rule::Copy));
        let kv = r.to_key_values();
        assert!(kv.contains("input=2\n"));
        assert!(kv.contains("cc.dropped_copy=1\n"));
        assert!(r.to_string().contains("TOTAL"));
    }

    #[test]
    fn rejects_ratio_below_one() {
        let cfg = FilterConfig {
            max_ratio: Some(0.5),
            ..FilterConfig::default()
        };
        assert!(CorpusFilter::new(cfg, None).is_err());
    }
}

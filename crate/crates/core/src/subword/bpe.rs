//! BPE training and application.
//!
//! Training repeatedly merges the most frequent adjacent pair. Ties go to the
//! lexicographically smaller left piece, then the smaller right piece, so the
//! merge order is a pure function of the word counts. Pair counts are updated
//! incrementally: only the words containing the chosen pair are recounted.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::ops::Range;
use std::sync::Arc;

use log::debug;

use super::model::SubwordModel;
use super::pretok::CoarseTokenizer;
use super::SubwordError;

#[derive(Debug, Clone)]
pub struct BpeTrainer {
    pub target_vocab_size: usize,
    pub vocab_threshold: u64,
    pub meta_symbol: char,
}

impl BpeTrainer {
    pub fn new(target_vocab_size: usize, vocab_threshold: u64, meta_symbol: char) -> Self {
        Self {
            target_vocab_size,
            vocab_threshold,
            meta_symbol,
        }
    }

    /// Trains on raw (already lowercased) lines, coarse-tokenizing each one.
    /// Units listed in `reserved` are left out of training.
    pub fn train_lines<I, S>(&self, lines: I, reserved: &[&str]) -> Result<SubwordModel, SubwordError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokenizer = CoarseTokenizer::new(self.meta_symbol).with_reserved(reserved.iter().copied());
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut any_line = false;
        for line in lines {
            any_line = true;
            for unit in tokenizer.tokenize(line.as_ref()) {
                if !tokenizer.is_reserved(&unit) {
                    *counts.entry(unit).or_default() += 1;
                }
            }
        }
        if !any_line {
            return Err(SubwordError::EmptyCorpus);
        }
        self.train_counts(&counts)
    }

    /// Trains on a unit → count table.
    pub fn train_counts(&self, counts: &HashMap<String, u64>) -> Result<SubwordModel, SubwordError> {
        if counts.is_empty() {
            return Err(SubwordError::EmptyCorpus);
        }
        let mut state = TrainState::new(counts);
        if self.target_vocab_size < state.pieces.len() {
            return Err(SubwordError::VocabTooSmall {
                target: self.target_vocab_size,
                characters: state.pieces.len(),
            });
        }
        let mut merges = Vec::new();
        while state.distinct_pieces() < self.target_vocab_size {
            let Some((left, right)) = state.best_pair() else {
                break;
            };
            state.merge(left, right);
            merges.push((
                state.pieces[left as usize].to_string(),
                state.pieces[right as usize].to_string(),
            ));
        }
        debug!(
            "bpe: {} merges, {} pieces",
            merges.len(),
            state.distinct_pieces()
        );
        let vocab = state.final_vocab();
        SubwordModel::new(merges, vocab, self.meta_symbol, self.vocab_threshold)
    }
}

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: Arc<str>,
    right: Arc<str>,
    ids: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct TrainState {
    pieces: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, u32>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<(u32, u32), u64>,
    where_pair: HashMap<(u32, u32), HashSet<usize>>,
    heap: BinaryHeap<Candidate>,
}

impl TrainState {
    fn new(counts: &HashMap<String, u64>) -> Self {
        let mut sorted: Vec<(&String, &u64)> = counts.iter().collect();
        sorted.sort();
        let mut state = Self {
            pieces: Vec::new(),
            ids: HashMap::new(),
            words: Vec::with_capacity(sorted.len()),
            pair_counts: HashMap::new(),
            where_pair: HashMap::new(),
            heap: BinaryHeap::new(),
        };
        for (word, &count) in sorted {
            let mut buf = [0u8; 4];
            let symbols = word
                .chars()
                .map(|c| state.intern(c.encode_utf8(&mut buf)))
                .collect();
            state.words.push((symbols, count));
        }
        for idx in 0..state.words.len() {
            state.add_pairs(idx);
        }
        let mut initial: Vec<((u32, u32), u64)> =
            state.pair_counts.iter().map(|(&k, &v)| (k, v)).collect();
        initial.sort();
        for (pair, count) in initial {
            state.push(pair, count);
        }
        state
    }

    fn intern(&mut self, piece: &str) -> u32 {
        if let Some(&id) = self.ids.get(piece) {
            return id;
        }
        let id = self.pieces.len() as u32;
        let piece: Arc<str> = Arc::from(piece);
        self.pieces.push(piece.clone());
        self.ids.insert(piece, id);
        id
    }

    fn distinct_pieces(&self) -> usize {
        self.pieces.len()
    }

    fn mergeable(&self, pair: (u32, u32)) -> bool {
        !self.pieces[pair.0 as usize].contains('\t') && !self.pieces[pair.1 as usize].contains('\t')
    }

    fn push(&mut self, pair: (u32, u32), count: u64) {
        if count == 0 || !self.mergeable(pair) {
            return;
        }
        self.heap.push(Candidate {
            count,
            left: self.pieces[pair.0 as usize].clone(),
            right: self.pieces[pair.1 as usize].clone(),
            ids: pair,
        });
    }

    fn add_pairs(&mut self, idx: usize) {
        let (symbols, count) = &self.words[idx];
        let count = *count;
        for w in symbols.windows(2) {
            let pair = (w[0], w[1]);
            *self.pair_counts.entry(pair).or_default() += count;
            self.where_pair.entry(pair).or_default().insert(idx);
        }
    }

    fn remove_pairs(&mut self, idx: usize) {
        let (symbols, count) = &self.words[idx];
        for w in symbols.windows(2) {
            if let Some(c) = self.pair_counts.get_mut(&(w[0], w[1])) {
                *c -= count;
            }
        }
    }

    fn best_pair(&mut self) -> Option<(u32, u32)> {
        while let Some(top) = self.heap.pop() {
            let current = self.pair_counts.get(&top.ids).copied().unwrap_or(0);
            if current == top.count {
                return Some(top.ids);
            }
            if current > 0 && current < top.count {
                self.push(top.ids, current);
            }
        }
        None
    }

    fn merge(&mut self, left: u32, right: u32) {
        let merged = format!("{}{}", self.pieces[left as usize], self.pieces[right as usize]);
        let new_id = self.intern(&merged);
        let mut affected: Vec<usize> = self
            .where_pair
            .remove(&(left, right))
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();

        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        for idx in affected {
            let symbols = &self.words[idx].0;
            if !symbols.windows(2).any(|w| w[0] == left && w[1] == right) {
                continue;
            }
            self.remove_pairs(idx);
            let symbols = &self.words[idx].0;
            let mut merged_symbols = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == left && symbols[i + 1] == right {
                    merged_symbols.push(new_id);
                    i += 2;
                } else {
                    merged_symbols.push(symbols[i]);
                    i += 1;
                }
            }
            self.words[idx].0 = merged_symbols;
            self.add_pairs(idx);
            for w in self.words[idx].0.windows(2) {
                touched.insert((w[0], w[1]));
            }
        }
        self.pair_counts.remove(&(left, right));
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for pair in touched {
            let count = self.pair_counts.get(&pair).copied().unwrap_or(0);
            self.push(pair, count);
        }
    }

    fn final_vocab(&self) -> BTreeMap<String, u64> {
        let mut vocab: BTreeMap<String, u64> =
            self.pieces.iter().map(|p| (p.to_string(), 0)).collect();
        for (symbols, count) in &self.words {
            for &s in symbols {
                *vocab.get_mut(&*self.pieces[s as usize]).expect("interned") += count;
            }
        }
        vocab
    }
}

/// Segments one (lowercase) unit; returns byte ranges into `unit`.
pub(crate) fn segment_ranges(unit: &str, model: &SubwordModel) -> Vec<Range<usize>> {
    // (range, piece id if known)
    let mut symbols: Vec<(Range<usize>, Option<u32>)> = unit
        .char_indices()
        .map(|(i, c)| {
            let r = i..i + c.len_utf8();
            let id = model.piece_id(&unit[r.clone()]);
            (r, id)
        })
        .collect();

    loop {
        let mut best: Option<(u32, u32)> = None; // (rank, output id)
        for w in symbols.windows(2) {
            if let (Some(l), Some(r)) = (w[0].1, w[1].1) {
                if let Some((rank, out)) = model.merge_of(l, r) {
                    if best.is_none_or(|(b, _)| rank < b) {
                        best = Some((rank, out));
                    }
                }
            }
        }
        let Some((rank, out)) = best else { break };
        let mut next = Vec::with_capacity(symbols.len());
        let mut i = 0;
        while i < symbols.len() {
            if i + 1 < symbols.len() {
                if let (Some(l), Some(r)) = (symbols[i].1, symbols[i + 1].1) {
                    if model.merge_of(l, r).is_some_and(|(rk, _)| rk == rank) {
                        next.push((symbols[i].0.start..symbols[i + 1].0.end, Some(out)));
                        i += 2;
                        continue;
                    }
                }
            }
            next.push(symbols[i].clone());
            i += 1;
        }
        symbols = next;
    }

    let threshold = model.vocab_threshold();
    let mut out = Vec::with_capacity(symbols.len());
    for (range, id) in symbols {
        let rare = id.is_some_and(|id| {
            model.piece_freq(id) < threshold && model.piece_str(id).chars().nth(1).is_some()
        });
        if rare {
            out.extend(unit[range.clone()].char_indices().map(|(i, c)| {
                let s = range.start + i;
                s..s + c.len_utf8()
            }));
        } else {
            out.push(range);
        }
    }
    out
}

/// Applies the merges to a single unit.
pub fn apply_bpe_unit(unit: &str, model: &SubwordModel) -> Vec<String> {
    segment_ranges(unit, model)
        .into_iter()
        .map(|r| unit[r].to_string())
        .collect()
}

/// Segments each unit and concatenates the resulting pieces.
pub fn apply_bpe<S: AsRef<str>>(units: &[S], model: &SubwordModel) -> Vec<String> {
    units
        .iter()
        .flat_map(|u| apply_bpe_unit(u.as_ref(), model))
        .collect()
}

/// Convenience wrapper over [`BpeTrainer::train_lines`] with no reserved tokens.
pub fn train_bpe<I, S>(
    corpus: I,
    target_vocab_size: usize,
    vocab_threshold: u64,
    meta_symbol: char,
) -> Result<SubwordModel, SubwordError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    BpeTrainer::new(target_vocab_size, vocab_threshold, meta_symbol).train_lines(corpus, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subword::pretok::META_SYMBOL;

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.to_string(), b.to_string())
    }

    #[test]
    fn single_possible_merge() {
        let m = train_bpe(["aa aa aa"], 4, 0, META_SYMBOL).unwrap();
        assert_eq!(m.merges()[0], pair("a", "a"));
        assert_eq!(m.merges()[1], pair("▁", "aa"));
    }

    #[test]
    fn most_frequent_pair_first() {
        let m = train_bpe(["abab"], 5, 0, META_SYMBOL).unwrap();
        assert_eq!(m.merges()[0], pair("a", "b"));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train_bpe(Vec::<String>::new(), 10, 0, META_SYMBOL),
            Err(SubwordError::EmptyCorpus)
        ));
        assert!(matches!(
            train_bpe(["abc"], 2, 0, META_SYMBOL),
            Err(SubwordError::VocabTooSmall { target: 2, characters: 4 })
        ));
    }

    #[test]
    fn stops_when_no_pairs_remain() {
        let m = train_bpe(["ab"], 100, 0, META_SYMBOL).unwrap();
        assert_eq!(m.merges().len(), 2);
        assert_eq!(apply_bpe(&["▁ab"], &m), ["▁ab"]);
    }

    #[test]
    fn apply_examples() {
        let merges = vec![pair("t", "a"), pair("▁", "ta"), pair("▁ta", "s"), pair("t", "y")];
        let mut vocab = BTreeMap::new();
        for p in ["▁", "t", "a", "s", "y", "ta", "▁ta", "▁tas", "ty"] {
            vocab.insert(p.to_string(), 1000);
        }
        let m = SubwordModel::new(merges, vocab, META_SYMBOL, 100).unwrap();
        assert_eq!(apply_bpe_unit("▁tasty", &m), ["▁tas", "ty"]);
        assert_eq!(apply_bpe_unit("x", &SubwordModel::empty(META_SYMBOL)), ["x"]);
        assert_eq!(apply_bpe_unit("▁täs", &m), ["▁", "t", "ä", "s"]);
        assert!(apply_bpe_unit("", &m).is_empty());
    }

    #[test]
    fn rare_pieces_fall_back_to_characters() {
        let m = train_bpe(["abab abab xy"], 7, 0, META_SYMBOL).unwrap();
        let units = ["▁abab", "▁xy"];
        let full = apply_bpe(&units, &m);
        let strict = apply_bpe(&units, &m.clone().with_vocab_threshold(3));
        assert!(full.len() < strict.len(), "{full:?} vs {strict:?}");
        assert_eq!(full.concat(), strict.concat());
        for p in &strict {
            let f = m.vocab().get(p).copied().unwrap_or(0);
            assert!(f >= 3 || p.chars().count() == 1, "{p} {f}");
        }
    }

    #[test]
    fn ordered_application_matches_priority_loop() {
        let corpus = ["the quick brown fox", "the lazy dog", "quick quick fox", "dogs and foxes"];
        let m = train_bpe(corpus, 40, 0, META_SYMBOL).unwrap();
        for unit in ["▁the", "▁quickest", "▁foxes", "▁thedog", "▁zzz"] {
            let mut syms: Vec<String> = unit.chars().map(String::from).collect();
            for (l, r) in m.merges() {
                let mut next = Vec::new();
                let mut i = 0;
                while i < syms.len() {
                    if i + 1 < syms.len() && &syms[i] == l && &syms[i + 1] == r {
                        next.push(format!("{l}{r}"));
                        i += 2;
                    } else {
                        next.push(syms[i].clone());
                        i += 1;
                    }
                }
                syms = next;
            }
            assert_eq!(apply_bpe_unit(unit, &m), syms, "{unit}");
        }
    }
}

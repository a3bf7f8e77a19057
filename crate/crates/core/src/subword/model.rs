use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::pretok::META_SYMBOL;
use super::SubwordError;

/// Ordered BPE merges plus the training frequency of every piece.
#[derive(Debug, Clone)]
pub struct SubwordModel {
    merges: Vec<(String, String)>,
    vocab: BTreeMap<String, u64>,
    meta_symbol: char,
    vocab_threshold: u64,
    // lookup tables derived from the fields above
    piece_ids: HashMap<String, u32>,
    pieces: Vec<String>,
    freqs: Vec<u64>,
    pair_ranks: HashMap<(u32, u32), (u32, u32)>,
}

impl SubwordModel {
    pub fn new(
        merges: Vec<(String, String)>,
        vocab: BTreeMap<String, u64>,
        meta_symbol: char,
        vocab_threshold: u64,
    ) -> Result<Self, SubwordError> {
        let mut piece_ids = HashMap::new();
        let mut pieces = Vec::new();
        let mut freqs = Vec::new();
        for (piece, &freq) in &vocab {
            piece_ids.insert(piece.clone(), pieces.len() as u32);
            pieces.push(piece.clone());
            freqs.push(freq);
        }
        let mut pair_ranks = HashMap::with_capacity(merges.len());
        for (rank, (left, right)) in merges.iter().enumerate() {
            let merged = format!("{left}{right}");
            let id = |p: &str| {
                piece_ids
                    .get(p)
                    .copied()
                    .ok_or_else(|| SubwordError::InvalidModel(format!("piece {p:?} missing from vocab")))
            };
            let key = (id(left)?, id(right)?);
            let out = id(&merged)?;
            if pair_ranks.insert(key, (rank as u32, out)).is_some() {
                return Err(SubwordError::InvalidModel(format!(
                    "duplicate merge {left:?} {right:?}"
                )));
            }
        }
        Ok(Self {
            merges,
            vocab,
            meta_symbol,
            vocab_threshold,
            piece_ids,
            pieces,
            freqs,
            pair_ranks,
        })
    }

    /// A model with no merges: every unit splits into characters.
    pub fn empty(meta_symbol: char) -> Self {
        Self::new(Vec::new(), BTreeMap::new(), meta_symbol, 0).expect("empty model is valid")
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn vocab(&self) -> &BTreeMap<String, u64> {
        &self.vocab
    }

    pub fn meta_symbol(&self) -> char {
        self.meta_symbol
    }

    pub fn vocab_threshold(&self) -> u64 {
        self.vocab_threshold
    }

    pub fn with_vocab_threshold(mut self, threshold: u64) -> Self {
        self.vocab_threshold = threshold;
        self
    }

    pub(crate) fn piece_id(&self, piece: &str) -> Option<u32> {
        self.piece_ids.get(piece).copied()
    }

    pub(crate) fn piece_freq(&self, id: u32) -> u64 {
        self.freqs[id as usize]
    }

    pub(crate) fn piece_str(&self, id: u32) -> &str {
        &self.pieces[id as usize]
    }

    pub(crate) fn merge_of(&self, left: u32, right: u32) -> Option<(u32, u32)> {
        self.pair_ranks.get(&(left, right)).copied()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "meta_symbol={} threshold={}",
            self.meta_symbol, self.vocab_threshold
        );
        for (left, right) in &self.merges {
            let _ = writeln!(out, "{left}\t{right}");
        }
        out.push('\n');
        for (piece, freq) in &self.vocab {
            let _ = writeln!(out, "{piece}\t{freq}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SubwordError> {
        let bad = |line: usize, msg: &str| SubwordError::ModelFormat {
            line,
            message: msg.to_string(),
        };
        let mut lines = text.split('\n').enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let mut meta_symbol = META_SYMBOL;
        let mut threshold = 0;
        for field in header.split(' ') {
            match field.split_once('=') {
                Some(("meta_symbol", v)) => {
                    let mut cs = v.chars();
                    meta_symbol = cs.next().ok_or_else(|| bad(1, "empty meta_symbol"))?;
                    if cs.next().is_some() {
                        return Err(bad(1, "meta_symbol must be one character"));
                    }
                }
                Some(("threshold", v)) => {
                    threshold = v.parse().map_err(|_| bad(1, "threshold is not an integer"))?;
                }
                _ => return Err(bad(1, "expected `meta_symbol=<char> threshold=<int>`")),
            }
        }

        let mut merges = Vec::new();
        for (n, line) in lines.by_ref() {
            if line.is_empty() {
                break;
            }
            let (l, r) = line
                .split_once('\t')
                .ok_or_else(|| bad(n + 1, "merge line needs a tab"))?;
            merges.push((l.to_string(), r.to_string()));
        }
        let mut vocab = BTreeMap::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (piece, freq) = line
                .rsplit_once('\t')
                .ok_or_else(|| bad(n + 1, "vocab line needs a tab"))?;
            let freq = freq
                .parse()
                .map_err(|_| bad(n + 1, "frequency is not an integer"))?;
            vocab.insert(piece.to_string(), freq);
        }
        Self::new(merges, vocab, meta_symbol, threshold)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SubwordError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SubwordError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

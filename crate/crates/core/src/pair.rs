/// One source/target line pair and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
    /// Corpus identifier, e.g. `europarl` or `commoncrawl`.
    pub origin: String,
    /// Zero-based line index within the origin corpus.
    pub line_no: u64,
}

impl SentencePair {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        origin: impl Into<String>,
        line_no: u64,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            origin: origin.into(),
            line_no,
        }
    }

    /// Swaps the two sides; origin and line number are kept.
    pub fn reversed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            origin: self.origin.clone(),
            line_no: self.line_no,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Keep,
    Drop,
}

impl Verdict {
    pub fn keep_if(cond: bool) -> Self {
        if cond {
            Verdict::Keep
        } else {
            Verdict::Drop
        }
    }

    pub fn is_keep(self) -> bool {
        self == Verdict::Keep
    }
}

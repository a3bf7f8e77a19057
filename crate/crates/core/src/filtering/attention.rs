//! Attention-matrix statistics for hallucination filtering.
//!
//! A matrix has one row per target token and one column per source token,
//! both including EOS; the source EOS is the last column. When a model is
//! forced to decode a misaligned reference, attention collapses onto that
//! column, which shows up as low column mass on every real source word.

use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::FilterError;

pub const ROW_SUM_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.2, 0.3, 0.4, 0.5];

/// Row-stochastic target × source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl AttentionMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, FilterError> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(FilterError::MalformedMatrix(format!(
                "{rows}x{cols} matrix with {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(FilterError::MalformedMatrix(format!("invalid weight {v}")));
        }
        for (i, row) in values.chunks(cols).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(FilterError::MalformedMatrix(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, FilterError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(FilterError::MalformedMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(n, n, vec![1.0 / n as f64; n * n]).expect("uniform matrix is valid")
    }

    /// Every row puts all of its mass on the source EOS column.
    pub fn eos_collapsed(rows: usize, cols: usize) -> Self {
        let mut values = vec![0.0; rows * cols];
        for i in 0..rows {
            values[i * cols + cols - 1] = 1.0;
        }
        Self::new(rows, cols, values).expect("one-hot matrix is valid")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Random row-stochastic matrix. With `collapse` in `[0, 1]`, that share of
/// each row's mass is moved onto the EOS column.
pub fn synthetic_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, collapse: f64) -> AttentionMatrix {
    let mut values = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let mut row: Vec<f64> = raw.iter().map(|v| v / sum * (1.0 - collapse)).collect();
        row[cols - 1] += collapse;
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
        values.extend(row);
    }
    AttentionMatrix::new(rows, cols, values).expect("normalized rows")
}

/// Summary statistics of one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStats {
    /// Mean over rows of the row entropy, in nats.
    pub mean_row_entropy: f64,
    /// `(θ, share of non-EOS source columns whose total mass is below θ)`,
    /// sorted by θ.
    pub frac_below: Vec<(f64, f64)>,
}

impl AttentionStats {
    pub fn frac_below(&self, threshold: f64) -> Option<f64> {
        self.frac_below
            .iter()
            .find(|(t, _)| *t == threshold)
            .map(|(_, f)| *f)
    }
}

pub fn attention_stats(m: &AttentionMatrix) -> AttentionStats {
    attention_stats_at(m, &DEFAULT_THRESHOLDS)
}

pub fn attention_stats_at(m: &AttentionMatrix, thresholds: &[f64]) -> AttentionStats {
    let entropy_sum: f64 = (0..m.rows)
        .map(|i| {
            m.row(i)
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum::<f64>()
        })
        .sum();
    let mean_row_entropy = (entropy_sum / m.rows as f64).max(0.0);

    let words = m.cols - 1;
    let mut masses = vec![0.0; words];
    for i in 0..m.rows {
        for (j, mass) in masses.iter_mut().enumerate() {
            *mass += m.get(i, j);
        }
    }
    let mut sorted_thresholds = thresholds.to_vec();
    sorted_thresholds.sort_by(f64::total_cmp);
    let frac_below = sorted_thresholds
        .into_iter()
        .map(|t| {
            let frac = if words == 0 {
                0.0
            } else {
                masses.iter().filter(|&&m| m < t).count() as f64 / words as f64
            };
            (t, frac)
        })
        .collect();
    AttentionStats {
        mean_row_entropy,
        frac_below,
    }
}

/// Thresholds for dropping a pair by its attention statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionFilterConfig {
    /// Drop when the mean row entropy falls strictly below this.
    pub min_entropy: f64,
    /// Drop when `frac_below[θ]` is strictly above the paired maximum.
    pub max_frac_below: Vec<(f64, f64)>,
}

impl Default for AttentionFilterConfig {
    fn default() -> Self {
        Self {
            min_entropy: 0.05,
            max_frac_below: vec![(0.5, 0.9)],
        }
    }
}

impl AttentionFilterConfig {
    pub fn thresholds(&self) -> Vec<f64> {
        let mut t: Vec<f64> = DEFAULT_THRESHOLDS.to_vec();
        for (theta, _) in &self.max_frac_below {
            if !t.contains(theta) {
                t.push(*theta);
            }
        }
        t
    }
}

/// `true` keeps the pair.
pub fn attention_filter(stats: &AttentionStats, cfg: &AttentionFilterConfig) -> bool {
    if stats.mean_row_entropy < cfg.min_entropy {
        return false;
    }
    cfg.max_frac_below.iter().all(|(theta, max)| {
        stats.frac_below(*theta).is_none_or(|frac| frac <= *max)
    })
}

/// Streams matrices from the `T S` header + rows text format.
pub struct AttentionReader<R> {
    reader: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> AttentionReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            reader,
            line_no: 0,
            buf: String::new(),
        }
    }

    fn next_line(&mut self) -> Result<Option<&str>, FilterError> {
        self.buf.clear();
        if self.reader.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r'])))
    }

    fn read_matrix(&mut self) -> Result<Option<AttentionMatrix>, FilterError> {
        let header = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => break l.to_string(),
            }
        };
        let line = self.line_no;
        let parse_err = |line: usize, message: String| FilterError::Parse { line, message };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|d| d.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(line, format!("bad header {header:?}")))?;
        let [rows, cols] = dims[..] else {
            return Err(parse_err(line, format!("bad header {header:?}")));
        };
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let l = self
                .next_line()?
                .ok_or_else(|| parse_err(line, "truncated matrix".into()))?
                .to_string();
            let row: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(self.line_no, "bad float".into()))?;
            if row.len() != cols {
                return Err(parse_err(
                    self.line_no,
                    format!("expected {cols} values, found {}", row.len()),
                ));
            }
            values.extend(row);
        }
        AttentionMatrix::new(rows, cols, values).map(Some)
    }
}

impl<R: BufRead> Iterator for AttentionReader<R> {
    type Item = Result<AttentionMatrix, FilterError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_matrix().transpose()
    }
}

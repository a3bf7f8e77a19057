//! Line-oriented corpus I/O: side-by-side files read in bounded chunks.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use robustmt::filtering::{AttentionMatrix, AttentionReader};
use robustmt::SentencePair;

use crate::error::{CliError, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::io(path, e))
}

/// Buffered output file; parent directories are created.
pub struct Output {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl Output {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
        })
    }

    pub fn line(&mut self, text: &str) -> Result<()> {
        self.writer
            .write_all(text.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = Output::create(path)?;
    out.writer
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))?;
    out.finish()
}

/// Reads `(source, target)` files in lock step; a length mismatch is a data error.
pub struct PairReader {
    origin: String,
    paths: [PathBuf; 2],
    source: Lines<BufReader<File>>,
    target: Lines<BufReader<File>>,
    next_line: u64,
}

impl PairReader {
    pub fn open(source: &Path, target: &Path, origin: &str) -> Result<Self> {
        Ok(Self {
            origin: origin.to_string(),
            paths: [source.to_path_buf(), target.to_path_buf()],
            source: open(source)?.lines(),
            target: open(target)?.lines(),
            next_line: 0,
        })
    }

    /// Up to `max` pairs; empty at end of input.
    pub fn chunk(&mut self, max: usize) -> Result<Vec<SentencePair>> {
        let mut out = Vec::with_capacity(max.min(1 << 16));
        while out.len() < max {
            let s = self.source.next().transpose().map_err(|e| CliError::io(&self.paths[0], e))?;
            let t = self.target.next().transpose().map_err(|e| CliError::io(&self.paths[1], e))?;
            match (s, t) {
                (Some(s), Some(t)) => {
                    out.push(SentencePair::new(s, t, self.origin.clone(), self.next_line));
                    self.next_line += 1;
                }
                (None, None) => break,
                (s, _) => {
                    let (short, long) = if s.is_none() { (0, 1) } else { (1, 0) };
                    return Err(CliError::Data(format!(
                        "{} ends after {} lines but {} continues",
                        self.paths[short].display(),
                        self.next_line,
                        self.paths[long].display()
                    )));
                }
            }
        }
        Ok(out)
    }
}

/// Attention matrices consumed in step with a [`PairReader`].
pub struct AttentionStream {
    path: PathBuf,
    reader: AttentionReader<BufReader<File>>,
}

impl AttentionStream {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            reader: AttentionReader::new(open(path)?),
        })
    }

    /// Exactly `n` matrices; fewer is a data error.
    pub fn take(&mut self, n: usize) -> Result<Vec<AttentionMatrix>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            match self.reader.next() {
                Some(m) => out.push(m.map_err(|e| CliError::Data(format!("{}: {e}", self.path.display())))?),
                None => {
                    return Err(CliError::Data(format!(
                        "{}: attention stream ended before the corpus",
                        self.path.display()
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn expect_end(&mut self) -> Result<()> {
        match self.reader.next() {
            None => Ok(()),
            Some(_) => Err(CliError::Data(format!(
                "{}: more attention matrices than corpus lines",
                self.path.display()
            ))),
        }
    }
}

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Where a sentence pair came from. Training makes no distinction between
/// the three; the tag exists for regime selection and bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Parallel,
    Synthetic,
    Copied,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Parallel => write!(f, "parallel"),
            Provenance::Synthetic => write!(f, "synthetic"),
            Provenance::Copied => write!(f, "copied"),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Provenance::Parallel),
            "synthetic" => Ok(Provenance::Synthetic),
            "copied" => Ok(Provenance::Copied),
            other => Err(Error::InvalidArg(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentencePair {
    pub src: String,
    pub tgt: String,
    pub tag: Provenance,
}

/// Aligned sentence pairs with provenance tags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        ParallelCorpus { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Load two aligned one-sentence-per-line files.
    pub fn from_files(src: &Path, tgt: &Path, tag: Provenance) -> Result<Self> {
        let src_lines = read_lines(src)?;
        let tgt_lines = read_lines(tgt)?;
        if src_lines.len() != tgt_lines.len() {
            return Err(Error::InvalidArg(format!(
                "{} has {} lines but {} has {}",
                src.display(),
                src_lines.len(),
                tgt.display(),
                tgt_lines.len()
            )));
        }
        Ok(ParallelCorpus {
            pairs: src_lines
                .into_iter()
                .zip(tgt_lines)
                .map(|(src, tgt)| SentencePair { src, tgt, tag })
                .collect(),
        })
    }

    pub fn write_files(&self, src: &Path, tgt: &Path) -> Result<()> {
        write_lines(src, self.pairs.iter().map(|p| p.src.as_str()))?;
        write_lines(tgt, self.pairs.iter().map(|p| p.tgt.as_str()))
    }

    /// Pairs restricted to one provenance tag.
    pub fn with_tag(&self, tag: Provenance) -> ParallelCorpus {
        ParallelCorpus {
            pairs: self.pairs.iter().filter(|p| p.tag == tag).cloned().collect(),
        }
    }

    pub fn extend(&mut self, other: ParallelCorpus) {
        self.pairs.extend(other.pairs);
    }
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

pub fn write_lines<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

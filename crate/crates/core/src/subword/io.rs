//! Text formats for merge tables and vocabularies plus the continuation
//! marker rendering used in segmented corpus files.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::subword::bpe::{MergeTable, Side, UnitVocabulary};
use crate::subword::translit::TransliterationMap;

const MERGES_HEADER: &str = "#bpe v1";

/// Merge table file: `#bpe v1` header, then one `left right` per line.
pub fn write_merges(path: &Path, table: &MergeTable) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    buf.push_str(MERGES_HEADER);
    buf.push('\n');
    for (l, r) in table.merges() {
        buf.push_str(l);
        buf.push(' ');
        buf.push_str(r);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_merges(path: &Path) -> Result<MergeTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == MERGES_HEADER => {}
        Some(Ok(h)) => {
            return Err(Error::parse(
                path.display().to_string(),
                format!("expected `{MERGES_HEADER}` header, found `{h}`"),
            ))
        }
        _ => {
            return Err(Error::parse(
                path.display().to_string(),
                "missing merge table header",
            ))
        }
    }
    let mut merges = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                merges.push((l.to_string(), r.to_string()));
            }
            _ => {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!("bad merge on line {}: `{line}`", i + 2),
                ))
            }
        }
    }
    MergeTable::new(merges)
}

/// Vocabulary file: one `unit<TAB>count` per line, sorted by count
/// descending then unit ascending.
pub fn write_vocab(path: &Path, vocab: &UnitVocabulary) -> Result<()> {
    let mut entries: Vec<(&String, &u64)> = vocab.counts().iter().collect();
    entries.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::new();
    for (unit, count) in entries {
        buf.push_str(unit);
        buf.push('\t');
        buf.push_str(&count.to_string());
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_vocab(path: &Path, threshold: u64, side: Side) -> Result<UnitVocabulary> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut counts = HashMap::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let Some((unit, count)) = line.split_once('\t') else {
            return Err(Error::parse(
                path.display().to_string(),
                format!("bad vocab entry on line {}", i + 1),
            ));
        };
        let count: u64 = count.trim().parse().map_err(|_| {
            Error::parse(
                path.display().to_string(),
                format!("bad count on line {}", i + 1),
            )
        })?;
        counts.insert(unit.to_string(), count);
    }
    Ok(UnitVocabulary::from_counts(counts, threshold, side))
}

/// Transliteration map file: one `char<TAB>string` per line.
pub fn read_translit_map(path: &Path) -> Result<TransliterationMap> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((c, s)) = line.split_once('\t') else {
            return Err(Error::parse(
                path.display().to_string(),
                format!("bad transliteration entry on line {}", i + 1),
            ));
        };
        let mut chars = c.chars();
        let (Some(ch), None) = (chars.next(), chars.next()) else {
            return Err(Error::parse(
                path.display().to_string(),
                format!("source on line {} must be one character", i + 1),
            ));
        };
        pairs.push((ch, s.to_string()));
    }
    TransliterationMap::new(pairs)
}

/// Render one word's units with continuation markers: every unit except the
/// last gets an `@@` suffix. `[["low","est"],["x"]]` becomes `low@@ est x`.
pub fn render_units(words: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (wi, units) in words.iter().enumerate() {
        if wi > 0 {
            out.push(' ');
        }
        for (ui, u) in units.iter().enumerate() {
            if ui > 0 {
                out.push(' ');
            }
            out.push_str(u);
            if ui + 1 < units.len() {
                out.push_str("@@");
            }
        }
    }
    out
}

/// Undo continuation markers in segmented text: `low@@ est` becomes `lowest`.
pub fn detok_marked(text: &str) -> String {
    let mut out = String::new();
    let mut glue = false;
    for tok in text.split_whitespace() {
        if !glue && !out.is_empty() {
            out.push(' ');
        }
        if let Some(stem) = tok.strip_suffix("@@") {
            out.push_str(stem);
            glue = true;
        } else {
            out.push_str(tok);
            glue = false;
        }
    }
    out
}

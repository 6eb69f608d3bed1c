use std::collections::HashMap;

use crate::error::{Error, Result};

/// Ordered list of learned merge operations.
///
/// Merge order is the learning order and is significant: application replays
/// the table front to back. Construction rejects duplicate pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    version: String,
}

impl MergeTable {
    pub fn new(merges: Vec<(String, String)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for m in &merges {
            if !seen.insert(m.clone()) {
                return Err(Error::parse(
                    "merge table",
                    format!("duplicate merge ({} {})", m.0, m.1),
                ));
            }
        }
        Ok(MergeTable {
            merges,
            version: "v1".to_string(),
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// Table restricted to its first `n` merges.
    pub fn prefix(&self, n: usize) -> MergeTable {
        MergeTable {
            merges: self.merges[..n.min(self.merges.len())].to_vec(),
            version: self.version.clone(),
        }
    }
}

/// Which side of the parallel corpus a vocabulary was counted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
    Joint,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Source => write!(f, "source"),
            Side::Target => write!(f, "target"),
            Side::Joint => write!(f, "joint"),
        }
    }
}

/// Unit occurrence counts with a frequency threshold. A unit is allowed when
/// its count reaches the threshold; threshold 0 disables filtering.
#[derive(Debug, Clone)]
pub struct UnitVocabulary {
    counts: HashMap<String, u64>,
    threshold: u64,
    side: Side,
}

impl UnitVocabulary {
    /// Count every unit occurrence in the stream.
    pub fn build<I, S>(units: I, threshold: u64, side: Side) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for u in units {
            *counts.entry(u.as_ref().to_string()).or_insert(0) += 1;
        }
        UnitVocabulary {
            counts,
            threshold,
            side,
        }
    }

    pub fn from_counts(counts: HashMap<String, u64>, threshold: u64, side: Side) -> Self {
        UnitVocabulary {
            counts,
            threshold,
            side,
        }
    }

    pub fn allowed(&self, unit: &str) -> bool {
        self.count(unit) >= self.threshold
    }

    pub fn count(&self, unit: &str) -> u64 {
        self.counts.get(unit).copied().unwrap_or(0)
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Number of distinct units seen.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Number of distinct units at or above the threshold.
    pub fn distinct_allowed(&self) -> usize {
        self.counts.values().filter(|&&c| c >= self.threshold).count()
    }

    pub fn counts(&self) -> &HashMap<String, u64> {
        &self.counts
    }
}

/// Learn joint BPE merges from two tokenized corpora (lines of whitespace
/// separated tokens). Pair counts are taken over the concatenated word
/// frequency table; ties break to the lexicographically smallest pair.
pub fn learn_bpe<'a, A, B>(corpus_a: A, corpus_b: B, num_ops: usize) -> Result<MergeTable>
where
    A: IntoIterator<Item = &'a str>,
    B: IntoIterator<Item = &'a str>,
{
    let mut word_freq: HashMap<String, u64> = HashMap::new();
    let mut count_side = |lines: &mut dyn Iterator<Item = &'a str>| -> u64 {
        let mut tokens = 0;
        for line in lines {
            for word in line.split_whitespace() {
                *word_freq.entry(word.to_string()).or_insert(0) += 1;
                tokens += 1;
            }
        }
        tokens
    };
    let na = count_side(&mut corpus_a.into_iter());
    let nb = count_side(&mut corpus_b.into_iter());
    if na == 0 {
        return Err(Error::EmptyCorpus("learn_bpe: first corpus".into()));
    }
    if nb == 0 {
        return Err(Error::EmptyCorpus("learn_bpe: second corpus".into()));
    }
    learn_bpe_from_words(&word_freq, num_ops)
}

/// Learn merges directly from a word frequency table.
pub fn learn_bpe_from_words(word_freq: &HashMap<String, u64>, num_ops: usize) -> Result<MergeTable> {
    if word_freq.is_empty() {
        return Err(Error::EmptyCorpus("learn_bpe: no words".into()));
    }
    let mut words: Vec<(Vec<String>, u64)> = word_freq
        .iter()
        .map(|(w, &c)| (w.chars().map(|ch| ch.to_string()).collect(), c))
        .collect();
    // Sorted so the incremental pair updates below touch words in a fixed
    // order; selection itself is order-independent.
    words.sort_by(|a, b| a.0.cmp(&b.0));

    let mut pair_counts: HashMap<(String, String), i64> = HashMap::new();
    for (syms, c) in &words {
        for w in syms.windows(2) {
            *pair_counts.entry((w[0].clone(), w[1].clone())).or_insert(0) += *c as i64;
        }
    }

    let mut merges = Vec::with_capacity(num_ops);
    for _ in 0..num_ops {
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)))
            .map(|(p, _)| p.clone());
        let Some(pair) = best else { break };

        for (syms, c) in &mut words {
            if !contains_pair(syms, &pair) {
                continue;
            }
            for w in syms.windows(2) {
                *pair_counts.entry((w[0].clone(), w[1].clone())).or_insert(0) -= *c as i64;
            }
            *syms = merge_pass(syms, &pair);
            for w in syms.windows(2) {
                *pair_counts.entry((w[0].clone(), w[1].clone())).or_insert(0) += *c as i64;
            }
        }
        merges.push(pair);
    }
    MergeTable::new(merges)
}

fn contains_pair(syms: &[String], pair: &(String, String)) -> bool {
    syms.windows(2).any(|w| w[0] == pair.0 && w[1] == pair.1)
}

/// One greedy left-to-right pass fusing every adjacent occurrence of `pair`.
fn merge_pass(syms: &[String], pair: &(String, String)) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
            out.push(format!("{}{}", pair.0, pair.1));
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// A symbol plus how it was built, so disallowed units can be re-split by
/// undoing their final merge.
#[derive(Debug, Clone)]
struct Piece {
    text: String,
    formed_by: Option<(Box<Piece>, Box<Piece>)>,
}

/// Segment a word with the merge table; with a vocabulary, disallowed units
/// are recursively split by undoing their most recent merge until every
/// emitted multi-character unit is allowed. Single characters always pass.
pub fn apply_bpe(word: &str, merges: &MergeTable, allowed: Option<&UnitVocabulary>) -> Vec<String> {
    match allowed {
        Some(v) => apply_bpe_with(word, merges, Some(&|u: &str| v.allowed(u))),
        None => apply_bpe_with(word, merges, None),
    }
}

/// As [`apply_bpe`] but with an arbitrary allowed-unit predicate.
pub fn apply_bpe_with(
    word: &str,
    merges: &MergeTable,
    allowed: Option<&dyn Fn(&str) -> bool>,
) -> Vec<String> {
    let symbols: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    segment_symbols(&symbols, merges, allowed)
}

/// Core segmentation over an arbitrary atomic symbol sequence. Used directly
/// by the transliterated path, where an atom is one mapped character.
pub(crate) fn segment_symbols(
    symbols: &[String],
    merges: &MergeTable,
    allowed: Option<&dyn Fn(&str) -> bool>,
) -> Vec<String> {
    let mut pieces: Vec<Piece> = symbols
        .iter()
        .map(|s| Piece {
            text: s.clone(),
            formed_by: None,
        })
        .collect();

    for pair in merges.merges() {
        if pieces.len() < 2 {
            break;
        }
        let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
        let mut iter = pieces.into_iter().peekable();
        while let Some(p) = iter.next() {
            let next_matches = p.text == pair.0
                && iter.peek().map(|q| q.text == pair.1).unwrap_or(false);
            if next_matches {
                let q = iter.next().unwrap();
                out.push(Piece {
                    text: format!("{}{}", p.text, q.text),
                    formed_by: Some((Box::new(p), Box::new(q))),
                });
            } else {
                out.push(p);
            }
        }
        pieces = out;
    }

    let mut units = Vec::new();
    for p in pieces {
        emit(p, allowed, &mut units);
    }
    units
}

fn emit(piece: Piece, allowed: Option<&dyn Fn(&str) -> bool>, out: &mut Vec<String>) {
    let passes = match allowed {
        None => true,
        Some(f) => f(&piece.text),
    };
    if passes || piece.formed_by.is_none() {
        out.push(piece.text);
        return;
    }
    let (l, r) = piece.formed_by.unwrap();
    emit(*l, allowed, out);
    emit(*r, allowed, out);
}

/// Corpus-level applier with a word-segmentation cache.
pub struct BpeApplier<'a> {
    merges: &'a MergeTable,
    allowed: Option<&'a UnitVocabulary>,
    cache: HashMap<String, Vec<String>>,
}

impl<'a> BpeApplier<'a> {
    pub fn new(merges: &'a MergeTable, allowed: Option<&'a UnitVocabulary>) -> Self {
        BpeApplier {
            merges,
            allowed,
            cache: HashMap::new(),
        }
    }

    pub fn word(&mut self, word: &str) -> &[String] {
        if !self.cache.contains_key(word) {
            let units = apply_bpe(word, self.merges, self.allowed);
            self.cache.insert(word.to_string(), units);
        }
        &self.cache[word]
    }

    /// Segment a whole line, returning the flat unit sequence per word.
    pub fn line(&mut self, line: &str) -> Vec<Vec<String>> {
        line.split_whitespace()
            .map(|w| self.word(w).to_vec())
            .collect()
    }
}

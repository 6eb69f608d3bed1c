use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::subword::bpe::{segment_symbols, MergeTable, UnitVocabulary};

/// Bijective character-to-string mapping between two scripts.
///
/// Transliteration keeps each mapped string as one atomic symbol, so merges
/// learned on transliterated text line up with original character boundaries
/// and every unit detransliterates cleanly.
#[derive(Debug, Clone)]
pub struct TransliterationMap {
    forward: HashMap<char, String>,
    // inverse entries sorted longest-first for greedy decoding
    inverse: Vec<(String, char)>,
}

impl TransliterationMap {
    pub fn new(pairs: Vec<(char, String)>) -> Result<Self> {
        let mut forward = HashMap::new();
        let mut seen_targets = std::collections::HashSet::new();
        for (c, s) in &pairs {
            if s.is_empty() {
                return Err(Error::InvalidArg(format!(
                    "transliteration target for '{c}' is empty"
                )));
            }
            if forward.insert(*c, s.clone()).is_some() {
                return Err(Error::InvalidArg(format!(
                    "duplicate transliteration source '{c}'"
                )));
            }
            if !seen_targets.insert(s.clone()) {
                return Err(Error::InvalidArg(format!(
                    "transliteration is not bijective: target '{s}' repeats"
                )));
            }
        }
        let mut inverse: Vec<(String, char)> = pairs.into_iter().map(|(c, s)| (s, c)).collect();
        inverse.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(TransliterationMap { forward, inverse })
    }

    pub fn identity() -> Self {
        TransliterationMap {
            forward: HashMap::new(),
            inverse: Vec::new(),
        }
    }

    /// One symbol per input character; unmapped characters pass through
    /// unchanged and are reported.
    pub fn transliterate(&self, word: &str) -> (Vec<String>, Vec<char>) {
        let mut symbols = Vec::new();
        let mut unmapped = Vec::new();
        for c in word.chars() {
            match self.forward.get(&c) {
                Some(s) => symbols.push(s.clone()),
                None => {
                    unmapped.push(c);
                    symbols.push(c.to_string());
                }
            }
        }
        (symbols, unmapped)
    }

    /// Greedy longest-match decode back to the original script. Characters
    /// that match no inverse entry are copied as-is.
    pub fn detransliterate(&self, s: &str) -> String {
        let mut out = String::new();
        let mut rest = s;
        'outer: while !rest.is_empty() {
            for (target, c) in &self.inverse {
                if let Some(tail) = rest.strip_prefix(target.as_str()) {
                    out.push(*c);
                    rest = tail;
                    continue 'outer;
                }
            }
            let c = rest.chars().next().unwrap();
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
        out
    }

    /// Whether transliterate/detransliterate round-trips on this word.
    pub fn round_trips(&self, word: &str) -> bool {
        let (symbols, _) = self.transliterate(word);
        self.detransliterate(&symbols.concat()) == word
    }
}

/// Segmentation of a transliterated word.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslitSegmented {
    /// Units in the original script.
    pub units: Vec<String>,
    /// Characters that had no mapping and passed through unchanged.
    pub unmapped: Vec<char>,
}

/// Apply merges learned on the transliterated joint corpus: transliterate,
/// merge, detransliterate each unit. Vocabulary filtering checks the
/// detransliterated (original script) unit text.
pub fn apply_bpe_transliterated(
    word: &str,
    merges: &MergeTable,
    map: &TransliterationMap,
    allowed: Option<&UnitVocabulary>,
) -> Result<TranslitSegmented> {
    if !map.round_trips(word) {
        return Err(Error::InvalidArg(format!(
            "transliteration map does not round-trip over \"{word}\""
        )));
    }
    let (symbols, unmapped) = map.transliterate(word);
    let pred = allowed.map(|v| {
        move |unit: &str| -> bool { v.allowed(&map.detransliterate(unit)) }
    });
    let units_t = match &pred {
        Some(p) => segment_symbols(&symbols, merges, Some(p)),
        None => segment_symbols(&symbols, merges, None),
    };
    let units = units_t
        .iter()
        .map(|u| map.detransliterate(u))
        .collect();
    Ok(TranslitSegmented { units, unmapped })
}
